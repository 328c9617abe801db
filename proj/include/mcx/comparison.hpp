#pragma once

#include "mcx/kernel.hpp"
#include "mcx/scheme.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace mcx {

struct EdgeLoad {
    int q = -1;
    int r = -1;
    double terms[3] = {0.0, 0.0, 0.0};  // both ends inside / one outside / both outside
    double capacity = 0.0;              // Q(q,r) nu(q)
    double ratio = 0.0;

    double load() const { return terms[0] + terms[1] + terms[2]; }
};

struct ComparisonReport {
    FormMode mode = FormMode::dirichlet;
    double a_const = 0.0;
    double c1 = 0.0;
    EdgeLoad worst;
    std::size_t edges_loaded = 0;
    std::size_t pairs_used = 0;
    /// Per ordered Q-edge ratio load/capacity, indexed like Q's CSR entries.
    std::vector<double> edge_ratio;
};

/// sup_{y in inner} nu(y) / mu(y).
double distribution_ratio(const ExtensionScheme& s, const Kernel& k, const Kernel& q);

/// Congestion constant of the general comparison: for every ordered
/// Q-edge, sum over pairs (a,b) of c(a,b) * sum_{gamma} F[gamma] k[gamma] t_e(gamma),
/// divided by Q(q,r) nu(q). Handles both modes; throws incomplete_flow when a
/// pair with c(a,b) > 0 has no flow.
ComparisonReport congestion_general(const ExtensionScheme& s, const Kernel& k, const Kernel& q);

/// The F-form variant; requires the scheme to be in f_form mode with odd paths.
ComparisonReport congestion_fform(const ExtensionScheme& s, const Kernel& k, const Kernel& q);

struct SrwCongestion {
    double a_const = 0.0;
    double prefactor = 0.0;      // (N - m) / N
    Rational worst_bracket{0};   // exact sum at the worst edge
    int q = -1;
    int r = -1;
    /// Per ordered Q-edge bracket (exact), indexed like Q's CSR entries.
    std::vector<Rational> bracket;
};

/// Specialised evaluation for K the half-lazy SRW on a regular graph and Q its
/// Metropolized restriction: A = ((N - m)/N) * max_e bracket(e), with the
/// bracket accumulated in exact rationals.
SrwCongestion congestion_srw(const ExtensionScheme& s, const Kernel& k, const Kernel& q);

/// F_P(f,f) = 1/2 sum |f(x) + f(y)|^2 P(x,y) pi(x).
double f_form(const Eigen::VectorXd& f, const Kernel& k);

struct TransferBounds {
    std::vector<double> gap_bounds;   // lower bounds on 1 - beta_i(Q), i < |inner|
    std::vector<double> slack;        // exact minus bound, when Q's spectrum is supplied
    double min_slack = 0.0;
};

/// 1 - beta_i(Q) >= (1 - beta_i(K)) / (c1 a_const) for i < inner_size.
TransferBounds spectrum_transfer(double a_const, double c1, const Spectrum& k_spec, std::size_t inner_size,
                                 const Spectrum* q_spec = nullptr);

double log_sobolev_transfer(double alpha_k, double a_const, double c1);

struct SmallestEigenBound {
    double bound = 0.0;          // -1 + (1 + beta_min(K)) / (c a)
    double printed_form = 0.0;   // -1 + (c / a)(1 + beta_min(K))
};

SmallestEigenBound smallest_eigen_bound(double a_const, double c, double beta_min_k);

struct MasterCheck {
    std::size_t trials = 0;
    double min_slack = 0.0;      // min over trials of (A * form_Q - form_K(fhat)) / max(1, form_Q)
    double worst_ratio = 0.0;    // max form_K(fhat) / form_Q
    bool passed = false;
};

/// Checks form_K(extend(f)) <= A form_Q(f) + tol max(1, form_Q) on `samples`
/// Gaussian functions plus every coordinate indicator.
MasterCheck check_master_inequality(const ExtensionScheme& s, const Kernel& k, const Kernel& q, double a_const,
                                    int samples, std::uint64_t seed, double tol = 1e-10);

nlohmann::json report_to_json(const ComparisonReport& r, const ExtensionScheme& s, const Kernel& q);

}  // namespace mcx
