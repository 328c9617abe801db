#pragma once

#include "mcx/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>

namespace mcx {

/// V_pi(f) = 1/2 sum_{x,y} |f(x) - f(y)|^2 pi(x) pi(y).
double variance(const Eigen::VectorXd& f, const Eigen::VectorXd& pi);

/// E_P(f,f) = 1/2 sum_{x,y} |f(x) - f(y)|^2 P(x,y) pi(x).
double dirichlet(const Eigen::VectorXd& f, const Kernel& k);

/// L_pi(f) = sum_x f(x)^2 log(f(x)^2 / ||f||^2_{2,pi}) pi(x).
double entropy_functional(const Eigen::VectorXd& f, const Eigen::VectorXd& pi);

/// 1 - beta_1.
double spectral_gap(const Kernel& k);

struct LogSobolevResult {
    double value = 0.0;            // E(w,w) / L(w) for the witness: an upper bound on alpha
    Eigen::VectorXd witness;
    int restarts = 0;
    int best_restart = -1;
    double dispersion = 0.0;       // spread of the per-restart minima
    bool converged = true;         // false if some restart hit the iteration cap
    std::string source = "multi-start projected descent (upper bound)";
};

/// Minimises E/L on the unit sphere of L^2(pi). Restart r is seeded from (seed, r)
/// and the first restarts are deterministic near-constant and Fiedler-type starts,
/// so the value is nonincreasing in `restarts`.
LogSobolevResult log_sobolev_constant(const Kernel& k, int restarts = 64, std::uint64_t seed = 0);

struct MixingBound {
    double t = 0.0;
    double c = 0.0;
    double guarantee = 0.0;  // 2 e^{-c}
    bool clamped = false;    // log log term dropped because 1/pi_x <= e
};

/// t = 1 + c/gap + log log(1/pi_x) / (4 alpha).
MixingBound mixing_bound_ls(double gap, double alpha, double pi_x, double c);

/// t = (c/gap) log(1/pi_x).
MixingBound mixing_bound_gap(double gap, double pi_x, double c);

struct VarianceEntropyReport {
    double c = 0.0;  // sup_{y in inner} nu(y)/mu(y)
    double variance_inner = 0.0;
    double variance_outer = 0.0;
    double entropy_inner = 0.0;
    double entropy_outer = 0.0;
    double variance_slack = 0.0;  // c V_mu(fhat) - V_nu(f)
    double entropy_slack = 0.0;   // c L_mu(fhat) - L_nu(f)
};

/// Checks V_nu(f) <= C V_mu(fhat) and L_nu(f) <= C L_mu(fhat), where inner state i
/// sits at outer index embed[i] and fhat must agree with f there.
VarianceEntropyReport compare_variance_entropy(const Eigen::VectorXd& f, const Eigen::VectorXd& fhat,
                                               const Eigen::VectorXd& nu, const Eigen::VectorXd& mu,
                                               std::span<const int> embed);

}  // namespace mcx
