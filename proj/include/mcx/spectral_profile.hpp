#pragma once

#include "mcx/kernel.hpp"
#include "mcx/scheme.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mcx {

/// Largest space handled by exhaustive subset sweeps.
inline constexpr std::size_t kExhaustiveCapacity = 16;

struct LambdaSetResult {
    double value = 0.0;
    std::vector<int> witness_set;  // support of the witness, a subset of S
    Eigen::VectorXd witness_f;     // nonnegative, supported on witness_set
    double dirichlet_eigenvalue = 0.0;  // bottom eigenvalue of I - Q restricted to S, in L^2(nu)
    bool exact = true;                  // false when found by projected descent (an upper bound)
    bool full_support = false;          // S is the whole space
};

/// lambda(S) = inf over f >= 0 supported on S, f nonconstant, of E_Q(f,f) / V_nu(f).
///
/// For |S| <= kExhaustiveCapacity the infimum is computed exactly: a minimiser is
/// strictly positive on its support T, hence the bottom generalized eigenvector of
/// (L_T, diag(nu_T) - nu_T nu_T^T), and only connected T need be examined. Larger S
/// use multi-start projected descent. For S the whole space the value is the
/// spectral gap, attained by the shifted gap eigenvector.
LambdaSetResult lambda_set(std::span<const int> set, const Kernel& q, std::uint64_t seed = 0);

/// E_Q(f,f) / V_nu(f).
double rayleigh_quotient(const Eigen::VectorXd& f, const Kernel& q);

struct ProfilePoint {
    double r = 0.0;
    double lambda = 0.0;
    std::vector<int> witness_set;
    Eigen::VectorXd witness_f;
    double witness_mass = 0.0;  // nu(witness_set)
};

enum class ProfileMode { exhaustive, connected, sampled };

std::string to_string(ProfileMode mode);
ProfileMode profile_mode_from_string(const std::string& name);

struct ProfileOptions {
    ProfileMode mode = ProfileMode::exhaustive;
    int max_set_size = 10;    // connected and sampled modes
    int samples = 20000;      // sampled mode
    std::uint64_t seed = 0;
    unsigned threads = 0;     // 0: MCX_THREADS or the hardware count
};

struct Profile {
    ProfileMode mode = ProfileMode::exhaustive;
    /// True when the values are exact; connected and sampled modes skip sets and
    /// only give upper bounds on Lambda.
    bool exact = true;
    double nu_min = 0.0;
    std::size_t sets_examined = 0;
    std::vector<ProfilePoint> points;  // increasing r
};

/// Lambda(r) = inf over nu_min <= nu(S) <= r of lambda(S) at each grid value.
/// Thresholds below nu_min are rejected.
Profile profile(const Kernel& q, std::vector<double> grid, const ProfileOptions& options = {});

/// k nu_min for k = 1..N when nu is uniform, else a geometric grid from nu_min to 1.
std::vector<double> default_grid(const Kernel& q, int points = 32);

/// Lower bound on Lambda(s) read off a computed profile: the value at the smallest
/// grid point >= s. Throws range when s exceeds the grid and the grid stops below 1.
double profile_lower_bound(const Profile& p, double s);

struct MixingIntegral {
    double integral = 0.0;  // int_{4 nu_min}^{4/eps} 2 / (r Lambda(r)) dr, Lambda taken at right grid ends
    int steps = 0;          // smallest integer strictly above the integral
    double lower = 0.0;
    double upper = 0.0;
    bool certified = true;  // false when the profile is only an upper bound on Lambda
};

/// Integrates with Lambda replaced on each grid cell by its value at the right end,
/// which is smaller since Lambda is nonincreasing.
MixingIntegral mixing_integral(const Profile& p, double eps);

/// sup over nonempty S in the inner space of nu(S) / mu(S-hat), S-hat the support of
/// M 1_S. Exhaustive up to 20 inner states, else the bound C1 >= C2.
struct SupportRatio {
    double c2 = 0.0;
    std::vector<int> witness;  // inner indices
    bool exhaustive = true;
};
SupportRatio support_ratio(const ExtensionScheme& s, const Kernel& k, const Kernel& q);

struct TransferPoint {
    double r = 0.0;
    double bound = 0.0;   // (a_inverse / c1) Lambda-hat(c2 r)
    double outer = 0.0;   // the Lambda-hat value used
};

/// Lower bounds Lambda(r) >= (a_inverse / c1) Lambda-hat(c2 r) at the given r values.
std::vector<TransferPoint> profile_transfer(double a_inverse, double c1, double c2, const Profile& outer,
                                            std::span<const double> r_values);

struct TorusProfileBound {
    double full = 0.0;     // (8/(27 r) - 1) / (2 n^2) for the torus
    double holes = 0.0;    // (9/(4 n^2)) (2/(27 r) - 1) for the torus with holes
    bool full_vacuous = false;
    bool holes_vacuous = false;
};

/// Closed-form profile bounds for side n; nonpositive values are clamped to 0 and flagged.
TorusProfileBound torus_profile_bound(int side, double r);

nlohmann::json profile_to_json(const Profile& p, const StateSpace& space);

}  // namespace mcx
