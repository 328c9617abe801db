#include "mcx/functionals.hpp"

#include "mcx/error.hpp"
#include "mcx/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcx {

namespace {

void require_finite(const Eigen::VectorXd& f) {
    require(f.allFinite(), ErrorKind::parameter, "function values must be finite");
}

double pi_norm2(const Eigen::VectorXd& f, const Eigen::VectorXd& pi) { return f.cwiseAbs2().dot(pi); }

// phi(u) = (1+u) log(1+u) - u, with a series near 0 where the subtraction cancels.
double phi(double u) {
    if (u <= -1.0) return 1.0;
    if (std::abs(u) >= 0.05) return (1.0 + u) * std::log1p(u) - u;
    double sum = 0.0, power = u;
    for (int k = 2; k < 20; ++k) {
        power *= -u;
        sum += power / (k * (k - 1));
    }
    return -sum;
}

// With u = f^2/||f||^2 - 1 we have sum pi u = 0, so L = ||f||^2 sum pi phi(u); this
// form has no first-order cancellation for nearly constant |f|.
double entropy_unchecked(const Eigen::VectorXd& f, const Eigen::VectorXd& pi) {
    const double norm2 = pi_norm2(f, pi);
    const double s = std::sqrt(norm2);
    double total = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x) {
        const double a = std::abs(f[x]);
        total += phi((a - s) * (a + s) / norm2) * pi[x];
    }
    return std::max(total * norm2, 0.0);
}

}  // namespace

double variance(const Eigen::VectorXd& f, const Eigen::VectorXd& pi) {
    require(f.size() == pi.size(), ErrorKind::dimension, "function and distribution lengths differ");
    require_finite(f);
    const double mean = f.dot(pi) / pi.sum();
    return (f.array() - mean).square().matrix().dot(pi);
}

double dirichlet(const Eigen::VectorXd& f, const Kernel& k) {
    require(static_cast<std::size_t>(f.size()) == k.size(), ErrorKind::dimension, "function and kernel sizes differ");
    require_finite(f);
    const auto& pi = k.stationary();
    double total = 0.0;
    for (int x = 0; x < static_cast<int>(k.size()); ++x) {
        auto cols = k.cols(x);
        auto vals = k.values(x);
        double row = 0.0;
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const double d = f[x] - f[cols[e]];
            row += d * d * vals[e];
        }
        total += row * pi[x];
    }
    return 0.5 * total;
}

double entropy_functional(const Eigen::VectorXd& f, const Eigen::VectorXd& pi) {
    require(f.size() == pi.size(), ErrorKind::dimension, "function and distribution lengths differ");
    require_finite(f);
    require(f.cwiseAbs().maxCoeff() > 0.0, ErrorKind::undefined_entropy, "entropy of the zero function is undefined");
    return entropy_unchecked(f, pi);
}

double spectral_gap(const Kernel& k) { return 1.0 - second_eigenvalue(k); }

namespace {

struct Quotient {
    const Kernel& k;

    double operator()(const Eigen::VectorXd& f) const {
        const double l = entropy_unchecked(f, k.stationary());
        if (!(l > 1e-13 * pi_norm2(f, k.stationary()))) return std::numeric_limits<double>::infinity();
        return dirichlet(f, k) / l;
    }

    // Gradient of E/L in the L^2(pi) metric at f with ||f|| = 1.
    Eigen::VectorXd gradient(const Eigen::VectorXd& f, double q) const {
        const double l = entropy_unchecked(f, k.stationary());
        const double norm2 = pi_norm2(f, k.stationary());
        Eigen::VectorXd ge = 2.0 * (f - k.apply(f));
        Eigen::VectorXd gl(f.size());
        for (Eigen::Index x = 0; x < f.size(); ++x)
            gl[x] = f[x] == 0.0 ? 0.0 : 2.0 * f[x] * std::log(f[x] * f[x] / norm2);
        return (ge - q * gl) / l;
    }
};

Eigen::VectorXd normalized(const Eigen::VectorXd& f, const Eigen::VectorXd& pi) {
    return f / std::sqrt(pi_norm2(f, pi));
}

// Approximate eigenvector for beta_1: dense when cheap, otherwise power iteration
// on the mean-zero subspace (valid for half-lazy kernels, whose spectrum is >= 0).
Eigen::VectorXd fiedler_direction(const Kernel& k) {
    const auto& pi = k.stationary();
    if (k.size() <= 400) {
        auto s = spectrum(k, true);
        return normalized(s.eigenvectors.col(1), pi);
    }
    auto rng = substream(0x5eed, 0);
    std::normal_distribution<double> g;
    Eigen::VectorXd v(static_cast<Eigen::Index>(k.size()));
    for (auto& x : v) x = g(rng);
    for (int it = 0; it < 500; ++it) {
        v.array() -= v.dot(pi);
        v = normalized(k.apply(v), pi);
    }
    v.array() -= v.dot(pi);
    return normalized(v, pi);
}

struct DescentOutcome {
    double value;
    Eigen::VectorXd f;
    bool converged;
};

DescentOutcome descend(const Quotient& quot, Eigen::VectorXd f, const Eigen::VectorXd& pi) {
    f = normalized(f, pi);
    double q = quot(f);
    if (!std::isfinite(q)) return {q, f, true};
    double eta = 0.1;
    int stalls = 0;
    for (int it = 0; it < 4000; ++it) {
        if (q == 0.0) return {q, f, true};
        Eigen::VectorXd g = quot.gradient(f, q);
        g -= (g.cwiseProduct(f).dot(pi)) * f;
        const double gn = std::sqrt(pi_norm2(g, pi));
        if (!(gn > 1e-14)) return {q, f, true};
        const Eigen::VectorXd dir = g / gn;
        bool moved = false;
        while (eta > 1e-14) {
            Eigen::VectorXd trial = normalized(f - eta * dir, pi);
            const double qt = quot(trial);
            if (qt <= q - 1e-4 * eta * gn) {
                stalls = (q - qt <= 1e-10 * std::max(q, 1e-300)) ? stalls + 1 : 0;
                f = std::move(trial);
                q = qt;
                eta = std::min(1.0, eta * 1.5);
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if (!moved || stalls >= 25) return {q, f, true};
    }
    return {q, f, false};
}

}  // namespace

LogSobolevResult log_sobolev_constant(const Kernel& k, int restarts, std::uint64_t seed) {
    require(k.reversible(), ErrorKind::unsupported_operator, "log-Sobolev minimisation requires a reversible kernel");
    require(k.size() >= 2, ErrorKind::empty_space, "log-Sobolev constant needs at least two states");
    require(k.size() <= kDenseCapacity, ErrorKind::capacity, "log-Sobolev minimisation limited to dense capacity");
    require(restarts >= 1, ErrorKind::parameter, "restarts must be positive");

    const auto& pi = k.stationary();
    const auto n = static_cast<Eigen::Index>(k.size());
    const Quotient quot{k};
    const Eigen::VectorXd v = fiedler_direction(k);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double scales[] = {0.3, -0.3, 1e-2, -1e-2, 1e-3, -1e-3};

    LogSobolevResult out;
    out.restarts = restarts;
    out.value = std::numeric_limits<double>::infinity();
    double worst = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd start(n);
        if (r < 6) {
            start = ones + scales[r] * v;
        } else if (r == 6) {
            start = v;
        } else {
            auto rng = substream(seed, static_cast<std::uint64_t>(r));
            std::normal_distribution<double> g;
            std::exponential_distribution<double> e;
            switch (r % 3) {
                case 0: for (auto& x : start) x = g(rng); break;
                case 1: for (auto& x : start) x = e(rng); break;
                default: for (auto& x : start) x = 1.0 + 0.1 * g(rng); break;
            }
        }
        auto res = descend(quot, start, pi);
        if (!std::isfinite(res.value)) continue;
        out.converged = out.converged && res.converged;
        worst = std::max(worst, res.value);
        if (res.value < out.value) {
            out.value = res.value;
            out.witness = res.f;
            out.best_restart = r;
        }
    }
    require(out.best_restart >= 0, ErrorKind::internal, "no restart produced a nonconstant function");
    out.value = quot(out.witness);
    out.dispersion = worst - out.value;
    return out;
}

MixingBound mixing_bound_ls(double gap, double alpha, double pi_x, double c) {
    require(gap > 0.0 && alpha > 0.0 && pi_x > 0.0 && pi_x < 1.0 && c > 0.0, ErrorKind::parameter,
            "mixing bound needs gap > 0, alpha > 0, 0 < pi_x < 1, c > 0");
    MixingBound b;
    b.c = c;
    b.guarantee = 2.0 * std::exp(-c);
    const double inv = 1.0 / pi_x;
    double ll = 0.0;
    if (inv > std::exp(1.0))
        ll = std::log(std::log(inv));
    else
        b.clamped = true;
    b.t = 1.0 + c / gap + ll / (4.0 * alpha);
    return b;
}

MixingBound mixing_bound_gap(double gap, double pi_x, double c) {
    require(gap > 0.0 && pi_x > 0.0 && pi_x < 1.0 && c > 0.0, ErrorKind::parameter,
            "mixing bound needs gap > 0, 0 < pi_x < 1, c > 0");
    MixingBound b;
    b.c = c;
    b.guarantee = 2.0 * std::exp(-c);
    b.t = (c / gap) * std::log(1.0 / pi_x);
    return b;
}

VarianceEntropyReport compare_variance_entropy(const Eigen::VectorXd& f, const Eigen::VectorXd& fhat,
                                               const Eigen::VectorXd& nu, const Eigen::VectorXd& mu,
                                               std::span<const int> embed) {
    require(f.size() == nu.size() && static_cast<std::size_t>(f.size()) == embed.size(), ErrorKind::dimension,
            "inner function, measure and embedding sizes differ");
    require(fhat.size() == mu.size(), ErrorKind::dimension, "outer function and measure sizes differ");
    VarianceEntropyReport r;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const int y = embed[static_cast<std::size_t>(i)];
        require(y >= 0 && y < fhat.size(), ErrorKind::dimension, "embedding index out of range");
        require(std::abs(fhat[y] - f[i]) <= 1e-12 * std::max(1.0, std::abs(f[i])), ErrorKind::extension_mismatch,
                "extension disagrees with f at inner state " + std::to_string(i));
        require(mu[y] > 0.0, ErrorKind::parameter, "outer measure vanishes on an inner state");
        r.c = std::max(r.c, nu[i] / mu[y]);
    }
    r.variance_inner = variance(f, nu);
    r.variance_outer = variance(fhat, mu);
    r.entropy_inner = f.cwiseAbs().maxCoeff() > 0.0 ? entropy_unchecked(f, nu) : 0.0;
    r.entropy_outer = fhat.cwiseAbs().maxCoeff() > 0.0 ? entropy_unchecked(fhat, mu) : 0.0;
    r.variance_slack = r.c * r.variance_outer - r.variance_inner;
    r.entropy_slack = r.c * r.entropy_outer - r.entropy_inner;
    return r;
}

}  // namespace mcx
