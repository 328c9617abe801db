#include "mcx/spectral_profile.hpp"

#include "mcx/comparison.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/parallel.hpp"
#include "mcx/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace mcx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTol = 1e-12;

// Energy matrix L = diag(nu)(I - Q) restricted to `states`, symmetric for reversible Q.
Eigen::MatrixXd energy_block(const Kernel& q, std::span<const int> states) {
    const auto m = static_cast<Eigen::Index>(states.size());
    const auto& nu = q.stationary();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int x = states[static_cast<std::size_t>(i)];
        l(i, i) = nu[x];
        for (Eigen::Index j = 0; j < m; ++j) l(i, j) -= nu[x] * q(x, states[static_cast<std::size_t>(j)]);
    }
    return 0.5 * (l + l.transpose());
}

Eigen::MatrixXd variance_block(const Kernel& q, std::span<const int> states) {
    const auto m = static_cast<Eigen::Index>(states.size());
    Eigen::VectorXd nu(m);
    for (Eigen::Index i = 0; i < m; ++i) nu[i] = q.stationary()[states[static_cast<std::size_t>(i)]];
    Eigen::MatrixXd b = -nu * nu.transpose();
    b.diagonal() += nu;
    return b;
}

struct Face {
    double value = kInf;
    Eigen::VectorXd f;  // on the face's states, max entry 1
};

// Bottom eigenpair of the pencil on T, kept only when simple and strictly positive.
Face evaluate_face(const Kernel& q, std::span<const int> states) {
    Face face;
    const Eigen::MatrixXd l = energy_block(q, states);
    const Eigen::MatrixXd b = variance_block(q, states);
    if (states.size() == 1) {
        face.value = l(0, 0) / b(0, 0);
        face.f = Eigen::VectorXd::Ones(1);
        return face;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(l, b);
    if (ges.info() != Eigen::Success) return face;
    const auto& ev = ges.eigenvalues();
    if (ev[1] - ev[0] <= 1e-10 * std::max(1.0, std::abs(ev[0]))) return face;
    Eigen::VectorXd v = ges.eigenvectors().col(0);
    if (v.sum() < 0.0) v = -v;
    const double top = v.maxCoeff();
    if (!(top > 0.0) || v.minCoeff() <= 1e-9 * top) return face;
    face.value = ev[0];
    face.f = v / top;
    return face;
}

std::vector<std::uint64_t> neighbour_masks(const Kernel& q) {
    const int n = static_cast<int>(q.size());
    std::vector<std::uint64_t> nb(static_cast<std::size_t>(n), 0);
    for (int x = 0; x < n; ++x) {
        auto cols = q.cols(x);
        auto vals = q.values(x);
        for (std::size_t e = 0; e < cols.size(); ++e)
            if (cols[e] != x && vals[e] > 0.0) nb[static_cast<std::size_t>(x)] |= std::uint64_t{1} << cols[e];
    }
    return nb;
}

bool connected_mask(std::uint64_t mask, std::span<const std::uint64_t> nb) {
    std::uint64_t reached = mask & (~mask + 1);
    std::uint64_t frontier = reached;
    while (frontier) {
        std::uint64_t next = 0;
        for (std::uint64_t f = frontier; f; f &= f - 1) next |= nb[static_cast<std::size_t>(std::countr_zero(f))];
        next &= mask & ~reached;
        reached |= next;
        frontier = next;
    }
    return reached == mask;
}

std::vector<int> mask_states(std::uint64_t mask) {
    std::vector<int> out;
    for (; mask; mask &= mask - 1) out.push_back(std::countr_zero(mask));
    return out;
}

double mask_mass(std::uint64_t mask, const Eigen::VectorXd& nu) {
    double m = 0.0;
    for (; mask; mask &= mask - 1) m += nu[std::countr_zero(mask)];
    return m;
}

double dirichlet_eigenvalue(const Kernel& q, std::span<const int> states) {
    const Eigen::MatrixXd l = energy_block(q, states);
    Eigen::VectorXd s(l.rows());
    for (Eigen::Index i = 0; i < l.rows(); ++i) s[i] = 1.0 / std::sqrt(q.stationary()[states[static_cast<std::size_t>(i)]]);
    const Eigen::MatrixXd sym = s.asDiagonal() * l * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

// Projected descent on the quotient over the nonnegative cone on `states`.
LambdaSetResult descend(const Kernel& q, std::span<const int> states, std::uint64_t seed) {
    const Eigen::MatrixXd l = energy_block(q, states);
    const Eigen::MatrixXd b = variance_block(q, states);
    const auto m = l.rows();
    auto quotient = [&](const Eigen::VectorXd& f) {
        const double v = f.dot(b * f);
        return v > 0.0 ? f.dot(l * f) / v : kInf;
    };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    std::vector<Eigen::VectorXd> starts{es.eigenvectors().col(0).cwiseAbs(), Eigen::VectorXd::Ones(m)};
    auto rng = substream(seed, 0x5e7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int r = 0; r < 14; ++r) {
        Eigen::VectorXd f(m);
        for (Eigen::Index i = 0; i < m; ++i) f[i] = unif(rng);
        starts.push_back(f);
    }
    double best = kInf;
    Eigen::VectorXd best_f;
    for (auto f : starts) {
        f /= f.maxCoeff();
        double value = quotient(f);
        double step = 1.0;
        for (int it = 0; it < 4000 && step > 1e-14; ++it) {
            const double v = f.dot(b * f);
            const Eigen::VectorXd grad = (2.0 / v) * (l * f - value * (b * f));
            Eigen::VectorXd trial = (f - step * grad).cwiseMax(0.0);
            if (trial.maxCoeff() <= 0.0) {
                step *= 0.5;
                continue;
            }
            trial /= trial.maxCoeff();
            const double tv = quotient(trial);
            if (tv < value) {
                const bool stalled = value - tv < 1e-15 * std::max(1.0, value);
                f = trial;
                value = tv;
                step *= 1.5;
                if (stalled) break;
            } else {
                step *= 0.5;
            }
        }
        if (value < best) {
            best = value;
            best_f = f;
        }
    }
    LambdaSetResult out;
    out.value = best;
    out.exact = false;
    out.witness_f = best_f;
    return out;
}

void check_set(std::span<const int> set, const Kernel& q) {
    require(!set.empty(), ErrorKind::parameter, "lambda_set needs a nonempty set");
    std::vector<int> sorted(set.begin(), set.end());
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::parameter,
            "set contains repeated states");
    require(sorted.front() >= 0 && sorted.back() < static_cast<int>(q.size()), ErrorKind::range,
            "set contains a state outside the space");
}

void require_reversible(const Kernel& q) {
    require(q.reversible(), ErrorKind::unsupported_operator, "spectral profile needs a reversible kernel");
}

}  // namespace

double rayleigh_quotient(const Eigen::VectorXd& f, const Kernel& q) {
    const double v = variance(f, q.stationary());
    require(v > 0.0, ErrorKind::parameter, "quotient of a constant function");
    return dirichlet(f, q) / v;
}

LambdaSetResult lambda_set(std::span<const int> set, const Kernel& q, std::uint64_t seed) {
    require_reversible(q);
    check_set(set, q);
    std::vector<int> states(set.begin(), set.end());
    std::sort(states.begin(), states.end());
    const Eigen::Index n = static_cast<Eigen::Index>(q.size());
    LambdaSetResult out;

    if (states.size() == q.size()) {
        auto spec = spectrum(q, true);
        require(spec.size() >= 2, ErrorKind::degenerate_graph, "space has a single state");
        Eigen::VectorXd phi = spec.eigenvectors.col(1);
        phi.array() -= phi.minCoeff();
        out.full_support = true;
        out.witness_f = phi / phi.maxCoeff();
        out.value = rayleigh_quotient(out.witness_f, q);
        for (int x = 0; x < static_cast<int>(n); ++x)
            if (out.witness_f[x] > 0.0) out.witness_set.push_back(x);
        out.dirichlet_eigenvalue = 0.0;
        return out;
    }

    out.dirichlet_eigenvalue = dirichlet_eigenvalue(q, states);
    Eigen::VectorXd local;
    if (states.size() <= kExhaustiveCapacity) {
        // Subsets of S are indexed by bitmasks over positions in `states`.
        const auto m = states.size();
        std::vector<std::uint64_t> nb(m, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j && q(states[i], states[j]) > 0.0) nb[i] |= std::uint64_t{1} << j;
        out.value = kInf;
        std::uint64_t best_mask = 0;
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
            if (!connected_mask(mask, nb)) continue;
            std::vector<int> face_states;
            for (int pos : mask_states(mask)) face_states.push_back(states[static_cast<std::size_t>(pos)]);
            Face face = evaluate_face(q, face_states);
            if (face.value < out.value) {
                out.value = face.value;
                best_mask = mask;
                local = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
                auto pos = mask_states(mask);
                for (std::size_t i = 0; i < pos.size(); ++i) local[pos[i]] = face.f[static_cast<Eigen::Index>(i)];
            }
        }
        require(best_mask != 0, ErrorKind::internal, "no admissible face found");
    } else {
        auto d = descend(q, states, seed);
        out.value = d.value;
        out.exact = false;
        local = d.witness_f;
    }
    out.witness_f = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.witness_f[states[i]] = local[static_cast<Eigen::Index>(i)];
        if (local[static_cast<Eigen::Index>(i)] > 0.0) out.witness_set.push_back(states[i]);
    }
    return out;
}

std::string to_string(ProfileMode mode) {
    switch (mode) {
        case ProfileMode::exhaustive: return "exhaustive";
        case ProfileMode::connected: return "connected";
        case ProfileMode::sampled: return "sampled";
    }
    return "unknown";
}

ProfileMode profile_mode_from_string(const std::string& name) {
    if (name == "exhaustive") return ProfileMode::exhaustive;
    if (name == "connected") return ProfileMode::connected;
    if (name == "sampled") return ProfileMode::sampled;
    fail(ErrorKind::parameter, "unknown profile mode '" + name + "'");
}

std::vector<double> default_grid(const Kernel& q, int points) {
    const auto& nu = q.stationary();
    const double lo = nu.minCoeff(), hi = nu.maxCoeff();
    std::vector<double> grid;
    if (hi - lo <= kStructuralTol) {
        for (std::size_t k = 1; k <= q.size(); ++k) grid.push_back(static_cast<double>(k) * lo);
        grid.back() = 1.0;
        return grid;
    }
    require(points >= 2, ErrorKind::parameter, "grid needs at least two points");
    for (int i = 0; i < points; ++i) grid.push_back(lo * std::pow(1.0 / lo, static_cast<double>(i) / (points - 1)));
    grid.back() = 1.0;
    return grid;
}

Profile profile(const Kernel& q, std::vector<double> grid, const ProfileOptions& options) {
    require_reversible(q);
    require(!grid.empty(), ErrorKind::parameter, "profile grid is empty");
    const std::size_t n = q.size();
    const auto& nu = q.stationary();
    Profile out;
    out.mode = options.mode;
    out.exact = options.mode == ProfileMode::exhaustive;
    out.nu_min = nu.minCoeff();
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    require(grid.front() >= out.nu_min - kMassTol, ErrorKind::range, "grid threshold below nu_min");
    require(n >= 2, ErrorKind::degenerate_graph, "profile needs at least two states");

    const auto nb = n <= 64 ? neighbour_masks(q) : std::vector<std::uint64_t>{};
    std::vector<std::uint64_t> candidates;
    if (options.mode == ProfileMode::exhaustive) {
        require(n <= kExhaustiveCapacity, ErrorKind::mode_required,
                "exhaustive profile is limited to " + std::to_string(kExhaustiveCapacity) +
                    " states; use mode connected or sampled");
        const std::uint64_t full = (std::uint64_t{1} << n) - 1;
        for (std::uint64_t mask = 1; mask < full; ++mask) candidates.push_back(mask);
    } else {
        require(n <= 64, ErrorKind::capacity, "connected and sampled profiles are limited to 64 states");
        require(options.max_set_size >= 1, ErrorKind::parameter, "max_set_size must be positive");
        const double r_max = grid.back();
        std::unordered_set<std::uint64_t> seen;
        std::vector<std::uint64_t> layer;
        for (std::size_t x = 0; x < n; ++x) {
            seen.insert(std::uint64_t{1} << x);
            layer.push_back(std::uint64_t{1} << x);
        }
        if (options.mode == ProfileMode::connected) {
            for (int size = 2; size <= options.max_set_size && !layer.empty(); ++size) {
                std::vector<std::uint64_t> next;
                for (std::uint64_t mask : layer) {
                    std::uint64_t boundary = 0;
                    for (std::uint64_t f = mask; f; f &= f - 1) boundary |= nb[static_cast<std::size_t>(std::countr_zero(f))];
                    boundary &= ~mask;
                    for (; boundary; boundary &= boundary - 1) {
                        const std::uint64_t grown = mask | (boundary & (~boundary + 1));
                        if (std::popcount(grown) == static_cast<int>(n)) continue;
                        if (mask_mass(grown, nu) > r_max + kMassTol) continue;
                        if (seen.insert(grown).second) next.push_back(grown);
                    }
                }
                layer = std::move(next);
            }
        } else {
            auto rng = substream(options.seed, 0x9f0f);
            std::uniform_int_distribution<std::size_t> pick_state(0, n - 1);
            std::uniform_int_distribution<int> pick_size(1, options.max_set_size);
            for (int s = 0; s < options.samples; ++s) {
                std::uint64_t mask = std::uint64_t{1} << pick_state(rng);
                const int target = pick_size(rng);
                while (std::popcount(mask) < target) {
                    std::uint64_t boundary = 0;
                    for (std::uint64_t f = mask; f; f &= f - 1) boundary |= nb[static_cast<std::size_t>(std::countr_zero(f))];
                    boundary &= ~mask;
                    const int options_left = std::popcount(boundary);
                    if (options_left == 0) break;
                    int k = std::uniform_int_distribution<int>(0, options_left - 1)(rng);
                    while (k-- > 0) boundary &= boundary - 1;
                    const std::uint64_t grown = mask | (boundary & (~boundary + 1));
                    if (std::popcount(grown) == static_cast<int>(n) || mask_mass(grown, nu) > r_max + kMassTol) break;
                    mask = grown;
                }
                seen.insert(mask);
            }
        }
        candidates.assign(seen.begin(), seen.end());
        std::sort(candidates.begin(), candidates.end());
    }

    std::vector<double> value(candidates.size(), kInf);
    std::vector<double> mass(candidates.size(), 0.0);
    parallel_blocks(
        candidates.size(),
        [&](unsigned, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const std::uint64_t mask = candidates[i];
                mass[i] = mask_mass(mask, nu);
                if (!connected_mask(mask, nb)) continue;
                value[i] = evaluate_face(q, mask_states(mask)).value;
            }
        },
        options.threads);
    out.sets_examined = candidates.size();

    // Sets sorted by mass give Lambda at every threshold with one running minimum.
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] < mass[b]; });
    std::size_t cursor = 0;
    double running = kInf;
    std::size_t arg = candidates.size();
    for (double r : grid) {
        while (cursor < order.size() && mass[order[cursor]] <= r + kMassTol) {
            const std::size_t i = order[cursor++];
            if (value[i] < running || (value[i] == running && arg < candidates.size() && candidates[i] < candidates[arg])) {
                running = value[i];
                arg = i;
            }
        }
        require(arg < candidates.size(), ErrorKind::range, "no admissible set below threshold " + std::to_string(r));
        ProfilePoint pt;
        pt.r = r;
        pt.lambda = running;
        pt.witness_set = mask_states(candidates[arg]);
        pt.witness_mass = mass[arg];
        Face face = evaluate_face(q, pt.witness_set);
        pt.witness_f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < pt.witness_set.size(); ++i)
            pt.witness_f[pt.witness_set[i]] = face.f[static_cast<Eigen::Index>(i)];
        out.points.push_back(std::move(pt));
    }
    return out;
}

double profile_lower_bound(const Profile& p, double s) {
    require(!p.points.empty(), ErrorKind::parameter, "empty profile");
    for (const auto& pt : p.points)
        if (pt.r >= s - kMassTol) return pt.lambda;
    require(p.points.back().r >= 1.0 - kMassTol, ErrorKind::range,
            "threshold " + std::to_string(s) + " lies beyond the profile grid");
    return p.points.back().lambda;
}

MixingIntegral mixing_integral(const Profile& p, double eps) {
    require(eps > 0.0, ErrorKind::parameter, "eps must be positive");
    require(!p.points.empty(), ErrorKind::parameter, "empty profile");
    MixingIntegral out;
    out.lower = 4.0 * p.nu_min;
    out.upper = 4.0 / eps;
    out.certified = p.exact;
    require(p.points.back().r >= std::min(out.upper, 1.0) - kMassTol, ErrorKind::range,
            "profile grid does not reach min(4/eps, 1)");
    if (out.lower < out.upper) {
        std::vector<double> cuts{out.lower};
        for (const auto& pt : p.points)
            if (pt.r > out.lower && pt.r < out.upper) cuts.push_back(pt.r);
        cuts.push_back(out.upper);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lam = profile_lower_bound(p, cuts[i + 1]);
            require(lam > 0.0 && std::isfinite(lam), ErrorKind::degenerate_graph,
                    "profile vanishes on the integration range");
            out.integral += 2.0 * std::log(cuts[i + 1] / cuts[i]) / lam;
        }
    }
    out.steps = static_cast<int>(std::floor(out.integral)) + 1;
    return out;
}

SupportRatio support_ratio(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    const std::size_t inner = s.inner().size();
    const std::size_t outer = s.outer().size();
    require(k.size() == outer && q.size() == inner, ErrorKind::dimension, "kernel sizes do not match the scheme");
    SupportRatio out;
    if (inner > 20) {
        out.c2 = distribution_ratio(s, k, q);
        out.exhaustive = false;
        return out;
    }
    const auto& nu = q.stationary();
    const auto& mu = k.stationary();
    std::vector<std::pair<std::uint32_t, double>> outside;  // inner support mask of P_z, mu(z)
    for (std::size_t z = 0; z < outer; ++z) {
        if (s.is_inner(static_cast<int>(z))) continue;
        std::uint32_t mask = 0;
        for (const auto& e : s.measure(static_cast<int>(z)))
            if (e.weight > Rational(0)) mask |= 1u << e.state;
        outside.emplace_back(mask, mu[static_cast<Eigen::Index>(z)]);
    }
    for (std::uint32_t set = 1; set < (1u << inner); ++set) {
        double num = 0.0, den = 0.0;
        for (std::uint32_t f = set; f; f &= f - 1) {
            const int i = std::countr_zero(f);
            num += nu[i];
            den += mu[s.embed(i)];
        }
        for (const auto& [mask, w] : outside)
            if (mask & set) den += w;
        if (num / den > out.c2) {
            out.c2 = num / den;
            out.witness.clear();
            for (std::uint32_t f = set; f; f &= f - 1) out.witness.push_back(std::countr_zero(f));
        }
    }
    return out;
}

std::vector<TransferPoint> profile_transfer(double a_inverse, double c1, double c2, const Profile& outer,
                                            std::span<const double> r_values) {
    require(a_inverse > 0.0 && c1 > 0.0 && c2 > 0.0, ErrorKind::parameter, "transfer constants must be positive");
    std::vector<TransferPoint> out;
    for (double r : r_values) {
        TransferPoint t;
        t.r = r;
        t.outer = profile_lower_bound(outer, c2 * r);
        t.bound = a_inverse / c1 * t.outer;
        out.push_back(t);
    }
    return out;
}

TorusProfileBound torus_profile_bound(int side, double r) {
    require(side >= 1, ErrorKind::parameter, "side must be positive");
    require(r > 0.0, ErrorKind::parameter, "r must be positive");
    const double n2 = static_cast<double>(side) * side;
    TorusProfileBound out;
    out.full = (8.0 / (27.0 * r) - 1.0) / (2.0 * n2);
    out.holes = 9.0 / (4.0 * n2) * (2.0 / (27.0 * r) - 1.0);
    if (out.full <= 0.0) {
        out.full = 0.0;
        out.full_vacuous = true;
    }
    if (out.holes <= 0.0) {
        out.holes = 0.0;
        out.holes_vacuous = true;
    }
    return out;
}

nlohmann::json profile_to_json(const Profile& p, const StateSpace& space) {
    nlohmann::json doc;
    doc["mode"] = to_string(p.mode);
    doc["exact"] = p.exact;
    doc["nu_min"] = p.nu_min;
    doc["sets_examined"] = p.sets_examined;
    auto& pts = doc["points"] = nlohmann::json::array();
    for (const auto& pt : p.points) {
        nlohmann::json set = nlohmann::json::array();
        for (int x : pt.witness_set) set.push_back(space.label(static_cast<std::size_t>(x)));
        pts.push_back({{"r", pt.r}, {"lambda", pt.lambda}, {"witness_mass", pt.witness_mass}, {"witness_set", set}});
    }
    return doc;
}

}  // namespace mcx
