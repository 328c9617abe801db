#include "mcx/comparison.hpp"

#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcx {

double distribution_ratio(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    double c = 0.0;
    for (int i = 0; i < static_cast<int>(s.inner().size()); ++i)
        c = std::max(c, q.stationary()[i] / k.stationary()[s.embed(i)]);
    return c;
}

namespace {

void check_spaces(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    require(k.space().labels() == s.outer().labels(), ErrorKind::dimension, "outer kernel space differs from the scheme");
    require(q.space().labels() == s.inner().labels(), ErrorKind::dimension, "inner kernel space differs from the scheme");
    require(s.flows().finalized(), ErrorKind::internal, "flows must be finalized");
}

std::string pair_label(const ExtensionScheme& s, int a, int b) {
    return s.inner().label(static_cast<std::size_t>(a)) + "|" + s.inner().label(static_cast<std::size_t>(b));
}

}  // namespace

ComparisonReport congestion_general(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    check_spaces(s, k, q);
    const auto& flows = s.flows();
    const std::size_t edges = q.nonzeros();
    std::vector<std::array<double, 3>> load(edges, {0.0, 0.0, 0.0});
    std::vector<char> used(flows.pair_count(), 0);

    // Steps of each stored path resolved to Q's CSR indices once.
    std::vector<std::size_t> step_ptr(flows.path_count() + 1, 0);
    std::vector<std::uint32_t> step_edge;
    for (std::size_t i = 0; i < flows.path_count(); ++i) {
        auto path = flows.path(i);
        for (std::size_t j = 0; j + 1 < path.states.size(); ++j) {
            long e = q.entry_index(path.states[j], path.states[j + 1]);
            require(e >= 0, ErrorKind::invalid_scheme,
                    "flow path for " + pair_label(s, path.states.front(), path.states.back()) + " leaves the edges of Q");
            step_edge.push_back(static_cast<std::uint32_t>(e));
        }
        step_ptr[i + 1] = step_edge.size();
    }
    std::vector<double> path_factor(flows.path_count());
    for (std::size_t i = 0; i < flows.path_count(); ++i) {
        auto path = flows.path(i);
        path_factor[i] = to_double(path.weight) * static_cast<double>(path.steps());
    }

    for_each_contribution(s, k, [&](const PairContribution& c) {
        if (c.coefficient == 0.0) return;
        long p = flows.find(c.a, c.b);
        if (p < 0) fail(ErrorKind::incomplete_flow, "no flow for required pair " + pair_label(s, c.a, c.b));
        used[static_cast<std::size_t>(p)] = 1;
        for (std::size_t i = flows.path_begin(static_cast<std::size_t>(p)); i < flows.path_end(static_cast<std::size_t>(p)); ++i) {
            const double w = c.coefficient * path_factor[i];
            for (std::size_t j = step_ptr[i]; j < step_ptr[i + 1]; ++j) load[step_edge[j]][static_cast<std::size_t>(c.term)] += w;
        }
    });

    ComparisonReport r;
    r.mode = s.mode();
    r.c1 = distribution_ratio(s, k, q);
    r.pairs_used = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
    r.edge_ratio.assign(edges, 0.0);
    const auto& nu = q.stationary();
    for (int x = 0; x < static_cast<int>(q.size()); ++x) {
        auto cols = q.cols(x);
        auto vals = q.values(x);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const std::size_t e = q.offset(x) + j;
            const double l = load[e][0] + load[e][1] + load[e][2];
            if (l == 0.0) continue;
            ++r.edges_loaded;
            const double cap = vals[j] * nu[x];
            r.edge_ratio[e] = l / cap;
            if (r.edge_ratio[e] > r.a_const) {
                r.a_const = r.edge_ratio[e];
                r.worst.q = x;
                r.worst.r = cols[j];
                std::copy(load[e].begin(), load[e].end(), r.worst.terms);
                r.worst.capacity = cap;
                r.worst.ratio = r.edge_ratio[e];
            }
        }
    }
    return r;
}

ComparisonReport congestion_fform(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    require(s.mode() == FormMode::f_form, ErrorKind::mode_violation, "scheme is not in F-form mode");
    const auto& flows = s.flows();
    for (std::size_t i = 0; i < flows.path_count(); ++i) {
        auto path = flows.path(i);
        if (path.steps() % 2 == 0)
            fail(ErrorKind::mode_violation, "even-length flow path for " + pair_label(s, path.states.front(), path.states.back()));
    }
    return congestion_general(s, k, q);
}

SrwCongestion congestion_srw(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    check_spaces(s, k, q);
    require(s.mode() == FormMode::dirichlet, ErrorKind::mode_violation, "SRW congestion is a Dirichlet-form quantity");
    const auto n_outer = k.size();
    const auto n_inner = q.size();
    // structure: half-lazy SRW on a regular graph, uniform laws, Metropolis restriction
    double step = -1.0;
    for (int x = 0; x < static_cast<int>(n_outer); ++x) {
        require(std::abs(k(x, x) - 0.5) <= kStructuralTol, ErrorKind::unsupported_operator, "outer chain is not half-lazy SRW");
        require(std::abs(k.stationary()[x] - 1.0 / static_cast<double>(n_outer)) <= kStructuralTol,
                ErrorKind::unsupported_operator, "outer chain is not uniform");
        for (int y : k.cols(x)) {
            if (y == x) continue;
            if (step < 0) step = k(x, y);
            require(std::abs(k(x, y) - step) <= kStructuralTol, ErrorKind::unsupported_operator,
                    "outer chain is not a simple random walk on a regular graph");
        }
    }
    for (int a = 0; a < static_cast<int>(n_inner); ++a) {
        require(std::abs(q.stationary()[a] - 1.0 / static_cast<double>(n_inner)) <= kStructuralTol,
                ErrorKind::unsupported_operator, "inner chain is not uniform");
        for (int b : q.cols(a))
            if (b != a)
                require(std::abs(q(a, b) - step) <= kStructuralTol, ErrorKind::unsupported_operator,
                        "inner chain is not the Metropolized restriction");
    }

    const auto& flows = s.flows();
    std::vector<Rational> bracket(q.nonzeros(), Rational(0));
    auto route = [&](int a, int b, const Rational& coef) {
        if (a == b) return;
        long p = flows.find(a, b);
        if (p < 0) fail(ErrorKind::incomplete_flow, "no flow for required pair " + pair_label(s, a, b));
        for (std::size_t i = flows.path_begin(static_cast<std::size_t>(p)); i < flows.path_end(static_cast<std::size_t>(p)); ++i) {
            auto path = flows.path(i);
            const Rational w = coef * path.weight * Rational(static_cast<std::int64_t>(path.steps()));
            for (std::size_t j = 0; j + 1 < path.states.size(); ++j) {
                long e = q.entry_index(path.states[j], path.states[j + 1]);
                require(e >= 0, ErrorKind::invalid_scheme, "flow path leaves the edges of Q");
                bracket[static_cast<std::size_t>(e)] += w;
            }
        }
    };
    for (int a = 0; a < static_cast<int>(n_inner); ++a) {
        const int xa = s.embed(a);
        for (int y : k.cols(xa)) {
            if (y == xa) continue;
            if (s.is_inner(y)) {
                route(a, s.inner_of(y), Rational(1));
            } else {
                for (const auto& m : s.measure(y)) route(a, m.state, Rational(2) * m.weight);
            }
        }
    }
    for (int x = 0; x < static_cast<int>(n_outer); ++x) {
        if (s.is_inner(x)) continue;
        for (int y : k.cols(x)) {
            if (y == x || s.is_inner(y)) continue;
            for (const auto& c : s.coupling(x, y)) route(c.a, c.b, c.weight);
        }
    }

    SrwCongestion out;
    out.prefactor = static_cast<double>(n_inner) / static_cast<double>(n_outer);
    for (int a = 0; a < static_cast<int>(n_inner); ++a) {
        auto cols = q.cols(a);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto& b = bracket[q.offset(a) + j];
            if (out.q < 0 || b > out.worst_bracket) {
                out.worst_bracket = b;
                out.q = a;
                out.r = cols[j];
            }
        }
    }
    out.a_const = out.prefactor * to_double(out.worst_bracket);
    out.bracket = std::move(bracket);
    return out;
}

double f_form(const Eigen::VectorXd& f, const Kernel& k) {
    require(static_cast<std::size_t>(f.size()) == k.size(), ErrorKind::dimension, "function and kernel sizes differ");
    const auto& pi = k.stationary();
    double total = 0.0;
    for (int x = 0; x < static_cast<int>(k.size()); ++x) {
        auto cols = k.cols(x);
        auto vals = k.values(x);
        double row = 0.0;
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const double s = f[x] + f[cols[e]];
            row += s * s * vals[e];
        }
        total += row * pi[x];
    }
    return 0.5 * total;
}

TransferBounds spectrum_transfer(double a_const, double c1, const Spectrum& k_spec, std::size_t inner_size,
                                 const Spectrum* q_spec) {
    require(a_const > 0.0 && c1 > 0.0, ErrorKind::parameter, "transfer needs positive constants");
    require(inner_size <= k_spec.size(), ErrorKind::range, "inner space larger than the outer spectrum");
    if (q_spec) require(q_spec->size() == inner_size, ErrorKind::range, "inner spectrum has the wrong length");
    TransferBounds t;
    t.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner_size; ++i) {
        t.gap_bounds.push_back((1.0 - k_spec.eigenvalues[i]) / (c1 * a_const));
        if (q_spec) {
            t.slack.push_back((1.0 - q_spec->eigenvalues[i]) - t.gap_bounds.back());
            t.min_slack = std::min(t.min_slack, t.slack.back());
        }
    }
    if (!q_spec) t.min_slack = 0.0;
    return t;
}

double log_sobolev_transfer(double alpha_k, double a_const, double c1) {
    require(a_const > 0.0 && c1 > 0.0, ErrorKind::parameter, "transfer needs positive constants");
    return alpha_k / (c1 * a_const);
}

SmallestEigenBound smallest_eigen_bound(double a_const, double c, double beta_min_k) {
    require(a_const > 0.0 && c > 0.0, ErrorKind::parameter, "bound needs positive constants");
    return {-1.0 + (1.0 + beta_min_k) / (c * a_const), -1.0 + (c / a_const) * (1.0 + beta_min_k)};
}

MasterCheck check_master_inequality(const ExtensionScheme& s, const Kernel& k, const Kernel& q, double a_const,
                                    int samples, std::uint64_t seed, double tol) {
    const bool energy = s.mode() == FormMode::dirichlet;
    auto form = [energy](const Eigen::VectorXd& f, const Kernel& p) { return energy ? dirichlet(f, p) : f_form(f, p); };
    MasterCheck m;
    m.min_slack = std::numeric_limits<double>::infinity();
    auto trial = [&](const Eigen::VectorXd& f) {
        const double fq = form(f, q);
        const double fk = form(extend(f, s), k);
        m.min_slack = std::min(m.min_slack, (a_const * fq - fk) / std::max(1.0, fq));
        if (fq > 0.0) m.worst_ratio = std::max(m.worst_ratio, fk / fq);
        ++m.trials;
    };
    const auto n = static_cast<Eigen::Index>(q.size());
    auto rng = substream(seed, 0x6d6173746572ULL);
    std::normal_distribution<double> g;
    Eigen::VectorXd f(n);
    for (int t = 0; t < samples; ++t) {
        for (auto& x : f) x = g(rng);
        trial(f);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        f.setZero();
        f[i] = 1.0;
        trial(f);
    }
    m.passed = m.min_slack >= -tol;
    return m;
}

nlohmann::json report_to_json(const ComparisonReport& r, const ExtensionScheme& s, const Kernel& q) {
    nlohmann::json j;
    j["mode"] = to_string(r.mode);
    j["a_const"] = r.a_const;
    j["c1"] = r.c1;
    j["edges_loaded"] = r.edges_loaded;
    j["pairs_used"] = r.pairs_used;
    if (r.worst.q >= 0) {
        j["worst_edge"] = {{"q", q.space().label(static_cast<std::size_t>(r.worst.q))},
                           {"r", q.space().label(static_cast<std::size_t>(r.worst.r))},
                           {"capacity", r.worst.capacity},
                           {"load", r.worst.load()},
                           {"inside_pairs", r.worst.terms[0]},
                           {"one_end_outside", r.worst.terms[1]},
                           {"both_ends_outside", r.worst.terms[2]}};
    }
    j["inner_states"] = s.inner().size();
    j["outer_states"] = s.outer().size();
    return j;
}

}  // namespace mcx
