#include <doctest.h>

#include "mcx/comparison.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/kernel.hpp"
#include "mcx/scheme.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace mcx;

namespace {

// Non-lazy SRW on the n-cycle with the arc {0, .., removed-1} deleted; the inner
// chain is the half-lazy walk on the remaining path 'removed' .. n-1.
struct CycleArc {
    Kernel k;
    Kernel q;
    int removed;
};

CycleArc cycle_arc(int n, int removed) {
    Kernel k = build_cycle_srw(n);
    std::vector<std::string> labels;
    std::vector<Triplet> t;
    const int m = n - removed;
    for (int v = removed; v < n; ++v) labels.push_back(std::to_string(v));
    for (int i = 0; i < m; ++i) {
        double stay = 1.0;
        for (int j : {i - 1, i + 1})
            if (j >= 0 && j < m) {
                t.push_back({i, j, 0.25});
                stay -= 0.25;
            }
        t.push_back({i, i, stay});
    }
    Kernel q = Kernel::from_triplets(make_space(std::move(labels)), std::move(t),
                                     Eigen::VectorXd::Constant(m, 1.0 / m), {true, true});
    return {std::move(k), std::move(q), removed};
}

int in(const Kernel& q, int v) { return *q.space().find(std::to_string(v)); }

// Sends each removed vertex to its nearest kept vertex; the two ends of the arc are coupled directly.
ExtensionScheme arc_scheme(const CycleArc& c, FormMode mode) {
    const int n = static_cast<int>(c.k.size());
    const int first = c.removed, last = n - 1;
    ExtensionScheme s(c.q.space_ptr(), c.k.space_ptr(), mode);
    if (c.removed == 1) {
        s.set_measure(0, {{in(c.q, first), Rational(1, 2)}, {in(c.q, last), Rational(1, 2)}});
    } else {
        for (int v = 0; v < c.removed; ++v)
            s.set_measure(v, {{in(c.q, 2 * v < c.removed ? last : first), Rational(1)}});
        for (int v = 0; v + 1 < c.removed; ++v) {
            int a = in(c.q, 2 * v < c.removed ? last : first), b = in(c.q, 2 * (v + 1) < c.removed ? last : first);
            s.set_coupling(v, v + 1, {{a, b, Rational(1)}});
        }
    }
    const int m = static_cast<int>(c.q.size());
    for (int i = 0; i + 1 < m; ++i) {
        s.flows().add({i, i + 1}, Rational(1));
        s.flows().add({i + 1, i}, Rational(1));
    }
    std::vector<int> up(static_cast<std::size_t>(m)), down(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        up[static_cast<std::size_t>(i)] = i;
        down[static_cast<std::size_t>(i)] = m - 1 - i;
    }
    s.flows().add(up, Rational(1));
    s.flows().add(down, Rational(1));
    if (mode == FormMode::f_form)
        for (int i : {0, m - 1}) s.flows().add({i, i}, Rational(1));
    s.flows().finalize();
    return s;
}

// Congestion straight from the definition, on dense matrices.
double brute_congestion(const ExtensionScheme& s, const Kernel& k, const Kernel& q) {
    const Eigen::MatrixXd kd = k.dense(), qd = q.dense();
    const auto& mu = k.stationary();
    const auto& nu = q.stationary();
    std::map<std::pair<int, int>, double> weight;  // c(a, b)
    const int n = static_cast<int>(k.size());
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
            if (x == y || kd(x, y) == 0.0) continue;
            const double w = kd(x, y) * mu[x];
            if (s.is_inner(x) && s.is_inner(y)) {
                weight[{s.inner_of(x), s.inner_of(y)}] += w;
            } else if (s.is_inner(x)) {
                for (const auto& e : s.measure(y)) weight[{s.inner_of(x), e.state}] += 2.0 * to_double(e.weight) * w;
            } else if (!s.is_inner(y)) {
                for (const auto& e : s.coupling(x, y)) weight[{e.a, e.b}] += to_double(e.weight) * w;
            }
        }
    std::map<std::pair<int, int>, double> load;
    for (const auto& [pair, c] : weight) {
        if (pair.first == pair.second && s.mode() == FormMode::dirichlet) continue;
        long p = s.flows().find(pair.first, pair.second);
        REQUIRE(p >= 0);
        for (std::size_t i = s.flows().path_begin(static_cast<std::size_t>(p)); i < s.flows().path_end(static_cast<std::size_t>(p)); ++i) {
            auto path = s.flows().path(i);
            for (std::size_t j = 0; j < path.steps(); ++j)
                load[{path.states[j], path.states[j + 1]}] += c * to_double(path.weight) * static_cast<double>(path.steps());
        }
    }
    double a = 0.0;
    for (const auto& [e, l] : load) a = std::max(a, l / (qd(e.first, e.second) * nu[e.first]));
    return a;
}

}  // namespace

TEST_CASE("identity scheme has congestion ratio K/Q") {
    Kernel k = build_torus_srw(4);
    ExtensionScheme s(k.space_ptr(), k.space_ptr());
    for (std::size_t x = 0; x < k.size(); ++x)
        for (int y : k.cols(static_cast<int>(x)))
            if (y != static_cast<int>(x)) s.flows().add({static_cast<int>(x), y}, Rational(1));
    s.flows().finalize();
    CHECK(validate_scheme(s, k, k).ok());
    auto r = congestion_general(s, k, k);
    CHECK(r.a_const == doctest::Approx(1.0));
    CHECK(r.c1 == doctest::Approx(1.0));
    CHECK(congestion_srw(s, k, k).worst_bracket == Rational(1));
}

TEST_CASE("cycle with one hole: congestion against the definition") {
    auto c = cycle_arc(7, 1);
    auto s = arc_scheme(c, FormMode::dirichlet);
    CHECK(validate_scheme(s, c.k, c.q).ok());
    auto r = congestion_general(s, c.k, c.q);
    CHECK(r.a_const == doctest::Approx(brute_congestion(s, c.k, c.q)).epsilon(1e-12));
    CHECK(distribution_ratio(s, c.k, c.q) == doctest::Approx(7.0 / 6.0));
    auto m = check_master_inequality(s, c.k, c.q, r.a_const, 500, 1);
    CHECK(m.passed);
    CHECK(m.worst_ratio <= r.a_const * (1 + 1e-12));
}

TEST_CASE("cycle with a removed arc uses couplings") {
    auto c = cycle_arc(9, 3);
    auto s = arc_scheme(c, FormMode::dirichlet);
    CHECK(validate_scheme(s, c.k, c.q).ok());
    auto r = congestion_general(s, c.k, c.q);
    CHECK(r.a_const == doctest::Approx(brute_congestion(s, c.k, c.q)).epsilon(1e-12));
    CHECK(r.worst.load() > 0.0);
    CHECK(r.worst.terms[2] > 0.0);
    CHECK(check_master_inequality(s, c.k, c.q, r.a_const, 500, 2).passed);
    // transferred gap holds against the exact one
    auto ks = spectrum(c.k, false);
    auto qs = spectrum(c.q, false);
    auto tr = spectrum_transfer(r.a_const, r.c1, ks, c.q.size(), &qs);
    CHECK(tr.min_slack >= -1e-12);
    CHECK_THROWS_AS(spectrum_transfer(r.a_const, r.c1, qs, c.k.size()), Error);
}

TEST_CASE("F-form scheme on an odd cycle") {
    auto c = cycle_arc(7, 1);
    auto s = arc_scheme(c, FormMode::f_form);
    CHECK(validate_scheme(s, c.k, c.q).ok());
    auto r = congestion_fform(s, c.k, c.q);
    CHECK(r.a_const == doctest::Approx(brute_congestion(s, c.k, c.q)).epsilon(1e-12));
    auto m = check_master_inequality(s, c.k, c.q, r.a_const, 500, 4);
    CHECK(m.passed);

    // F-form identity F = 2 Var-like sum: F(f) + E(f) = 2 <f, f>_pi
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    Eigen::VectorXd f(7);
    for (auto& v : f) v = g(rng);
    CHECK(f_form(f, c.k) + dirichlet(f, c.k) == doctest::Approx(2.0 * f.cwiseProduct(f).dot(c.k.stationary())));

    auto ks = spectrum(c.k, false);
    auto qs = spectrum(c.q, false);
    auto b = smallest_eigen_bound(r.a_const, r.c1, ks.eigenvalues.back());
    CHECK(qs.eigenvalues.back() >= b.bound - 1e-12);
    CHECK(b.bound <= b.printed_form + 1e-12);
}

TEST_CASE("comparison error paths") {
    auto c = cycle_arc(7, 1);
    auto dir = arc_scheme(c, FormMode::dirichlet);
    try {
        congestion_fform(dir, c.k, c.q);
        FAIL("accepted a Dirichlet scheme");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::mode_violation);
    }

    // even path in F-form mode
    auto ff = arc_scheme(c, FormMode::f_form);
    ExtensionScheme even(c.q.space_ptr(), c.k.space_ptr(), FormMode::f_form);
    even.set_measure(0, ff.measure(0));
    for (std::size_t p = 0; p < ff.flows().path_count(); ++p) {
        auto path = ff.flows().path(p);
        if (path.states.front() == 0 && path.states.back() == 0)
            even.flows().add({0, 1, 0}, Rational(1));
        else
            even.flows().add(path.states, path.weight);
    }
    even.flows().finalize();
    CHECK_THROWS_AS(congestion_fform(even, c.k, c.q), Error);

    // a missing pair
    ExtensionScheme missing(c.q.space_ptr(), c.k.space_ptr());
    missing.set_measure(0, dir.measure(0));
    missing.flows().add({0, 1}, Rational(1));
    missing.flows().finalize();
    try {
        congestion_general(missing, c.k, c.q);
        FAIL("missing flow accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::incomplete_flow);
    }
    CHECK_FALSE(validate_scheme(missing, c.k, c.q).ok());
    CHECK(validate_scheme(missing, c.k, c.q).count("missing-flow") > 0);

    // a step that is not an edge of Q
    ExtensionScheme jump(c.q.space_ptr(), c.k.space_ptr());
    jump.set_measure(0, dir.measure(0));
    for (std::size_t p = 0; p < dir.flows().path_count(); ++p) {
        auto path = dir.flows().path(p);
        if (path.steps() == 1 && path.states[0] == 0)
            jump.flows().add({0, 2, 1}, Rational(1));
        else
            jump.flows().add(path.states, path.weight);
    }
    jump.flows().finalize();
    CHECK_THROWS_AS(congestion_general(jump, c.k, c.q), Error);
    CHECK(validate_scheme(jump, c.k, c.q).count("non-edge-step") > 0);

    // not an SRW pair
    CHECK_THROWS_AS(congestion_srw(dir, c.k, c.q), Error);
    CHECK_THROWS_AS(smallest_eigen_bound(0.0, 1.0, -1.0), Error);
}
