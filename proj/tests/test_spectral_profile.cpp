#include <doctest.h>

#include "mcx/comparison.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/random.hpp"
#include "mcx/spectral_profile.hpp"
#include "mcx/torus.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

using namespace mcx;

namespace {

Kernel two_point() {
    auto space = make_space({"a", "b"});
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
    return Kernel::from_triplets(space, {{0, 0, 0.5}, {0, 1, 0.5}, {1, 0, 0.5}, {1, 1, 0.5}}, pi, {true, true});
}

TorusChains torus_minus_corner() { return torus_chains(holes_instance(4, {{0, 0}})); }

// Every stationary point of the quotient on the cone: for each support T, each
// strictly positive generalized eigenvector of the energy/variance pencil.
double kkt_oracle(std::span<const int> set, const Kernel& q) {
    const auto& nu = q.stationary();
    double best = std::numeric_limits<double>::infinity();
    const auto m = set.size();
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        std::vector<int> t;
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1u) t.push_back(set[i]);
        const auto k = static_cast<Eigen::Index>(t.size());
        Eigen::MatrixXd l(k, k), b(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) {
                const int x = t[static_cast<std::size_t>(i)], y = t[static_cast<std::size_t>(j)];
                l(i, j) = (i == j ? nu[x] : 0.0) - nu[x] * q(x, y);
                b(i, j) = (i == j ? nu[x] : 0.0) - nu[x] * nu[y];
            }
        l = 0.5 * (l + l.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(l, b);
        for (Eigen::Index c = 0; c < k; ++c) {
            Eigen::VectorXd v = ges.eigenvectors().col(c);
            if (v.sum() < 0) v = -v;
            if (v.minCoeff() > 1e-9 * v.maxCoeff()) best = std::min(best, ges.eigenvalues()[c]);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("lambda of a single state") {
    auto k = two_point();
    std::vector<int> s{0};
    auto r = lambda_set(s, k);
    // (1 - Q(x,x)) / (1 - nu(x))
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.exact);
    CHECK(r.witness_set == s);

    auto ch = torus_minus_corner();
    for (int x = 0; x < 15; ++x) {
        std::vector<int> one{x};
        auto v = lambda_set(one, ch.q);
        const double nu = ch.q.stationary()[x];
        CHECK(v.value == doctest::Approx((1.0 - ch.q(x, x)) / (1.0 - nu)).epsilon(1e-12));
    }
}

TEST_CASE("lambda matches the stationary point oracle") {
    auto ch = torus_minus_corner();
    auto rng = substream(11, 0);
    std::uniform_int_distribution<int> state(0, 14), size(2, 7);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<int> s;
        const int want = size(rng);
        while (static_cast<int>(s.size()) < want) {
            const int x = state(rng);
            if (std::find(s.begin(), s.end(), x) == s.end()) s.push_back(x);
        }
        std::sort(s.begin(), s.end());
        auto r = lambda_set(s, ch.q);
        CAPTURE(trial);
        CHECK(r.value == doctest::Approx(kkt_oracle(s, ch.q)).epsilon(1e-9));
        CHECK(rayleigh_quotient(r.witness_f, ch.q) == doctest::Approx(r.value).epsilon(1e-9));
        CHECK(r.witness_f.minCoeff() >= 0.0);
        CHECK(r.dirichlet_eigenvalue <= r.value + 1e-12);
    }
}

TEST_CASE("lambda is below every sampled nonnegative function") {
    auto ch = torus_minus_corner();
    auto rng = substream(5, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::vector<std::vector<int>> sets{{1, 2, 5}, {3, 4, 7, 8, 11}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
    for (const auto& s : sets) {
        auto r = lambda_set(s, ch.q);
        for (int i = 0; i < 10000 / static_cast<int>(sets.size()); ++i) {
            Eigen::VectorXd f = Eigen::VectorXd::Zero(15);
            for (int x : s) f[x] = unif(rng);
            CHECK(r.value <= rayleigh_quotient(f, ch.q) + 1e-12);
        }
    }
}

TEST_CASE("lambda of the full space is the spectral gap") {
    auto ch = torus_minus_corner();
    std::vector<int> all(15);
    for (int x = 0; x < 15; ++x) all[static_cast<std::size_t>(x)] = x;
    auto r = lambda_set(all, ch.q);
    CHECK(r.full_support);
    CHECK(r.value == doctest::Approx(spectral_gap(ch.q)).epsilon(1e-9));
    CHECK(r.witness_f.minCoeff() == doctest::Approx(0.0));
}

TEST_CASE("projected descent on a large set stays above the exact profile") {
    auto ch = torus_chains(holes_instance(5, {{0, 0}}));
    std::vector<int> s(18);
    for (int x = 0; x < 18; ++x) s[static_cast<std::size_t>(x)] = x;
    auto r = lambda_set(s, ch.q, 3);
    CHECK_FALSE(r.exact);
    CHECK(r.witness_f.minCoeff() >= 0.0);
    CHECK(rayleigh_quotient(r.witness_f, ch.q) == doctest::Approx(r.value).epsilon(1e-9));
    CHECK(r.dirichlet_eigenvalue <= r.value + 1e-12);
    // (nu f)^2 <= nu(S) ||f||^2 gives lambda(S) <= lambda_D(S) / (1 - nu(S))
    CHECK(r.value <= r.dirichlet_eigenvalue / (1.0 - 18.0 / 24.0) + 1e-9);
}

TEST_CASE("lambda_set errors") {
    auto k = two_point();
    std::vector<int> empty, dup{0, 0}, outside{5};
    CHECK_THROWS_AS(lambda_set(empty, k), Error);
    CHECK_THROWS_AS(lambda_set(dup, k), Error);
    CHECK_THROWS_AS(lambda_set(outside, k), Error);
}

TEST_CASE("profile of the torus with one hole") {
    auto ch = torus_minus_corner();
    auto grid = default_grid(ch.q);
    REQUIRE(grid.size() == 15);
    auto p = profile(ch.q, grid);
    CHECK(p.exact);
    CHECK(p.sets_examined == (1u << 15) - 2);
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        const auto& pt = p.points[i];
        CAPTURE(pt.r);
        if (i > 0) CHECK(pt.lambda <= p.points[i - 1].lambda);
        CHECK(pt.witness_mass >= p.nu_min - 1e-12);
        CHECK(pt.witness_mass <= pt.r + 1e-12);
        CHECK(pt.witness_f.minCoeff() >= 0.0);
        for (int x = 0; x < 15; ++x)
            if (std::find(pt.witness_set.begin(), pt.witness_set.end(), x) == pt.witness_set.end())
                CHECK(pt.witness_f[x] == 0.0);
        CHECK(rayleigh_quotient(pt.witness_f, ch.q) == doctest::Approx(pt.lambda).epsilon(1e-9));
    }
    // at r = nu_min only singletons are admissible
    double single = std::numeric_limits<double>::infinity();
    for (int x = 0; x < 15; ++x) {
        std::vector<int> one{x};
        single = std::min(single, lambda_set(one, ch.q).value);
    }
    CHECK(p.points.front().lambda == doctest::Approx(single).epsilon(1e-12));
    CHECK(p.points.back().lambda <= spectral_gap(ch.q) + 1e-9);
    CHECK(profile_lower_bound(p, 3.0) == p.points.back().lambda);
}

TEST_CASE("profile singletons on the 3x3 torus") {
    auto k = build_torus_srw(3);
    auto p = profile(k, {1.0 / 9.0});
    // every vertex: (1 - 1/2) / (1 - 1/9)
    CHECK(p.points[0].lambda == doctest::Approx(9.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("connected and sampled profiles") {
    auto k = build_torus_srw(4);
    std::vector<double> grid{1.0 / 16, 2.0 / 16, 4.0 / 16, 6.0 / 16};
    auto exact = profile(k, grid);
    ProfileOptions opt;
    opt.mode = ProfileMode::connected;
    opt.max_set_size = 6;
    auto conn = profile(k, grid, opt);
    CHECK_FALSE(conn.exact);
    opt.mode = ProfileMode::sampled;
    opt.samples = 500;
    auto samp = profile(k, grid, opt);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        // connected sets of size up to r N suffice, so the connected sweep is exact here
        CHECK(conn.points[i].lambda == doctest::Approx(exact.points[i].lambda).epsilon(1e-12));
        CHECK(samp.points[i].lambda >= exact.points[i].lambda - 1e-12);
    }

    auto big = build_torus_srw(5);
    try {
        profile(big, {0.04});
        FAIL("exhaustive profile accepted 25 states");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::mode_required);
    }
    opt.mode = ProfileMode::connected;
    opt.max_set_size = 3;
    auto p = profile(big, {1.0 / 25, 3.0 / 25}, opt);
    CHECK(p.points[1].lambda <= p.points[0].lambda);
    CHECK_THROWS_AS(profile(k, {0.01}), Error);
    CHECK_THROWS_AS(profile_mode_from_string("greedy"), Error);
}

TEST_CASE("profile is deterministic across thread counts") {
    auto ch = torus_minus_corner();
    auto grid = default_grid(ch.q);
    ProfileOptions one;
    one.threads = 1;
    ProfileOptions many;
    many.threads = 4;
    auto a = profile(ch.q, grid, one);
    auto b = profile(ch.q, grid, many);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(a.points[i].lambda == b.points[i].lambda);
        CHECK(a.points[i].witness_set == b.points[i].witness_set);
    }
}

TEST_CASE("mixing integral") {
    Profile flat;
    flat.nu_min = 0.25;
    for (double r : {0.25, 0.5, 1.0}) flat.points.push_back({r, 0.5, {}, {}, 0.0});
    auto m = mixing_integral(flat, 0.5);
    CHECK(m.integral == doctest::Approx(2.0 / 0.5 * std::log(8.0 / 1.0)).epsilon(1e-12));
    CHECK(m.steps == static_cast<int>(std::floor(m.integral)) + 1);

    auto k = two_point();
    auto p = profile(k, default_grid(k));
    auto t = mixing_integral(p, 0.25);
    CHECK(t.certified);
    for (int x = 0; x < 2; ++x) CHECK(tv_curve(k, x, t.steps).back() <= 0.25);

    auto ch = torus_minus_corner();
    auto pq = profile(ch.q, default_grid(ch.q));
    auto tq = mixing_integral(pq, 0.25);
    double worst = 0.0;
    for (int x = 0; x < 15; ++x) worst = std::max(worst, tv_curve(ch.q, x, tq.steps).back());
    CHECK(worst <= 0.25);

    Profile short_grid = flat;
    short_grid.points.pop_back();
    CHECK_THROWS_AS(mixing_integral(short_grid, 0.5), Error);
    CHECK_THROWS_AS(mixing_integral(flat, 0.0), Error);
    Profile zero = flat;
    zero.points.back().lambda = 0.0;
    CHECK_THROWS_AS(mixing_integral(zero, 0.5), Error);
}

TEST_CASE("support ratio and profile transfer") {
    SUBCASE("identity scheme") {
        auto k = build_torus_srw(3);
        ExtensionScheme s(k.space_ptr(), k.space_ptr());
        auto sr = support_ratio(s, k, k);
        CHECK(sr.c2 == doctest::Approx(1.0).epsilon(1e-12));
        auto grid = default_grid(k);
        auto p = profile(k, grid);
        auto tr = profile_transfer(1.0, 1.0, 1.0, p, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(tr[i].bound == p.points[i].lambda);
    }
    SUBCASE("torus with one hole") {
        auto inst = holes_instance(4, {{0, 0}});
        auto ch = torus_chains(inst);
        auto s = holes_scheme(inst, ch);
        auto sr = support_ratio(s, ch.k, ch.q);
        // direct oracle: support of the extension of each indicator
        double c2 = 0.0;
        for (std::uint32_t set = 1; set < (1u << 15); ++set) {
            Eigen::VectorXd ind = Eigen::VectorXd::Zero(15);
            double nu = 0.0;
            for (int x = 0; x < 15; ++x)
                if (set >> x & 1u) {
                    ind[x] = 1.0;
                    nu += ch.q.stationary()[x];
                }
            Eigen::VectorXd ext = extend(ind, s);
            double mu = 0.0;
            for (int z = 0; z < 16; ++z)
                if (ext[z] > 0.0) mu += ch.k.stationary()[z];
            c2 = std::max(c2, nu / mu);
        }
        CHECK(sr.exhaustive);
        CHECK(sr.c2 == doctest::Approx(c2).epsilon(1e-12));
        CHECK(sr.c2 <= 4.0);

        auto rep = congestion_general(s, ch.k, ch.q);
        auto grid = default_grid(ch.q);
        auto inner = profile(ch.q, grid);
        std::vector<double> outer_grid;
        for (double r : grid) outer_grid.push_back(sr.c2 * r);
        auto outer = profile(ch.k, outer_grid);
        auto tr = profile_transfer(1.0 / rep.a_const, rep.c1, sr.c2, outer, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(tr[i].bound <= inner.points[i].lambda + 1e-9);
        CHECK_THROWS_AS(profile_transfer(1.0, 1.0, 2.0, profile(ch.k, {0.0625, 0.5}), grid), Error);
    }
}

TEST_CASE("closed-form torus profile bounds") {
    auto root = torus_profile_bound(4, 8.0 / 27.0);
    CHECK(std::abs(root.full) <= 1e-15);
    auto b = torus_profile_bound(4, 1.0 / 16.0);
    CHECK(b.full == doctest::Approx((128.0 / 27.0 - 1.0) / 32.0).epsilon(1e-14));
    CHECK(b.holes == doctest::Approx(9.0 / 64.0 * (32.0 / 27.0 - 1.0)).epsilon(1e-14));
    auto far = torus_profile_bound(4, 0.5);
    CHECK(far.full_vacuous);
    CHECK(far.holes_vacuous);
    CHECK(far.full == 0.0);
    CHECK_THROWS_AS(torus_profile_bound(4, 0.0), Error);

    auto k = build_torus_srw(4);
    auto p = profile(k, default_grid(k));
    for (const auto& pt : p.points)
        if (pt.r <= 8.0 / 27.0) CHECK(pt.lambda >= torus_profile_bound(4, pt.r).full - 1e-9);
}
