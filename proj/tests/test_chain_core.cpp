#include <doctest.h>

#include "mcx/error.hpp"
#include "mcx/kernel.hpp"
#include "mcx/kernel_io.hpp"
#include "mcx/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace mcx;

namespace {

void check_structure(const Kernel& k) {
    CHECK(k.row_sum_residual() < 1e-12);
    CHECK(k.stationarity_residual() < 1e-12);
    CHECK(std::abs(k.stationary().sum() - 1.0) < 1e-12);
    if (k.reversible()) CHECK(k.detailed_balance_residual() < 1e-12);
    if (k.half_lazy()) CHECK(k.min_holding() >= 0.5 - 1e-12);
}

std::vector<int> all_but(int n, std::initializer_list<int> removed) {
    std::vector<int> kept;
    for (int v = 0; v < n; ++v)
        if (std::find(removed.begin(), removed.end(), v) == removed.end()) kept.push_back(v);
    return kept;
}

// Eigenvalues of the random transposition walk from the character ratio of the
// standard representation: beta = (C(n-1,2) - 1) / C(n,2) for the non-lazy walk.
double transposition_beta1(int n, bool lazy) {
    double r = (0.5 * (n - 1) * (n - 2) - 1.0) / (0.5 * n * (n - 1));
    return lazy ? 0.5 + 0.5 * r : r;
}

}  // namespace

TEST_CASE("torus walk rows and stationary law") {
    auto k = build_torus_srw(3);
    CHECK(k.size() == 9);
    for (int x = 0; x < 9; ++x) {
        CHECK(k(x, x) == 0.5);
        CHECK(k.cols(x).size() == 5);
        for (int y : k.cols(x))
            if (y != x) CHECK(k(x, y) == 0.125);
        CHECK(k.stationary()[x] == doctest::Approx(1.0 / 9).epsilon(1e-15));
    }
    check_structure(k);
    CHECK_THROWS_AS(build_torus_srw(2), Error);
}

TEST_CASE("torus side 4 spectrum matches the cosine formula") {
    auto k = build_torus_srw(4);
    auto s = spectrum(k);
    std::vector<double> analytic;
    for (int j = 0; j < 4; ++j)
        for (int l = 0; l < 4; ++l)
            analytic.push_back(0.5 + 0.25 * (std::cos(2 * std::numbers::pi * j / 4) + std::cos(2 * std::numbers::pi * l / 4)));
    std::sort(analytic.rbegin(), analytic.rend());
    REQUIRE(s.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(s.eigenvalues[i] - analytic[i]) < 1e-10);
    CHECK(std::abs(s.eigenvalues[1] - 0.75) < 1e-10);
    CHECK(std::abs(second_eigenvalue(k) - 0.75) < 1e-10);
}

TEST_CASE("metropolized restriction") {
    auto k = build_torus_srw(5);
    SUBCASE("nothing removed reproduces the base walk") {
        auto q = metropolize_restriction(k, all_but(25, {}));
        for (int x = 0; x < 25; ++x)
            for (int y = 0; y < 25; ++y) CHECK(q(x, y) == k(x, y));
    }
    SUBCASE("one hole keeps the uniform law") {
        auto q = metropolize_restriction(k, all_but(25, {12}));
        CHECK(q.size() == 24);
        check_structure(q);
        for (int x = 0; x < 24; ++x) CHECK(std::abs(q.stationary()[x] - 1.0 / 24) < 1e-15);
        // a neighbour of the hole has one rejected direction
        int nb = q.space().index("1,2");
        CHECK(q(nb, nb) == doctest::Approx(0.625));
    }
    SUBCASE("two non-adjacent holes on side 4 satisfy detailed balance") {
        auto k4 = build_torus_srw(4);
        auto q = metropolize_restriction(k4, all_but(16, {0, 10}));
        CHECK(q.size() == 14);
        const auto& pi = q.stationary();
        double worst = 0.0;
        for (int x = 0; x < 14; ++x)
            for (int y = 0; y < 14; ++y) worst = std::max(worst, std::abs(pi[x] * q(x, y) - pi[y] * q(y, x)));
        CHECK(worst < 1e-12);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(metropolize_restriction(k, std::vector<int>{}), Error);
        // removing the four neighbours of a vertex isolates it
        try {
            metropolize_restriction(k, all_but(25, {7, 11, 13, 17}));
            FAIL("expected ergodicity error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ergodicity);
        }
    }
}

TEST_CASE("random transposition walk") {
    auto k3 = build_random_transposition(3, true);
    CHECK(k3.size() == 6);
    for (int x = 0; x < 6; ++x) {
        CHECK(k3(x, x) == 0.5);
        CHECK(k3.cols(x).size() == 4);
    }
    for (int n = 3; n <= 6; ++n) {
        auto k = build_random_transposition(n, true);
        check_structure(k);
        CHECK(std::abs((1.0 - spectrum(k).eigenvalues[1]) - (1.0 - transposition_beta1(n, true))) < 1e-10);
    }
    auto k4 = build_random_transposition(4, true);
    CHECK(std::abs(1.0 - spectrum(k4).eigenvalues[1] - 1.0 / 3.0) < 1e-10);
    auto plain = build_random_transposition(4, false);
    CHECK(std::abs(spectrum(plain).eigenvalues.back() + 1.0) < 1e-10);
    CHECK(build_random_transposition(5, true).size() == 120);
    CHECK_THROWS_AS(build_random_transposition(9, true), Error);
    CHECK_THROWS_AS(build_random_transposition(2, true), Error);
}

TEST_CASE("derangement restriction") {
    for (int n = 4; n <= 8; ++n) {
        auto q = restrict_to_derangements(n);
        CHECK(q.size() == derangement_count(n));
        check_structure(q);
        CHECK(is_connected(q));
        const double step = 1.0 / (n * (n - 1));
        for (int y : q.cols(0))
            if (y != 0) CHECK(q(0, y) == doctest::Approx(step).epsilon(1e-14));
        for (std::size_t x = 0; x < q.size(); ++x)
            CHECK(Permutation::from_label(q.space().label(x)).is_derangement());
    }
    CHECK(restrict_to_derangements(4).size() == 9);
    CHECK(restrict_to_derangements(5).size() == 44);
    try {
        restrict_to_derangements(3);
        FAIL("expected ergodicity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ergodicity);
    }
}

TEST_CASE("spectrum basics") {
    auto space = make_space({"a", "b"});
    Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
    auto two = build_product_kernel(space, half);
    auto s = spectrum(two);
    CHECK(std::abs(s.eigenvalues[0] - 1.0) < 1e-12);
    CHECK(std::abs(s.eigenvalues[1]) < 1e-12);

    auto id = build_identity_kernel(make_space({"a", "b", "c"}), Eigen::VectorXd::Constant(3, 1.0 / 3));
    for (double b : spectrum(id).eigenvalues) CHECK(std::abs(b - 1.0) < 1e-12);

    std::vector<Triplet> t{{0, 1, 1.0}, {1, 0, 0.5}, {1, 1, 0.5}};
    Eigen::VectorXd pi(2);
    pi << 1.0 / 3, 2.0 / 3;
    auto nonrev = Kernel::from_triplets(make_space({"x", "y"}), t, pi, {false, false});
    try {
        spectrum(nonrev);
        FAIL("expected unsupported operator");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported_operator);
    }
}

TEST_CASE("eigenpairs satisfy the residual bound on every builder") {
    std::vector<Kernel> fixtures;
    fixtures.push_back(build_torus_srw(4));
    fixtures.push_back(metropolize_restriction(build_torus_srw(5), all_but(25, {0, 12})));
    fixtures.push_back(build_random_transposition(4, true));
    fixtures.push_back(restrict_to_derangements(5));
    fixtures.push_back(build_cycle_srw(5));
    for (const auto& k : fixtures) {
        auto s = spectrum(k, true);
        CHECK(std::abs(s.eigenvalues[0] - 1.0) < 1e-10);
        const Eigen::MatrixXd p = k.dense();
        for (std::size_t i = 0; i < s.size(); ++i) {
            Eigen::VectorXd v = s.eigenvectors.col(static_cast<Eigen::Index>(i));
            v /= v.cwiseAbs().maxCoeff();
            CHECK((p * v - s.eigenvalues[i] * v).cwiseAbs().maxCoeff() < 1e-8);
        }
        if (k.half_lazy()) CHECK(s.eigenvalues.back() >= -1e-12);
    }
}

TEST_CASE("Lanczos agrees with the dense solver on degenerate spectra") {
    for (const auto& k : {build_torus_srw(20), restrict_to_derangements(6), build_random_transposition(5, true)})
        CHECK(std::abs(lanczos_second_eigenvalue(k) - spectrum(k).eigenvalues[1]) < 1e-10);
}

TEST_CASE("Lanczos second eigenvalue above the dense cap") {
    auto k = build_random_transposition(8, true);
    CHECK(k.size() == 40320);
    CHECK(std::abs(second_eigenvalue(k) - transposition_beta1(8, true)) < 1e-8);
}

TEST_CASE("total variation curve") {
    auto k = build_torus_srw(4);
    auto curve = tv_curve(k, 0, 50);
    CHECK(std::abs(curve[0] - (1.0 - 1.0 / 16)) < 1e-15);
    // dense matrix power oracle
    Eigen::MatrixXd p = k.dense();
    Eigen::MatrixXd pt = Eigen::MatrixXd::Identity(16, 16);
    for (int t = 0; t < 50; ++t) pt = pt * p;
    double tv = 0.0;
    for (int y = 0; y < 16; ++y) tv += std::abs(pt(0, y) - 1.0 / 16);
    CHECK(std::abs(curve[50] - 0.5 * tv) < 1e-10);

    std::vector<Kernel> fixtures;
    fixtures.push_back(build_torus_srw(5));
    fixtures.push_back(restrict_to_derangements(5));
    fixtures.push_back(build_random_transposition(4, true));
    fixtures.push_back(std::move(k));
    for (const auto& f : fixtures) {
        auto c = tv_curve(f, 0, 60);
        for (std::size_t t = 1; t < c.size(); ++t) CHECK(c[t] <= c[t - 1] + 1e-15);
    }

    auto id = build_identity_kernel(make_space({"a", "b", "c"}), Eigen::VectorXd::Constant(3, 1.0 / 3));
    for (double v : tv_curve(id, 1, 10)) CHECK(std::abs(v - 2.0 / 3) < 1e-15);
}

TEST_CASE("kernel construction validates its invariants") {
    auto space = make_space({"a", "b"});
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
    CHECK_THROWS_AS(Kernel::from_triplets(space, {{0, 0, 0.6}, {1, 1, 1.0}}, pi, {false, false}), Error);
    CHECK_THROWS_AS(Kernel::from_triplets(space, {{0, 1, 1.0}, {1, 0, 1.0}}, pi, {true, true}), Error);
    CHECK_THROWS_AS(Kernel::from_triplets(space, {{0, 2, 1.0}, {1, 1, 1.0}}, pi, {false, false}), Error);
    CHECK_THROWS_AS(make_space({"a", "a"}), Error);
}

TEST_CASE("kernel serialization round trip") {
    auto k = restrict_to_derangements(4);
    auto doc = kernel_to_json(k);
    auto back = kernel_from_json(doc);
    CHECK(back.size() == k.size());
    CHECK(back.space().labels() == k.space().labels());
    for (int x = 0; x < 9; ++x)
        for (int y = 0; y < 9; ++y) CHECK(back(x, y) == k(x, y));
    doc.erase("reversible");
    doc.erase("half_lazy");
    auto inferred = kernel_from_json(doc);
    CHECK(inferred.reversible());
    CHECK(inferred.half_lazy());
    doc.erase("pi");
    CHECK_THROWS_AS(kernel_from_json(doc), Error);
}

TEST_CASE("edge list import") {
    std::istringstream in("# path on three vertices\na b 1\nb c 1   # trailing comment\n\n");
    auto k = kernel_from_edge_list(in);
    CHECK(k.size() == 3);
    CHECK(k.space().label(0) == "a");
    CHECK(k.stationary()[1] == doctest::Approx(0.5));
    CHECK(k(0, 1) == doctest::Approx(0.5));
    CHECK(k(1, 0) == doctest::Approx(0.25));
    std::istringstream bad("a b\n");
    CHECK_THROWS_AS(kernel_from_edge_list(bad), Error);
}
