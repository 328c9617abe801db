#include "mcx/kernel.hpp"

#include "mcx/error.hpp"
#include "mcx/permutation.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <string>

namespace mcx {

Kernel Kernel::from_triplets(SpacePtr space, std::vector<Triplet> triplets, Eigen::VectorXd stationary,
                             KernelFlags flags) {
    require(space != nullptr && space->size() > 0, ErrorKind::empty_space, "kernel needs a nonempty state space");
    const auto n = space->size();
    require(static_cast<std::size_t>(stationary.size()) == n, ErrorKind::dimension,
            "stationary vector length does not match the state space");

    for (const auto& t : triplets) {
        require(t.row >= 0 && static_cast<std::size_t>(t.row) < n && t.col >= 0 && static_cast<std::size_t>(t.col) < n,
                ErrorKind::dimension, "triplet index out of range");
        require(std::isfinite(t.value) && t.value >= 0.0, ErrorKind::parameter, "transition weights must be >= 0");
    }
    std::sort(triplets.begin(), triplets.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });

    Kernel k;
    k.space_ = std::move(space);
    k.flags_ = flags;
    k.pi_ = std::move(stationary);
    k.row_ptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < triplets.size();) {
        const auto& t = triplets[i];
        double v = 0.0;
        std::size_t j = i;
        for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j) v += triplets[j].value;
        if (v > 0.0) {
            k.cols_.push_back(t.col);
            k.vals_.push_back(v);
            ++k.row_ptr_[static_cast<std::size_t>(t.row) + 1];
        }
        i = j;
    }
    std::partial_sum(k.row_ptr_.begin(), k.row_ptr_.end(), k.row_ptr_.begin());

    for (std::size_t i = 0; i < n; ++i)
        require(std::isfinite(k.pi_[static_cast<Eigen::Index>(i)]) && k.pi_[static_cast<Eigen::Index>(i)] > 0.0,
                ErrorKind::parameter, "stationary weights must be positive (state " + k.space_->label(i) + ")");
    require(std::abs(k.pi_.sum() - 1.0) <= kStructuralTol, ErrorKind::parameter, "stationary weights must sum to 1");
    require(k.row_sum_residual() <= kStructuralTol, ErrorKind::parameter, "kernel rows must sum to 1");
    require(k.stationarity_residual() <= kStructuralTol, ErrorKind::parameter, "pi is not stationary for the kernel");
    if (flags.reversible)
        require(k.detailed_balance_residual() <= kStructuralTol, ErrorKind::parameter,
                "kernel flagged reversible violates detailed balance");
    if (flags.half_lazy)
        require(k.min_holding() >= 0.5 - kStructuralTol, ErrorKind::parameter, "kernel flagged half-lazy has P(x,x) < 1/2");
    return k;
}

std::span<const int> Kernel::cols(int row) const {
    auto b = row_ptr_[static_cast<std::size_t>(row)];
    auto e = row_ptr_[static_cast<std::size_t>(row) + 1];
    return {cols_.data() + b, e - b};
}

std::span<const double> Kernel::values(int row) const {
    auto b = row_ptr_[static_cast<std::size_t>(row)];
    auto e = row_ptr_[static_cast<std::size_t>(row) + 1];
    return {vals_.data() + b, e - b};
}

long Kernel::entry_index(int x, int y) const {
    auto c = cols(x);
    auto it = std::lower_bound(c.begin(), c.end(), y);
    if (it == c.end() || *it != y) return -1;
    return static_cast<long>(offset(x) + static_cast<std::size_t>(it - c.begin()));
}

double Kernel::operator()(int x, int y) const {
    long e = entry_index(x, y);
    return e < 0 ? 0.0 : vals_[static_cast<std::size_t>(e)];
}

Eigen::VectorXd Kernel::apply(const Eigen::VectorXd& f) const {
    require(static_cast<std::size_t>(f.size()) == size(), ErrorKind::dimension, "function length mismatch");
    Eigen::VectorXd out(f.size());
    for (std::size_t x = 0; x < size(); ++x) {
        double s = 0.0;
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) s += vals_[e] * f[cols_[e]];
        out[static_cast<Eigen::Index>(x)] = s;
    }
    return out;
}

Eigen::VectorXd Kernel::apply_left(const Eigen::VectorXd& d) const {
    require(static_cast<std::size_t>(d.size()) == size(), ErrorKind::dimension, "distribution length mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d.size());
    for (std::size_t x = 0; x < size(); ++x) {
        const double dx = d[static_cast<Eigen::Index>(x)];
        if (dx == 0.0) continue;
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) out[cols_[e]] += dx * vals_[e];
    }
    return out;
}

std::vector<Triplet> Kernel::triplets() const {
    std::vector<Triplet> out;
    out.reserve(nonzeros());
    for (std::size_t x = 0; x < size(); ++x)
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) out.push_back({static_cast<int>(x), cols_[e], vals_[e]});
    return out;
}

Eigen::MatrixXd Kernel::dense() const {
    require(size() <= kDenseCapacity, ErrorKind::capacity, "dense matrix requested above capacity");
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t x = 0; x < size(); ++x)
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) m(static_cast<Eigen::Index>(x), cols_[e]) = vals_[e];
    return m;
}

double Kernel::row_sum_residual() const {
    double worst = 0.0;
    for (std::size_t x = 0; x < size(); ++x) {
        double s = 0.0;
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) s += vals_[e];
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

double Kernel::stationarity_residual() const { return (apply_left(pi_) - pi_).cwiseAbs().maxCoeff(); }

double Kernel::detailed_balance_residual() const {
    double worst = 0.0;
    for (std::size_t x = 0; x < size(); ++x) {
        const int xi = static_cast<int>(x);
        for (std::size_t e = row_ptr_[x]; e < row_ptr_[x + 1]; ++e) {
            const int y = cols_[e];
            worst = std::max(worst, std::abs(pi_[xi] * vals_[e] - pi_[y] * (*this)(y, xi)));
        }
    }
    return worst;
}

double Kernel::min_holding() const {
    double lo = 1.0;
    for (std::size_t x = 0; x < size(); ++x) lo = std::min(lo, (*this)(static_cast<int>(x), static_cast<int>(x)));
    return lo;
}

// Builders -----------------------------------------------------------------

namespace {

Eigen::VectorXd uniform(std::size_t n) {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

double binomial2(int n) { return 0.5 * n * (n - 1); }

}  // namespace

Kernel build_torus_srw(int side) {
    require(side >= 3, ErrorKind::degenerate_graph, "torus side must be at least 3");
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(side * side));
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) labels.push_back(std::to_string(i) + "," + std::to_string(j));

    std::vector<Triplet> t;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const int x = torus_index(side, i, j);
            t.push_back({x, x, 0.5});
            for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
                t.push_back({x, torus_index(side, i + di, j + dj), 0.125});
        }
    }
    return Kernel::from_triplets(make_space(std::move(labels)), std::move(t), uniform(static_cast<std::size_t>(side * side)),
                                 {true, true});
}

Kernel metropolize_restriction(const Kernel& base, std::span<const int> kept) {
    require(!kept.empty(), ErrorKind::empty_space, "restriction needs at least one kept state");
    const auto n = base.size();
    std::size_t degree = 0;
    for (std::size_t x = 0; x < n; ++x) {
        const int xi = static_cast<int>(x);
        std::size_t d = 0;
        for (int y : base.cols(xi))
            if (y != xi) ++d;
        if (x == 0) degree = d;
        require(d == degree && std::abs(base(xi, xi) - 0.5) <= kStructuralTol, ErrorKind::unsupported_operator,
                "base kernel is not a half-lazy regular random walk");
    }
    require(degree > 0, ErrorKind::degenerate_graph, "base graph has no edges");
    const double step = 1.0 / (2.0 * static_cast<double>(degree));
    for (std::size_t x = 0; x < n; ++x)
        for (int y : base.cols(static_cast<int>(x)))
            if (y != static_cast<int>(x))
                require(std::abs(base(static_cast<int>(x), y) - step) <= kStructuralTol, ErrorKind::unsupported_operator,
                        "base kernel is not a simple random walk");

    std::vector<int> local(n, -1);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const int v = kept[i];
        require(v >= 0 && static_cast<std::size_t>(v) < n, ErrorKind::dimension, "kept state out of range");
        require(local[static_cast<std::size_t>(v)] < 0, ErrorKind::parameter, "kept state listed twice");
        local[static_cast<std::size_t>(v)] = static_cast<int>(i);
        labels.push_back(base.space().label(static_cast<std::size_t>(v)));
    }

    std::vector<Triplet> t;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const int v = kept[i];
        int deg = 0;
        for (int y : base.cols(v)) {
            if (y == v || local[static_cast<std::size_t>(y)] < 0) continue;
            t.push_back({static_cast<int>(i), local[static_cast<std::size_t>(y)], step});
            ++deg;
        }
        t.push_back({static_cast<int>(i), static_cast<int>(i), 1.0 - deg * step});
    }
    Kernel q = Kernel::from_triplets(make_space(std::move(labels)), std::move(t), uniform(kept.size()), {true, true});
    require(is_connected(q), ErrorKind::ergodicity, "kept states induce a disconnected subgraph");
    return q;
}

Kernel build_random_transposition(int n, bool lazy) {
    require(n >= 3 && n <= 8, ErrorKind::capacity, "random transposition walk supports 3 <= n <= 8");
    auto perms = all_permutations(n);
    std::vector<std::string> labels;
    labels.reserve(perms.size());
    for (const auto& p : perms) labels.push_back(p.label());

    const double pairs = binomial2(n);
    const double step = lazy ? 1.0 / (2.0 * pairs) : 1.0 / pairs;
    std::vector<Triplet> t;
    t.reserve(perms.size() * (static_cast<std::size_t>(pairs) + 1));
    for (std::size_t x = 0; x < perms.size(); ++x) {
        if (lazy) t.push_back({static_cast<int>(x), static_cast<int>(x), 0.5});
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                t.push_back({static_cast<int>(x), static_cast<int>(perms[x].times_transposition(a, b).rank()), step});
    }
    return Kernel::from_triplets(make_space(std::move(labels)), std::move(t), uniform(perms.size()), {true, lazy});
}

Kernel restrict_to_derangements(int n) {
    require(n >= 4, ErrorKind::ergodicity, "derangements under transpositions are disconnected for n <= 3");
    require(n <= 8, ErrorKind::capacity, "derangement walk supports n <= 8");
    Kernel k = build_random_transposition(n, true);
    std::vector<int> kept;
    for (std::uint32_t r = 0; r < k.size(); ++r)
        if (Permutation::unrank(n, r).is_derangement()) kept.push_back(static_cast<int>(r));
    return metropolize_restriction(k, kept);
}

Kernel build_product_kernel(SpacePtr space, const Eigen::VectorXd& pi) {
    const auto n = space->size();
    std::vector<Triplet> t;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            t.push_back({static_cast<int>(x), static_cast<int>(y), pi[static_cast<Eigen::Index>(y)]});
    bool lazy = pi.minCoeff() >= 0.5;
    return Kernel::from_triplets(std::move(space), std::move(t), pi, {true, lazy});
}

Kernel build_identity_kernel(SpacePtr space, const Eigen::VectorXd& pi) {
    std::vector<Triplet> t;
    for (std::size_t x = 0; x < space->size(); ++x) t.push_back({static_cast<int>(x), static_cast<int>(x), 1.0});
    return Kernel::from_triplets(std::move(space), std::move(t), pi, {true, true});
}

Kernel build_cycle_srw(int n) {
    require(n >= 3, ErrorKind::degenerate_graph, "cycle needs at least 3 vertices");
    std::vector<std::string> labels;
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) {
        labels.push_back(std::to_string(i));
        t.push_back({i, (i + 1) % n, 0.5});
        t.push_back({i, (i + n - 1) % n, 0.5});
    }
    return Kernel::from_triplets(make_space(std::move(labels)), std::move(t), uniform(static_cast<std::size_t>(n)),
                                 {true, false});
}

bool is_connected(const Kernel& k) {
    std::vector<char> seen(k.size(), 0);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!todo.empty()) {
        int x = todo.front();
        todo.pop();
        for (int y : k.cols(x)) {
            if (seen[static_cast<std::size_t>(y)]) continue;
            seen[static_cast<std::size_t>(y)] = 1;
            ++count;
            todo.push(y);
        }
    }
    return count == k.size();
}

// Spectra -------------------------------------------------------------------

namespace {

Eigen::MatrixXd symmetrized(const Kernel& k) {
    const Eigen::VectorXd s = k.stationary().cwiseSqrt();
    Eigen::MatrixXd m = k.dense();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) *= s[i] / s[j];
    // Average the two triangles so the symmetric solver sees an exactly symmetric matrix.
    return 0.5 * (m + m.transpose());
}

void apply_symmetrized(const Kernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    Eigen::VectorXd v = u.cwiseQuotient(s);
    out = k.apply(v).cwiseProduct(s);
}

}  // namespace

Spectrum spectrum(const Kernel& k, bool with_vectors) {
    require(k.reversible(), ErrorKind::unsupported_operator, "spectrum requires a reversible kernel");
    require(k.size() <= kDenseCapacity, ErrorKind::capacity,
            "dense spectrum limited to " + std::to_string(kDenseCapacity) + " states");
    Eigen::MatrixXd a = symmetrized(k);
    const auto n = static_cast<lapack_int>(a.rows());
    std::vector<double> w(static_cast<std::size_t>(n));
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, with_vectors ? 'V' : 'N', 'U', n, a.data(), n, w.data());
    require(info == 0, ErrorKind::internal, "dsyevd failed with info " + std::to_string(info));

    Spectrum out;
    out.eigenvalues.assign(w.rbegin(), w.rend());
    if (with_vectors) {
        const Eigen::VectorXd s = k.stationary().cwiseSqrt();
        out.eigenvectors.resize(n, n);
        for (lapack_int j = 0; j < n; ++j) out.eigenvectors.col(j) = a.col(n - 1 - j).cwiseQuotient(s);
    }
    return out;
}

double second_eigenvalue(const Kernel& k) {
    require(k.reversible(), ErrorKind::unsupported_operator, "spectrum requires a reversible kernel");
    require(k.size() >= 2, ErrorKind::empty_space, "second eigenvalue needs at least two states");
    if (k.size() <= kDenseCapacity) return spectrum(k).eigenvalues[1];
    return lanczos_second_eigenvalue(k);
}

double lanczos_second_eigenvalue(const Kernel& k) {
    require(k.reversible(), ErrorKind::unsupported_operator, "spectrum requires a reversible kernel");
    require(k.size() >= 3, ErrorKind::empty_space, "Lanczos needs at least three states");
    // Lanczos with full reorthogonalisation against the top eigenvector sqrt(pi),
    // restarted from the best Ritz vector until the residual certifies it.
    const auto n = static_cast<Eigen::Index>(k.size());
    const Eigen::VectorXd s = k.stationary().cwiseSqrt();
    const int m = static_cast<int>(std::min<Eigen::Index>(n - 1, 120));
    // The projected matrix is accumulated from the orthogonalisation coefficients
    // rather than assumed tridiagonal: degenerate spectra make the Krylov space
    // invariant early, and the iteration then continues from a fresh direction.
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd start(n);
    for (auto& x : start) x = gauss(rng);
    double theta = 0.0;
    for (int cycle = 0; cycle < 30; ++cycle) {
        Eigen::MatrixXd basis(n, m);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd v = start - s * s.dot(start);
        v.normalize();
        int used = 0;
        Eigen::VectorXd w;
        for (int j = 0; j < m; ++j) {
            basis.col(j) = v;
            used = j + 1;
            apply_symmetrized(k, s, v, w);
            w -= s * s.dot(w);
            const double scale = w.norm();
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd c = basis.leftCols(used).transpose() * w;
                h.col(j).head(used) += c;
                w -= basis.leftCols(used) * c;
            }
            if (j + 1 == m) break;
            double norm = w.norm();
            for (int tries = 0; norm <= 1e-8 * std::max(scale, 1.0) && tries < 5; ++tries) {
                for (auto& x : w) x = gauss(rng);
                w -= s * s.dot(w);
                for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w).eval();
                norm = w.norm();
            }
            if (norm <= 1e-12) break;
            v = w / norm;
        }
        // column j holds <v_i, A v_j> for i <= j; mirror the upper triangle
        Eigen::MatrixXd t = h.topLeftCorner(used, used);
        t.triangularView<Eigen::StrictlyLower>() = t.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        theta = es.eigenvalues()[used - 1];
        Eigen::VectorXd y = basis.leftCols(used) * es.eigenvectors().col(used - 1);
        y.normalize();
        apply_symmetrized(k, s, y, w);
        w -= s * s.dot(w);
        if ((w - theta * y).norm() < 1e-9) return theta;
        start = y;
    }
    fail(ErrorKind::internal, "Lanczos iteration did not reach the residual tolerance");
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    require(a.size() == b.size(), ErrorKind::dimension, "distribution length mismatch");
    return 0.5 * (a - b).cwiseAbs().sum();
}

std::vector<double> tv_curve(const Kernel& k, int start, int t_max) {
    require(t_max >= 0, ErrorKind::parameter, "t_max must be nonnegative");
    require(start >= 0 && static_cast<std::size_t>(start) < k.size(), ErrorKind::dimension, "start state out of range");
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k.size()));
    d[start] = 1.0;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t_max) + 1);
    out.push_back(total_variation(d, k.stationary()));
    for (int t = 1; t <= t_max; ++t) {
        d = k.apply_left(d);
        out.push_back(total_variation(d, k.stationary()));
    }
    return out;
}

}  // namespace mcx
