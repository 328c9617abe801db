#pragma once

#include "mcx/state_space.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mcx {

/// Structural tolerance used for row sums, stationarity and detailed balance.
inline constexpr double kStructuralTol = 1e-12;
/// Above this size dense eigensolves are refused.
inline constexpr std::size_t kDenseCapacity = 5100;

struct Triplet {
    int row;
    int col;
    double value;
};

struct KernelFlags {
    bool reversible = true;
    bool half_lazy = false;
};

/// Finite Markov kernel with its stationary distribution, stored as CSR rows.
///
/// Immutable after construction; safe to share between readers.
class Kernel {
public:
    /// Duplicate (row, col) entries are summed. Throws ErrorKind::parameter when
    /// the declared invariants fail.
    static Kernel from_triplets(SpacePtr space, std::vector<Triplet> triplets, Eigen::VectorXd stationary,
                                KernelFlags flags);

    const StateSpace& space() const { return *space_; }
    const SpacePtr& space_ptr() const { return space_; }
    std::size_t size() const { return space_->size(); }
    std::size_t nonzeros() const { return cols_.size(); }

    std::span<const int> cols(int row) const;
    std::span<const double> values(int row) const;
    /// Offset of row x in the CSR arrays; entry (x, cols(x)[k]) has global index offset(x) + k.
    std::size_t offset(int row) const { return row_ptr_[static_cast<std::size_t>(row)]; }
    /// Global CSR index of entry (x, y), or -1 when P(x, y) is structurally zero.
    long entry_index(int x, int y) const;
    double operator()(int x, int y) const;

    const Eigen::VectorXd& stationary() const { return pi_; }
    bool reversible() const { return flags_.reversible; }
    bool half_lazy() const { return flags_.half_lazy; }
    KernelFlags flags() const { return flags_; }

    /// (P f)(x) = sum_y P(x, y) f(y).
    Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
    /// (d P)(y) = sum_x d(x) P(x, y).
    Eigen::VectorXd apply_left(const Eigen::VectorXd& d) const;

    std::vector<Triplet> triplets() const;
    Eigen::MatrixXd dense() const;

    /// Max residuals of the kernel invariants, for reporting.
    double row_sum_residual() const;
    double stationarity_residual() const;
    double detailed_balance_residual() const;
    double min_holding() const;

private:
    SpacePtr space_;
    std::vector<std::size_t> row_ptr_;
    std::vector<int> cols_;
    std::vector<double> vals_;
    Eigen::VectorXd pi_;
    KernelFlags flags_;
};

// Builders -----------------------------------------------------------------

/// Index of torus vertex (i, j) on a side x side torus.
inline int torus_index(int side, int i, int j) {
    auto wrap = [side](int v) { return ((v % side) + side) % side; };
    return wrap(i) * side + wrap(j);
}

/// Half-lazy simple random walk on the side x side torus (d = 4).
Kernel build_torus_srw(int side);

/// Metropolis chain of a half-lazy d-regular SRW with uniform target on `kept`.
/// States keep the base labels, ordered as in `kept`.
Kernel metropolize_restriction(const Kernel& base, std::span<const int> kept);

/// Random transposition walk on S_n; states are ordered by lexicographic rank.
Kernel build_random_transposition(int n, bool lazy = true);

/// Metropolized restriction of the half-lazy random transposition walk to D_n.
Kernel restrict_to_derangements(int n);

/// Kernel P(x, y) = pi(y) (complete uniformization / independent sampling).
Kernel build_product_kernel(SpacePtr space, const Eigen::VectorXd& pi);

Kernel build_identity_kernel(SpacePtr space, const Eigen::VectorXd& pi);

/// Non-lazy simple random walk on the cycle Z_n.
Kernel build_cycle_srw(int n);

/// True when the graph of positive off-diagonal entries is connected.
bool is_connected(const Kernel& k);

// Spectra -------------------------------------------------------------------

struct Spectrum {
    std::vector<double> eigenvalues;  // descending
    /// Right eigenvectors of P (columns, same order), present when requested.
    Eigen::MatrixXd eigenvectors;

    std::size_t size() const { return eigenvalues.size(); }
};

/// All eigenvalues of a reversible kernel via a dense symmetric eigensolve of
/// D^{1/2} P D^{-1/2}. Refuses non-reversible kernels and sizes above kDenseCapacity.
Spectrum spectrum(const Kernel& k, bool with_vectors = false);

/// Second-largest eigenvalue beta_1. Dense below kDenseCapacity, otherwise a
/// restarted Lanczos iteration on the deflated symmetrized operator with a
/// residual check.
double second_eigenvalue(const Kernel& k);

/// The iterative branch of second_eigenvalue, usable at any size.
double lanczos_second_eigenvalue(const Kernel& k);

/// Exact ||delta_start P^t - pi||_TV for t = 0..t_max.
std::vector<double> tv_curve(const Kernel& k, int start, int t_max);

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace mcx
