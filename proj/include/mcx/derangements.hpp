#pragma once

#include "mcx/comparison.hpp"
#include "mcx/kernel.hpp"
#include "mcx/permutation.hpp"
#include "mcx/scheme.hpp"

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace mcx {

/// Law of x (a_1, f_1)(a_2, f_2)...(a_m, f_m) with each a_s uniform over
/// [n] minus {f_s, ..., f_m}: the fixed points of x are slotted one at a time
/// into the nontrivial cycles. The identity maps to the uniform law on n-cycles.
struct InsertionMeasure {
    Permutation base;
    std::vector<std::pair<Permutation, Rational>> support;  // sorted by rank
};

/// `order` lists Fix(x) in insertion order; empty means ascending.
InsertionMeasure insertion_measure(const Permutation& x, std::span<const int> order = {});

struct OrderIndifferenceReport {
    bool holds = true;
    std::size_t orderings = 0;
    std::vector<int> first, second;  // a pair of orderings with different laws, if any
};

/// Compares the insertion measures of x under every ordering of Fix(x).
OrderIndifferenceReport order_indifference_check(const Permutation& x);

/// Paths from s to b (c_1, d_1)(c_2, d_2), where b = s (u v) fixes the extra
/// points d_1 < d_2 and `choice` lists the insertion points c. The fixed points of
/// s stay fixed along every path. Two-point differences route through a 2-step
/// path (or four 4-step detours around a 2-cycle); differences of two fixed points
/// use the pair of 3-step merge/split paths with weight 1/2 each.
struct ReducedFlow {
    enum class Kind { paths, coincide, search } kind = Kind::paths;
    std::vector<std::vector<Permutation>> paths;
    std::vector<Rational> weights;
};

ReducedFlow reduced_flow(const Permutation& s, const Permutation& b, const std::vector<int>& choice);

struct DerangementChains {
    int n = 0;
    Kernel k;  // half-lazy random transpositions on S_n
    Kernel q;  // Metropolized restriction to D_n
};

DerangementChains derangement_chains(int n);

/// Measures, couplings and flows relating Q on D_n to K on S_n, 5 <= n <= 7.
ExtensionScheme derangement_scheme(const DerangementChains& c);

struct WeightAudit {
    int n = 0;
    /// Per case 1..6 (index 0 unused): the largest total weight sum P * G that
    /// one ordered edge receives from generators of that case.
    std::array<Rational, 7> max_case_weight{};
    /// The per-case expressions from the weight count (index 0 unused).
    std::array<double, 7> case_bound{};
    std::array<std::size_t, 7> generators{};
    /// Sum over j of C(n,j) (j-1)!/(n-1)! and its closed form sum (n/j)/(n-j)!.
    Rational w_defining{0};
    Rational w_closed{0};
    /// Same count with the per-pair coupling mass (n-j-1)!/(n-1)! of the measures.
    Rational w_coupling_mass{0};
    bool w_relaxation_in_range = false;  // the 1 + 2(e - 1) relaxation needs n > 10
    double a_const = 0.0;                // congestion recomputed from the generators
    std::size_t max_path_steps = 0;
    std::size_t fallback_pairs = 0;      // pairs routed by shortest-path search
    double closed_form_total_bound = 0.0;
};

/// Re-enumerates the construction case by case and tallies per-edge weights.
/// Throws extension_mismatch when `s` does not relate D_n to S_n.
WeightAudit weight_audit(const DerangementChains& c, const ExtensionScheme& s);

Rational case4_sum_defining(int n);
Rational case4_sum_closed(int n);

struct DerangementComparison {
    int n = 0;
    double a_const = 0.0;
    double c1 = 0.0;
    double closed_form_bound = 0.0;       // 2(e+1)(2 + 6(n-2)/(n-3) + 3n(n+1)/((n-1)(n-2)))
    double asymptotic_constant = 0.0;  // 22(e+1)
    MasterCheck upper;
    double lower_min_slack = 0.0;   // min of E_K(fhat) - E_Q(f)/(2e), normalized by max(1, E_Q(f))
    std::size_t lower_trials = 0;
    bool lower_ok = false;
    double gap_k = 0.0;
    double gap_q = 0.0;
    double gap_bound = 0.0;         // gap_k / (c1 a_const)
    bool transfer_ok = false;
    bool paths_ok = false;          // length <= 4, all states derangements
};

DerangementComparison verify_derangement_comparison(const DerangementChains& c, const ExtensionScheme& s,
                                                    int samples = 2000, int lower_trials = 200,
                                                    std::uint64_t seed = 0);

}  // namespace mcx
