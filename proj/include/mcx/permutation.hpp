#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mcx {

/// Permutation of {0, ..., n-1} in one-line notation.
///
/// Products follow the left-to-right convention: (a * b)[i] = b[a[i]], so that
/// (1 3)(1 2) = (1 3 2). Right multiplication by a transposition (a b) swaps the
/// values a and b in the one-line array, which is how fixed points get slotted
/// into existing cycles.
class Permutation {
public:
    static constexpr int max_size = 12;

    Permutation() = default;

    static Permutation identity(int n);
    static Permutation from_one_line(std::span<const int> images);
    /// Cycles use 0-based elements; omitted elements are fixed.
    static Permutation from_cycles(int n, const std::vector<std::vector<int>>& cycles);
    static Permutation transposition(int n, int a, int b);
    /// Lexicographic rank of the one-line array among all n! permutations.
    static Permutation unrank(int n, std::uint32_t rank);

    int size() const noexcept { return n_; }
    int operator[](int i) const noexcept { return map_[static_cast<std::size_t>(i)]; }

    Permutation operator*(const Permutation& rhs) const;
    Permutation inverse() const;
    Permutation times_transposition(int a, int b) const;

    std::uint32_t fixed_mask() const noexcept;
    int fixed_count() const noexcept;
    bool is_derangement() const noexcept { return fixed_mask() == 0; }
    std::vector<int> fixed_points() const;
    /// Nontrivial and trivial cycles, each starting at its smallest element,
    /// ordered by that element.
    std::vector<std::vector<int>> cycles() const;
    /// Index of the cycle containing each element (same order as cycles()).
    std::array<std::int8_t, max_size> cycle_ids() const;
    bool is_transposition() const noexcept;

    std::uint32_t rank() const;
    /// 1-based one-line label, e.g. "2143".
    std::string label() const;
    /// 1-based cycle notation of the nontrivial cycles, e.g. "(1 3 2)(4 5)".
    std::string cycle_string() const;
    static Permutation from_label(const std::string& label);

    friend bool operator==(const Permutation&, const Permutation&) = default;
    friend auto operator<=>(const Permutation&, const Permutation&) = default;

private:
    std::uint8_t n_ = 0;
    std::array<std::uint8_t, max_size> map_{};
};

/// All permutations of size n in lexicographic order (index == rank).
std::vector<Permutation> all_permutations(int n);

std::uint64_t derangement_count(int n);

}  // namespace mcx
