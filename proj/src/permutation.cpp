#include "mcx/permutation.hpp"

#include "mcx/error.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace mcx {

Permutation Permutation::identity(int n) {
    require(n >= 0 && n <= max_size, ErrorKind::capacity, "permutation size " + std::to_string(n) + " unsupported");
    Permutation p;
    p.n_ = static_cast<std::uint8_t>(n);
    for (int i = 0; i < n; ++i) p.map_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    return p;
}

Permutation Permutation::from_one_line(std::span<const int> images) {
    int n = static_cast<int>(images.size());
    Permutation p = identity(n);
    std::uint32_t seen = 0;
    for (int i = 0; i < n; ++i) {
        int v = images[static_cast<std::size_t>(i)];
        require(v >= 0 && v < n && !(seen >> v & 1u), ErrorKind::parameter, "one-line array is not a bijection");
        seen |= 1u << v;
        p.map_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    }
    return p;
}

Permutation Permutation::from_cycles(int n, const std::vector<std::vector<int>>& cycles) {
    Permutation p = identity(n);
    std::uint32_t seen = 0;
    for (const auto& cycle : cycles) {
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            int a = cycle[k];
            int b = cycle[(k + 1) % cycle.size()];
            require(a >= 0 && a < n && !(seen >> a & 1u), ErrorKind::parameter, "cycles are not disjoint");
            seen |= 1u << a;
            p.map_[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(b);
        }
    }
    return p;
}

Permutation Permutation::transposition(int n, int a, int b) {
    require(a != b, ErrorKind::parameter, "transposition needs distinct elements");
    return from_cycles(n, {{a, b}});
}

Permutation Permutation::unrank(int n, std::uint32_t rank) {
    Permutation p = identity(n);
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < n; ++i) {
        std::uint32_t place = 1;
        for (int k = 2; k < n - i; ++k) place *= static_cast<std::uint32_t>(k);
        std::uint32_t digit = rank / place;
        rank %= place;
        require(digit < pool.size(), ErrorKind::range, "rank out of range");
        p.map_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(pool[digit]);
        pool.erase(pool.begin() + digit);
    }
    return p;
}

Permutation Permutation::operator*(const Permutation& rhs) const {
    require(n_ == rhs.n_, ErrorKind::dimension, "permutation sizes differ");
    Permutation out = *this;
    for (int i = 0; i < n_; ++i) out.map_[static_cast<std::size_t>(i)] = rhs.map_[map_[static_cast<std::size_t>(i)]];
    return out;
}

Permutation Permutation::inverse() const {
    Permutation out = *this;
    for (int i = 0; i < n_; ++i) out.map_[map_[static_cast<std::size_t>(i)]] = static_cast<std::uint8_t>(i);
    return out;
}

Permutation Permutation::times_transposition(int a, int b) const {
    Permutation out = *this;
    for (int i = 0; i < n_; ++i) {
        auto& v = out.map_[static_cast<std::size_t>(i)];
        if (v == a)
            v = static_cast<std::uint8_t>(b);
        else if (v == b)
            v = static_cast<std::uint8_t>(a);
    }
    return out;
}

std::uint32_t Permutation::fixed_mask() const noexcept {
    std::uint32_t mask = 0;
    for (int i = 0; i < n_; ++i)
        if (map_[static_cast<std::size_t>(i)] == i) mask |= 1u << i;
    return mask;
}

int Permutation::fixed_count() const noexcept { return std::popcount(fixed_mask()); }

std::vector<int> Permutation::fixed_points() const {
    std::vector<int> out;
    for (int i = 0; i < n_; ++i)
        if (map_[static_cast<std::size_t>(i)] == i) out.push_back(i);
    return out;
}

std::vector<std::vector<int>> Permutation::cycles() const {
    std::vector<std::vector<int>> out;
    std::uint32_t seen = 0;
    for (int start = 0; start < n_; ++start) {
        if (seen >> start & 1u) continue;
        std::vector<int> cycle;
        for (int i = start; !(seen >> i & 1u); i = map_[static_cast<std::size_t>(i)]) {
            seen |= 1u << i;
            cycle.push_back(i);
        }
        out.push_back(std::move(cycle));
    }
    return out;
}

std::array<std::int8_t, Permutation::max_size> Permutation::cycle_ids() const {
    std::array<std::int8_t, max_size> ids{};
    ids.fill(-1);
    std::int8_t next = 0;
    for (int start = 0; start < n_; ++start) {
        if (ids[static_cast<std::size_t>(start)] >= 0) continue;
        for (int i = start; ids[static_cast<std::size_t>(i)] < 0; i = map_[static_cast<std::size_t>(i)])
            ids[static_cast<std::size_t>(i)] = next;
        ++next;
    }
    return ids;
}

bool Permutation::is_transposition() const noexcept { return n_ - fixed_count() == 2; }

std::uint32_t Permutation::rank() const {
    std::uint32_t r = 0;
    for (int i = 0; i < n_; ++i) {
        std::uint32_t smaller = 0;
        for (int j = i + 1; j < n_; ++j)
            if (map_[static_cast<std::size_t>(j)] < map_[static_cast<std::size_t>(i)]) ++smaller;
        r = r * static_cast<std::uint32_t>(n_ - i) + smaller;
    }
    return r;
}

std::string Permutation::label() const {
    std::string s;
    for (int i = 0; i < n_; ++i) {
        int v = map_[static_cast<std::size_t>(i)] + 1;
        if (n_ > 9 && i > 0) s.push_back(',');
        s += std::to_string(v);
    }
    return s;
}

Permutation Permutation::from_label(const std::string& label) {
    std::vector<int> images;
    if (label.find(',') != std::string::npos) {
        std::size_t pos = 0;
        while (pos <= label.size()) {
            auto next = label.find(',', pos);
            images.push_back(std::stoi(label.substr(pos, next - pos)) - 1);
            if (next == std::string::npos) break;
            pos = next + 1;
        }
    } else {
        for (char c : label) {
            require(c >= '1' && c <= '9', ErrorKind::parameter, "bad permutation label '" + label + "'");
            images.push_back(c - '1');
        }
    }
    return from_one_line(images);
}

std::string Permutation::cycle_string() const {
    std::string s;
    for (const auto& cycle : cycles()) {
        if (cycle.size() < 2) continue;
        s.push_back('(');
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            if (k) s.push_back(' ');
            s += std::to_string(cycle[k] + 1);
        }
        s.push_back(')');
    }
    return s.empty() ? "()" : s;
}

std::vector<Permutation> all_permutations(int n) {
    require(n >= 1 && n <= 10, ErrorKind::capacity, "enumeration of S_" + std::to_string(n) + " unsupported");
    std::vector<int> line(static_cast<std::size_t>(n));
    std::iota(line.begin(), line.end(), 0);
    std::vector<Permutation> out;
    do {
        out.push_back(Permutation::from_one_line(line));
    } while (std::next_permutation(line.begin(), line.end()));
    return out;
}

std::uint64_t derangement_count(int n) {
    // D_0 = 1, D_1 = 0, D_n = (n-1)(D_{n-1} + D_{n-2})
    std::uint64_t prev = 1, cur = 0;
    if (n == 0) return 1;
    for (int k = 2; k <= n; ++k) {
        std::uint64_t next = static_cast<std::uint64_t>(k - 1) * (cur + prev);
        prev = cur;
        cur = next;
    }
    return cur;
}

}  // namespace mcx
