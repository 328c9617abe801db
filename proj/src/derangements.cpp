#include "mcx/derangements.hpp"

#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/random.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <unordered_map>

namespace mcx {

namespace {

std::int64_t binomial(int n, int k) {
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

bool adjacent(const Permutation& a, const Permutation& b) { return (a.inverse() * b).is_transposition(); }

std::vector<int> moved_points(const Permutation& p) {
    std::vector<int> out;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] != i) out.push_back(i);
    return out;
}

/// All products (a_1, l_1)...(a_r, l_r) with a_s outside {l_s, ..., l_r}.
std::vector<Permutation> insertion_products(int n, const std::vector<int>& order) {
    std::vector<Permutation> out;
    std::function<void(std::size_t, const Permutation&)> rec = [&](std::size_t s, const Permutation& acc) {
        if (s == order.size()) {
            out.push_back(acc);
            return;
        }
        std::uint32_t banned = 0;
        for (std::size_t t = s; t < order.size(); ++t) banned |= 1u << order[t];
        for (int a = 0; a < n; ++a)
            if (!(banned >> a & 1u)) rec(s + 1, acc.times_transposition(a, order[s]));
    };
    rec(0, Permutation::identity(n));
    return out;
}

void require_size(int n) {
    require(n >= 4, ErrorKind::capacity, "insertion measures need n >= 4");
    require(n <= 8, ErrorKind::capacity, "insertion measures support n <= 8");
}

struct PathRec {
    std::array<int, 5> states{};
    int len = 0;  // number of states
    Rational g{1};
};

/// Shared enumeration of the construction. For every generator (a K-edge with
/// at least one end outside D_n, or an inner edge) it reports the case, the
/// mass of the pair, the R-term factor and the weighted paths.
class Construction {
public:
    explicit Construction(const DerangementChains& c) : n_(c.n), q_(c.q) {
        require(n_ >= 5, ErrorKind::invalid_scheme, "the 2-cycle rerouting needs n >= 5");
        require(n_ <= 7, ErrorKind::capacity, "the full derangement scheme is materialized for n <= 7");
        require(q_.size() < 2048, ErrorKind::capacity, "inner space too large for path packing");
        perms_ = all_permutations(n_);
        inner_of_rank_.assign(perms_.size(), -1);
        for (std::size_t r = 0; r < perms_.size(); ++r)
            if (perms_[r].is_derangement()) {
                auto id = q_.space().find(perms_[r].label());
                require(id.has_value(), ErrorKind::extension_mismatch, "inner chain is not on D_n");
                inner_of_rank_[r] = *id;
            }
    }

    int n() const { return n_; }
    const std::vector<Permutation>& perms() const { return perms_; }
    int inner(const Permutation& p) const { return inner_of_rank_[p.rank()]; }

    /// 1 / #(insertion sequences) for a permutation with m fixed points, m <= n-2.
    Rational inverse_count(int m) const { return Rational(factorial(n_ - m - 1), factorial(n_ - 1)); }

    using PathFn = std::function<void(int kind, const Rational& p, int factor, bool mirrored,
                                      const std::vector<PathRec>& paths)>;
    using CouplingFn = std::function<void(int s, int b, int sigma, int tau, const Rational& w)>;

    void run(const PathFn& on_paths, const CouplingFn& on_coupling) {
        std::vector<PathRec> one(1);
        for (std::size_t r = 0; r < perms_.size(); ++r) {
            const Permutation& x = perms_[r];
            const int xi = inner_of_rank_[r];
            for (int u = 0; u < n_; ++u)
                for (int v = u + 1; v < n_; ++v) {
                    const Permutation y = x.times_transposition(u, v);
                    const std::uint32_t ry = y.rank();
                    const int yi = inner_of_rank_[ry];
                    if (xi >= 0 && yi >= 0) {
                        one[0].states[0] = xi;
                        one[0].states[1] = yi;
                        one[0].len = 2;
                        one[0].g = Rational(1);
                        on_paths(1, Rational(1), 1, false, one);
                    } else if (xi >= 0) {
                        generate(x, y, 1 + y.fixed_count(), 2, false, on_paths, nullptr);
                    } else if (yi < 0 && r < ry) {
                        const bool x_small = x.fixed_count() <= y.fixed_count();
                        const Permutation& s = x_small ? x : y;
                        const Permutation& b = x_small ? y : x;
                        const int kind = 4 + b.fixed_count() - s.fixed_count();
                        if (b.fixed_count() == n_) {
                            diagonal(s, b, on_coupling);
                        } else {
                            generate(s, b, kind, 1, true, on_paths, on_coupling);
                        }
                    }
                }
        }
    }

    std::size_t fallback_pairs() const { return fallback_pairs_; }

private:
    const std::vector<Permutation>& products_for(const std::vector<int>& order) {
        std::uint32_t mask = 0;
        for (int f : order) mask |= 1u << f;
        auto it = product_cache_.find(mask);
        if (it == product_cache_.end()) it = product_cache_.emplace(mask, insertion_products(n_, order)).first;
        return it->second;
    }

    // P_{(i,j), id} is supported on the diagonal: P_id equals P_{(i,j)}.
    void diagonal(const Permutation& s, const Permutation& b, const CouplingFn& on_coupling) {
        if (!on_coupling) return;
        const Rational w = inverse_count(s.fixed_count());
        for (const auto& pi : products_for(s.fixed_points())) {
            const int sigma = inner(s * pi);
            on_coupling(static_cast<int>(s.rank()), static_cast<int>(b.rank()), sigma, sigma, w);
        }
    }

    std::vector<int> search_path(int from, int to) const {
        std::vector<int> path{from};
        std::function<bool(int, int)> dfs = [&](int cur, int rem) {
            if (rem == 0) return cur == to;
            for (int y : q_.cols(cur)) {
                if (y == cur || std::find(path.begin(), path.end(), y) != path.end()) continue;
                path.push_back(y);
                if (dfs(y, rem - 1)) return true;
                path.pop_back();
            }
            return false;
        };
        for (int len = 1; len <= 6; ++len)
            if (dfs(from, len)) return path;
        fail(ErrorKind::internal, "no short derangement path between a coupled pair");
    }

    void generate(const Permutation& s, const Permutation& b, int kind, int factor, bool mirrored,
                  const PathFn& on_paths, const CouplingFn& on_coupling) {
        const std::vector<int> f = s.fixed_points();
        std::vector<int> d;
        for (int t : b.fixed_points())
            if (s[t] != t) d.push_back(t);
        std::uint32_t fmask = 0;
        for (int t : f) fmask |= 1u << t;
        const Rational w = inverse_count(b.fixed_count());
        const auto& products = products_for(f);
        std::vector<std::vector<int>> choices{{}};
        for (std::size_t t = 0; t < d.size(); ++t) {
            std::uint32_t banned = fmask;
            for (std::size_t u = t; u < d.size(); ++u) banned |= 1u << d[u];
            std::vector<std::vector<int>> next;
            for (const auto& prefix : choices)
                for (int a = 0; a < n_; ++a)
                    if (!(banned >> a & 1u)) {
                        next.push_back(prefix);
                        next.back().push_back(a);
                    }
            choices = std::move(next);
        }
        std::vector<PathRec> recs;
        for (const auto& choice : choices) {
            Permutation wt = b;
            for (std::size_t t = 0; t < d.size(); ++t) wt = wt.times_transposition(choice[t], d[t]);
            const ReducedFlow red = reduced_flow(s, b, choice);
            for (const auto& pi : products) {
                const int sigma = inner(s * pi);
                const int tau = inner(wt * pi);
                require(sigma >= 0 && tau >= 0, ErrorKind::internal, "coupled state is not a derangement");
                if (on_coupling) on_coupling(static_cast<int>(s.rank()), static_cast<int>(b.rank()), sigma, tau, w);
                if (!on_paths || red.kind == ReducedFlow::Kind::coincide) continue;
                recs.clear();
                if (red.kind == ReducedFlow::Kind::search) {
                    ++fallback_pairs_;
                    auto path = search_path(sigma, tau);
                    require(path.size() <= 5, ErrorKind::internal, "rerouted path longer than four steps");
                    PathRec rec;
                    rec.len = static_cast<int>(path.size());
                    std::copy(path.begin(), path.end(), rec.states.begin());
                    recs.push_back(rec);
                } else {
                    for (std::size_t p = 0; p < red.paths.size(); ++p) {
                        PathRec rec;
                        rec.len = static_cast<int>(red.paths[p].size());
                        rec.g = red.weights[p];
                        for (int t = 0; t < rec.len; ++t) {
                            const int id = inner(red.paths[p][static_cast<std::size_t>(t)] * pi);
                            require(id >= 0, ErrorKind::internal,
                                    "flow path leaves D_n at " + (red.paths[p][static_cast<std::size_t>(t)] * pi).cycle_string());
                            rec.states[static_cast<std::size_t>(t)] = id;
                        }
                        recs.push_back(rec);
                    }
                }
                on_paths(kind, w, factor, false, recs);
                if (mirrored) {
                    for (auto& rec : recs) std::reverse(rec.states.begin(), rec.states.begin() + rec.len);
                    on_paths(kind, w, factor, true, recs);
                }
            }
        }
    }

    int n_;
    const Kernel& q_;
    std::vector<Permutation> perms_;
    std::vector<int> inner_of_rank_;
    std::unordered_map<std::uint32_t, std::vector<Permutation>> product_cache_;
    std::size_t fallback_pairs_ = 0;
};

std::uint64_t pack(const PathRec& rec) {
    std::uint64_t key = static_cast<std::uint64_t>(rec.len);
    for (int t = 0; t < rec.len; ++t) key |= static_cast<std::uint64_t>(rec.states[static_cast<std::size_t>(t)]) << (3 + 11 * t);
    return key;
}

std::vector<int> unpack(std::uint64_t key) {
    const int len = static_cast<int>(key & 7u);
    std::vector<int> out(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) out[static_cast<std::size_t>(t)] = static_cast<int>(key >> (3 + 11 * t) & 0x7ffu);
    return out;
}

}  // namespace

ReducedFlow reduced_flow(const Permutation& s, const Permutation& b, const std::vector<int>& choice) {
    require(s.size() == b.size() && adjacent(s, b), ErrorKind::parameter, "reduced flow needs adjacent permutations");
    std::vector<int> d;
    for (int t : b.fixed_points())
        if (s[t] != t) d.push_back(t);
    require(d.size() == choice.size() && s.fixed_count() + static_cast<int>(d.size()) == b.fixed_count(),
            ErrorKind::parameter, "b must fix everything s fixes, with one insertion point per extra fixed point");
    Permutation wt = b;
    for (std::size_t t = 0; t < d.size(); ++t) wt = wt.times_transposition(choice[t], d[t]);
    ReducedFlow out;
    if (d.empty()) {
        out.paths.push_back({s, wt});
        out.weights.push_back(Rational(1));
        return out;
    }
    if (d.size() == 1) {
        const int i = d[0], j = s[i];
        const int k = choice[0];
        if (k == j) {
            out.kind = ReducedFlow::Kind::coincide;
            return out;
        }
        const auto cyc = b.cycle_ids();
        if (cyc[static_cast<std::size_t>(j)] != cyc[static_cast<std::size_t>(k)] || b[j] != k) {
            const Permutation m1 = s.times_transposition(j, k);
            out.paths.push_back({s, m1, m1.times_transposition(i, j)});
            out.weights.push_back(Rational(1));
        } else if (b[k] != j) {
            const Permutation end = b.times_transposition(i, k);
            out.paths.push_back({s, end.times_transposition(k, j), end});
            out.weights.push_back(Rational(1));
        } else {
            std::vector<int> hs;
            for (int h : moved_points(b))
                if (h != j && h != k) hs.push_back(h);
            if (hs.empty()) {
                out.kind = ReducedFlow::Kind::search;
                return out;
            }
            for (int h : hs) {
                const Permutation w1 = s.times_transposition(i, h);
                const Permutation w2 = w1.times_transposition(j, h);
                const Permutation w3 = w2.times_transposition(k, h);
                const Permutation w4 = w3.times_transposition(i, h);
                out.paths.push_back({s, w1, w2, w3, w4});
                out.weights.push_back(Rational(1, static_cast<std::int64_t>(hs.size())));
            }
        }
    } else {
        const int alpha = d[0], beta = d[1];
        if (adjacent(s, wt)) {
            out.paths.push_back({s, wt});
            out.weights.push_back(Rational(1));
            return out;
        }
        const int pp = choice[0], qq = choice[1];
        const auto cyc = b.cycle_ids();
        std::vector<Permutation> path1, path2;
        if (cyc[static_cast<std::size_t>(pp)] != cyc[static_cast<std::size_t>(qq)]) {
            const Permutation a1 = wt.times_transposition(beta, pp);
            const Permutation a2 = wt.times_transposition(alpha, qq);
            path1 = {wt, a1, a1.times_transposition(alpha, qq), s};
            path2 = {wt, a2, a2.times_transposition(beta, pp), s};
        } else {
            const Permutation m = wt.times_transposition(alpha, beta);
            path1 = {wt, m, m.times_transposition(pp, beta), s};
            path2 = {wt, m, m.times_transposition(qq, alpha), s};
        }
        std::reverse(path1.begin(), path1.end());
        std::reverse(path2.begin(), path2.end());
        out.paths.push_back(std::move(path1));
        out.paths.push_back(std::move(path2));
        out.weights.push_back(Rational(1, 2));
        out.weights.push_back(Rational(1, 2));
    }
    for (const auto& path : out.paths) {
        require(path.front() == s && path.back() == wt, ErrorKind::internal,
                "reduced path does not join " + s.cycle_string() + " to " + wt.cycle_string());
        for (std::size_t t = 0; t + 1 < path.size(); ++t)
            require(adjacent(path[t], path[t + 1]), ErrorKind::internal,
                    "consecutive path states differ by more than a transposition: " + path[t].cycle_string() +
                        " -> " + path[t + 1].cycle_string());
    }
    return out;
}

InsertionMeasure insertion_measure(const Permutation& x, std::span<const int> order) {
    const int n = x.size();
    require_size(n);
    InsertionMeasure m{x, {}};
    if (x.is_derangement()) {
        m.support.push_back({x, Rational(1)});
        return m;
    }
    if (x.fixed_count() == n) {
        const Rational w(1, factorial(n - 1));
        for (const auto& p : all_permutations(n)) {
            auto cycles = p.cycles();
            if (cycles.size() == 1) m.support.push_back({p, w});
        }
        return m;
    }
    std::vector<int> fix = x.fixed_points();
    std::vector<int> ord(order.begin(), order.end());
    if (ord.empty()) ord = fix;
    std::vector<int> sorted = ord;
    std::sort(sorted.begin(), sorted.end());
    require(sorted == fix, ErrorKind::parameter, "insertion order must list the fixed points of x");
    const Rational w(factorial(n - x.fixed_count() - 1), factorial(n - 1));
    std::map<std::uint32_t, std::pair<Permutation, Rational>> acc;
    for (const auto& pi : insertion_products(n, ord)) {
        Permutation sigma = x * pi;
        auto [it, fresh] = acc.try_emplace(sigma.rank(), sigma, Rational(0));
        it->second.second += w;
    }
    for (auto& [rank, entry] : acc) m.support.push_back(entry);
    return m;
}

OrderIndifferenceReport order_indifference_check(const Permutation& x) {
    OrderIndifferenceReport rep;
    std::vector<int> ord = x.fixed_points();
    require(!ord.empty() && static_cast<int>(ord.size()) <= x.size() - 2, ErrorKind::parameter,
            "order indifference needs 1 <= |Fix(x)| <= n-2");
    const auto reference = insertion_measure(x, ord);
    const std::vector<int> first = ord;
    do {
        ++rep.orderings;
        auto m = insertion_measure(x, ord);
        const bool same = m.support.size() == reference.support.size() &&
                          std::equal(m.support.begin(), m.support.end(), reference.support.begin(),
                                     [](const auto& a, const auto& b) { return a.first == b.first && a.second == b.second; });
        if (!same && rep.holds) {
            rep.holds = false;
            rep.first = first;
            rep.second = ord;
        }
    } while (std::next_permutation(ord.begin(), ord.end()));
    return rep;
}

DerangementChains derangement_chains(int n) {
    require(n >= 4, ErrorKind::capacity, "derangement chains need n >= 4");
    require(n <= 7, ErrorKind::capacity, "derangement chains are built for n <= 7");
    return {n, build_random_transposition(n, true), restrict_to_derangements(n)};
}

ExtensionScheme derangement_scheme(const DerangementChains& c) {
    Construction con(c);
    ExtensionScheme s(c.q.space_ptr(), c.k.space_ptr());
    const int n = c.n;

    for (const auto& x : con.perms()) {
        if (x.is_derangement()) continue;
        auto m = insertion_measure(x);
        std::vector<MeasureEntry> entries;
        entries.reserve(m.support.size());
        for (const auto& [sigma, w] : m.support) entries.push_back({con.inner(sigma), w});
        s.set_measure(static_cast<int>(x.rank()), std::move(entries));
    }

    std::unordered_map<std::uint64_t, Rational> paths;
    std::map<std::pair<int, int>, std::vector<CouplingEntry>> couplings;
    con.run(
        [&](int, const Rational& p, int factor, bool, const std::vector<PathRec>& recs) {
            const Rational coef = p * Rational(factor);
            for (const auto& rec : recs) {
                auto [it, fresh] = paths.try_emplace(pack(rec), Rational(0));
                it->second += coef * rec.g;
            }
        },
        [&](int sr, int br, int sigma, int tau, const Rational& w) { couplings[{sr, br}].push_back({sigma, tau, w}); });

    for (auto& [key, entries] : couplings) s.set_coupling(key.first, key.second, std::move(entries));
    for (const auto& [key, w] : paths) s.flows().add(unpack(key), w);
    s.flows().finalize();
    s.flows().normalize();
    if (con.fallback_pairs() > 0)
        s.notes().push_back(std::to_string(con.fallback_pairs()) +
                            " pairs around a 2-cycle with no third moved point were routed by shortest-path search (n=" +
                            std::to_string(n) + ")");
    return s;
}

Rational case4_sum_defining(int n) {
    Rational w(0);
    for (int j = 1; j <= n - 2; ++j) w += Rational(binomial(n, j) * factorial(j - 1), factorial(n - 1));
    return w;
}

Rational case4_sum_closed(int n) {
    Rational w(0);
    for (int j = 1; j <= n - 2; ++j) w += Rational(n, j) / Rational(factorial(n - j));
    return w;
}

WeightAudit weight_audit(const DerangementChains& c, const ExtensionScheme& s) {
    require(s.outer().labels() == c.k.space().labels() && s.inner().labels() == c.q.space().labels(),
            ErrorKind::extension_mismatch, "scheme does not relate D_n to S_n");
    Construction con(c);
    const int n = c.n;
    const auto& q = c.q;
    std::vector<std::array<Rational, 7>> weight(q.nonzeros());
    std::vector<double> load(q.nonzeros(), 0.0);
    WeightAudit a;
    a.n = n;
    con.run(
        [&](int kind, const Rational& p, int factor, bool mirrored, const std::vector<PathRec>& recs) {
            if (!mirrored) ++a.generators[static_cast<std::size_t>(kind)];
            const double coef = to_double(p) * factor;
            for (const auto& rec : recs) {
                const Rational pg = p * rec.g;
                const double steps = rec.len - 1;
                a.max_path_steps = std::max(a.max_path_steps, static_cast<std::size_t>(rec.len - 1));
                for (int t = 0; t + 1 < rec.len; ++t) {
                    const long e = q.entry_index(rec.states[static_cast<std::size_t>(t)], rec.states[static_cast<std::size_t>(t + 1)]);
                    require(e >= 0, ErrorKind::internal, "audited path leaves the edges of Q");
                    weight[static_cast<std::size_t>(e)][static_cast<std::size_t>(kind)] += pg;
                    load[static_cast<std::size_t>(e)] += coef * to_double(rec.g) * steps;
                }
            }
        },
        nullptr);
    a.fallback_pairs = con.fallback_pairs();
    for (std::size_t e = 0; e < weight.size(); ++e)
        for (std::size_t k = 1; k < 7; ++k) a.max_case_weight[k] = std::max(a.max_case_weight[k], weight[e][k]);

    // K(x,y) mu(x) over Q(q,r) nu(q) is the same for every edge.
    const double kmu = c.k.stationary()[0] / (static_cast<double>(n) * (n - 1));
    for (int x = 0; x < static_cast<int>(q.size()); ++x) {
        auto cols = q.cols(x);
        auto vals = q.values(x);
        for (std::size_t t = 0; t < cols.size(); ++t) {
            if (cols[t] == x) continue;
            const double cap = vals[t] * q.stationary()[x];
            a.a_const = std::max(a.a_const, load[q.offset(x) + t] * kmu / cap);
        }
    }

    const double e = std::numbers::e;
    const double nn = n;
    a.case_bound[1] = 1.0;
    a.case_bound[2] = 6.0 * (nn - 2) / (nn - 3);
    a.case_bound[3] = 1.0 + 6.0 * nn * (nn + 1) / (2.0 * (nn - 1) * (nn - 2));
    a.case_bound[4] = 2.0 * e + 1.0;
    a.case_bound[5] = 6.0 * (2.0 * e + 1.0) * (nn - 2) / (nn - 3);
    a.case_bound[6] = (2.0 * e + 1.0) * (1.0 + 3.0 * nn * (nn + 1) / ((nn - 1) * (nn - 2)));
    a.w_defining = case4_sum_defining(n);
    a.w_closed = case4_sum_closed(n);
    for (int j = 1; j <= n - 2; ++j) a.w_coupling_mass += Rational(binomial(n, j) * factorial(n - j - 1), factorial(n - 1));
    a.w_relaxation_in_range = n > 10;
    a.closed_form_total_bound = 2.0 * (e + 1.0) * (2.0 + 6.0 * (nn - 2) / (nn - 3) + 3.0 * nn * (nn + 1) / ((nn - 1) * (nn - 2)));
    return a;
}

DerangementComparison verify_derangement_comparison(const DerangementChains& c, const ExtensionScheme& s, int samples,
                                                    int lower_trials, std::uint64_t seed) {
    DerangementComparison r;
    const int n = c.n;
    const double e = std::numbers::e;
    const double nn = n;
    r.n = n;
    auto rep = congestion_general(s, c.k, c.q);
    r.a_const = rep.a_const;
    r.c1 = rep.c1;
    r.closed_form_bound = 2.0 * (e + 1.0) * (2.0 + 6.0 * (nn - 2) / (nn - 3) + 3.0 * nn * (nn + 1) / ((nn - 1) * (nn - 2)));
    r.asymptotic_constant = 22.0 * (e + 1.0);
    r.upper = check_master_inequality(s, c.k, c.q, r.a_const, samples, seed);

    r.paths_ok = s.flows().max_steps() <= 4;  // states are inner indices, hence derangements

    // Lower inequality E_K(fhat) >= E_Q(f) / (2e) for the scheme extension, random
    // extensions and the energy-minimizing extension.
    const auto& k = c.k;
    const int outer = static_cast<int>(k.size());
    std::vector<int> outside;
    std::vector<int> slot(static_cast<std::size_t>(outer), -1);
    for (int x = 0; x < outer; ++x)
        if (!s.is_inner(x)) {
            slot[static_cast<std::size_t>(x)] = static_cast<int>(outside.size());
            outside.push_back(x);
        }
    // Minimizer of E_K over extensions: L_oo g = -L_oi f with L = pi (I - K).
    std::vector<Eigen::Triplet<double>> lt;
    for (int x : outside) {
        auto cols = k.cols(x);
        auto vals = k.values(x);
        double diag = 0.0;
        for (std::size_t t = 0; t < cols.size(); ++t) {
            if (cols[t] == x) continue;
            diag += vals[t];
            if (slot[static_cast<std::size_t>(cols[t])] >= 0)
                lt.emplace_back(slot[static_cast<std::size_t>(x)], slot[static_cast<std::size_t>(cols[t])], -vals[t]);
        }
        lt.emplace_back(slot[static_cast<std::size_t>(x)], slot[static_cast<std::size_t>(x)], diag);
    }
    Eigen::SparseMatrix<double> loo(static_cast<Eigen::Index>(outside.size()), static_cast<Eigen::Index>(outside.size()));
    loo.setFromTriplets(lt.begin(), lt.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(loo);
    require(solver.info() == Eigen::Success, ErrorKind::internal, "energy-minimizing extension solve failed");

    auto rng = substream(seed, 7);
    std::normal_distribution<double> g;
    r.lower_min_slack = std::numeric_limits<double>::infinity();
    const double inv2e = 1.0 / (2.0 * e);
    auto record = [&](const Eigen::VectorXd& fhat, double eq) {
        const double slack = (dirichlet(fhat, k) - inv2e * eq) / std::max(1.0, eq);
        r.lower_min_slack = std::min(r.lower_min_slack, slack);
        ++r.lower_trials;
    };
    for (int t = 0; t < lower_trials; ++t) {
        Eigen::VectorXd f(static_cast<Eigen::Index>(c.q.size()));
        for (auto& v : f) v = g(rng);
        const double eq = dirichlet(f, c.q);
        Eigen::VectorXd fhat = extend(f, s);
        record(fhat, eq);
        Eigen::VectorXd rnd = fhat;
        for (int x : outside) rnd[x] = g(rng);
        record(rnd, eq);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(outside.size()));
        for (int x : outside) {
            double acc = 0.0;
            auto cols = k.cols(x);
            auto vals = k.values(x);
            for (std::size_t u = 0; u < cols.size(); ++u)
                if (cols[u] != x && s.is_inner(cols[u])) acc += vals[u] * fhat[cols[u]];
            rhs[slot[static_cast<std::size_t>(x)]] = acc;
        }
        Eigen::VectorXd gmin = solver.solve(rhs);
        Eigen::VectorXd best = fhat;
        for (int x : outside) best[x] = gmin[slot[static_cast<std::size_t>(x)]];
        record(best, eq);
    }
    r.lower_ok = r.lower_min_slack >= -1e-10;

    r.gap_k = spectral_gap(c.k);
    r.gap_q = spectral_gap(c.q);
    r.gap_bound = r.gap_k / (r.c1 * r.a_const);
    r.transfer_ok = r.gap_q >= r.gap_bound - 1e-12;
    return r;
}

}  // namespace mcx
