#include "mcx/torus.hpp"

#include "mcx/error.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <sstream>

namespace mcx {

namespace {

int wrap(int v, int side) { return ((v % side) + side) % side; }

int torus_distance_1d(int a, int b, int side) {
    const int d = wrap(a - b, side);
    return std::min(d, side - d);
}

struct Vec {
    int i, j;
};

constexpr std::array<Vec, 4> kDirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

Vec rot(Vec d) { return {-d.j, d.i}; }

void set_neighbour_measures(ExtensionScheme& s, const TorusInstance& t) {
    const Rational quarter(1, 4);
    for (auto [i, j] : t.removed) {
        std::vector<MeasureEntry> m;
        for (auto d : kDirs) {
            auto id = s.inner().find(std::to_string(wrap(i + d.i, t.side)) + "," + std::to_string(wrap(j + d.j, t.side)));
            require(id.has_value(), ErrorKind::invalid_scheme, "a hole has a removed neighbour");
            m.push_back({*id, quarter});
        }
        s.set_measure(torus_index(t.side, i, j), std::move(m));
    }
}

// Calls fn(case, coefficient, paths) for every generator of the holes scheme, with
// paths as (inner state sequence, weight) and coefficient relative to K(x,y) mu(x).
template <class Fn>
void for_each_holes_generator(const TorusInstance& t, const ExtensionScheme& s, Fn&& fn) {
    const int side = t.side;
    auto in = [&](int i, int j) -> int {
        return s.inner_of(torus_index(side, i, j));
    };
    for (int ai = 0; ai < side; ++ai) {
        for (int aj = 0; aj < side; ++aj) {
            const int a = in(ai, aj);
            if (a < 0) continue;
            for (auto d1 : kDirs) {
                const int yi = ai + d1.i, yj = aj + d1.j;
                const int y = in(yi, yj);
                if (y >= 0) {
                    std::vector<std::pair<std::vector<int>, Rational>> paths{{{a, y}, Rational(1)}};
                    fn(0, Rational(1), paths);
                    continue;
                }
                for (auto d2 : kDirs) {
                    if (d2.i == -d1.i && d2.j == -d1.j) continue;  // back to a
                    const Rational coef(1, 2);                      // 2 * P_y[b]
                    const int b = in(yi + d2.i, yj + d2.j);
                    if (d2.i == d1.i && d2.j == d1.j) {
                        std::vector<std::pair<std::vector<int>, Rational>> paths;
                        for (auto e : {rot(d1), Vec{-rot(d1).i, -rot(d1).j}}) {
                            paths.push_back({{a, in(ai + e.i, aj + e.j), in(ai + e.i + d1.i, aj + e.j + d1.j),
                                              in(ai + e.i + 2 * d1.i, aj + e.j + 2 * d1.j), b},
                                             Rational(1, 2)});
                        }
                        fn(2, coef, paths);
                    } else {
                        std::vector<std::pair<std::vector<int>, Rational>> paths{
                            {{a, in(ai + d2.i, aj + d2.j), b}, Rational(1)}};
                        fn(1, coef, paths);
                    }
                }
            }
        }
    }
}

}  // namespace

bool holes_admissible(int side, const std::vector<std::pair<int, int>>& holes) {
    for (std::size_t p = 0; p < holes.size(); ++p)
        for (std::size_t r = p + 1; r < holes.size(); ++r) {
            const int di = torus_distance_1d(holes[p].first, holes[r].first, side);
            const int dj = torus_distance_1d(holes[p].second, holes[r].second, side);
            if (std::max(di, dj) <= 1) return false;
        }
    return true;
}

TorusInstance holes_instance(int side, std::vector<std::pair<int, int>> holes) {
    require(side >= 4, ErrorKind::parameter, "holes scheme needs side >= 4");
    for (auto& [i, j] : holes) {
        require(i >= 0 && i < side && j >= 0 && j < side, ErrorKind::range, "hole outside the torus");
    }
    require(holes_admissible(side, holes), ErrorKind::invalid_scheme, "two holes share a unit square");
    std::sort(holes.begin(), holes.end());
    return {side, TorusVariant::holes, std::move(holes)};
}

TorusInstance bottleneck_instance(int side) {
    require(side >= 6, ErrorKind::parameter, "bottleneck torus needs side >= 6");
    require(side % 2 == 0, ErrorKind::parameter, "bottleneck torus needs an even side");
    TorusInstance t{side, TorusVariant::bottleneck, {}};
    for (int i = 1; i < side; ++i) {
        t.removed.push_back({i, i});
        t.removed.push_back({i, wrap(i + side / 2, side)});
    }
    std::sort(t.removed.begin(), t.removed.end());
    return t;
}

std::vector<std::pair<int, int>> parse_holes(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        int i = 0, j = 0;
        char comma = 0;
        std::stringstream is(item);
        require(static_cast<bool>(is >> i >> comma >> j) && comma == ',', ErrorKind::parameter,
                "holes must be written as \"i,j;i,j\", got '" + item + "'");
        out.push_back({i, j});
    }
    return out;
}

TorusChains torus_chains(const TorusInstance& t) {
    Kernel k = build_torus_srw(t.side);
    std::vector<char> removed(static_cast<std::size_t>(t.side * t.side), 0);
    for (auto [i, j] : t.removed) removed[static_cast<std::size_t>(torus_index(t.side, i, j))] = 1;
    std::vector<int> kept;
    for (int v = 0; v < t.side * t.side; ++v)
        if (!removed[static_cast<std::size_t>(v)]) kept.push_back(v);
    Kernel q = metropolize_restriction(k, kept);
    return {std::move(k), std::move(q)};
}

ExtensionScheme holes_scheme(const TorusInstance& t, const TorusChains& chains) {
    require(t.variant == TorusVariant::holes, ErrorKind::parameter, "instance is not a holes instance");
    require(holes_admissible(t.side, t.removed), ErrorKind::invalid_scheme, "two holes share a unit square");
    ExtensionScheme s(chains.q.space_ptr(), chains.k.space_ptr());
    set_neighbour_measures(s, t);
    for_each_holes_generator(t, s, [&](int, const Rational& coef, const auto& paths) {
        for (const auto& [path, w] : paths) s.flows().add(path, coef * w);
    });
    s.flows().finalize();
    s.flows().normalize();
    return s;
}

HolesAudit audit_holes(const TorusInstance& t, const TorusChains& chains) {
    ExtensionScheme s(chains.q.space_ptr(), chains.k.space_ptr());
    const auto& q = chains.q;
    std::vector<std::array<int, 3>> count(q.nonzeros(), {0, 0, 0});
    std::vector<std::array<Rational, 3>> load(q.nonzeros(), {Rational(0), Rational(0), Rational(0)});
    for_each_holes_generator(t, s, [&](int c, const Rational& coef, const auto& paths) {
        for (const auto& [path, w] : paths) {
            const Rational per_step = coef * w * Rational(static_cast<std::int64_t>(path.size() - 1));
            for (std::size_t j = 0; j + 1 < path.size(); ++j) {
                long e = q.entry_index(path[j], path[j + 1]);
                require(e >= 0, ErrorKind::invalid_scheme, "holes path leaves the restricted graph");
                ++count[static_cast<std::size_t>(e)][static_cast<std::size_t>(c)];
                load[static_cast<std::size_t>(e)][static_cast<std::size_t>(c)] += per_step;
            }
        }
    });
    HolesAudit a;
    for (std::size_t e = 0; e < count.size(); ++e) {
        Rational total(0);
        for (std::size_t c = 0; c < 3; ++c) {
            a.max_paths[c] = std::max(a.max_paths[c], count[e][c]);
            a.max_case_load[c] = std::max(a.max_case_load[c], load[e][c]);
            total += load[e][c];
        }
        a.max_bracket = std::max(a.max_bracket, total);
    }
    return a;
}

ExtensionScheme bottleneck_scheme(const TorusInstance& t, const TorusChains& chains) {
    require(t.variant == TorusVariant::bottleneck, ErrorKind::parameter, "instance is not a bottleneck instance");
    ExtensionScheme s(chains.q.space_ptr(), chains.k.space_ptr());
    set_neighbour_measures(s, t);
    const auto& q = chains.q;
    const int n = static_cast<int>(q.size());

    auto bfs = [&](int src) {
        std::vector<int> dist(static_cast<std::size_t>(n), -1);
        std::queue<int> todo;
        dist[static_cast<std::size_t>(src)] = 0;
        todo.push(src);
        while (!todo.empty()) {
            int x = todo.front();
            todo.pop();
            for (int y : q.cols(x))
                if (dist[static_cast<std::size_t>(y)] < 0) {
                    dist[static_cast<std::size_t>(y)] = dist[static_cast<std::size_t>(x)] + 1;
                    todo.push(y);
                }
        }
        return dist;
    };

    std::vector<std::vector<int>> to_target(static_cast<std::size_t>(n));
    auto route = [&](int a, int b) {
        auto& dist = to_target[static_cast<std::size_t>(b)];
        if (dist.empty()) dist = bfs(b);
        std::vector<int> path{a};
        int cur = a;
        while (cur != b) {
            int next = -1;
            for (int y : q.cols(cur))  // columns are sorted, so the first hit is the smallest
                if (dist[static_cast<std::size_t>(y)] == dist[static_cast<std::size_t>(cur)] - 1) {
                    next = y;
                    break;
                }
            require(next >= 0, ErrorKind::ergodicity, "restricted torus is disconnected");
            path.push_back(next);
            cur = next;
        }
        return path;
    };

    std::vector<std::uint64_t> done;
    for_each_contribution(s, chains.k, [&](const PairContribution& c) {
        done.push_back((static_cast<std::uint64_t>(c.a) << 32) | static_cast<std::uint32_t>(c.b));
    });
    std::sort(done.begin(), done.end());
    done.erase(std::unique(done.begin(), done.end()), done.end());
    for (auto key : done) {
        auto path = route(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu));
        s.flows().add(path, Rational(1));
    }
    s.flows().finalize();
    return s;
}

}  // namespace mcx
