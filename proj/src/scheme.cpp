#include "mcx/scheme.hpp"

#include "mcx/error.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_set>

namespace mcx {

using nlohmann::json;

std::string to_string(FormMode mode) { return mode == FormMode::dirichlet ? "dirichlet" : "f_form"; }

// FlowTable ------------------------------------------------------------------

void FlowTable::add(std::span<const int> path, Rational weight) {
    require(!finalized_, ErrorKind::internal, "flow table already finalized");
    require(!path.empty(), ErrorKind::invalid_scheme, "flow path must contain at least one state");
    keys_.push_back(key(path.front(), path.back()));
    verts_.insert(verts_.end(), path.begin(), path.end());
    vert_ptr_.push_back(verts_.size());
    weights_.push_back(weight);
}

void FlowTable::finalize() {
    if (finalized_) return;
    const std::size_t count = weights_.size();
    auto states = [&](std::size_t i) {
        return std::span<const int>(verts_.data() + vert_ptr_[i], vert_ptr_[i + 1] - vert_ptr_[i]);
    };
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (keys_[x] != keys_[y]) return keys_[x] < keys_[y];
        auto a = states(x), b = states(y);
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    });

    std::vector<std::uint64_t> keys;
    std::vector<std::size_t> pair_ptr;
    std::vector<std::size_t> vert_ptr{0};
    std::vector<int> verts;
    std::vector<Rational> weights;
    verts.reserve(verts_.size());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t p = order[i];
        auto st = states(p);
        const bool same_pair = !keys.empty() && keys.back() == keys_[p];
        if (same_pair) {
            auto last = std::span<const int>(verts.data() + vert_ptr[vert_ptr.size() - 2],
                                             vert_ptr.back() - vert_ptr[vert_ptr.size() - 2]);
            if (std::equal(last.begin(), last.end(), st.begin(), st.end())) {
                weights.back() += weights_[p];
                continue;
            }
        } else {
            keys.push_back(keys_[p]);
            pair_ptr.push_back(weights.size());
        }
        verts.insert(verts.end(), st.begin(), st.end());
        vert_ptr.push_back(verts.size());
        weights.push_back(weights_[p]);
    }
    pair_ptr.push_back(weights.size());

    keys_ = std::move(keys);
    pair_ptr_ = std::move(pair_ptr);
    vert_ptr_ = std::move(vert_ptr);
    verts_ = std::move(verts);
    weights_ = std::move(weights);
    verts_.shrink_to_fit();
    finalized_ = true;
}

void FlowTable::normalize() {
    require(finalized_, ErrorKind::internal, "flow table used before finalize()");
    for (std::size_t p = 0; p < keys_.size(); ++p) {
        Rational total(0);
        for (std::size_t i = pair_ptr_[p]; i < pair_ptr_[p + 1]; ++i) total += weights_[i];
        require(total > Rational(0), ErrorKind::invalid_scheme, "flow pair with no positive mass");
        for (std::size_t i = pair_ptr_[p]; i < pair_ptr_[p + 1]; ++i) weights_[i] /= total;
    }
}

long FlowTable::find(int a, int b) const {
    require(finalized_, ErrorKind::internal, "flow table used before finalize()");
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key(a, b));
    if (it == keys_.end() || *it != key(a, b)) return -1;
    return static_cast<long>(it - keys_.begin());
}

FlowTable::PathView FlowTable::path(std::size_t index) const {
    return {std::span<const int>(verts_.data() + vert_ptr_[index], vert_ptr_[index + 1] - vert_ptr_[index]),
            weights_[index]};
}

std::size_t FlowTable::max_steps() const {
    std::size_t m = 0;
    for (std::size_t i = 0; i + 1 < vert_ptr_.size(); ++i) m = std::max(m, vert_ptr_[i + 1] - vert_ptr_[i] - 1);
    return m;
}

// ExtensionScheme ----------------------------------------------------------

ExtensionScheme::ExtensionScheme(SpacePtr inner, SpacePtr outer, FormMode mode)
    : inner_(std::move(inner)), outer_(std::move(outer)), mode_(mode) {
    require(inner_ && outer_, ErrorKind::empty_space, "scheme needs both state spaces");
    require(inner_->size() > 0, ErrorKind::empty_space, "inner space is empty");
    inner_of_.assign(outer_->size(), -1);
    embed_.resize(inner_->size());
    for (std::size_t i = 0; i < inner_->size(); ++i) {
        auto x = outer_->find(inner_->label(i));
        require(x.has_value(), ErrorKind::dimension, "inner state '" + inner_->label(i) + "' is not an outer state");
        embed_[i] = *x;
        inner_of_[static_cast<std::size_t>(*x)] = static_cast<int>(i);
    }
}

void ExtensionScheme::set_measure(int x, std::vector<MeasureEntry> entries) {
    require(x >= 0 && static_cast<std::size_t>(x) < outer_->size(), ErrorKind::dimension, "measure state out of range");
    measures_[x] = std::move(entries);
}

std::vector<MeasureEntry> ExtensionScheme::measure(int x) const {
    if (auto it = measures_.find(x); it != measures_.end()) return it->second;
    if (is_inner(x)) return {{inner_of(x), Rational(1)}};
    return {};
}

bool ExtensionScheme::has_measure(int x) const { return is_inner(x) || measures_.count(x) > 0; }

void ExtensionScheme::set_coupling(int x, int y, std::vector<CouplingEntry> entries) {
    couplings_[key(x, y)] = std::move(entries);
}

std::vector<CouplingEntry> ExtensionScheme::coupling(int x, int y) const {
    if (auto it = couplings_.find(key(x, y)); it != couplings_.end()) return it->second;
    if (auto it = couplings_.find(key(y, x)); it != couplings_.end()) {
        std::vector<CouplingEntry> t;
        t.reserve(it->second.size());
        for (const auto& e : it->second) t.push_back({e.b, e.a, e.weight});
        return t;
    }
    return {};
}

bool ExtensionScheme::has_coupling(int x, int y) const {
    return couplings_.count(key(x, y)) > 0 || couplings_.count(key(y, x)) > 0;
}

void ExtensionScheme::for_each_coupling(
    const std::function<void(int, int, const std::vector<CouplingEntry>&)>& fn) const {
    std::vector<std::uint64_t> keys;
    keys.reserve(couplings_.size());
    for (const auto& kv : couplings_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    for (auto k : keys) fn(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), couplings_.at(k));
}

// Contributions --------------------------------------------------------------

void for_each_contribution(const ExtensionScheme& s, const Kernel& k,
                           const std::function<void(const PairContribution&)>& fn) {
    require(k.space_ptr() == s.outer_ptr() || k.space().labels() == s.outer().labels(), ErrorKind::dimension,
            "outer kernel does not live on the scheme's outer space");
    const bool dirichlet = s.mode() == FormMode::dirichlet;
    const auto& mu = k.stationary();

    std::vector<std::vector<MeasureEntry>> outside_measure(k.size());
    for (int x = 0; x < static_cast<int>(k.size()); ++x)
        if (!s.is_inner(x)) outside_measure[static_cast<std::size_t>(x)] = s.measure(x);

    for (int a = 0; a < static_cast<int>(s.inner().size()); ++a) {
        const int xa = s.embed(a);
        auto cols = k.cols(xa);
        auto vals = k.values(xa);
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const int y = cols[e];
            const double w = vals[e] * mu[xa];
            if (s.is_inner(y)) {
                if (y == xa && dirichlet) continue;
                fn({a, s.inner_of(y), w, 0});
            } else {
                for (const auto& m : outside_measure[static_cast<std::size_t>(y)]) {
                    if (dirichlet && m.state == a) continue;
                    fn({a, m.state, 2.0 * to_double(m.weight) * w, 1});
                }
            }
        }
    }

    for (int x = 0; x < static_cast<int>(k.size()); ++x) {
        if (s.is_inner(x)) continue;
        auto cols = k.cols(x);
        auto vals = k.values(x);
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const int y = cols[e];
            if (s.is_inner(y)) continue;
            const double w = vals[e] * mu[x];
            if (y == x) {
                if (dirichlet) continue;
                if (!s.has_coupling(x, x)) {
                    for (const auto& m : outside_measure[static_cast<std::size_t>(x)])
                        fn({m.state, m.state, to_double(m.weight) * w, 2});
                    continue;
                }
            }
            for (const auto& c : s.coupling(x, y)) {
                if (dirichlet && c.a == c.b) continue;
                fn({c.a, c.b, to_double(c.weight) * w, 2});
            }
        }
    }
}

// Validation -----------------------------------------------------------------

std::size_t ValidationReport::count(const std::string& kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

namespace {

class ViolationLog {
public:
    ViolationLog(ValidationReport& r, std::size_t cap) : report_(r), cap_(cap) {}

    void add(const std::string& kind, std::string witness, double defect = 0.0) {
        if (++counts_[kind] <= cap_) report_.violations.push_back({kind, std::move(witness), defect});
    }

    void summarize() {
        for (const auto& [kind, n] : counts_)
            if (n > cap_)
                report_.violations.push_back({kind, std::to_string(n - cap_) + " further occurrences not listed", 0.0});
    }

private:
    ValidationReport& report_;
    std::size_t cap_;
    std::map<std::string, std::size_t> counts_;
};

}  // namespace

ValidationReport validate_scheme(const ExtensionScheme& s, const Kernel& k, const Kernel& q, std::size_t max_reports) {
    ValidationReport report;
    ViolationLog log(report, max_reports);
    require(k.space().labels() == s.outer().labels(), ErrorKind::dimension, "outer kernel space differs from the scheme");
    require(q.space().labels() == s.inner().labels(), ErrorKind::dimension, "inner kernel space differs from the scheme");
    const auto& outer = s.outer();
    const auto& inner = s.inner();
    const int n_inner = static_cast<int>(inner.size());

    // measures
    std::vector<std::map<int, Rational>> measure_of(k.size());
    for (int x = 0; x < static_cast<int>(k.size()); ++x) {
        const std::string lx = outer.label(static_cast<std::size_t>(x));
        auto entries = s.measure(x);
        ++report.measures_checked;
        if (entries.empty()) {
            log.add("missing-measure", lx, 1.0);
            continue;
        }
        Rational total(0);
        auto& m = measure_of[static_cast<std::size_t>(x)];
        for (const auto& e : entries) {
            if (e.state < 0 || e.state >= n_inner) {
                log.add("measure-support", lx + " -> index " + std::to_string(e.state));
                continue;
            }
            if (e.weight < Rational(0)) log.add("negative-weight", lx + " -> " + inner.label(static_cast<std::size_t>(e.state)), to_double(e.weight));
            m[e.state] += e.weight;
            total += e.weight;
        }
        if (total != Rational(1)) log.add("measure-mass", lx + " total " + to_string(total), to_double(total - Rational(1)));
        if (s.is_inner(x) && !(m.size() == 1 && m.begin()->first == s.inner_of(x)))
            log.add("inner-measure-not-point-mass", lx);
    }

    // couplings
    std::unordered_set<std::uint64_t> seen_edge;
    auto edge_key = [](int x, int y) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) | static_cast<std::uint32_t>(y);
    };
    for (int x = 0; x < static_cast<int>(k.size()); ++x) {
        if (s.is_inner(x)) continue;
        for (int y : k.cols(x)) {
            if (y == x || s.is_inner(y)) continue;
            seen_edge.insert(edge_key(x, y));
            if (y < x) continue;
            const std::string witness = outer.label(static_cast<std::size_t>(x)) + "|" + outer.label(static_cast<std::size_t>(y));
            ++report.couplings_checked;
            if (!s.has_coupling(x, y)) {
                log.add("missing-coupling", witness, 1.0);
                continue;
            }
            for (auto [u, v] : {std::pair{x, y}, std::pair{y, x}}) {
                std::map<int, Rational> left, right;
                for (const auto& c : s.coupling(u, v)) {
                    if (c.a < 0 || c.a >= n_inner || c.b < 0 || c.b >= n_inner) {
                        log.add("coupling-support", witness);
                        continue;
                    }
                    if (c.weight < Rational(0)) log.add("negative-weight", witness, to_double(c.weight));
                    left[c.a] += c.weight;
                    right[c.b] += c.weight;
                }
                auto compare = [&](const std::map<int, Rational>& got, const std::map<int, Rational>& want,
                                   const std::string& side) {
                    std::map<int, Rational> diff = want;
                    for (const auto& [i, w] : got) diff[i] -= w;
                    for (const auto& [i, d] : diff)
                        if (d != Rational(0))
                            log.add("coupling-marginal",
                                    witness + " " + side + " marginal at " + inner.label(static_cast<std::size_t>(i)) +
                                        " off by " + to_string(d),
                                    to_double(d));
                };
                compare(left, measure_of[static_cast<std::size_t>(u)], "first");
                compare(right, measure_of[static_cast<std::size_t>(v)], "second");
            }
        }
    }
    s.for_each_coupling([&](int x, int y, const std::vector<CouplingEntry>&) {
        if (x == y && s.mode() == FormMode::f_form) return;
        if (!seen_edge.count(edge_key(x, y)))
            log.add("unused-coupling", outer.label(static_cast<std::size_t>(x)) + "|" + outer.label(static_cast<std::size_t>(y)));
    });

    // flows
    const auto& flows = s.flows();
    require(flows.finalized(), ErrorKind::internal, "flows must be finalized before validation");
    std::vector<char> used(flows.pair_count(), 0);
    std::unordered_set<std::uint64_t> missing;
    for_each_contribution(s, k, [&](const PairContribution& c) {
        if (!(c.coefficient > 0.0)) return;
        long p = flows.find(c.a, c.b);
        if (p < 0) {
            if (missing.insert(edge_key(c.a, c.b)).second)
                log.add("missing-flow", inner.label(static_cast<std::size_t>(c.a)) + "|" + inner.label(static_cast<std::size_t>(c.b)),
                        c.coefficient);
            return;
        }
        used[static_cast<std::size_t>(p)] = 1;
    });
    report.pairs_required = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1)) + missing.size();

    const bool dirichlet = s.mode() == FormMode::dirichlet;
    for (std::size_t p = 0; p < flows.pair_count(); ++p) {
        const int a = flows.pair_first(p), b = flows.pair_last(p);
        const std::string pair = inner.label(static_cast<std::size_t>(a)) + "|" + inner.label(static_cast<std::size_t>(b));
        if (!used[p] && !(dirichlet && a == b)) log.add("unused-flow", pair);
        Rational total(0);
        for (std::size_t i = flows.path_begin(p); i < flows.path_end(p); ++i) {
            auto path = flows.path(i);
            ++report.paths_checked;
            report.max_path_steps = std::max(report.max_path_steps, path.steps());
            total += path.weight;
            if (!(path.weight > Rational(0))) log.add("nonpositive-flow-weight", pair, to_double(path.weight));
            std::map<std::pair<int, int>, int> traversals;
            bool ok = true;
            for (std::size_t j = 0; j + 1 < path.states.size(); ++j) {
                const int u = path.states[j], v = path.states[j + 1];
                if (u < 0 || u >= n_inner || v < 0 || v >= n_inner || q.entry_index(u, v) < 0) {
                    log.add("non-edge-step", pair + " step " + std::to_string(j));
                    ok = false;
                    break;
                }
                ++traversals[dirichlet ? std::pair{std::min(u, v), std::max(u, v)} : std::pair{u, v}];
            }
            if (!ok) continue;
            if (dirichlet) {
                if (a == b && path.steps() > 0) log.add("closed-path", pair);
                for (const auto& [e, t] : traversals)
                    if (t > 1) log.add("repeated-edge", pair, t);
            } else {
                if (path.steps() % 2 == 0) log.add("even-path", pair + " length " + std::to_string(path.steps()));
                for (const auto& [e, t] : traversals)
                    if (t > 2) log.add("traversal-count", pair, t);
            }
        }
        if (total != Rational(1)) log.add("flow-mass", pair + " total " + to_string(total), to_double(total - Rational(1)));
    }
    log.summarize();
    return report;
}

Eigen::VectorXd extend(const Eigen::VectorXd& f, const ExtensionScheme& s) {
    require(static_cast<std::size_t>(f.size()) == s.inner().size(), ErrorKind::dimension,
            "function does not live on the inner space");
    Eigen::VectorXd out(static_cast<Eigen::Index>(s.outer().size()));
    for (int x = 0; x < static_cast<int>(s.outer().size()); ++x) {
        if (s.is_inner(x)) {
            out[x] = f[s.inner_of(x)];
            continue;
        }
        double v = 0.0;
        for (const auto& m : s.measure(x)) v += to_double(m.weight) * f[m.state];
        out[x] = v;
    }
    return out;
}

// JSON -------------------------------------------------------------------------

namespace {

Rational weight_from_json(const json& j) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    require(j.is_number(), ErrorKind::schema, "weight must be a number or a \"p/q\" string");
    return parse_rational(j.dump());
}

std::pair<std::string, std::string> split_pair(const std::string& s) {
    auto bar = s.find('|');
    require(bar != std::string::npos, ErrorKind::schema, "expected \"x|y\" key, got '" + s + "'");
    return {s.substr(0, bar), s.substr(bar + 1)};
}

}  // namespace

json scheme_to_json(const ExtensionScheme& s) {
    json doc;
    doc["mode"] = to_string(s.mode());
    json measures = json::object();
    for (int x = 0; x < static_cast<int>(s.outer().size()); ++x) {
        if (s.is_inner(x)) continue;
        json m = json::object();
        for (const auto& e : s.measure(x)) m[s.inner().label(static_cast<std::size_t>(e.state))] = to_string(e.weight);
        measures[s.outer().label(static_cast<std::size_t>(x))] = std::move(m);
    }
    doc["measures"] = std::move(measures);
    json couplings = json::object();
    s.for_each_coupling([&](int x, int y, const std::vector<CouplingEntry>& entries) {
        json c = json::object();
        for (const auto& e : entries)
            c[s.inner().label(static_cast<std::size_t>(e.a)) + "|" + s.inner().label(static_cast<std::size_t>(e.b))] = to_string(e.weight);
        couplings[s.outer().label(static_cast<std::size_t>(x)) + "|" + s.outer().label(static_cast<std::size_t>(y))] = std::move(c);
    });
    doc["couplings"] = std::move(couplings);
    json flows = json::object();
    const auto& f = s.flows();
    for (std::size_t p = 0; p < f.pair_count(); ++p) {
        json list = json::array();
        for (std::size_t i = f.path_begin(p); i < f.path_end(p); ++i) {
            auto path = f.path(i);
            json states = json::array();
            for (int v : path.states) states.push_back(s.inner().label(static_cast<std::size_t>(v)));
            list.push_back({{"path", std::move(states)}, {"w", to_string(path.weight)}});
        }
        flows[s.inner().label(static_cast<std::size_t>(f.pair_first(p))) + "|" +
              s.inner().label(static_cast<std::size_t>(f.pair_last(p)))] = std::move(list);
    }
    doc["flows"] = std::move(flows);
    return doc;
}

ExtensionScheme scheme_from_json(const json& doc, SpacePtr inner, SpacePtr outer) {
    FormMode mode = FormMode::dirichlet;
    if (doc.contains("mode")) {
        const auto m = doc.at("mode").get<std::string>();
        require(m == "dirichlet" || m == "f_form", ErrorKind::schema, "mode must be 'dirichlet' or 'f_form'");
        mode = m == "dirichlet" ? FormMode::dirichlet : FormMode::f_form;
    }
    ExtensionScheme s(inner, outer, mode);
    try {
        if (doc.contains("measures")) {
            for (const auto& [x, m] : doc.at("measures").items()) {
                std::vector<MeasureEntry> entries;
                for (const auto& [y, w] : m.items()) entries.push_back({inner->index(y), weight_from_json(w)});
                s.set_measure(outer->index(x), std::move(entries));
            }
        }
        if (doc.contains("couplings")) {
            for (const auto& [xy, c] : doc.at("couplings").items()) {
                auto [x, y] = split_pair(xy);
                std::vector<CouplingEntry> entries;
                for (const auto& [ab, w] : c.items()) {
                    auto [a, b] = split_pair(ab);
                    entries.push_back({inner->index(a), inner->index(b), weight_from_json(w)});
                }
                s.set_coupling(outer->index(x), outer->index(y), std::move(entries));
            }
        }
        if (doc.contains("flows")) {
            for (const auto& [ab, list] : doc.at("flows").items()) {
                auto [a, b] = split_pair(ab);
                for (const auto& item : list) {
                    require(item.contains("path") && item.contains("w"), ErrorKind::schema,
                            "flow entries need 'path' and 'w' (pair " + ab + ")");
                    std::vector<int> path;
                    for (const auto& v : item.at("path")) path.push_back(inner->index(v.get<std::string>()));
                    require(!path.empty() && path.front() == inner->index(a) && path.back() == inner->index(b),
                            ErrorKind::schema, "flow path endpoints do not match pair " + ab);
                    s.flows().add(path, weight_from_json(item.at("w")));
                }
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::schema, e.what());
    }
    s.flows().finalize();
    return s;
}

}  // namespace mcx
