#include "mcx/report.hpp"

#include "mcx/comparison.hpp"
#include "mcx/derangements.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/kernel_io.hpp"
#include "mcx/spectral_profile.hpp"
#include "mcx/torus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace mcx {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys{"kind", "side", "holes", "n", "chain", "analyses", "seed", "samples",
                                       "lsc_restarts", "eps", "profile_mode", "output"};

InstanceKind kind_from_string(const std::string& s) {
    if (s == "torus-holes") return InstanceKind::torus_holes;
    if (s == "torus-bottleneck") return InstanceKind::torus_bottleneck;
    if (s == "derangements") return InstanceKind::derangements;
    if (s == "custom-file") return InstanceKind::custom_file;
    fail(ErrorKind::schema, "field 'kind': unknown instance kind '" + s + "'");
}

Analysis analysis_from_string(const std::string& s) {
    static const std::map<std::string, Analysis> names{
        {"gap", Analysis::gap},           {"lsc", Analysis::lsc},         {"congestion", Analysis::congestion},
        {"transfer", Analysis::transfer}, {"profile", Analysis::profile}, {"mixing", Analysis::mixing},
        {"audits", Analysis::audits}};
    auto it = names.find(s);
    if (it == names.end()) fail(ErrorKind::schema, "field 'analyses': unknown analysis '" + s + "'");
    return it->second;
}

template <typename T>
T field(const json& doc, const std::string& key, T fallback) {
    if (!doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::schema, "field '" + key + "' has the wrong type");
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool has(const ExperimentConfig& c, Analysis a) {
    return std::find(c.analyses.begin(), c.analyses.end(), a) != c.analyses.end();
}

// Built chains and scheme for one experiment.
struct Instance {
    std::optional<TorusInstance> torus;
    std::optional<Kernel> k;
    std::optional<Kernel> q;
    std::optional<ExtensionScheme> scheme;
    std::optional<DerangementChains> der;
};

Instance build_instance(const ExperimentConfig& c) {
    Instance in;
    switch (c.kind) {
        case InstanceKind::torus_holes:
        case InstanceKind::torus_bottleneck: {
            in.torus = c.kind == InstanceKind::torus_holes ? holes_instance(c.side, parse_holes(c.holes))
                                                           : bottleneck_instance(c.side);
            auto chains = torus_chains(*in.torus);
            in.scheme = c.kind == InstanceKind::torus_holes ? holes_scheme(*in.torus, chains)
                                                            : bottleneck_scheme(*in.torus, chains);
            in.k = chains.k;
            in.q = chains.q;
            break;
        }
        case InstanceKind::derangements: {
            in.der = derangement_chains(c.n);
            in.scheme = derangement_scheme(*in.der);
            in.k = in.der->k;
            in.q = in.der->q;
            break;
        }
        case InstanceKind::custom_file: in.q = load_kernel(c.chain); break;
    }
    return in;
}

std::string set_string(const std::vector<int>& set, const StateSpace& space) {
    std::string out;
    for (int x : set) {
        if (!out.empty()) out += ' ';
        out += space.label(static_cast<std::size_t>(x));
    }
    return out;
}

std::string csv_quote(const std::string& s) { return "\"" + s + "\""; }

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Worst TV over starting states at time t; all starts up to 256 states, else a fixed spread.
double worst_tv(const Kernel& q, int t, std::size_t& starts) {
    std::vector<int> from;
    const std::size_t n = q.size();
    if (n <= 256) {
        for (std::size_t x = 0; x < n; ++x) from.push_back(static_cast<int>(x));
    } else {
        for (std::size_t i = 0; i < 32; ++i) from.push_back(static_cast<int>(i * n / 32));
    }
    starts = from.size();
    double worst = 0.0;
    for (int x : from) worst = std::max(worst, tv_curve(q, x, t).back());
    return worst;
}

}  // namespace

std::string to_string(InstanceKind kind) {
    switch (kind) {
        case InstanceKind::torus_holes: return "torus-holes";
        case InstanceKind::torus_bottleneck: return "torus-bottleneck";
        case InstanceKind::derangements: return "derangements";
        case InstanceKind::custom_file: return "custom-file";
    }
    return "unknown";
}

std::string to_string(Analysis analysis) {
    switch (analysis) {
        case Analysis::gap: return "gap";
        case Analysis::lsc: return "lsc";
        case Analysis::congestion: return "congestion";
        case Analysis::transfer: return "transfer";
        case Analysis::profile: return "profile";
        case Analysis::mixing: return "mixing";
        case Analysis::audits: return "audits";
    }
    return "unknown";
}

ExperimentConfig config_from_json(const json& doc) {
    require(doc.is_object(), ErrorKind::schema, "config must be an object");
    for (const auto& [key, value] : doc.items())
        require(kKnownKeys.count(key) > 0, ErrorKind::schema, "field '" + key + "' is not recognised");
    require(doc.contains("kind"), ErrorKind::schema, "field 'kind' is required");
    ExperimentConfig c;
    c.kind = kind_from_string(field<std::string>(doc, "kind", ""));
    c.side = field<int>(doc, "side", 0);
    c.holes = field<std::string>(doc, "holes", "");
    c.n = field<int>(doc, "n", 0);
    c.chain = field<std::string>(doc, "chain", "");
    c.seed = field<std::uint64_t>(doc, "seed", 0);
    c.samples = field<int>(doc, "samples", 2000);
    c.lsc_restarts = field<int>(doc, "lsc_restarts", 32);
    c.eps = field<double>(doc, "eps", 0.25);
    c.profile_mode = field<std::string>(doc, "profile_mode", "auto");
    c.output = field<std::string>(doc, "output", "");
    if (doc.contains("analyses")) {
        const auto& a = doc.at("analyses");
        require(a.is_array(), ErrorKind::schema, "field 'analyses' must be an array");
        for (const auto& item : a) {
            require(item.is_string(), ErrorKind::schema, "field 'analyses' must hold strings");
            c.analyses.push_back(analysis_from_string(item.get<std::string>()));
        }
    } else {
        c.analyses = {Analysis::gap, Analysis::congestion, Analysis::transfer};
        if (c.kind == InstanceKind::custom_file) c.analyses = {Analysis::gap, Analysis::profile};
    }

    switch (c.kind) {
        case InstanceKind::torus_holes:
            require(doc.contains("holes"), ErrorKind::schema, "field 'holes' is required for torus-holes");
            [[fallthrough]];
        case InstanceKind::torus_bottleneck:
            require(c.side > 0, ErrorKind::schema, "field 'side' must be a positive integer");
            break;
        case InstanceKind::derangements:
            require(c.n > 0, ErrorKind::schema, "field 'n' must be a positive integer");
            break;
        case InstanceKind::custom_file:
            require(!c.chain.empty(), ErrorKind::schema, "field 'chain' is required for custom-file");
            for (Analysis a : c.analyses)
                require(a == Analysis::gap || a == Analysis::lsc || a == Analysis::profile || a == Analysis::mixing,
                        ErrorKind::schema,
                        "field 'analyses': '" + to_string(a) + "' needs a comparison instance, not a single chain");
            break;
    }
    require(c.samples >= 0, ErrorKind::schema, "field 'samples' must be nonnegative");
    require(c.lsc_restarts > 0, ErrorKind::schema, "field 'lsc_restarts' must be positive");
    require(c.eps > 0.0 && c.eps < 1.0, ErrorKind::schema, "field 'eps' must lie in (0, 1)");
    if (c.profile_mode != "auto") {
        try {
            profile_mode_from_string(c.profile_mode);
        } catch (const Error&) {
            fail(ErrorKind::schema, "field 'profile_mode': unknown mode '" + c.profile_mode + "'");
        }
    }
    std::sort(c.analyses.begin(), c.analyses.end());
    c.analyses.erase(std::unique(c.analyses.begin(), c.analyses.end()), c.analyses.end());
    return c;
}

ExperimentConfig config_from_text(const std::string& text) {
    static const std::set<std::string> integers{"side", "n", "seed", "samples", "lsc_restarts"};
    json doc = json::object();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::schema, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key == "analyses") {
            json list = json::array();
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ','))
                if (!trim(item).empty()) list.push_back(trim(item));
            doc[key] = list;
        } else if (integers.count(key)) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(value, &used);
                require(used == value.size(), ErrorKind::schema, "field '" + key + "' must be an integer");
                doc[key] = v;
            } catch (const std::logic_error&) {
                fail(ErrorKind::schema, "field '" + key + "' must be an integer");
            }
        } else if (key == "eps") {
            try {
                doc[key] = std::stod(value);
            } catch (const std::logic_error&) {
                fail(ErrorKind::schema, "field 'eps' must be a number");
            }
        } else {
            doc[key] = value;
        }
    }
    return config_from_json(doc);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::exception& e) {
            fail(ErrorKind::schema, "config is not valid JSON: " + std::string(e.what()));
        }
        return config_from_json(doc);
    }
    return config_from_text(text);
}

ReportBundle run(const ExperimentConfig& c) {
    ReportBundle out;
    auto& sum = out.summary;
    Instance in;
    try {
        in = build_instance(c);
    } catch (const Error& e) {
        throw Error(e.kind(), "building " + to_string(c.kind) + " instance: " + e.what());
    }
    const Kernel& q = *in.q;
    sum["instance"] = {{"kind", to_string(c.kind)}, {"inner_states", q.size()}};
    if (in.torus) {
        sum["instance"]["side"] = c.side;
        sum["instance"]["removed"] = in.torus->removed.size();
    }
    if (in.der) sum["instance"]["n"] = c.n;
    if (in.k) sum["instance"]["outer_states"] = in.k->size();
    if (c.kind == InstanceKind::custom_file) sum["instance"]["chain"] = c.chain;
    sum["seed"] = c.seed;
    json analyses = json::array();
    for (Analysis a : c.analyses) analyses.push_back(to_string(a));
    sum["analyses"] = analyses;

    auto stage = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const Error& e) {
            throw Error(e.kind(), "analysis '" + name + "': " + e.what());
        }
    };

    std::optional<double> gap_q;
    std::optional<ComparisonReport> cong;
    std::optional<Profile> prof;

    if (has(c, Analysis::gap) || has(c, Analysis::mixing)) {
        stage("gap", [&] {
            gap_q = spectral_gap(q);
            sum["gap"]["Q"] = *gap_q;
            if (in.k) sum["gap"]["K"] = spectral_gap(*in.k);
        });
    }
    if (has(c, Analysis::lsc)) {
        stage("lsc", [&] {
            auto ls = log_sobolev_constant(q, c.lsc_restarts, c.seed);
            sum["lsc"] = {{"value", ls.value}, {"source", ls.source}, {"restarts", ls.restarts},
                          {"converged", ls.converged}, {"dispersion", ls.dispersion}};
        });
    }
    if (has(c, Analysis::congestion) || has(c, Analysis::transfer)) {
        stage("congestion", [&] {
            const auto& s = *in.scheme;
            auto v = validate_scheme(s, *in.k, q);
            sum["validation"] = {{"ok", v.ok()}, {"violations", v.violations.size()},
                                 {"max_path_steps", v.max_path_steps}, {"pairs_required", v.pairs_required}};
            if (!v.ok()) out.failures.push_back("scheme validation: " + v.violations.front().kind);
            cong = congestion_general(s, *in.k, q);
            sum["congestion"] = report_to_json(*cong, s, q);
            sum["congestion"]["notes"] = s.notes();
            auto m = check_master_inequality(s, *in.k, q, cong->a_const, c.samples, c.seed);
            sum["master"] = {{"trials", m.trials}, {"min_slack", m.min_slack}, {"worst_ratio", m.worst_ratio},
                             {"passed", m.passed}};
            if (!m.passed) out.failures.push_back("master inequality");
            std::string csv = "q,r,ratio\n";
            for (int x = 0; x < static_cast<int>(q.size()); ++x) {
                auto cols = q.cols(x);
                for (std::size_t e = 0; e < cols.size(); ++e) {
                    const double ratio = cong->edge_ratio[q.offset(x) + e];
                    if (ratio > 0.0)
                        csv += csv_quote(q.space().label(static_cast<std::size_t>(x))) + "," +
                               csv_quote(q.space().label(static_cast<std::size_t>(cols[e]))) + "," + num(ratio) + "\n";
                }
            }
            out.tables["edge_loads.csv"] = csv;
        });
    }
    if (has(c, Analysis::transfer)) {
        stage("transfer", [&] {
            auto ks = spectrum(*in.k, false);
            auto qs = spectrum(q, false);
            auto tr = spectrum_transfer(cong->a_const, cong->c1, ks, q.size(), &qs);
            sum["transfer"] = {{"min_slack", tr.min_slack}, {"gap_bound", tr.gap_bounds.size() > 1 ? tr.gap_bounds[1] : 0.0}};
            if (tr.min_slack < -1e-9) out.failures.push_back("spectrum transfer");
            std::string csv = "i,exact,bound,slack\n";
            for (std::size_t i = 0; i < tr.gap_bounds.size(); ++i)
                csv += std::to_string(i) + "," + num(1.0 - qs.eigenvalues[i]) + "," + num(tr.gap_bounds[i]) + "," +
                       num(tr.slack[i]) + "\n";
            out.tables["transfer.csv"] = csv;
        });
    }
    if (has(c, Analysis::profile) || has(c, Analysis::mixing)) {
        stage("profile", [&] {
            ProfileOptions opt;
            if (c.profile_mode == "auto")
                opt.mode = q.size() <= kExhaustiveCapacity ? ProfileMode::exhaustive : ProfileMode::connected;
            else
                opt.mode = profile_mode_from_string(c.profile_mode);
            opt.seed = c.seed;
            const auto grid = default_grid(q);
            prof = profile(q, grid, opt);
            sum["profile"] = profile_to_json(*prof, q.space());
            std::string csv = "r,lambda,witness_set\n", plot;
            for (const auto& pt : prof->points) {
                csv += num(pt.r) + "," + num(pt.lambda) + "," + csv_quote(set_string(pt.witness_set, q.space())) + "\n";
                plot += num(pt.r) + " " + num(pt.lambda) + "\n";
            }
            out.tables["profile.csv"] = csv;
            out.plots["profile.txt"] = plot;

            if (in.scheme && cong && in.k->size() <= kExhaustiveCapacity && prof->exact) {
                auto sr = support_ratio(*in.scheme, *in.k, q);
                std::vector<double> outer_grid;
                for (double r : grid) outer_grid.push_back(std::min(1.0, sr.c2 * r));
                outer_grid.push_back(1.0);
                auto outer = profile(*in.k, outer_grid, opt);
                auto tr = profile_transfer(1.0 / cong->a_const, cong->c1, sr.c2, outer, grid);
                double slack = 1e300;
                std::string tcsv = "r,lambda,transfer_bound\n";
                for (std::size_t i = 0; i < tr.size(); ++i) {
                    slack = std::min(slack, prof->points[i].lambda - tr[i].bound);
                    tcsv += num(tr[i].r) + "," + num(prof->points[i].lambda) + "," + num(tr[i].bound) + "\n";
                }
                out.tables["profile_transfer.csv"] = tcsv;
                sum["profile_transfer"] = {{"c2", sr.c2}, {"c2_exhaustive", sr.exhaustive}, {"min_slack", slack}};
                if (slack < -1e-9) out.failures.push_back("profile transfer");
            }
            if (in.torus) {
                std::string bcsv = "r,lambda,closed_form\n";
                for (const auto& pt : prof->points) {
                    auto b = torus_profile_bound(c.side, pt.r);
                    bcsv += num(pt.r) + "," + num(pt.lambda) + "," + num(b.holes) + "\n";
                }
                out.tables["profile_closed_form.csv"] = bcsv;
            }
        });
    }
    if (has(c, Analysis::mixing)) {
        stage("mixing", [&] {
            const double pmin = q.stationary().minCoeff();
            json bounds = json::array();
            for (double cc : {1.0, 2.0, 3.0}) {
                auto b = mixing_bound_gap(*gap_q, pmin, cc);
                std::size_t starts = 0;
                const int t = static_cast<int>(std::ceil(b.t));
                const double tv = worst_tv(q, t, starts);
                bounds.push_back({{"c", cc}, {"t", b.t}, {"guarantee", b.guarantee}, {"tv", tv}, {"starts", starts}});
                if (tv > b.guarantee) out.failures.push_back("gap mixing bound at c = " + num(cc));
            }
            sum["mixing"]["gap_bounds"] = bounds;
            auto mi = mixing_integral(*prof, c.eps);
            std::size_t starts = 0;
            const double tv = worst_tv(q, mi.steps, starts);
            sum["mixing"]["profile"] = {{"eps", c.eps},     {"integral", mi.integral}, {"steps", mi.steps},
                                        {"tv", tv},         {"starts", starts},        {"certified", mi.certified}};
            if (mi.certified && tv > c.eps) out.failures.push_back("profile mixing bound");
        });
    }
    if (has(c, Analysis::audits)) {
        stage("audits", [&] {
            if (c.kind == InstanceKind::torus_holes) {
                auto a = audit_holes(*in.torus, TorusChains{*in.k, q});
                sum["audits"] = {{"max_paths", {a.max_paths[0], a.max_paths[1], a.max_paths[2]}},
                                 {"max_case_load",
                                  {to_string(a.max_case_load[0]), to_string(a.max_case_load[1]),
                                   to_string(a.max_case_load[2])}},
                                 {"max_bracket", to_string(a.max_bracket)}};
            } else if (c.kind == InstanceKind::torus_bottleneck) {
                sum["audits"] = {{"max_path_steps", in.scheme->flows().max_steps()},
                                 {"path_limit", 4 * c.side}};
                if (in.scheme->flows().max_steps() > static_cast<std::size_t>(4 * c.side))
                    out.failures.push_back("bottleneck path length");
            } else if (c.kind == InstanceKind::derangements) {
                auto a = weight_audit(*in.der, *in.scheme);
                json cases = json::object();
                for (int k = 1; k <= 6; ++k)
                    cases[std::to_string(k)] = {{"max_weight", to_string(a.max_case_weight[static_cast<std::size_t>(k)])},
                                                {"bound", a.case_bound[static_cast<std::size_t>(k)]},
                                                {"generators", a.generators[static_cast<std::size_t>(k)]}};
                sum["audits"] = {{"cases", cases},
                                 {"w_defining", to_string(a.w_defining)},
                                 {"w_closed", to_string(a.w_closed)},
                                 {"a_const", a.a_const},
                                 {"max_path_steps", a.max_path_steps},
                                 {"fallback_pairs", a.fallback_pairs}};
                if (a.max_case_weight[1] != Rational(1)) out.failures.push_back("case 1 load");
                for (int k : {2, 3})
                    if (to_double(a.max_case_weight[static_cast<std::size_t>(k)]) >
                        a.case_bound[static_cast<std::size_t>(k)] + 1e-12)
                        out.failures.push_back("case " + std::to_string(k) + " load");
                if (a.w_defining != a.w_closed) out.failures.push_back("case 4 sum identity");
            }
        });
    }
    sum["ok"] = out.ok();
    sum["failures"] = out.failures;
    return out;
}

void write_bundle(const ReportBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create output directory '" + dir + "'");
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(dir) / name);
        require(out.good(), ErrorKind::io, "cannot write '" + name + "' in '" + dir + "'");
        out << content;
    };
    write("report.json", bundle.summary.dump(2) + "\n");
    for (const auto& [name, text] : bundle.tables) write(name, text);
    for (const auto& [name, text] : bundle.plots) write(name, text);
}

}  // namespace mcx
