#include "mcx/comparison.hpp"
#include "mcx/derangements.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/random.hpp"
#include "mcx/report.hpp"
#include "mcx/spectral_profile.hpp"
#include "mcx/torus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace mcx {

namespace {

using nlohmann::json;

struct Outcome {
    bool passed = true;
    std::ostringstream detail;
    json data = json::object();

    void check(bool cond, const std::string& what) {
        if (!cond) {
            if (passed) detail << "FAILED: ";
            else detail << "; ";
            detail << what;
            passed = false;
        }
    }
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

// Separated holes: every pair at torus distance >= 3, so no path case overlaps.
std::vector<TorusInstance> holes_matrix() {
    return {holes_instance(4, {{0, 0}}),         holes_instance(5, {{0, 0}}),
            holes_instance(6, {{0, 0}}),         holes_instance(4, {{0, 0}, {2, 2}}),
            holes_instance(5, {{0, 0}, {2, 2}}), holes_instance(6, {{0, 0}, {3, 3}})};
}

std::string describe(const TorusInstance& t) {
    std::string s = "side " + std::to_string(t.side) + " holes";
    for (auto [i, j] : t.removed) s += " (" + std::to_string(i) + "," + std::to_string(j) + ")";
    return s;
}

double worst_tv_at(const Kernel& k, int t) {
    double worst = 0.0;
    for (int x = 0; x < static_cast<int>(k.size()); ++x) worst = std::max(worst, tv_curve(k, x, t).back());
    return worst;
}

// alpha >= gap (1 - 2 pi*) / log(1/pi* - 1), the limit gap/2 when pi* = 1/2.
double alpha_from_gap(double gap, double pmin) {
    if (std::abs(pmin - 0.5) < 1e-12) return gap / 2.0;
    return gap * (1.0 - 2.0 * pmin) / std::log(1.0 / pmin - 1.0);
}

Outcome criterion_holes() {
    Outcome o;
    json rows = json::array();
    for (const auto& t : holes_matrix()) {
        auto ch = torus_chains(t);
        auto s = holes_scheme(t, ch);
        auto r = congestion_general(s, ch.k, ch.q);
        const double n = static_cast<double>(t.side) * t.side;
        const double bound = 6.0 * (1.0 - static_cast<double>(t.removed.size()) / n);
        auto m = check_master_inequality(s, ch.k, ch.q, r.a_const, 2000, 1);
        o.check(validate_scheme(s, ch.k, ch.q).ok(), describe(t) + " scheme invalid");
        o.check(r.a_const <= bound + 1e-9, describe(t) + " A = " + fmt(r.a_const, 10) + " > " + fmt(bound, 10));
        o.check(m.passed, describe(t) + " master slack " + fmt(m.min_slack));
        rows.push_back({{"instance", describe(t)}, {"a_const", r.a_const}, {"bound", bound}, {"min_slack", m.min_slack}});
    }
    o.data["instances"] = rows;
    if (o.passed) o.detail << rows.size() << " instances, A <= 6(1 - m/N), master slack >= -1e-10";
    return o;
}

Outcome criterion_spectrum() {
    Outcome o;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& t : holes_matrix()) {
        auto ch = torus_chains(t);
        auto s = holes_scheme(t, ch);
        auto r = congestion_general(s, ch.k, ch.q);
        auto ks = spectrum(ch.k);
        auto qs = spectrum(ch.q);
        auto tr = spectrum_transfer(r.a_const, r.c1, ks, ch.q.size(), &qs);
        worst = std::min(worst, tr.min_slack);
        o.check(tr.min_slack >= -1e-9, describe(t) + " transfer slack " + fmt(tr.min_slack));
    }
    o.data["min_slack"] = worst;
    if (o.passed) o.detail << "all eigenvalue indices, min slack " << fmt(worst);
    return o;
}

Outcome criterion_bottleneck() {
    Outcome o;
    auto t = bottleneck_instance(6);
    auto ch = torus_chains(t);
    auto s = bottleneck_scheme(t, ch);
    auto v = validate_scheme(s, ch.k, ch.q);
    auto r = congestion_general(s, ch.k, ch.q);
    auto m = check_master_inequality(s, ch.k, ch.q, r.a_const, 2000, 3);
    const auto steps = s.flows().max_steps();
    o.check(v.ok(), "scheme invalid");
    o.check(std::isfinite(r.a_const), "A not finite");
    o.check(m.passed, "master slack " + fmt(m.min_slack));
    o.check(steps <= 24, "path of " + std::to_string(steps) + " steps");
    o.data = {{"a_const", r.a_const}, {"max_steps", steps}, {"min_slack", m.min_slack}};
    if (o.passed) o.detail << "A = " << fmt(r.a_const) << ", longest path " << steps << " <= 24";
    return o;
}

Outcome criterion_derangements(int n_max, std::uint64_t seed) {
    Outcome o;
    json rows = json::array();
    for (int n = 5; n <= std::min(n_max, 7); ++n) {
        const std::string tag = "n=" + std::to_string(n) + " ";
        auto c = derangement_chains(n);
        auto s = derangement_scheme(c);
        auto v = validate_scheme(s, c.k, c.q);
        auto audit = weight_audit(c, s);
        auto r = verify_derangement_comparison(c, s, 2000, 200, seed);
        o.check(v.ok(), tag + "scheme invalid");
        o.check(r.paths_ok && audit.max_path_steps <= 4, tag + "path length or interior");
        o.check(r.upper.passed, tag + "upper slack " + fmt(r.upper.min_slack));
        o.check(r.lower_ok, tag + "lower slack " + fmt(r.lower_min_slack));
        o.check(r.transfer_ok, tag + "gap transfer");
        o.check(audit.max_case_weight[1] == Rational(1), tag + "case 1 load " + to_string(audit.max_case_weight[1]));
        const double b2 = 6.0 * (n - 2) / (n - 3);
        const double b3 = 1.0 + 6.0 * n * (n + 1) / (2.0 * (n - 1) * (n - 2));
        o.check(to_double(audit.max_case_weight[2]) <= b2, tag + "case 2 total above bound");
        o.check(to_double(audit.max_case_weight[3]) <= b3, tag + "case 3 total above bound");
        o.check(audit.w_defining == audit.w_closed, tag + "case 4 sum identity");
        rows.push_back({{"n", n},
                        {"a_const", r.a_const},
                        {"c1", r.c1},
                        {"upper_slack", r.upper.min_slack},
                        {"lower_slack", r.lower_min_slack},
                        {"gap_q", r.gap_q},
                        {"gap_bound", r.gap_bound},
                        {"case2", to_string(audit.max_case_weight[2])},
                        {"case3", to_string(audit.max_case_weight[3])},
                        {"w_n", to_string(audit.w_closed)}});
    }
    o.data["sizes"] = rows;
    if (rows.empty()) o.check(false, "no sizes selected");
    if (o.passed) {
        o.detail << "n = 5.." << std::min(n_max, 7) << ": A =";
        for (const auto& row : rows) o.detail << " " << fmt(row["a_const"].get<double>());
        o.detail << ", all audits exact";
    }
    return o;
}

Outcome criterion_order_indifference() {
    Outcome o;
    std::size_t reps = 0, orderings = 0;
    for (int n = 4; n <= 7; ++n) {
        std::set<std::vector<std::size_t>> seen;
        for (const auto& x : all_permutations(n)) {
            const int m = x.fixed_count();
            if (m < 1 || m > 3 || m > n - 2) continue;
            std::vector<std::size_t> type;
            for (const auto& cyc : x.cycles()) type.push_back(cyc.size());
            std::sort(type.begin(), type.end());
            if (!seen.insert(type).second) continue;
            auto r = order_indifference_check(x);
            ++reps;
            orderings += r.orderings;
            o.check(r.holds, "differs for " + x.cycle_string() + " at n=" + std::to_string(n));
        }
    }
    o.data = {{"representatives", reps}, {"orderings", orderings}};
    if (o.passed) o.detail << reps << " cycle types, " << orderings << " orderings, exact equality";
    return o;
}

Outcome criterion_variance_entropy(std::uint64_t seed) {
    Outcome o;
    auto rng = substream(seed, 6);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    std::uniform_int_distribution<int> pick(0, 2);
    double worst_v = std::numeric_limits<double>::infinity(), worst_l = worst_v;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        int inner = 0, outer = 0;
        Eigen::VectorXd nu, mu;
        const int kind = pick(rng);
        if (kind == 0) {  // torus side 4 minus a vertex
            inner = 15;
            outer = 16;
            nu = Eigen::VectorXd::Constant(inner, 1.0 / inner);
            mu = Eigen::VectorXd::Constant(outer, 1.0 / outer);
        } else if (kind == 1) {  // derangements in S_5
            inner = 44;
            outer = 120;
            nu = Eigen::VectorXd::Constant(inner, 1.0 / inner);
            mu = Eigen::VectorXd::Constant(outer, 1.0 / outer);
        } else {  // random measures
            inner = std::uniform_int_distribution<int>(2, 8)(rng);
            outer = inner + std::uniform_int_distribution<int>(0, 5)(rng);
            nu.resize(inner);
            mu.resize(outer);
            for (int i = 0; i < inner; ++i) nu[i] = unif(rng);
            for (int i = 0; i < outer; ++i) mu[i] = unif(rng);
            nu /= nu.sum();
            mu /= mu.sum();
        }
        std::vector<int> slots(static_cast<std::size_t>(outer));
        for (int i = 0; i < outer; ++i) slots[static_cast<std::size_t>(i)] = i;
        std::shuffle(slots.begin(), slots.end(), rng);
        std::vector<int> embed(slots.begin(), slots.begin() + inner);
        Eigen::VectorXd f(inner), fhat(outer);
        for (int i = 0; i < outer; ++i) fhat[i] = gauss(rng);
        for (int i = 0; i < inner; ++i) f[i] = fhat[embed[static_cast<std::size_t>(i)]];
        auto r = compare_variance_entropy(f, fhat, nu, mu, embed);
        worst_v = std::min(worst_v, r.variance_slack);
        worst_l = std::min(worst_l, r.entropy_slack);
    }
    o.check(worst_v >= -1e-10, "variance slack " + fmt(worst_v));
    o.check(worst_l >= -1e-10, "entropy slack " + fmt(worst_l));
    o.data = {{"trials", trials}, {"variance_slack", worst_v}, {"entropy_slack", worst_l}};
    if (o.passed) o.detail << trials << " trials, min slacks " << fmt(worst_v) << " / " << fmt(worst_l);
    return o;
}

Outcome criterion_fform(std::uint64_t seed) {
    Outcome o;
    auto k = build_cycle_srw(5);
    ExtensionScheme s(k.space_ptr(), k.space_ptr(), FormMode::f_form);
    // each edge: half on the edge, half on the three-step back-and-forth walk
    for (int a = 0; a < 5; ++a)
        for (int b : {(a + 1) % 5, (a + 4) % 5}) {
            s.flows().add({a, b}, Rational(1, 2));
            s.flows().add({a, b, a, b}, Rational(1, 2));
        }
    s.flows().finalize();
    auto v = validate_scheme(s, k, k);
    auto r = congestion_fform(s, k, k);
    auto m = check_master_inequality(s, k, k, r.a_const, 1000, seed);
    auto spec = spectrum(k);
    const double c = distribution_ratio(s, k, k);
    auto b = smallest_eigen_bound(r.a_const, c, spec.eigenvalues.back());
    const double slack = spec.eigenvalues.back() - b.bound;
    o.check(v.ok(), "scheme invalid");
    o.check(m.passed, "F-form master slack " + fmt(m.min_slack));
    o.check(slack >= -1e-9, "smallest eigenvalue slack " + fmt(slack));
    o.data = {{"a_const", r.a_const}, {"master_slack", m.min_slack}, {"beta_min", spec.eigenvalues.back()},
              {"bound", b.bound}};
    if (o.passed) o.detail << "A = " << fmt(r.a_const) << ", beta_min " << fmt(spec.eigenvalues.back()) << " >= " << fmt(b.bound);
    return o;
}

Outcome criterion_profile() {
    Outcome o;
    auto inst = holes_instance(4, {{0, 0}});
    auto ch = torus_chains(inst);
    auto s = holes_scheme(inst, ch);
    auto r = congestion_general(s, ch.k, ch.q);
    auto grid = default_grid(ch.q);
    auto p = profile(ch.q, grid);
    bool monotone = true;
    for (std::size_t i = 1; i < p.points.size(); ++i) monotone = monotone && p.points[i].lambda <= p.points[i - 1].lambda;
    auto sr = support_ratio(s, ch.k, ch.q);
    std::vector<double> outer_grid;
    for (double x : grid) outer_grid.push_back(std::min(1.0, sr.c2 * x));
    outer_grid.push_back(1.0);
    auto outer = profile(ch.k, outer_grid);
    auto tr = profile_transfer(1.0 / r.a_const, r.c1, sr.c2, outer, grid);
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.size(); ++i) slack = std::min(slack, p.points[i].lambda - tr[i].bound);
    auto mi = mixing_integral(p, 0.25);
    const double tv = worst_tv_at(ch.q, mi.steps);
    o.check(p.sets_examined == (1u << 15) - 2, "not exhaustive");
    o.check(monotone, "profile not monotone");
    o.check(slack >= -1e-9, "transfer slack " + fmt(slack));
    o.check(sr.exhaustive && sr.c2 <= 4.0, "C2 = " + fmt(sr.c2));
    o.check(tv <= 0.25, "TV " + fmt(tv) + " at t = " + std::to_string(mi.steps));
    o.data = {{"c2", sr.c2}, {"transfer_slack", slack}, {"t", mi.integral}, {"tv", tv}};
    if (o.passed)
        o.detail << "C2 = " << fmt(sr.c2) << ", transfer slack " << fmt(slack) << ", t = " << mi.steps << " with TV "
                 << fmt(tv);
    return o;
}

Outcome criterion_closed_form() {
    Outcome o;
    auto k = build_torus_srw(4);
    auto p = profile(k, default_grid(k));
    double slack = std::numeric_limits<double>::infinity();
    int points = 0;
    for (const auto& pt : p.points) {
        if (pt.r > 8.0 / 27.0) continue;
        ++points;
        slack = std::min(slack, pt.lambda - torus_profile_bound(4, pt.r).full);
    }
    o.check(points > 0, "no grid points");
    o.check(slack >= -1e-9, "slack " + fmt(slack));
    o.data = {{"points", points}, {"min_slack", slack}};
    if (o.passed) o.detail << points << " grid points, min slack " << fmt(slack);
    return o;
}

Outcome criterion_mixing() {
    Outcome o;
    struct Fixture {
        std::string name;
        Kernel k;
        double alpha;
    };
    std::vector<Fixture> fixtures;
    {
        auto space = make_space({"a", "b"});
        Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
        auto two = build_product_kernel(space, pi);
        fixtures.push_back({"two-point", two, 0.5});
    }
    {
        auto t = build_torus_srw(4);
        fixtures.push_back({"torus side 4", t, alpha_from_gap(spectral_gap(t), 1.0 / 16)});
    }
    {
        auto c = derangement_chains(5);
        auto s = derangement_scheme(c);
        auto r = congestion_general(s, c.k, c.q);
        const double alpha_k = alpha_from_gap(spectral_gap(c.k), 1.0 / 120);
        fixtures.push_back({"derangements n=5", c.q, log_sobolev_transfer(alpha_k, r.a_const, r.c1)});
    }
    json rows = json::array();
    for (const auto& fx : fixtures) {
        const double gap = spectral_gap(fx.k);
        const double pmin = fx.k.stationary().minCoeff();
        for (double c : {1.0, 2.0, 3.0}) {
            auto gb = mixing_bound_gap(gap, pmin, c);
            auto lb = mixing_bound_ls(gap, fx.alpha, pmin, c);
            const double tv_g = worst_tv_at(fx.k, static_cast<int>(std::ceil(gb.t)));
            const double tv_l = worst_tv_at(fx.k, static_cast<int>(std::ceil(lb.t)));
            o.check(tv_g <= gb.guarantee, fx.name + " gap bound at c=" + fmt(c));
            o.check(tv_l <= lb.guarantee, fx.name + " log-Sobolev bound at c=" + fmt(c));
            rows.push_back({{"fixture", fx.name}, {"c", c}, {"t_gap", gb.t}, {"tv_gap", tv_g}, {"t_ls", lb.t},
                            {"tv_ls", tv_l}, {"guarantee", gb.guarantee}});
        }
    }
    o.data["rows"] = rows;
    if (o.passed) o.detail << fixtures.size() << " fixtures x c in {1,2,3}, both bounds, worst start";
    return o;
}

}  // namespace

std::vector<CriterionResult> reproduce(const ReproduceOptions& options,
                                       const std::function<void(const CriterionResult&)>& on_result) {
    struct Entry {
        int id;
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries{
        {1, "torus holes congestion", [] { return criterion_holes(); }},
        {2, "full-spectrum transfer", [] { return criterion_spectrum(); }},
        {3, "torus bottleneck", [] { return criterion_bottleneck(); }},
        {4, "derangement comparison", [&] { return criterion_derangements(options.n_max, options.seed); }},
        {5, "order indifference", [] { return criterion_order_indifference(); }},
        {6, "variance and entropy comparison", [&] { return criterion_variance_entropy(options.seed); }},
        {7, "F-form on the 5-cycle", [&] { return criterion_fform(options.seed); }},
        {8, "spectral profile transfer", [] { return criterion_profile(); }},
        {9, "closed-form torus profile", [] { return criterion_closed_form(); }},
        {10, "mixing-bound soundness", [] { return criterion_mixing(); }},
    };
    for (int id : options.only)
        require(id >= 1 && id <= static_cast<int>(entries.size()), ErrorKind::parameter,
                "unknown criterion " + std::to_string(id));
    std::vector<CriterionResult> results;
    for (const auto& e : entries) {
        if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), e.id) == options.only.end())
            continue;
        CriterionResult r;
        r.id = e.id;
        r.name = e.name;
        const auto start = std::chrono::steady_clock::now();
        try {
            Outcome o = e.run();
            r.passed = o.passed;
            r.detail = o.detail.str();
            r.data = std::move(o.data);
        } catch (const std::exception& ex) {
            r.passed = false;
            r.detail = std::string("error: ") + ex.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (on_result) on_result(r);
        results.push_back(std::move(r));
    }
    return results;
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
       << fmt(r.seconds, 3) << " s)";
    return os.str();
}

nlohmann::json results_to_json(const std::vector<CriterionResult>& results) {
    json out = json::array();
    for (const auto& r : results)
        out.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail},
                       {"seconds", r.seconds}, {"data", r.data}});
    return out;
}

}  // namespace mcx
