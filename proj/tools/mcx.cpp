#include "mcx/comparison.hpp"
#include "mcx/derangements.hpp"
#include "mcx/error.hpp"
#include "mcx/functionals.hpp"
#include "mcx/kernel_io.hpp"
#include "mcx/report.hpp"
#include "mcx/spectral_profile.hpp"
#include "mcx/torus.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using nlohmann::json;

struct InstanceArgs {
    std::string variant = "holes";
    int side = 4;
    std::string holes = "0,0";
    int n = 5;
};

void add_instance_options(CLI::App* cmd, InstanceArgs& a, bool with_derangements) {
    std::vector<std::string> variants{"holes", "bottleneck"};
    if (with_derangements) variants.push_back("derangements");
    cmd->add_option("--variant", a.variant, "instance family")->check(CLI::IsMember(variants));
    cmd->add_option("--side", a.side, "torus side length");
    cmd->add_option("--holes", a.holes, "removed vertices as \"i,j;i,j\"");
    if (with_derangements) cmd->add_option("--n", a.n, "permutation size");
}

mcx::ExperimentConfig instance_config(const InstanceArgs& a) {
    mcx::ExperimentConfig c;
    c.side = a.side;
    c.holes = a.holes;
    c.n = a.n;
    if (a.variant == "holes") c.kind = mcx::InstanceKind::torus_holes;
    else if (a.variant == "bottleneck") c.kind = mcx::InstanceKind::torus_bottleneck;
    else c.kind = mcx::InstanceKind::derangements;
    return c;
}

void emit(const json& doc, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw mcx::Error(mcx::ErrorKind::io, "cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw mcx::Error(mcx::ErrorKind::io, "cannot write '" + path + "'");
    out << text;
}

int finish(const mcx::ReportBundle& b, const std::string& dir) {
    if (!dir.empty()) mcx::write_bundle(b, dir);
    std::cout << b.summary.dump(2) << "\n";
    for (const auto& f : b.failures) std::cerr << "failed: " << f << "\n";
    return b.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcx: comparison of Markov chains on nested state spaces"};
    app.require_subcommand(1);

    // build
    InstanceArgs build_args;
    std::string build_out, build_kernels;
    auto* build = app.add_subcommand("build", "construct an instance and emit its extension scheme as JSON");
    add_instance_options(build, build_args, true);
    build->add_option("--out", build_out, "scheme JSON path (default stdout)");
    build->add_option("--kernels", build_kernels, "directory for outer.json and inner.json");

    // analyze
    std::string chain_path, config_path, analyze_out;
    bool with_lsc = false;
    int restarts = 32;
    std::uint64_t seed = 0;
    auto* analyze = app.add_subcommand("analyze", "spectral gap, log-Sobolev estimate and mixing bounds of a chain, "
                                                  "or a full experiment from a config file");
    auto* chain_opt = analyze->add_option("--chain", chain_path, "kernel file (.json or edge list)");
    analyze->add_option("--config", config_path, "experiment config (JSON or key = value)")->excludes(chain_opt);
    analyze->add_flag("--lsc", with_lsc, "also estimate the log-Sobolev constant");
    analyze->add_option("--restarts", restarts, "log-Sobolev restarts");
    analyze->add_option("--seed", seed, "seed");
    analyze->add_option("--out", analyze_out, "output directory for report files");

    // compare
    InstanceArgs cmp_args;
    int cmp_samples = 2000;
    std::string cmp_out;
    auto* compare = app.add_subcommand("compare", "congestion, master inequality and spectrum transfer for a torus instance");
    add_instance_options(compare, cmp_args, false);
    compare->add_option("--samples", cmp_samples, "random functions for the master inequality");
    compare->add_option("--seed", seed, "seed");
    compare->add_option("--out", cmp_out, "output directory for report files");

    // derangements
    int der_n = 5, der_samples = 2000, der_lower = 200;
    bool der_verify = false;
    std::string der_out;
    auto* der = app.add_subcommand("derangements", "random transposition walk restricted to derangements");
    der->add_option("--n", der_n, "permutation size (5..7)");
    der->add_flag("--verify", der_verify, "run the inequality checks and gap transfer");
    der->add_option("--samples", der_samples, "random functions for the upper inequality");
    der->add_option("--lower-trials", der_lower, "random functions for the lower inequality");
    der->add_option("--seed", seed, "seed");
    der->add_option("--out", der_out, "JSON report path (default stdout)");

    // profile
    InstanceArgs prof_args;
    std::string prof_chain, prof_mode = "exhaustive", prof_csv, prof_plot;
    double prof_eps = 0.25;
    int prof_max_set = 10;
    auto* prof = app.add_subcommand("profile", "spectral profile and the mixing time it certifies");
    auto* prof_chain_opt = prof->add_option("--chain", prof_chain, "kernel file; otherwise the torus instance");
    add_instance_options(prof, prof_args, false);
    prof->add_option("--mode", prof_mode, "exhaustive, connected or sampled")
        ->check(CLI::IsMember({"exhaustive", "connected", "sampled"}));
    prof->add_option("--max-set", prof_max_set, "largest set in connected and sampled modes");
    prof->add_option("--eps", prof_eps, "total variation target");
    prof->add_option("--csv", prof_csv, "CSV output (r, lambda, witness_set)");
    prof->add_option("--plot", prof_plot, "two-column plot data (r lambda)");
    prof->add_option("--seed", seed, "seed");
    (void)prof_chain_opt;

    // reproduce
    mcx::ReproduceOptions rep;
    bool rep_json = false;
    auto* repro = app.add_subcommand("reproduce", "run the acceptance matrix");
    repro->add_option("--n-max", rep.n_max, "largest derangement size")->check(CLI::Range(5, 7));
    repro->add_option("--only", rep.only, "criterion ids")->delimiter(',');
    repro->add_option("--seed", rep.seed, "seed");
    repro->add_flag("--json", rep_json, "print the matrix as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            auto c = instance_config(build_args);
            std::optional<mcx::Kernel> k, q;
            std::optional<mcx::ExtensionScheme> s;
            if (c.kind == mcx::InstanceKind::derangements) {
                auto d = mcx::derangement_chains(c.n);
                s = mcx::derangement_scheme(d);
                k = d.k;
                q = d.q;
            } else {
                auto t = c.kind == mcx::InstanceKind::torus_holes ? mcx::holes_instance(c.side, mcx::parse_holes(c.holes))
                                                                  : mcx::bottleneck_instance(c.side);
                auto ch = mcx::torus_chains(t);
                s = c.kind == mcx::InstanceKind::torus_holes ? mcx::holes_scheme(t, ch) : mcx::bottleneck_scheme(t, ch);
                k = ch.k;
                q = ch.q;
            }
            emit(mcx::scheme_to_json(*s), build_out);
            if (!build_kernels.empty()) {
                std::filesystem::create_directories(build_kernels);
                emit(mcx::kernel_to_json(*k), build_kernels + "/outer.json");
                emit(mcx::kernel_to_json(*q), build_kernels + "/inner.json");
            }
            return 0;
        }
        if (analyze->parsed()) {
            if (!config_path.empty()) {
                auto cfg = mcx::load_config(config_path);
                if (!analyze_out.empty()) cfg.output = analyze_out;
                return finish(mcx::run(cfg), cfg.output);
            }
            if (chain_path.empty()) throw mcx::Error(mcx::ErrorKind::parameter, "analyze needs --chain or --config");
            mcx::ExperimentConfig cfg;
            cfg.kind = mcx::InstanceKind::custom_file;
            cfg.chain = chain_path;
            cfg.seed = seed;
            cfg.lsc_restarts = restarts;
            cfg.analyses = {mcx::Analysis::gap, mcx::Analysis::mixing};
            if (with_lsc) cfg.analyses.push_back(mcx::Analysis::lsc);
            return finish(mcx::run(cfg), analyze_out);
        }
        if (compare->parsed()) {
            auto cfg = instance_config(cmp_args);
            cfg.samples = cmp_samples;
            cfg.seed = seed;
            cfg.analyses = {mcx::Analysis::gap, mcx::Analysis::congestion, mcx::Analysis::transfer};
            if (cfg.kind == mcx::InstanceKind::torus_holes) cfg.analyses.push_back(mcx::Analysis::audits);
            return finish(mcx::run(cfg), cmp_out);
        }
        if (der->parsed()) {
            auto c = mcx::derangement_chains(der_n);
            auto s = mcx::derangement_scheme(c);
            auto audit = mcx::weight_audit(c, s);
            json doc;
            doc["n"] = der_n;
            doc["a_const"] = audit.a_const;
            doc["c1"] = mcx::distribution_ratio(s, c.k, c.q);
            json cases = json::object();
            for (int i = 1; i <= 6; ++i)
                cases[std::to_string(i)] = {{"max_weight", mcx::to_string(audit.max_case_weight[static_cast<std::size_t>(i)])},
                                            {"bound", audit.case_bound[static_cast<std::size_t>(i)]}};
            doc["case_loads"] = cases;
            doc["case4_sum"] = mcx::to_string(audit.w_closed);
            doc["notes"] = s.notes();
            bool ok = true;
            if (der_verify) {
                auto v = mcx::validate_scheme(s, c.k, c.q);
                auto r = mcx::verify_derangement_comparison(c, s, der_samples, der_lower, seed);
                doc["valid"] = v.ok();
                doc["gap_K"] = r.gap_k;
                doc["gap_Q"] = r.gap_q;
                doc["transfer_bound"] = r.gap_bound;
                doc["trials"] = {{"upper", r.upper.trials},         {"upper_min_slack", r.upper.min_slack},
                                 {"lower", r.lower_trials},         {"lower_min_slack", r.lower_min_slack},
                                 {"transfer_ok", r.transfer_ok},    {"paths_ok", r.paths_ok}};
                ok = v.ok() && r.upper.passed && r.lower_ok && r.transfer_ok && r.paths_ok;
            }
            emit(doc, der_out);
            return ok ? 0 : 1;
        }
        if (prof->parsed()) {
            std::optional<mcx::Kernel> q;
            if (!prof_chain.empty()) {
                q = mcx::load_kernel(prof_chain);
            } else {
                auto c = instance_config(prof_args);
                auto t = c.kind == mcx::InstanceKind::torus_holes ? mcx::holes_instance(c.side, mcx::parse_holes(c.holes))
                                                                  : mcx::bottleneck_instance(c.side);
                q = mcx::torus_chains(t).q;
            }
            mcx::ProfileOptions opt;
            opt.mode = mcx::profile_mode_from_string(prof_mode);
            opt.max_set_size = prof_max_set;
            opt.seed = seed;
            auto p = mcx::profile(*q, mcx::default_grid(*q), opt);
            auto mi = mcx::mixing_integral(p, prof_eps);
            json doc = mcx::profile_to_json(p, q->space());
            doc["mixing"] = {{"eps", prof_eps}, {"integral", mi.integral}, {"steps", mi.steps}, {"certified", mi.certified}};
            if (!prof_csv.empty()) {
                std::string csv = "r,lambda,witness_set\n";
                for (const auto& pt : p.points) {
                    std::string set;
                    for (int x : pt.witness_set) set += (set.empty() ? "" : " ") + q->space().label(static_cast<std::size_t>(x));
                    csv += std::to_string(pt.r) + "," + std::to_string(pt.lambda) + ",\"" + set + "\"\n";
                }
                write_text(prof_csv, csv);
            }
            if (!prof_plot.empty()) {
                std::string plot;
                for (const auto& pt : p.points) plot += std::to_string(pt.r) + " " + std::to_string(pt.lambda) + "\n";
                write_text(prof_plot, plot);
            }
            std::cout << doc.dump(2) << "\n";
            return 0;
        }
        if (repro->parsed()) {
            auto results = mcx::reproduce(rep, [&](const mcx::CriterionResult& r) {
                if (!rep_json) std::cout << mcx::format_result(r) << std::endl;
            });
            int failed = 0;
            for (const auto& r : results)
                if (!r.passed) {
                    ++failed;
                    std::cerr << "criterion " << r.id << " failed\n";
                }
            if (rep_json) std::cout << mcx::results_to_json(results).dump(2) << "\n";
            return failed ? 1 : 0;
        }
    } catch (const mcx::Error& e) {
        std::cerr << "mcx: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mcx: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
