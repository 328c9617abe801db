#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mcx {

enum class InstanceKind { torus_holes, torus_bottleneck, derangements, custom_file };
enum class Analysis { gap, lsc, congestion, transfer, profile, mixing, audits };

std::string to_string(InstanceKind kind);
std::string to_string(Analysis analysis);

struct ExperimentConfig {
    InstanceKind kind = InstanceKind::torus_holes;
    int side = 0;            // torus instances
    std::string holes;       // "i,j;i,j"
    int n = 0;               // derangements
    std::string chain;       // custom-file kernel path
    std::vector<Analysis> analyses;
    std::uint64_t seed = 0;
    int samples = 2000;      // random functions for inequality checks
    int lsc_restarts = 32;
    double eps = 0.25;
    std::string profile_mode = "auto";  // exhaustive up to 16 states, else connected
    std::string output;      // directory for CSV and plot files; empty writes none
};

/// Keys: kind, side, holes, n, chain, analyses, seed, samples, lsc_restarts, eps,
/// profile_mode, output. Throws schema naming the offending field.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// "key = value" lines, '#' comments; analyses as a comma list.
ExperimentConfig config_from_text(const std::string& text);

/// JSON when the file starts with '{', key-value text otherwise.
ExperimentConfig load_config(const std::string& path);

struct ReportBundle {
    nlohmann::json summary;
    std::map<std::string, std::string> tables;  // file name -> CSV
    std::map<std::string, std::string> plots;   // file name -> two-column text
    std::vector<std::string> failures;          // asserted inequalities that failed
    bool ok() const { return failures.empty(); }
};

/// Runs the requested analyses in dependency order. Output is a function of the
/// config alone, so a fixed seed reproduces the JSON byte for byte.
ReportBundle run(const ExperimentConfig& config);

/// Writes tables and plots into `dir` (created if needed) and the summary as report.json.
void write_bundle(const ReportBundle& bundle, const std::string& dir);

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    nlohmann::json data;
};

struct ReproduceOptions {
    int n_max = 7;                 // largest derangement size
    std::uint64_t seed = 0;
    std::vector<int> only;         // criterion ids; empty runs all
};

/// Runs the acceptance matrix; `on_result` sees each criterion as it finishes.
std::vector<CriterionResult> reproduce(const ReproduceOptions& options,
                                       const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_result(const CriterionResult& r);
nlohmann::json results_to_json(const std::vector<CriterionResult>& results);

}  // namespace mcx
