#include "mcx/report.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Runs the acceptance matrix and prints one line per criterion"};
    mcx::ReproduceOptions opt;
    app.add_option("--n-max", opt.n_max, "largest derangement size")->check(CLI::Range(5, 7));
    app.add_option("--seed", opt.seed, "seed for random trials");
    app.add_option("--only", opt.only, "criterion ids to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    auto results = mcx::reproduce(opt, [](const mcx::CriterionResult& r) {
        std::cout << mcx::format_result(r) << std::endl;
    });
    int failed = 0;
    for (const auto& r : results)
        if (!r.passed) ++failed;
    std::cout << (failed ? "FAILED " : "PASSED ") << results.size() - failed << "/" << results.size() << std::endl;
    return failed ? 1 : 0;
}
