#include <doctest.h>

#include "mcx/error.hpp"
#include "mcx/report.hpp"

#include <filesystem>
#include <fstream>

using namespace mcx;
using nlohmann::json;

namespace {

ErrorKind schema_kind(const std::function<void()>& body, std::string& message) {
    try {
        body();
    } catch (const Error& e) {
        message = e.what();
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("key-value and JSON configs agree") {
    const auto a = config_from_text("# torus\nkind = torus-holes\nside = 5\nholes = 0,0;2,2\n"
                                    "analyses = profile, gap, profile\nseed = 7\neps = 0.1\n");
    const auto b = config_from_json(json::parse(
        R"({"kind":"torus-holes","side":5,"holes":"0,0;2,2","analyses":["gap","profile"],"seed":7,"eps":0.1})"));
    CHECK(a.kind == InstanceKind::torus_holes);
    CHECK(a.side == b.side);
    CHECK(a.holes == b.holes);
    CHECK(a.seed == 7);
    CHECK(a.eps == doctest::Approx(0.1));
    CHECK(a.analyses == b.analyses);
    CHECK(a.analyses.size() == 2);
    CHECK(a.profile_mode == "auto");
}

TEST_CASE("schema errors name the field") {
    const std::vector<std::pair<std::string, std::string>> cases{
        {R"({"kind":"torus-holes","side":5,"holez":"0,0"})", "holez"},
        {R"({"side":5})", "kind"},
        {R"({"kind":"torus-holes","side":5})", "holes"},
        {R"({"kind":"torus-bottleneck","side":"five"})", "side"},
        {R"({"kind":"derangements"})", "'n'"},
        {R"({"kind":"custom-file"})", "chain"},
        {R"({"kind":"custom-file","chain":"x.json","analyses":["congestion"]})", "analyses"},
        {R"({"kind":"derangements","n":5,"analyses":["speed"]})", "analyses"},
        {R"({"kind":"derangements","n":5,"eps":2.0})", "eps"},
        {R"({"kind":"derangements","n":5,"profile_mode":"fast"})", "profile_mode"},
        {R"({"kind":"mesh"})", "kind"},
    };
    for (const auto& [text, field] : cases) {
        CAPTURE(text);
        std::string message;
        CHECK(schema_kind([&] { config_from_json(json::parse(text)); }, message) == ErrorKind::schema);
        CHECK(message.find(field) != std::string::npos);
    }
    std::string message;
    CHECK(schema_kind([&] { config_from_text("kind = derangements\nn = five\n"); }, message) == ErrorKind::schema);
    CHECK(message.find("'n'") != std::string::npos);
    CHECK(schema_kind([&] { config_from_text("kind derangements\n"); }, message) == ErrorKind::schema);
    CHECK(message.find("line 1") != std::string::npos);
}

TEST_CASE("load_config reads both formats and reports missing files") {
    const auto dir = std::filesystem::temp_directory_path() / "mcx_test_report_config";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "a.json") << R"({"kind":"derangements","n":6})";
    std::ofstream(dir / "a.cfg") << "kind = derangements\nn = 6\n";
    CHECK(load_config((dir / "a.json").string()).n == 6);
    CHECK(load_config((dir / "a.cfg").string()).n == 6);
    std::string message;
    CHECK(schema_kind([&] { load_config((dir / "missing.cfg").string()); }, message) == ErrorKind::io);
    std::ofstream(dir / "bad.json") << "{\"kind\":";
    CHECK(schema_kind([&] { load_config((dir / "bad.json").string()); }, message) == ErrorKind::schema);
    std::filesystem::remove_all(dir);
}

TEST_CASE("derangement suite runs clean") {
    auto c = config_from_json(json::parse(
        R"({"kind":"derangements","n":5,"samples":200,"lsc_restarts":4,
            "analyses":["gap","lsc","congestion","transfer","audits"]})"));
    const auto bundle = run(c);
    CHECK(bundle.ok());
    const auto& s = bundle.summary;
    CHECK(s["instance"]["inner_states"] == 44);
    CHECK(s["instance"]["outer_states"] == 120);
    CHECK(s["gap"]["K"].get<double>() == doctest::Approx(0.25));
    CHECK(s["validation"]["ok"] == true);
    CHECK(s["master"]["min_slack"].get<double>() >= -1e-9);
    CHECK(s["transfer"]["min_slack"].get<double>() >= -1e-9);
    CHECK(s["lsc"]["value"].get<double>() > 0.0);
    CHECK(bundle.tables.count("edge_loads.csv") == 1);
}

TEST_CASE("torus profile and mixing pick connected mode above the exhaustive size") {
    auto c = config_from_text("kind = torus-holes\nside = 5\nholes = 0,0\nanalyses = profile, mixing\n");
    const auto bundle = run(c);
    CHECK(bundle.ok());
    const auto& s = bundle.summary;
    CHECK(s["instance"]["inner_states"] == 24);
    CHECK(s["profile"]["mode"] == "connected");
    CHECK(s["mixing"]["profile"]["steps"].get<int>() >= 1);
    CHECK(s["mixing"]["profile"]["tv"].get<double>() <= 0.25);
    CHECK(bundle.tables.count("profile.csv") == 1);
    CHECK(bundle.plots.count("profile.txt") == 1);
}

TEST_CASE("fixed seed reproduces the summary byte for byte") {
    auto c = config_from_text("kind = torus-holes\nside = 4\nholes = 0,0\nseed = 3\nsamples = 100\n"
                              "analyses = gap, congestion, transfer, profile, audits\n");
    const auto a = run(c), b = run(c);
    CHECK(a.summary.dump() == b.summary.dump());
    CHECK(a.tables == b.tables);
    c.seed = 4;
    CHECK(run(c).summary.dump() != a.summary.dump());
}

TEST_CASE("write_bundle writes the summary and tables") {
    auto c = config_from_text("kind = torus-bottleneck\nside = 6\nsamples = 50\nanalyses = congestion, audits\n");
    const auto bundle = run(c);
    CHECK(bundle.ok());
    const auto dir = std::filesystem::temp_directory_path() / "mcx_test_report_bundle";
    std::filesystem::remove_all(dir);
    write_bundle(bundle, dir.string());
    CHECK(std::filesystem::exists(dir / "report.json"));
    for (const auto& [name, body] : bundle.tables) CHECK(std::filesystem::exists(dir / name));
    std::ifstream in(dir / "report.json");
    CHECK(json::parse(in) == bundle.summary);
    std::filesystem::remove_all(dir);
}
