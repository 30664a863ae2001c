#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbmlab/experiments.hpp"

using namespace dbmlab;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config validation diagnostics") {
    REQUIRE_THROWS_AS(validate_config("kind = rigidity\nt = 0.1\n"), ConfigInvalid);
    try {
        validate_config("kind = rigidity\nt = 0.1\n");
    } catch (const ConfigInvalid& e) {
        REQUIRE(e.field == "N");
    }

    try {
        validate_config("kind = rigidity\nN = 100\nt = 0.1\nell = 0.3\nG = 0.2\n");
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        REQUIRE(e.field == "G");
        REQUIRE(std::string(e.what()).find("regularity separation") != std::string::npos);
    }

    REQUIRE_THROWS_AS(validate_config("kind = rigidity\nN = 100\nt = 0.1\nT = 0.1\n"),
                      ConfigInvalid);
    REQUIRE_THROWS_AS(validate_config("kind = rigidity\nN = 100\nt = 0.1\nbogus_key = 3\n"),
                      ConfigInvalid);
    REQUIRE_THROWS_AS(validate_config("kind = mystery\nN = 100\nt = 0.1\n"), ConfigInvalid);
    REQUIRE_THROWS_AS(validate_config("kind rigidity\n"), ConfigInvalid);
    REQUIRE_THROWS_AS(validate_config("kind = rigidity\nN = 100\nN = 200\nt = 0.1\n"),
                      ConfigInvalid);

    const auto cfg = validate_config(
        "# full example\nkind = rigidity\nN = 120\nt = 0.1\nprofile = two_atom\n"
        "ell = 0.01\nG = 0.25\nE0 = 1.0\nq = 0.5\nsamples = 8\nseed = 3\nout = out_x\n");
    REQUIRE(cfg.n == 120);
    REQUIRE(cfg.profile == "two_atom");
    REQUIRE(cfg.seed == 3);
    REQUIRE(cfg.e0 == 1.0);
}

TEST_CASE("shipped example configs parse") {
    for (const auto& name : {"freeconv_goe.cfg", "rigidity_two_atom.cfg", "repulsion_goe.cfg",
                             "repulsion_two_atom.cfg", "locallaw_two_atom.cfg",
                             "gapstats_two_atom.cfg", "couple_two_atom.cfg",
                             "holder_uniform.cfg"}) {
        const std::string path = std::string(DBMLAB_CONFIG_DIR) + "/" + name;
        REQUIRE_NOTHROW(validate_config(slurp(path)));
    }
}

TEST_CASE("reports are byte-identical across reruns") {
    auto cfg = validate_config(
        "kind = rigidity\nN = 60\nt = 0.15\nprofile = uniform\nell = 0.017\nG = 0.3\n"
        "samples = 12\nseed = 21\ngrid_points = 512\nout = harness_out_a\n");
    const auto rep1 = run(cfg);
    cfg.out_dir = "harness_out_b";
    const auto rep2 = run(cfg);
    // metrics and verdicts identical; the config echo differs only in out_dir
    REQUIRE(rep1.metrics.dump() == rep2.metrics.dump());
    REQUIRE(rep1.pass == rep2.pass);

    // exact same run again: full report string identical
    cfg.out_dir = "harness_out_a";
    const auto rep3 = run(cfg);
    REQUIRE(rep1.to_string() == rep3.to_string());

    // artifacts identical byte for byte
    const auto rig_a = slurp("harness_out_a/rigidity.csv");
    const auto rig_b = slurp("harness_out_b/rigidity.csv");
    REQUIRE(rig_a == rig_b);

    std::filesystem::remove_all("harness_out_a");
    std::filesystem::remove_all("harness_out_b");
}

TEST_CASE("report schema and CSV formats") {
    auto cfg = validate_config(
        "kind = freeconv\nN = 64\nT = 1\nprofile = goe\ngrid_points = 257\n"
        "eta_floor = 1e-3\nout = harness_out_c\nseed = 5\n");
    const auto rep = run(cfg);
    rep.write("harness_out_c/report.json");

    const auto parsed = nlohmann::ordered_json::parse(slurp("harness_out_c/report.json"));
    REQUIRE(parsed["schema_version"] == 1);
    REQUIRE(parsed.contains("config"));
    REQUIRE(parsed.contains("seed"));
    REQUIRE(parsed.contains("metrics"));
    REQUIRE(parsed.contains("pass"));
    REQUIRE(parsed["config"]["N"] == 64);

    const auto density = slurp("harness_out_c/density.csv");
    REQUIRE(density.rfind("E,re_m,im_m,rho\n", 0) == 0);
    REQUIRE(density.find("\r") == std::string::npos); // LF endings only
    const auto locations = slurp("harness_out_c/locations.csv");
    REQUIRE(locations.rfind("i,gamma\n", 0) == 0);

    std::filesystem::remove_all("harness_out_c");
}

TEST_CASE("plots are emitted only when requested") {
    auto cfg = validate_config(
        "kind = freeconv\nN = 32\nT = 1\nprofile = goe\ngrid_points = 129\n"
        "eta_floor = 1e-2\nout = harness_out_d\nplots = true\n");
    run(cfg);
    REQUIRE(std::filesystem::exists("harness_out_d/density.svg"));
    const auto svg = slurp("harness_out_d/density.svg");
    REQUIRE(svg.find("<svg") != std::string::npos);
    std::filesystem::remove_all("harness_out_d");
}
