// dbm-lab: run one experiment from a flat key=value config file.
// Exit code: 0 = thresholds passed, 1 = threshold failure, 2 = error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dbmlab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for short-time Dyson Brownian motion"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool plots = false;

    const std::vector<std::string> kinds = {"freeconv", "locallaw", "rigidity", "repulsion",
                                            "couple",   "gapstats", "holder"};
    for (const auto& kind : kinds) {
        auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
        sub->add_option("--config", config_path, "path to key = value config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "master seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_flag("--plots", plots, "emit SVG plots alongside the CSV artifacts");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config file: " << config_path << "\n";
            return 2;
        }
        std::stringstream buf;
        buf << in.rdbuf();

        dbmlab::ExperimentConfig cfg = dbmlab::validate_config(buf.str());
        if (cfg.kind != kind) {
            std::cerr << "error: config kind '" << cfg.kind << "' does not match subcommand '"
                      << kind << "'\n";
            return 2;
        }
        if (seed_given) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (plots) cfg.plots = true;

        const dbmlab::ExperimentReport report = dbmlab::run(cfg);
        report.write(cfg.out_dir + "/report.json");
        std::cout << report.to_string();
        std::cout << (report.pass ? "PASS" : "FAIL") << " (" << kind << ")\n";
        return report.pass ? 0 : 1;
    } catch (const dbmlab::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
