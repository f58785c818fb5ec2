// Experiment runner: one subcommand per module, JSON config in, CSV out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "extravagance/experiment.hpp"

namespace {

extrav::json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw extrav::config_error("--config", "cannot open " + path);
    try {
        return extrav::json::parse(f);
    } catch (const extrav::json::parse_error& e) {
        throw extrav::config_error("--config", std::string("not valid JSON: ") + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Birkhoff sums of singular observables over rotations"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir = ".";
    unsigned precision = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    const char* names[][2] = {
        {"cf", "convergent table of alpha"},
        {"classify", "W_n series and its heuristic verdict"},
        {"simulate", "extravagance ratios along sampled orbits"},
        {"theta", "ratio of Birkhoff sums at x and x - beta"},
        {"checks", "runtime verification of the Birkhoff sum bounds"},
        {"flow", "ball occupation of the reparametrized linear flow"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& n : names) {
        CLI::App* sub = app.add_subcommand(n[0], n[1]);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--precision-bits", precision, "override precision_bits (>= 64)")
            ->check(CLI::Range(64u, 1u << 20));
        sub->add_option("--seed", seed, "override the sampling seed");
        sub->add_option("--threads", threads, "worker threads (default: hardware)");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    extrav::run_options opt;
    if (chosen->count("--precision-bits")) opt.precision_bits = precision;
    if (chosen->count("--seed")) opt.seed = seed;
    if (threads > 0) opt.threads = threads;

    try {
        const extrav::json cfg = load_config(config_path);
        const auto run = extrav::find_runner(chosen->get_name());
        const extrav::run_output files = run(cfg, opt);
        std::filesystem::create_directories(out_dir);
        for (const auto& [name, text] : files) {
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            extrav::write_file(path, text);
            std::cout << path << '\n';
        }
        return 0;
    } catch (const extrav::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return extrav::exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
