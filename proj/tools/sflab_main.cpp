// Command line front end for the experiment registry.
//
//   sflab run <id|all> [...ids] [--config PATH] [--seed N] [--out DIR]
//   sflab list [--module M]
//   sflab plot <view> --from DIR [--from DIR2 ...] [--out FILE]
//
// Worker count comes from SFLAB_WORKERS. Exit code 0 only if every requested
// verdict is pass.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "sflab/errors.hpp"
#include "sflab/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"stochastic-flow laboratory"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run experiments and write reports + manifests");
    std::vector<std::string> ids;
    std::string config_path, out_dir = "out";
    long long seed = -1;
    run->add_option("ids", ids, "experiment ids, or 'all'")->required();
    run->add_option("--config", config_path, "flat key=value config file");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--out", out_dir, "output directory");

    // list
    auto* list = app.add_subcommand("list", "list registered experiments");
    std::string module_filter;
    list->add_option("--module", module_filter, "only this module");

    // plot
    auto* plot = app.add_subcommand("plot", "emit tidy plot data from run outputs");
    std::string view;
    std::vector<std::string> from_dirs;
    std::string plot_out;
    plot->add_option("view", view, "view id: holder | mlevel | picard | cauchy")->required();
    plot->add_option("--from", from_dirs, "run output directory")->required();
    plot->add_option("--out", plot_out, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            std::cout << sflab::harness::list_experiments(module_filter);
            return 0;
        }
        if (*run) {
            std::map<std::string, std::string> overrides;
            if (!config_path.empty())
                overrides = sflab::harness::parse_config_file(config_path);
            if (seed >= 0) overrides["seed"] = std::to_string(seed);
            const bool ok = sflab::harness::run_many(ids, out_dir, overrides, std::cout);
            return ok ? 0 : 1;
        }
        if (*plot) {
            std::vector<std::filesystem::path> dirs(from_dirs.begin(), from_dirs.end());
            if (plot_out.empty()) {
                sflab::harness::emit_plot_data(dirs, view, std::cout);
            } else {
                std::ofstream os(plot_out);
                sflab::harness::emit_plot_data(dirs, view, os);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
