// cosserat: run the shear and bending benchmarks from configuration files.
//
//   cosserat run <config> [--out DIR] [--seed N] [--threads N] [--reproducible]
//   cosserat compare <configA> <configB> --out DIR

#include "cosserat/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run_one(const cosserat::RunConfig& cfg)
{
    const auto art = cosserat::run_config(cfg);
    if (!art.ok()) {
        std::cerr << "cosserat: " << art.failure << '\n';
        return 2;
    }
    std::cout << "wrote " << cfg.output_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Finite-strain Cosserat plasticity benchmarks"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool reproducible = false;
    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "seed of the initial perturbation");
    run->add_option("--threads", threads, "threads for energy assembly")->check(CLI::PositiveNumber);
    run->add_flag("--reproducible", reproducible, "write wall times as 0 for byte-identical outputs");

    std::string config_a, config_b, compare_out;
    auto* compare = app.add_subcommand("compare", "run two scenarios and tabulate them side by side");
    compare->add_option("configA", config_a, "first configuration")->required()->check(CLI::ExistingFile);
    compare->add_option("configB", config_b, "second configuration")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", compare_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = cosserat::load_config(config_path);
            if (out_dir) cfg.output_dir = *out_dir;
            if (seed) cfg.spec.seed = *seed;
            if (threads) cfg.spec.threads = *threads;
            if (reproducible) cfg.reproducible = true;
            return run_one(cfg);
        }

        auto a = cosserat::load_config(config_a);
        auto b = cosserat::load_config(config_b);
        const std::filesystem::path dir(compare_out);
        a.output_dir = (dir / "A").string();
        b.output_dir = (dir / "B").string();
        const auto ra = cosserat::run_config(a);
        const auto rb = cosserat::run_config(b);
        std::ofstream os(dir / "comparison.txt");
        cosserat::write_comparison(os, a, ra.reports, b, rb.reports);
        if (!ra.ok() || !rb.ok()) {
            std::cerr << "cosserat: " << (ra.ok() ? rb.failure : ra.failure) << '\n';
            return 2;
        }
        std::cout << "wrote " << (dir / "comparison.txt").string() << '\n';
        return 0;
    } catch (const cosserat::ParseError& e) {
        std::cerr << "cosserat: config " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "cosserat: " << e.what() << '\n';
        return 1;
    }
}
