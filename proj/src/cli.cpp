#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sct/commands.hpp"
#include "sct/error.hpp"

namespace sct {

namespace {

// Discards log output unless --verbose is given.
class NullBuffer : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Spectral CT material decomposition with model-based iterative reconstruction", "sct"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool verbose = false;
    app.add_option("--config", config_path, "YAML run configuration")->required();
    app.add_option("--seed", seed, "override the configured RNG seed");
    app.add_option("--threads", threads, "worker threads for projector build and simulation")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose,-v", verbose, "progress messages on stderr");
    app.require_subcommand(1);
    auto* simulate = app.add_subcommand("simulate", "simulate a photon-counting scan of the phantom");
    auto* calibrate = app.add_subcommand("calibrate", "fit the mixing matrix from calibration-scan LAC images");
    auto* reconstruct = app.add_subcommand("reconstruct", "MBIR material decomposition of a sinogram");
    auto* report = app.add_subcommand("report", "ROI truth / estimate / error tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        cfg.verbose = verbose;

        NullBuffer null_buf;
        std::ostream quiet(&null_buf);
        std::ostream& log = verbose ? std::cerr : quiet;

        if (*simulate) cmd_simulate(cfg, log);
        else if (*calibrate) cmd_calibrate(cfg, log);
        else if (*reconstruct) cmd_reconstruct(cfg, log);
        else if (*report) cmd_report(cfg, std::cout);
        return 0;
    } catch (const Error& e) {
        std::cerr << "sct: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "sct: " << e.what() << "\n";
        return 2;
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    for (const auto& a : args) argv.push_back(a.c_str());
    argv.push_back(nullptr);
    return cli_main(static_cast<int>(args.size()), argv.data());
}

} // namespace sct
