#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <fmt/format.h>

#include "sct/commands.hpp"
#include "sct/error.hpp"
#include "sct/io.hpp"

using namespace sct;
namespace fs = std::filesystem;

namespace {

// Coarse 16x16 grid over the reference phantom; runs in well under a second.
std::string small_config(const std::string& extra = "") {
    return R"(seed: 3
threads: 2
geometry:
  n_views: 36
  n_channels: 30
  det_pitch_mm: 2.8
  image_n: 16
  voxel_mm: 3.8
  fov_mm: 60.8
acquisition: {mean_counts: 1500, noise: poisson}
optimizer: {iterations: 12, checkpoint_every: 4, prior_fraction: 1.0}
paths:
  sinogram: sino.bin
  truth: truth.img
  lac_images: lac.img
  output_dir: recon
  checkpoint: recon/checkpoint.img
  cost_log: recon/cost.csv
  report_txt: report.txt
  report_csv: report.csv
)" + extra;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "sct_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "run.yaml";
    write_file_atomic(p, text);
    return p;
}

int run(const fs::path& config, const std::string& verb, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"sct", "--config", config.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back(verb);
    return cli_main(args);
}

} // namespace

TEST_CASE("simulate is deterministic for a fixed seed") {
    const auto d1 = fresh_dir("det1");
    const auto d2 = fresh_dir("det2");
    REQUIRE(run(write_config(d1, small_config()), "simulate") == 0);
    REQUIRE(run(write_config(d2, small_config()), "simulate", {"--threads", "1"}) == 0);
    CHECK(read_file(d1 / "sino.bin") == read_file(d2 / "sino.bin"));
    CHECK(read_file(d1 / "truth.img") == read_file(d2 / "truth.img"));

    REQUIRE(run(d2 / "run.yaml", "simulate", {"--seed", "4"}) == 0);
    CHECK(read_file(d1 / "sino.bin") != read_file(d2 / "sino.bin"));
}

TEST_CASE("usage and configuration errors exit with 1") {
    const auto dir = fresh_dir("errors");
    CHECK(cli_main({"sct", "simulate"}) == 1);                       // --config missing
    CHECK(cli_main({"sct", "--config", "x.yaml"}) == 1);             // no verb
    CHECK(run(dir / "missing.yaml", "simulate") == 1);               // unreadable config
    CHECK(run(write_config(dir, small_config()), "frobnicate") == 1);
    CHECK(run(dir / "run.yaml", "simulate", {"--threads", "0"}) == 1);

    const auto bad = write_config(dir, small_config("optimizer_typo: 1\n"));
    CHECK(run(bad, "simulate") == 1);
    try {
        parse_config(read_file(bad), dir);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("optimizer_typo") != std::string::npos);
    }

    // reconstruct without a sinogram on disk
    write_config(dir, small_config());
    CHECK(run(dir / "run.yaml", "reconstruct") == 1);
}

TEST_CASE("a singular calibration design is a runtime error") {
    const auto dir = fresh_dir("singular");
    // Every tube holds iodine, so gadolinium and calcium never appear.
    std::string tubes = "phantom:\n  scan: calibration\n  tubes:\n";
    for (int k = 0; k < 3; ++k) {
        const double a = 2.0 * 3.14159265358979 * k / 3.0;
        tubes += fmt::format("    - {{label: T{}, center_mm: [{:.3f}, {:.3f}], radius_mm: 6, solute: iodine, "
                             "calibration_mg_per_ml: {}}}\n",
                             k, 15 * std::cos(a), 15 * std::sin(a), 5 * (k + 1));
    }
    std::string text = small_config(tubes + "calibration: {iterations: 5}\n");
    text.replace(text.find("paths:\n"), 7, "paths:\n  mixing: mixing.txt\n");
    const auto cfg = write_config(dir, text);
    REQUIRE(run(cfg, "simulate") == 0);
    CHECK(run(cfg, "calibrate") == 2);
    CHECK_FALSE(fs::exists(dir / "mixing.txt"));
}

TEST_CASE("an interrupted and resumed reconstruction matches an uninterrupted one") {
    const auto whole = fresh_dir("whole");
    const auto parts = fresh_dir("parts");
    REQUIRE(run(write_config(whole, small_config()), "simulate") == 0);
    fs::copy_file(whole / "sino.bin", parts / "sino.bin");
    fs::copy_file(whole / "truth.img", parts / "truth.img");

    REQUIRE(run(whole / "run.yaml", "reconstruct") == 0);
    // stop after 8 sweeps (a checkpoint boundary) and carry on to 12
    std::string first = small_config();
    first.replace(first.find("iterations: 12"), 14, "iterations: 8");
    REQUIRE(run(write_config(parts, first), "reconstruct") == 0);
    REQUIRE(run(write_config(parts, small_config()), "reconstruct") == 0);

    for (const char* m : {"water", "iodine", "gadolinium", "calcium"}) {
        const auto f = std::string("recon/") + m + ".img";
        CHECK(read_file(whole / f) == read_file(parts / f));
    }
    CHECK(read_file(whole / "recon/cost.csv") == read_file(parts / "recon/cost.csv"));

    // the cost log is monotone and has one line per sweep plus the start
    std::istringstream in(read_file(whole / "recon/cost.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "iter,cost,max_update");
    int rows = 0;
    double prev = INFINITY;
    while (std::getline(in, line)) {
        const double cost = std::stod(line.substr(line.find(',') + 1));
        CHECK(cost <= prev + 1e-9);
        prev = cost;
        ++rows;
    }
    CHECK(rows == 13);
}

TEST_CASE("report tables and CSV") {
    const auto dir = fresh_dir("report");
    const auto cfg_path = write_config(dir, small_config());
    REQUIRE(run(cfg_path, "simulate") == 0);
    REQUIRE(run(cfg_path, "reconstruct") == 0);
    const RunConfig cfg = load_config(cfg_path);
    for (const auto& m : cfg.material_names()) CHECK(fs::exists(material_image_path(cfg, m)));

    REQUIRE(run(cfg_path, "report") == 0);
    const std::string txt = read_file(dir / "report.txt");
    CHECK(txt.find("Ground truth (volume fraction)") != std::string::npos);
    CHECK(txt.find("Estimated values (volume fraction)") != std::string::npos);
    CHECK(txt.find("Error (%)") != std::string::npos);

    std::istringstream csv(read_file(dir / "report.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "roi,material,truth,estimate,percent_error");
    int rows = 0, na = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        REQUIRE(f.size() == 5);
        const double truth = std::stod(f[2]);
        const double est = std::stod(f[3]);
        if (f[4] == "n/a") {
            CHECK(truth == 0.0);
            ++na;
        } else {
            CHECK(std::stod(f[4]) == doctest::Approx(100.0 * std::abs(est - truth) / truth).epsilon(1e-9));
        }
        ++rows;
    }
    CHECK(rows == 28);
    CHECK(na == 7 * 4 - 7 - 6); // water everywhere, one solute in six tubes

    // the truth fed back in as the estimate gives zero error everywhere
    const auto truth = read_image(dir / "truth.img");
    for (int m = 0; m < truth.n_components; ++m) {
        MaterialImage one(truth.image_n, {truth.names[m]}, truth.voxel_mm);
        one.set_component(0, truth.component(m));
        write_image(material_image_path(cfg, truth.names[m]), one);
    }
    REQUIRE(run(cfg_path, "report") == 0);
    std::istringstream again(read_file(dir / "report.csv"));
    std::getline(again, line);
    while (std::getline(again, line)) {
        const auto last = line.substr(line.rfind(',') + 1);
        CHECK((last == "n/a" || std::stod(last) == 0.0));
    }
}
