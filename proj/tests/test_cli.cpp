#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "snnforge/cli.hpp"
#include "snnforge/io.hpp"

using namespace snnforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("snnforge_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// capture stderr while running one dispatch
struct RunResult {
    int code;
    std::string err;
};

RunResult run(const std::vector<std::string>& args) {
    std::ostringstream err;
    std::streambuf* old = std::cerr.rdbuf(err.rdbuf());
    const int code = cli_dispatch(args);
    std::cerr.rdbuf(old);
    return {code, err.str()};
}

}  // namespace

TEST_CASE("unknown subcommand exits 1") {
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({}).code == 1);
}

TEST_CASE("convert with T=0 exits 1 and names the constraint") {
    const fs::path dir = temp_dir("t0");
    const RunResult r = run({"convert", "--model", (dir / "m.json").string(), "--thresholds",
                             (dir / "t.json").string(), "--out", (dir / "o.json").string(),
                             "--T", "0"});
    CHECK(r.code == 1);
    CHECK(r.err.find("T must be >= 1") != std::string::npos);
}

TEST_CASE("missing model file exits 2") {
    const fs::path dir = temp_dir("missing");
    const RunResult r = run({"simulate", "--model", (dir / "nope.json").string(), "--data",
                             (dir / "nope2.json").string(), "--T", "4"});
    CHECK(r.code == 2);
}

TEST_CASE("exact-grid pipeline through the CLI reports zero conversion loss") {
    const fs::path dir = temp_dir("grid");
    const std::string model = (dir / "ann.json").string();
    const std::string data = (dir / "eval.json").string();
    const std::string calib_data = (dir / "calib.json").string();
    const std::string thresholds = (dir / "th.json").string();
    const std::string snn = (dir / "snn.json").string();
    const std::string report = (dir / "report.json").string();

    CHECK(run({"synth", "--kind", "exact-grid", "--out-model", model, "--out-data", data,
               "--out-calib", calib_data}).code == 0);
    CHECK(run({"calibrate", "--model", model, "--data", calib_data, "--out", thresholds}).code == 0);
    CHECK(run({"convert", "--model", model, "--thresholds", thresholds, "--out", snn, "--T", "8",
               "--shift-mode", "none"}).code == 0);
    CHECK(run({"analyze", "--ann", model, "--snn", snn, "--data", data, "--T-list", "8", "--out",
               report, "--csv", (dir / "report").string()}).code == 0);

    const nlohmann::json j = nlohmann::json::parse(slurp(report));
    CHECK(j.at("format_version") == 1);
    CHECK(j.at("conversion_loss_by_T").at("8").get<double>() == 0.0);
    for (const auto& row : j.at("per_layer_error")) {
        CHECK(row.at("mean_dpsp_sq").get<double>() < 1e-9);
    }
    CHECK(fs::exists(dir / "report_layers.csv"));
}

TEST_CASE("identical invocations produce byte-identical outputs") {
    const fs::path dir = temp_dir("determinism");
    const std::string model = (dir / "ann.json").string();
    const std::string data = (dir / "eval.json").string();
    const std::string calib_data = (dir / "calib.json").string();
    const std::string thresholds = (dir / "th.json").string();
    const std::string snn = (dir / "snn.json").string();

    REQUIRE(run({"synth", "--kind", "exact-grid", "--out-model", model, "--out-data", data,
                 "--out-calib", calib_data}).code == 0);
    REQUIRE(run({"calibrate", "--model", model, "--data", calib_data, "--out", thresholds}).code == 0);
    REQUIRE(run({"convert", "--model", model, "--thresholds", thresholds, "--out", snn, "--T", "8",
                 "--shift-mode", "none"}).code == 0);

    const std::string r1 = (dir / "r1.json").string();
    const std::string r2 = (dir / "r2.json").string();
    REQUIRE(run({"simulate", "--model", snn, "--data", data, "--T", "8", "--out", r1}).code == 0);
    REQUIRE(run({"simulate", "--model", snn, "--data", data, "--T", "8", "--out", r2}).code == 0);
    CHECK(slurp(r1) == slurp(r2));

    // synth is deterministic per seed as well
    const std::string u1 = (dir / "u1.json").string();
    const std::string u2 = (dir / "u2.json").string();
    REQUIRE(run({"synth", "--kind", "uniform", "--n", "64", "--width", "8", "--seed", "5",
                 "--out-model", (dir / "um1.json").string(), "--out-data", u1}).code == 0);
    REQUIRE(run({"synth", "--kind", "uniform", "--n", "64", "--width", "8", "--seed", "5",
                 "--out-model", (dir / "um2.json").string(), "--out-data", u2}).code == 0);
    CHECK(slurp(u1) == slurp(u2));
    CHECK(slurp((dir / "um1.json").string()) == slurp((dir / "um2.json").string()));
}

TEST_CASE("train runs end to end on a tiny blobs task") {
    const fs::path dir = temp_dir("train");
    const std::string train_data = (dir / "train.json").string();
    const std::string test_data = (dir / "test.json").string();
    const std::string model = (dir / "model.json").string();

    REQUIRE(run({"synth", "--kind", "blobs", "--n", "64", "--n-test", "32", "--dim", "8",
                 "--classes", "2", "--seed", "3", "--out-data", train_data, "--out-test",
                 test_data}).code == 0);
    CHECK(run({"--threads", "2", "train", "--data", train_data, "--out", model, "--widths",
               "8,6,2", "--epochs", "3", "--seed", "9", "--warmup-epochs", "1"}).code == 0);

    nlohmann::json meta;
    const AnnModel m = load_ann(model, &meta);
    CHECK(m.weighted_count() == 2);
    CHECK(meta.at("seed") == 9);
    CHECK(meta.at("config").at("epochs") == 3);

    // config file values are used unless a flag overrides them
    const std::string cfg_path = (dir / "cfg.json").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"epochs": 2, "seed": 4, "arch": {"widths": [8, 4, 2]}})";
    }
    const std::string model2 = (dir / "model2.json").string();
    CHECK(run({"train", "--data", train_data, "--config", cfg_path, "--out", model2, "--epochs",
               "1"}).code == 0);
    nlohmann::json meta2;
    const AnnModel m2 = load_ann(model2, &meta2);
    CHECK(meta2.at("config").at("epochs") == 1);   // flag wins
    CHECK(meta2.at("seed") == 4);                  // file value kept
    CHECK(std::get<DenseLayer>(m2.layers[0]).weight.extent(0) == 4);
}

TEST_CASE("idx datasets feed the CLI and strict mode rejects padding") {
    const fs::path fixtures = SNNFORGE_FIXTURES_DIR;
    const fs::path dir = temp_dir("idx_cli");
    const std::string model = (dir / "m.json").string();
    // 784-input model over the bundled 28x28 fixture
    CHECK(run({"train", "--images", (fixtures / "train4-images-idx3-ubyte").string(),
               "--labels", (fixtures / "train4-labels-idx1-ubyte").string(), "--out", model,
               "--widths", "784,8,6", "--epochs", "1", "--seed", "2"}).code == 0);
    CHECK(fs::exists(model));
}
