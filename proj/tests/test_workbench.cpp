#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "snnforge/io.hpp"
#include "snnforge/synth.hpp"
#include "test_support.hpp"

using namespace snnforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("snnforge_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

// the canonical 4-image fixture, byte for byte
std::vector<unsigned char> fixture_image_bytes() {
    std::vector<unsigned char> v;
    push_be32(v, 0x00000803u);
    push_be32(v, 4);
    push_be32(v, 28);
    push_be32(v, 28);
    for (int i = 0; i < 4; ++i) {
        for (int r = 0; r < 28; ++r) {
            for (int c = 0; c < 28; ++c) {
                v.push_back(static_cast<unsigned char>((i * 131 + r * 17 + c * 7) % 256));
            }
        }
    }
    return v;
}

std::vector<unsigned char> fixture_label_bytes() {
    std::vector<unsigned char> v;
    push_be32(v, 0x00000801u);
    push_be32(v, 4);
    for (unsigned char l : {5, 0, 4, 1}) v.push_back(l);
    return v;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("bundled IDX fixtures match the generation rule byte for byte") {
    const fs::path dir = SNNFORGE_FIXTURES_DIR;
    CHECK(read_bytes(dir / "train4-images-idx3-ubyte") == fixture_image_bytes());
    CHECK(read_bytes(dir / "train4-labels-idx1-ubyte") == fixture_label_bytes());
}

TEST_CASE("canonical fixture loads with normalized values") {
    const fs::path dir = SNNFORGE_FIXTURES_DIR;
    const Dataset d = load_idx((dir / "train4-images-idx3-ubyte").string(),
                               (dir / "train4-labels-idx1-ubyte").string());
    REQUIRE(d.size() == 4);
    CHECK(d.labels == std::vector<int>{5, 0, 4, 1});
    CHECK(d.inputs[0].shape() == std::vector<std::size_t>{28, 28});
    for (const Tensor& t : d.inputs) {
        for (double v : t.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    // pixel (i=0, r=0, c=0) is byte 0 -> 0.0
    CHECK(d.inputs[0][0] == 0.0);
    // pixel (i=1, r=4, c=8) is byte 255 -> exactly 1.0
    CHECK(d.inputs[1][4 * 28 + 8] == 1.0);
}

TEST_CASE("malformed IDX inputs fail as specified") {
    const fs::path dir = temp_dir("idx");
    const auto img = fixture_image_bytes();
    const auto lab = fixture_label_bytes();
    write_bytes(dir / "img", img);
    write_bytes(dir / "lab", lab);

    SUBCASE("wrong magic names both values") {
        // labels file passed where images are expected
        CHECK_THROWS_WITH_AS(load_idx((dir / "lab").string(), (dir / "lab").string()),
                             doctest::Contains("0x00000803"), FormatError);
        CHECK_THROWS_WITH_AS(load_idx((dir / "lab").string(), (dir / "lab").string()),
                             doctest::Contains("0x00000801"), FormatError);
    }
    SUBCASE("truncated header") {
        write_bytes(dir / "short", {0x00, 0x00, 0x08});
        CHECK_THROWS_AS(load_idx((dir / "short").string(), (dir / "lab").string()), FormatError);
        std::vector<unsigned char> nodims(img.begin(), img.begin() + 8);
        write_bytes(dir / "nodims", nodims);
        CHECK_THROWS_AS(load_idx((dir / "nodims").string(), (dir / "lab").string()), FormatError);
    }
    SUBCASE("truncated payload") {
        std::vector<unsigned char> cut(img.begin(), img.end() - 1);
        write_bytes(dir / "cut", cut);
        CHECK_THROWS_WITH_AS(load_idx((dir / "cut").string(), (dir / "lab").string()),
                             doctest::Contains("truncated"), FormatError);
    }
    SUBCASE("dimension overflow is caught before allocation") {
        std::vector<unsigned char> huge;
        push_be32(huge, 0x00000803u);
        push_be32(huge, 0xFFFFFFFFu);
        push_be32(huge, 0xFFFFFFFFu);
        push_be32(huge, 0xFFFFFFFFu);
        write_bytes(dir / "huge", huge);
        CHECK_THROWS_WITH_AS(load_idx((dir / "huge").string(), (dir / "lab").string()),
                             doctest::Contains("overflow"), FormatError);
    }
    SUBCASE("count mismatch between images and labels") {
        std::vector<unsigned char> lab3;
        push_be32(lab3, 0x00000801u);
        push_be32(lab3, 3);
        lab3.insert(lab3.end(), {5, 0, 4});
        write_bytes(dir / "lab3", lab3);
        CHECK_THROWS_AS(load_idx((dir / "img").string(), (dir / "lab3").string()), DataError);
    }
    SUBCASE("empty file") {
        write_bytes(dir / "empty", {});
        CHECK_THROWS_AS(load_idx((dir / "empty").string(), (dir / "lab").string()), FormatError);
    }
    SUBCASE("trailing garbage warns, strict mode rejects") {
        auto padded = img;
        padded.insert(padded.end(), {1, 2, 3});
        write_bytes(dir / "padded", padded);
        std::vector<std::string> warnings;
        const Dataset d =
            load_idx((dir / "padded").string(), (dir / "lab").string(), false, &warnings);
        CHECK(d.size() == 4);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("trailing") != std::string::npos);
        CHECK_THROWS_AS(load_idx((dir / "padded").string(), (dir / "lab").string(), true),
                        FormatError);
    }
}

namespace {

bool ann_bit_equal(const AnnModel& a, const AnnModel& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].index() != b.layers[i].index()) return false;
        if (const auto* d = std::get_if<DenseLayer>(&a.layers[i])) {
            const auto& e = std::get<DenseLayer>(b.layers[i]);
            if (d->weight.values() != e.weight.values()) return false;
            if (d->bias.values() != e.bias.values()) return false;
            if (d->activation.kind != e.activation.kind) return false;
            if (d->activation.y_th != e.activation.y_th) return false;
        } else if (const auto* c = std::get_if<Conv2dLayer>(&a.layers[i])) {
            const auto& e = std::get<Conv2dLayer>(b.layers[i]);
            if (c->kernel.values() != e.kernel.values()) return false;
            if (c->bias.values() != e.bias.values()) return false;
            if (c->stride != e.stride || c->padding != e.padding) return false;
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&a.layers[i])) {
            const auto& e = std::get<AvgPoolLayer>(b.layers[i]);
            if (p->k != e.k || p->stride != e.stride) return false;
        } else {
            const auto& da = std::get<DropoutLayer>(a.layers[i]);
            const auto& db = std::get<DropoutLayer>(b.layers[i]);
            if (da.p != db.p) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("ann model files round-trip bit exactly") {
    const fs::path dir = temp_dir("model_rt");
    std::mt19937_64 rng(1234);
    for (int rep = 0; rep < 50; ++rep) {
        const auto rm = testsupport::random_small_model(rng, /*allow_conv=*/true);
        const std::string path = (dir / ("m" + std::to_string(rep) + ".json")).string();
        save_ann(rm.model, path, nlohmann::json{{"seed", rep}});
        nlohmann::json meta;
        const AnnModel loaded = load_ann(path, &meta);
        CHECK(ann_bit_equal(rm.model, loaded));
        CHECK(meta["seed"] == rep);
    }
}

TEST_CASE("snn model files round-trip bit exactly") {
    const fs::path dir = temp_dir("snn_rt");
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const auto rm = testsupport::random_small_model(rng, /*allow_conv=*/true);
        CalibrationResult calib;
        std::uniform_real_distribution<double> vth(0.2, 1.8);
        for (std::size_t l = 0; l < rm.model.weighted_count(); ++l) {
            calib.v_th_per_layer.push_back(vth(rng));
        }
        ConversionConfig cfg;
        cfg.T = 8;
        cfg.readout = rep % 2 ? Readout::SpikeCount : Readout::AccumulatePotential;
        const SnnModel snn = convert(rm.model, calib, cfg);
        const std::string path = (dir / ("s" + std::to_string(rep) + ".json")).string();
        save_snn(snn, path);
        const SnnModel loaded = load_snn(path);
        REQUIRE(loaded.layers.size() == snn.layers.size());
        CHECK(loaded.readout == snn.readout);
        for (std::size_t i = 0; i < snn.layers.size(); ++i) {
            if (const auto* d = std::get_if<SnnDenseLayer>(&snn.layers[i])) {
                const auto& e = std::get<SnnDenseLayer>(loaded.layers[i]);
                CHECK(d->weight.values() == e.weight.values());
                CHECK(d->bias.values() == e.bias.values());
                CHECK(d->v_th == e.v_th);
            } else if (const auto* c = std::get_if<SnnConv2dLayer>(&snn.layers[i])) {
                const auto& e = std::get<SnnConv2dLayer>(loaded.layers[i]);
                CHECK(c->kernel.values() == e.kernel.values());
                CHECK(c->v_th == e.v_th);
            }
        }
    }
}

TEST_CASE("model files are validated on load") {
    const fs::path dir = temp_dir("model_bad");
    auto write_text = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        out << text;
        return (dir / name).string();
    };
    // wrong version
    CHECK_THROWS_AS(load_ann(write_text("v2.json", R"({"format_version":2,"kind":"ann","layers":[]})")),
                    FormatError);
    // unknown layer type
    CHECK_THROWS_AS(
        load_ann(write_text("badtype.json",
                            R"({"format_version":1,"kind":"ann","layers":[{"type":"maxpool","k":2,"stride":2}]})")),
        FormatError);
    // weight array length mismatch
    CHECK_THROWS_AS(
        load_ann(write_text(
            "badlen.json",
            R"({"format_version":1,"kind":"ann","layers":[{"type":"dense","out":2,"in":2,"weight":[1,2,3],"bias":[0,0],"activation":{"kind":"none"}}]})")),
        FormatError);
    // snn weighted layer without v_th
    CHECK_THROWS_AS(
        load_snn(write_text(
            "novth.json",
            R"({"format_version":1,"kind":"snn","readout":"accumulate_potential","layers":[{"type":"dense","out":1,"in":1,"weight":[1],"bias":[0]}]})")),
        FormatError);
    // not JSON at all
    CHECK_THROWS_AS(load_ann(write_text("nojson.json", "not json")), FormatError);
    // missing file is a data error
    CHECK_THROWS_AS(load_ann((dir / "missing.json").string()), DataError);
}

TEST_CASE("dataset json round-trips values exactly") {
    const fs::path dir = temp_dir("ds_rt");
    std::mt19937_64 rng(9);
    Dataset d;
    d.name = "rt";
    d.num_classes = 3;
    d.provenance["generator"] = "test";
    for (int i = 0; i < 8; ++i) {
        d.inputs.push_back(testsupport::random_uniform({5}, rng));
        d.labels.push_back(i % 3);
    }
    const std::string path = (dir / "d.json").string();
    save_dataset_json(d, path);
    const Dataset loaded = load_dataset_json(path);
    REQUIRE(loaded.size() == d.size());
    CHECK(loaded.num_classes == 3);
    CHECK(loaded.provenance.at("generator") == "test");
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(loaded.inputs[i].values() == d.inputs[i].values());
        CHECK(loaded.labels[i] == d.labels[i]);
    }
}

TEST_CASE("uniform benchmark is deterministic with the stated support") {
    const SynthBenchmark a = synth_uniform_benchmark(10000, 8, 1.0, 424242);
    const SynthBenchmark b = synth_uniform_benchmark(10000, 8, 1.0, 424242);
    REQUIRE(a.dataset.size() == b.dataset.size());
    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
        CHECK(a.dataset.inputs[i].values() == b.dataset.inputs[i].values());
        CHECK(a.dataset.labels[i] == b.dataset.labels[i]);
    }

    double lo = 1e300, hi = -1e300, sum = 0.0;
    std::size_t count = 0;
    for (const Tensor& t : a.dataset.inputs) {
        for (double v : t.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
            ++count;
        }
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    // mean of n*width uniforms on [0,1]: sigma = 1/sqrt(12 n_total)
    const double sigma = 1.0 / std::sqrt(12.0 * static_cast<double>(count));
    CHECK(std::abs(sum / static_cast<double>(count) - 0.5) < 3.0 * sigma);

    // the source model classifies its own labels perfectly by construction
    CHECK(evaluate_accuracy(a.ann, a.dataset, 2) == 1.0);
}

TEST_CASE("blobs task is deterministic and bounded") {
    const BlobsDatasets a = synth_blobs(64, 32, 16, 4, 0.2, 0.02, 11);
    const BlobsDatasets b = synth_blobs(64, 32, 16, 4, 0.2, 0.02, 11);
    REQUIRE(a.train.size() == 64);
    REQUIRE(a.test.size() == 32);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train.inputs[i].values() == b.train.inputs[i].values());
    }
    for (const Tensor& t : a.train.inputs) {
        for (double v : t.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    // labels cycle through the classes
    CHECK(a.train.labels[0] == 0);
    CHECK(a.train.labels[1] == 1);
    a.train.validate();
}

TEST_CASE("subsampling is deterministic and order-preserving") {
    std::mt19937_64 rng(31);
    Dataset d;
    d.num_classes = 2;
    for (int i = 0; i < 20; ++i) {
        d.inputs.push_back(testsupport::random_uniform({3}, rng));
        d.labels.push_back(i % 2);
    }
    const Dataset s1 = d.subsample(7, 5);
    const Dataset s2 = d.subsample(7, 5);
    REQUIRE(s1.size() == 7);
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1.inputs[i].values() == s2.inputs[i].values());
    }
    CHECK(d.subsample(100, 5).size() == 20);
}
