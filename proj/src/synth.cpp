#include "snnforge/synth.hpp"

#include <cmath>
#include <random>

namespace snnforge {

SynthBenchmark synth_uniform_benchmark(std::size_t n_samples, std::size_t width, double v_th,
                                       std::uint64_t seed) {
    if (n_samples == 0 || width == 0 || !(v_th > 0.0)) {
        throw ConfigError("synth_uniform_benchmark: arguments must be positive");
    }

    AnnModel ann;
    DenseLayer analyzed;
    analyzed.weight = Tensor({width, width});
    for (std::size_t i = 0; i < width; ++i) analyzed.weight[i * width + i] = 1.0;
    analyzed.bias = Tensor({width});
    analyzed.activation = ActivationSpec::threshold_relu(v_th);
    ann.layers.emplace_back(std::move(analyzed));

    DenseLayer readout;
    readout.weight = Tensor({2, width});
    const double w = 2.0 / static_cast<double>(width);
    for (std::size_t j = 0; j < width; ++j) {
        readout.weight[j] = -w;          // class 0: mean below v_th/2
        readout.weight[width + j] = w;   // class 1: mean above v_th/2
    }
    readout.bias = Tensor({2}, {v_th, -v_th});
    readout.activation = ActivationSpec::none();
    ann.layers.emplace_back(std::move(readout));

    Dataset data;
    data.name = "synth-uniform";
    data.num_classes = 2;
    data.provenance["generator"] = "synth_uniform_benchmark";
    data.provenance["seed"] = std::to_string(seed);
    data.provenance["n_samples"] = std::to_string(n_samples);
    data.provenance["width"] = std::to_string(width);
    data.provenance["v_th"] = std::to_string(v_th);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, v_th);
    data.inputs.reserve(n_samples);
    data.labels.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Tensor x({width});
        for (std::size_t j = 0; j < width; ++j) x[j] = uni(rng);
        // label by the model's own arithmetic so the source accuracy is exact
        const Tensor logits = ann_forward(ann, x).logits;
        data.labels.push_back(logits[1] > logits[0] ? 1 : 0);
        data.inputs.push_back(std::move(x));
    }
    return SynthBenchmark{std::move(ann), std::move(data)};
}

ExactGridFixture exact_grid_fixture() {
    ExactGridFixture fx;
    fx.T = 8;

    // All values are dyadic rationals, so every sum below is exact in doubles.
    DenseLayer l1;
    l1.weight = Tensor({2, 3}, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0});
    l1.bias = Tensor({2}, {0.125, 0.25});
    l1.activation = ActivationSpec::threshold_relu(1.0);

    // The layer-2 drive must stay within [0, v_th] every timestep (an IF
    // neuron emits at most one spike per step), so weights are nonnegative and
    // sum with the bias to exactly 1.
    DenseLayer l2;
    l2.weight = Tensor({1, 2}, {0.0625, 0.6875});
    l2.bias = Tensor({1}, {0.25});
    l2.activation = ActivationSpec::threshold_relu(1.0);

    DenseLayer l3;
    l3.weight = Tensor({2, 1}, {1.0, -1.0});
    l3.bias = Tensor({2}, {0.0, 1.0});
    l3.activation = ActivationSpec::none();

    fx.ann.layers = {l1, l2, l3};

    // pre-activations on the eval input: layer 1 -> {3/8, 7/8}, layer 2 -> 7/8
    const Tensor x_eval({3}, {0.25, 0.625, 0.375});
    // saturating input: each threshold ReLU hits y_th exactly, so the
    // calibrated v_th is exactly 1
    const Tensor x_sat({3}, {1.0, 1.0, 1.0});

    fx.eval_set.name = "exact-grid-eval";
    fx.eval_set.num_classes = 2;
    fx.eval_set.inputs = {x_eval};
    fx.eval_set.labels = {0};
    fx.eval_set.provenance["generator"] = "exact_grid_fixture";

    fx.calib_set.name = "exact-grid-calib";
    fx.calib_set.num_classes = 2;
    fx.calib_set.inputs = {x_eval, x_sat};
    fx.calib_set.labels = {0, 0};
    fx.calib_set.provenance["generator"] = "exact_grid_fixture";
    return fx;
}

BlobsDatasets synth_blobs(std::size_t n_train, std::size_t n_test, std::size_t dim,
                          int n_classes, double latent_sigma, double pixel_sigma,
                          std::uint64_t seed, double outlier_rate, double outlier_scale) {
    if (n_train == 0 || n_test == 0 || dim == 0 || n_classes < 2) {
        throw ConfigError("synth_blobs: need positive sizes and >= 2 classes");
    }
    if (outlier_rate < 0.0 || outlier_rate >= 1.0 || outlier_scale < 1.0) {
        throw ConfigError("synth_blobs: outlier_rate in [0,1), outlier_scale >= 1");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    // fixed random embedding of the 2-d latent ring into pixel space
    std::vector<double> proj(dim * 2);
    for (auto& v : proj) v = gauss(rng);

    const double two_pi = 2.0 * std::acos(-1.0);
    auto fill = [&](Dataset& out, std::size_t n, const char* split) {
        out.name = std::string("synth-blobs-") + split;
        out.num_classes = n_classes;
        out.provenance["generator"] = "synth_blobs";
        out.provenance["seed"] = std::to_string(seed);
        out.provenance["split"] = split;
        out.provenance["dim"] = std::to_string(dim);
        out.provenance["latent_sigma"] = std::to_string(latent_sigma);
        out.provenance["pixel_sigma"] = std::to_string(pixel_sigma);
        out.provenance["outlier_rate"] = std::to_string(outlier_rate);
        out.provenance["outlier_scale"] = std::to_string(outlier_scale);
        out.inputs.reserve(n);
        out.labels.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(i % static_cast<std::size_t>(n_classes));
            const double angle = two_pi * label / n_classes;
            double u = std::cos(angle) + latent_sigma * gauss(rng);
            double v = std::sin(angle) + latent_sigma * gauss(rng);
            if (outlier_rate > 0.0 && uni01(rng) < outlier_rate) {
                u *= outlier_scale;
                v *= outlier_scale;
            }
            Tensor x({dim});
            // the embedding scale leaves headroom so outlier tails survive
            // the [0,1] clamp instead of saturating
            for (std::size_t j = 0; j < dim; ++j) {
                double px = 0.5 + 0.06 * (proj[j * 2] * u + proj[j * 2 + 1] * v);
                if (pixel_sigma > 0.0) px += pixel_sigma * gauss(rng);
                x[j] = std::clamp(px, 0.0, 1.0);
            }
            out.inputs.push_back(std::move(x));
            out.labels.push_back(label);
        }
    };

    BlobsDatasets out;
    fill(out.train, n_train, "train");
    fill(out.test, n_test, "test");
    return out;
}

}  // namespace snnforge
