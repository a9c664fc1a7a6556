#pragma once

// Shared helpers for the test binaries: random small models, a cross-entropy
// loss oracle built on the public forward pass, and a central-difference
// gradient check that stays independent of the backprop implementation.

#include <cmath>
#include <random>
#include <vector>

#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/snn.hpp"

namespace testsupport {

using namespace snnforge;

inline Tensor random_uniform(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = 0.0,
                             double hi = 1.0) {
    std::uniform_real_distribution<double> uni(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = uni(rng);
    return t;
}

inline void randomize(AnnModel& model, std::mt19937_64& rng, double scale = 0.6) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& layer : model.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            const double s = scale / std::sqrt(static_cast<double>(d->weight.extent(1)));
            for (auto& v : d->weight.values()) v = s * gauss(rng);
            for (auto& v : d->bias.values()) v = 0.1 * gauss(rng);
        } else if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
            const double fan_in =
                static_cast<double>(c->kernel.extent(1) * c->kernel.extent(2) * c->kernel.extent(3));
            const double s = scale / std::sqrt(fan_in);
            for (auto& v : c->kernel.values()) v = s * gauss(rng);
            for (auto& v : c->bias.values()) v = 0.1 * gauss(rng);
        }
    }
}

struct RandomModel {
    AnnModel model;
    std::vector<std::size_t> input_shape;
    int num_classes = 2;
};

// Dense stacks up to 3 weighted layers (widths <= 8), or a small conv +
// avgpool + dense pipeline when conv is allowed.
inline RandomModel random_small_model(std::mt19937_64& rng, bool allow_conv) {
    RandomModel rm;
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> width_dist(2, 8);
    std::uniform_real_distribution<double> yth_dist(0.5, 1.5);

    const bool use_conv = allow_conv && coin(rng) == 1;
    if (use_conv) {
        const std::size_t ic = static_cast<std::size_t>(1 + coin(rng));
        const std::size_t oc = static_cast<std::size_t>(1 + coin(rng));
        rm.input_shape = {ic, 4, 4};
        Conv2dLayer conv;
        conv.kernel = Tensor({oc, ic, 3, 3});
        conv.bias = Tensor({oc});
        conv.stride = 1;
        conv.padding = 1;
        conv.activation = ActivationSpec::threshold_relu(yth_dist(rng));
        rm.model.layers.emplace_back(std::move(conv));
        rm.model.layers.emplace_back(AvgPoolLayer{2, 2});
        const std::size_t flat = oc * 2 * 2;
        const std::size_t classes = static_cast<std::size_t>(width_dist(rng));
        DenseLayer head;
        head.weight = Tensor({classes, flat});
        head.bias = Tensor({classes});
        head.activation = ActivationSpec::none();
        rm.num_classes = static_cast<int>(classes);
        rm.model.layers.emplace_back(std::move(head));
    } else {
        std::uniform_int_distribution<int> depth_dist(1, 3);
        const int depth = depth_dist(rng);
        std::vector<std::size_t> widths;
        for (int i = 0; i <= depth; ++i) {
            widths.push_back(static_cast<std::size_t>(width_dist(rng)));
        }
        rm.input_shape = {widths.front()};
        for (int i = 0; i < depth; ++i) {
            DenseLayer d;
            d.weight = Tensor({widths[i + 1], widths[i]});
            d.bias = Tensor({widths[i + 1]});
            if (i + 1 == depth) {
                d.activation = ActivationSpec::none();
            } else {
                d.activation = coin(rng) ? ActivationSpec::threshold_relu(yth_dist(rng))
                                         : ActivationSpec::relu();
            }
            rm.model.layers.emplace_back(std::move(d));
        }
        rm.num_classes = static_cast<int>(widths.back());
    }
    randomize(rm.model, rng);
    return rm;
}

inline Batch random_batch(const RandomModel& rm, std::mt19937_64& rng, std::size_t n) {
    Batch batch;
    std::uniform_int_distribution<int> label_dist(0, rm.num_classes - 1);
    for (std::size_t i = 0; i < n; ++i) {
        batch.inputs.push_back(random_uniform(rm.input_shape, rng));
        batch.labels.push_back(label_dist(rng));
    }
    return batch;
}

// Loss oracle through the public forward pass only.
inline double ce_loss(const AnnModel& model, const Batch& batch) {
    double total = 0.0;
    for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
        const Tensor logits = ann_forward(model, batch.inputs[s]).logits;
        double m = logits[0];
        for (std::size_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) denom += std::exp(logits[i] - m);
        total += -(logits[static_cast<std::size_t>(batch.labels[s])] - m - std::log(denom));
    }
    return total / static_cast<double>(batch.inputs.size());
}

// Activation spec per weighted layer, in recording order.
inline std::vector<ActivationSpec> weighted_activations(const AnnModel& model) {
    std::vector<ActivationSpec> specs;
    for (const auto& layer : model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            specs.push_back(d->activation);
        } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
            specs.push_back(c->activation);
        }
    }
    return specs;
}

// Activation region per recorded unit: 0 below the kink, 1 interior, 2
// saturated (layers without kinks are always 1). A finite difference is only
// a valid derivative estimate when both perturbed passes stay in the same
// region everywhere.
inline std::vector<int> activation_regions(const AnnModel& model, const Batch& batch) {
    const auto specs = weighted_activations(model);
    std::vector<int> regions;
    for (const Tensor& x : batch.inputs) {
        const auto acts = ann_forward(model, x, /*record=*/true).activations;
        for (std::size_t l = 0; l < acts.size(); ++l) {
            const ActivationSpec& spec = specs[l];
            for (double v : acts[l].values()) {
                int r = 1;
                if (spec.kind != Activation::None && v == 0.0) r = 0;
                if (spec.kind == Activation::ThresholdRelu && v == spec.y_th) r = 2;
                regions.push_back(r);
            }
        }
    }
    return regions;
}

// True when some recorded activation sits within tol of a kink (visible side).
inline bool near_kink(const AnnModel& model, const Batch& batch, double tol) {
    const auto specs = weighted_activations(model);
    for (const Tensor& x : batch.inputs) {
        const auto acts = ann_forward(model, x, /*record=*/true).activations;
        for (std::size_t l = 0; l < acts.size(); ++l) {
            const ActivationSpec& spec = specs[l];
            if (spec.kind == Activation::None) continue;
            for (double v : acts[l].values()) {
                if (v > 0.0 && v < tol) return true;
                if (spec.kind == Activation::ThresholdRelu && v < spec.y_th &&
                    v > spec.y_th - tol) {
                    return true;
                }
            }
        }
    }
    return false;
}

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    double worst_rel = 0.0;
};

inline GradCheckResult check_gradients(const AnnModel& model, const Batch& batch,
                                       double eps = 1e-5, double tol = 1e-4) {
    GradCheckResult res;
    const auto [loss, grads] = loss_and_grads(model, batch);
    (void)loss;

    auto check_param = [&](std::size_t layer_idx, bool is_weight, std::size_t k,
                           double analytic) {
        AnnModel plus = model;
        AnnModel minus = model;
        auto bump = [&](AnnModel& m, double delta) {
            auto& layer = m.layers[layer_idx];
            if (auto* d = std::get_if<DenseLayer>(&layer)) {
                (is_weight ? d->weight : d->bias)[k] += delta;
            } else if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
                (is_weight ? c->kernel : c->bias)[k] += delta;
            }
        };
        bump(plus, eps);
        bump(minus, -eps);
        if (activation_regions(plus, batch) != activation_regions(minus, batch)) {
            ++res.skipped;  // perturbation crossed a kink
            return;
        }
        const double fd = (ce_loss(plus, batch) - ce_loss(minus, batch)) / (2.0 * eps);
        const double denom = std::max({1e-2, std::abs(fd), std::abs(analytic)});
        const double rel = std::abs(fd - analytic) / denom;
        res.worst_rel = std::max(res.worst_rel, rel);
        ++res.checked;
        if (rel > tol) ++res.failed;
    };

    if (near_kink(model, batch, 1e-6)) {
        // whole configuration sits on a kink; nothing trustworthy to check
        res.skipped = 1;
        return res;
    }
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        if (!grads.layers[li].present) continue;
        for (std::size_t k = 0; k < grads.layers[li].weight.size(); ++k) {
            check_param(li, true, k, grads.layers[li].weight[k]);
        }
        for (std::size_t k = 0; k < grads.layers[li].bias.size(); ++k) {
            check_param(li, false, k, grads.layers[li].bias[k]);
        }
    }
    return res;
}

}  // namespace testsupport
