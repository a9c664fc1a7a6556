#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "snnforge/data.hpp"
#include "snnforge/numerics.hpp"
#include "snnforge/tensor.hpp"

namespace snnforge {

enum class Activation { None, Relu, ThresholdRelu };

struct ActivationSpec {
    Activation kind = Activation::None;
    double y_th = 0.0;  // upper clamp, ThresholdRelu only

    static ActivationSpec none() { return {Activation::None, 0.0}; }
    static ActivationSpec relu() { return {Activation::Relu, 0.0}; }
    static ActivationSpec threshold_relu(double y_th) { return {Activation::ThresholdRelu, y_th}; }
};

// ReLU clamped above at y_th: 0 for x <= 0, x in between, y_th for x >= y_th.
double threshold_relu(double x, double y_th);

// `threshold_enabled` = false makes ThresholdRelu behave as plain ReLU
// (training warmup).
double apply_activation(double z, const ActivationSpec& act, bool threshold_enabled = true);

// Derivative with both kinks at 0 and y_th mapped to 0.
double activation_derivative(double z, const ActivationSpec& act, bool threshold_enabled = true);

struct DenseLayer {
    Tensor weight;  // [out x in]
    Tensor bias;    // [out]
    ActivationSpec activation;
};

struct Conv2dLayer {
    Tensor kernel;  // [oc x ic x kh x kw]
    Tensor bias;    // [oc]
    std::size_t stride = 1;
    std::size_t padding = 0;
    ActivationSpec activation;
};

struct AvgPoolLayer {
    std::size_t k = 1;
    std::size_t stride = 1;
};

struct DropoutLayer {
    double p = 0.0;  // identity at inference
};

using AnnLayer = std::variant<DenseLayer, Conv2dLayer, AvgPoolLayer, DropoutLayer>;

bool is_weighted(const AnnLayer& layer);

struct AnnModel {
    std::vector<AnnLayer> layers;

    std::size_t weighted_count() const;
    // Checks per-layer invariants: y_th > 0 where ThresholdRelu is used,
    // dropout p in [0,1), dense-to-dense width conformance, and that the
    // model ends in a weighted layer (its outputs are the logits).
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int epochs = 1;
    int batch_size = 32;
    std::vector<int> lr_decay_epochs;  // strictly increasing, <= epochs
    double lr_decay_factor = 0.1;
    int threshold_warmup_epochs = -1;  // -1 resolves to epochs/10
    std::uint64_t seed = 0;

    void validate() const;
    int resolved_warmup() const;
};

struct Batch {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
};

struct ForwardResult {
    Tensor logits;
    // Post-activation tensor of every weighted layer, in layer order; filled
    // only when the forward pass was recorded.
    std::vector<Tensor> activations;
};

// Inference forward pass: dropout is identity, thresholds active.
ForwardResult ann_forward(const AnnModel& model, const Tensor& x, bool record = false);

// Per-parameter gradients aligned with model.layers; `present` is false for
// avgpool/dropout entries.
struct LayerGrads {
    Tensor weight;
    Tensor bias;
    bool present = false;
};

struct ParamGrads {
    std::vector<LayerGrads> layers;

    void scale(double s);
    void add_scaled(const ParamGrads& other, double s);
};

// Mean softmax cross-entropy over the batch plus reverse-mode gradients.
// Dropout layers are identities here; sgd_train applies its own masks.
std::pair<double, ParamGrads> loss_and_grads(const AnnModel& model, const Batch& batch);

struct TrainResult {
    AnnModel model;
    std::vector<double> epoch_loss;
};

// Momentum SGD with weight decay, seeded shuffling, inverted-scaling dropout
// and a regular-ReLU warmup before the threshold clamp is enabled.
TrainResult sgd_train(AnnModel model, const Dataset& dataset, const TrainConfig& cfg);

// Fraction of samples whose argmax logit equals the label; ties break toward
// the lowest class index. Forward passes may run data-parallel.
double evaluate_accuracy(const AnnModel& model, const Dataset& dataset, int threads = 1);

// Zero-mean normal init with stddev sqrt(2/(k^2 n)) (k = 1 for dense,
// n = output width/channels), biases zero.
void initialize_parameters(AnnModel& model, std::uint64_t seed);

// Dense stack helper: widths[0] inputs .. widths.back() outputs, `hidden`
// activation everywhere except the final (logit) layer. `dropout_p` > 0 adds
// a dropout layer after every hidden activation. Parameters are zero until
// initialize_parameters is called.
AnnModel make_mlp(const std::vector<std::size_t>& widths, const ActivationSpec& hidden,
                  double dropout_p = 0.0);

}  // namespace snnforge
