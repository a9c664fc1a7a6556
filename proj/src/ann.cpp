#include "snnforge/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "snnforge/parallel.hpp"

namespace snnforge {

double threshold_relu(double x, double y_th) {
    if (x <= 0.0) return 0.0;
    if (x >= y_th) return y_th;
    return x;
}

double apply_activation(double z, const ActivationSpec& act, bool threshold_enabled) {
    switch (act.kind) {
        case Activation::None:
            return z;
        case Activation::Relu:
            return z <= 0.0 ? 0.0 : z;
        case Activation::ThresholdRelu:
            if (!threshold_enabled) return z <= 0.0 ? 0.0 : z;
            return threshold_relu(z, act.y_th);
    }
    return z;
}

double activation_derivative(double z, const ActivationSpec& act, bool threshold_enabled) {
    switch (act.kind) {
        case Activation::None:
            return 1.0;
        case Activation::Relu:
            return z > 0.0 ? 1.0 : 0.0;
        case Activation::ThresholdRelu:
            if (!threshold_enabled) return z > 0.0 ? 1.0 : 0.0;
            return (z > 0.0 && z < act.y_th) ? 1.0 : 0.0;
    }
    return 1.0;
}

bool is_weighted(const AnnLayer& layer) {
    return std::holds_alternative<DenseLayer>(layer) || std::holds_alternative<Conv2dLayer>(layer);
}

std::size_t AnnModel::weighted_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (is_weighted(l)) ++n;
    }
    return n;
}

namespace {

void validate_activation(const ActivationSpec& act, std::size_t idx) {
    if (act.kind == Activation::ThresholdRelu && !(act.y_th > 0.0)) {
        throw ConfigError("model: layer " + std::to_string(idx) +
                          " uses threshold_relu with y_th <= 0");
    }
}

}  // namespace

void AnnModel::validate() const {
    if (layers.empty()) throw ConfigError("model: no layers");
    const DenseLayer* prev_dense = nullptr;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const AnnLayer& l = layers[i];
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            if (d->weight.rank() != 2) {
                throw DimensionError("model: dense layer " + std::to_string(i) +
                                     " weight must be 2-d");
            }
            if (d->bias.size() != d->weight.extent(0)) {
                throw DimensionError("model: dense layer " + std::to_string(i) +
                                     " bias length does not match output width");
            }
            validate_activation(d->activation, i);
            if (prev_dense && prev_dense->weight.extent(0) != d->weight.extent(1)) {
                throw DimensionError("model: dense layers " + std::to_string(i - 1) + " and " +
                                     std::to_string(i) + " have mismatched widths");
            }
            prev_dense = d;
            continue;
        }
        prev_dense = nullptr;
        if (const auto* c = std::get_if<Conv2dLayer>(&l)) {
            if (c->kernel.rank() != 4) {
                throw DimensionError("model: conv layer " + std::to_string(i) +
                                     " kernel must be 4-d");
            }
            if (c->bias.size() != c->kernel.extent(0)) {
                throw DimensionError("model: conv layer " + std::to_string(i) +
                                     " bias length does not match output channels");
            }
            if (c->stride == 0) {
                throw ConfigError("model: conv layer " + std::to_string(i) + " has stride 0");
            }
            validate_activation(c->activation, i);
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&l)) {
            if (p->k == 0 || p->stride == 0) {
                throw ConfigError("model: avgpool layer " + std::to_string(i) +
                                  " needs positive window and stride");
            }
        } else if (const auto* dr = std::get_if<DropoutLayer>(&l)) {
            if (!(dr->p >= 0.0 && dr->p < 1.0)) {
                throw ConfigError("model: dropout layer " + std::to_string(i) +
                                  " needs p in [0,1)");
            }
        }
    }
    if (!is_weighted(layers.back())) {
        throw ConfigError("model: last layer must be dense or conv (it produces the logits)");
    }
}

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
        throw ConfigError("train: lr_decay_factor must be in (0,1)");
    }
    for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
        if (lr_decay_epochs[i] > epochs) {
            throw ConfigError("train: lr_decay_epochs entries must be <= epochs");
        }
        if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1]) {
            throw ConfigError("train: lr_decay_epochs must be strictly increasing");
        }
    }
    if (threshold_warmup_epochs < -1) {
        throw ConfigError("train: threshold_warmup_epochs must be >= 0 (or -1 for the default)");
    }
}

int TrainConfig::resolved_warmup() const {
    return threshold_warmup_epochs >= 0 ? threshold_warmup_epochs : epochs / 10;
}

namespace {

struct LayerCache {
    Tensor input;  // value entering the layer
    Tensor pre;    // pre-activation (weighted layers only)
    Tensor mask;   // dropout scaling, empty when inactive
};

struct ForwardState {
    std::vector<LayerCache> caches;
    Tensor logits;
    std::vector<Tensor> activations;  // weighted layers, post-activation
};

Tensor apply_activation_tensor(const Tensor& z, const ActivationSpec& act, bool threshold_enabled) {
    Tensor out = z;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = apply_activation(out[i], act, threshold_enabled);
    }
    return out;
}

ForwardState forward_pass(const AnnModel& model, const Tensor& x, bool threshold_enabled,
                          bool record_activations, bool keep_caches, std::mt19937_64* dropout_rng) {
    ForwardState st;
    if (keep_caches) st.caches.resize(model.layers.size());
    Tensor cur = x;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const AnnLayer& layer = model.layers[i];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            Tensor pre = affine(d->weight, d->bias, cur);
            Tensor post = apply_activation_tensor(pre, d->activation, threshold_enabled);
            if (keep_caches) {
                st.caches[i].input = std::move(cur);
                st.caches[i].pre = pre;
            }
            if (record_activations) st.activations.push_back(post);
            cur = std::move(post);
        } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
            Tensor pre = conv2d(c->kernel, c->bias, cur, c->stride, c->padding);
            Tensor post = apply_activation_tensor(pre, c->activation, threshold_enabled);
            if (keep_caches) {
                st.caches[i].input = std::move(cur);
                st.caches[i].pre = pre;
            }
            if (record_activations) st.activations.push_back(post);
            cur = std::move(post);
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
            Tensor post = avgpool(cur, p->k, p->stride);
            if (keep_caches) st.caches[i].input = std::move(cur);
            cur = std::move(post);
        } else if (const auto* dr = std::get_if<DropoutLayer>(&layer)) {
            if (dropout_rng && dr->p > 0.0) {
                // inverted scaling: kept units are divided by 1-p so the
                // inference path stays a plain identity
                std::bernoulli_distribution keep(1.0 - dr->p);
                Tensor mask(cur.shape());
                const double scale = 1.0 / (1.0 - dr->p);
                for (std::size_t j = 0; j < mask.size(); ++j) {
                    mask[j] = keep(*dropout_rng) ? scale : 0.0;
                }
                for (std::size_t j = 0; j < cur.size(); ++j) cur[j] *= mask[j];
                if (keep_caches) st.caches[i].mask = std::move(mask);
            }
        }
    }
    st.logits = std::move(cur);
    return st;
}

// softmax cross-entropy; returns loss and writes dlogits = p - onehot
double softmax_ce(const Tensor& logits, int label, Tensor& dlogits) {
    const std::size_t n = logits.size();
    double m = logits[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, logits[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) denom += std::exp(logits[i] - m);
    const double log_denom = std::log(denom);
    dlogits = Tensor({n});
    for (std::size_t i = 0; i < n; ++i) {
        dlogits[i] = std::exp(logits[i] - m) / denom;
    }
    dlogits[static_cast<std::size_t>(label)] -= 1.0;
    return -(logits[static_cast<std::size_t>(label)] - m - log_denom);
}

void backward_pass(const AnnModel& model, const ForwardState& st, Tensor dlogits,
                   bool threshold_enabled, ParamGrads& grads) {
    Tensor dcur = std::move(dlogits);
    for (std::size_t ri = model.layers.size(); ri-- > 0;) {
        const AnnLayer& layer = model.layers[ri];
        const LayerCache& cache = st.caches[ri];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            const std::size_t out = d->weight.extent(0);
            const std::size_t in = d->weight.extent(1);
            // dz = dcur * h'(pre)
            Tensor dz({out});
            for (std::size_t i = 0; i < out; ++i) {
                dz[i] = dcur[i] * activation_derivative(cache.pre[i], d->activation, threshold_enabled);
            }
            LayerGrads& g = grads.layers[ri];
            const double* xv = cache.input.data();
            for (std::size_t i = 0; i < out; ++i) {
                const double dzi = dz[i];
                g.bias[i] += dzi;
                if (dzi == 0.0) continue;
                double* grow = g.weight.data() + i * in;
                for (std::size_t j = 0; j < in; ++j) grow[j] += dzi * xv[j];
            }
            Tensor dx(cache.input.shape());
            const double* w = d->weight.data();
            for (std::size_t i = 0; i < out; ++i) {
                const double dzi = dz[i];
                if (dzi == 0.0) continue;
                const double* wrow = w + i * in;
                for (std::size_t j = 0; j < in; ++j) dx[j] += wrow[j] * dzi;
            }
            dcur = std::move(dx);
        } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
            Tensor input = cache.input.rank() == 2
                               ? cache.input.reshaped({1, cache.input.extent(0), cache.input.extent(1)})
                               : cache.input;
            const std::size_t oc = c->kernel.extent(0);
            const std::size_t ic = c->kernel.extent(1);
            const std::size_t kh = c->kernel.extent(2);
            const std::size_t kw = c->kernel.extent(3);
            const std::size_t h = input.extent(1);
            const std::size_t w = input.extent(2);
            const std::size_t oh = cache.pre.extent(1);
            const std::size_t ow = cache.pre.extent(2);
            Tensor dz({oc, oh, ow});
            for (std::size_t i = 0; i < dz.size(); ++i) {
                dz[i] = dcur[i] * activation_derivative(cache.pre[i], c->activation, threshold_enabled);
            }
            LayerGrads& g = grads.layers[ri];
            Tensor dx(input.shape());
            const double* kv = c->kernel.data();
            for (std::size_t o = 0; o < oc; ++o) {
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t col = 0; col < ow; ++col) {
                        const double dzv = dz[(o * oh + r) * ow + col];
                        if (dzv == 0.0) continue;
                        g.bias[o] += dzv;
                        for (std::size_t i = 0; i < ic; ++i) {
                            for (std::size_t kr = 0; kr < kh; ++kr) {
                                const long long rr = static_cast<long long>(r * c->stride + kr) -
                                                     static_cast<long long>(c->padding);
                                if (rr < 0 || rr >= static_cast<long long>(h)) continue;
                                for (std::size_t kc = 0; kc < kw; ++kc) {
                                    const long long cc = static_cast<long long>(col * c->stride + kc) -
                                                         static_cast<long long>(c->padding);
                                    if (cc < 0 || cc >= static_cast<long long>(w)) continue;
                                    const std::size_t xi =
                                        (i * h + static_cast<std::size_t>(rr)) * w +
                                        static_cast<std::size_t>(cc);
                                    const std::size_t ki = ((o * ic + i) * kh + kr) * kw + kc;
                                    g.weight[ki] += dzv * input[xi];
                                    dx[xi] += kv[ki] * dzv;
                                }
                            }
                        }
                    }
                }
            }
            if (cache.input.rank() == 2) dx = dx.reshaped(cache.input.shape());
            dcur = std::move(dx);
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
            Tensor input = cache.input.rank() == 2
                               ? cache.input.reshaped({1, cache.input.extent(0), cache.input.extent(1)})
                               : cache.input;
            const std::size_t ch = input.extent(0);
            const std::size_t h = input.extent(1);
            const std::size_t w = input.extent(2);
            const std::size_t oh = (h - p->k) / p->stride + 1;
            const std::size_t ow = (w - p->k) / p->stride + 1;
            Tensor dx(input.shape());
            const double inv = 1.0 / static_cast<double>(p->k * p->k);
            for (std::size_t i = 0; i < ch; ++i) {
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t col = 0; col < ow; ++col) {
                        const double dyv = dcur[(i * oh + r) * ow + col] * inv;
                        if (dyv == 0.0) continue;
                        for (std::size_t kr = 0; kr < p->k; ++kr) {
                            for (std::size_t kc = 0; kc < p->k; ++kc) {
                                dx[(i * h + r * p->stride + kr) * w + col * p->stride + kc] += dyv;
                            }
                        }
                    }
                }
            }
            if (cache.input.rank() == 2) dx = dx.reshaped(cache.input.shape());
            dcur = std::move(dx);
        } else if (std::get_if<DropoutLayer>(&layer)) {
            if (cache.mask.size() > 0) {
                for (std::size_t j = 0; j < dcur.size(); ++j) dcur[j] *= cache.mask[j];
            }
        }
    }
}

ParamGrads zero_grads(const AnnModel& model) {
    ParamGrads grads;
    grads.layers.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[i])) {
            grads.layers[i].weight = Tensor(d->weight.shape());
            grads.layers[i].bias = Tensor(d->bias.shape());
            grads.layers[i].present = true;
        } else if (const auto* c = std::get_if<Conv2dLayer>(&model.layers[i])) {
            grads.layers[i].weight = Tensor(c->kernel.shape());
            grads.layers[i].bias = Tensor(c->bias.shape());
            grads.layers[i].present = true;
        }
    }
    return grads;
}

double batch_loss_and_grads(const AnnModel& model, const Batch& batch, bool threshold_enabled,
                            std::mt19937_64* dropout_rng, ParamGrads& grads) {
    if (batch.inputs.empty()) throw DataError("loss: empty batch");
    if (batch.inputs.size() != batch.labels.size()) {
        throw DataError("loss: inputs and labels differ in length");
    }
    grads = zero_grads(model);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.inputs.size());
    for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
        ForwardState st = forward_pass(model, batch.inputs[s], threshold_enabled,
                                       /*record_activations=*/false, /*keep_caches=*/true,
                                       dropout_rng);
        const int label = batch.labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= st.logits.size()) {
            throw DataError("loss: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(st.logits.size()) + ")");
        }
        Tensor dlogits;
        total += softmax_ce(st.logits, label, dlogits);
        for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits[i] *= inv_b;
        backward_pass(model, st, std::move(dlogits), threshold_enabled, grads);
    }
    return total * inv_b;
}

}  // namespace

ForwardResult ann_forward(const AnnModel& model, const Tensor& x, bool record) {
    ForwardState st = forward_pass(model, x, /*threshold_enabled=*/true, record,
                                   /*keep_caches=*/false, nullptr);
    return ForwardResult{std::move(st.logits), std::move(st.activations)};
}

void ParamGrads::scale(double s) {
    for (auto& l : layers) {
        if (!l.present) continue;
        for (auto& v : l.weight.values()) v *= s;
        for (auto& v : l.bias.values()) v *= s;
    }
}

void ParamGrads::add_scaled(const ParamGrads& other, double s) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].present) continue;
        for (std::size_t j = 0; j < layers[i].weight.size(); ++j) {
            layers[i].weight[j] += s * other.layers[i].weight[j];
        }
        for (std::size_t j = 0; j < layers[i].bias.size(); ++j) {
            layers[i].bias[j] += s * other.layers[i].bias[j];
        }
    }
}

std::pair<double, ParamGrads> loss_and_grads(const AnnModel& model, const Batch& batch) {
    ParamGrads grads;
    const double loss = batch_loss_and_grads(model, batch, /*threshold_enabled=*/true,
                                             /*dropout_rng=*/nullptr, grads);
    return {loss, std::move(grads)};
}

TrainResult sgd_train(AnnModel model, const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (dataset.size() == 0) throw DataError("train: empty dataset");

    const int warmup = cfg.resolved_warmup();
    std::mt19937_64 rng(cfg.seed);
    ParamGrads velocity = [&] {
        ParamGrads g;
        g.layers.resize(model.layers.size());
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
            if (const auto* d = std::get_if<DenseLayer>(&model.layers[i])) {
                g.layers[i] = {Tensor(d->weight.shape()), Tensor(d->bias.shape()), true};
            } else if (const auto* c = std::get_if<Conv2dLayer>(&model.layers[i])) {
                g.layers[i] = {Tensor(c->kernel.shape()), Tensor(c->bias.shape()), true};
            }
        }
        return g;
    }();

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double lr = cfg.learning_rate;
    std::vector<double> epoch_loss;
    epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (std::find(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(), epoch) !=
            cfg.lr_decay_epochs.end()) {
            lr *= cfg.lr_decay_factor;
        }
        const bool threshold_enabled = epoch > warmup;
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Batch batch;
            batch.inputs.reserve(end - start);
            batch.labels.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.inputs.push_back(dataset.inputs[order[i]]);
                batch.labels.push_back(dataset.labels[order[i]]);
            }
            ParamGrads grads;
            const double loss = batch_loss_and_grads(model, batch, threshold_enabled, &rng, grads);
            loss_sum += loss * static_cast<double>(end - start);

            for (std::size_t li = 0; li < model.layers.size(); ++li) {
                if (!grads.layers[li].present) continue;
                Tensor* params[2] = {nullptr, nullptr};
                if (auto* d = std::get_if<DenseLayer>(&model.layers[li])) {
                    params[0] = &d->weight;
                    params[1] = &d->bias;
                } else if (auto* c = std::get_if<Conv2dLayer>(&model.layers[li])) {
                    params[0] = &c->kernel;
                    params[1] = &c->bias;
                }
                Tensor* bufs[2] = {&velocity.layers[li].weight, &velocity.layers[li].bias};
                Tensor* gs[2] = {&grads.layers[li].weight, &grads.layers[li].bias};
                for (int t = 0; t < 2; ++t) {
                    Tensor& p = *params[t];
                    Tensor& buf = *bufs[t];
                    Tensor& g = *gs[t];
                    for (std::size_t j = 0; j < p.size(); ++j) {
                        const double grad = g[j] + cfg.weight_decay * p[j];
                        buf[j] = cfg.momentum * buf[j] + grad;
                        p[j] -= lr * buf[j];
                    }
                }
            }
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    }
    return TrainResult{std::move(model), std::move(epoch_loss)};
}

double evaluate_accuracy(const AnnModel& model, const Dataset& dataset, int threads) {
    if (dataset.size() == 0) throw DataError("evaluate: empty dataset");
    std::vector<std::uint8_t> correct(dataset.size(), 0);
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        const Tensor logits = ann_forward(model, dataset.inputs[i]).logits;
        const int label = dataset.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
            throw DataError("evaluate: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(logits.size()) + ")");
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c) {
            if (logits[c] > logits[best]) best = c;  // ties keep the lowest index
        }
        correct[i] = (static_cast<int>(best) == label) ? 1 : 0;
    });
    std::size_t hits = 0;
    for (std::uint8_t c : correct) hits += c;
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

void initialize_parameters(AnnModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& layer : model.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            const double sd = std::sqrt(2.0 / static_cast<double>(d->weight.extent(0)));
            std::normal_distribution<double> dist(0.0, sd);
            for (auto& v : d->weight.values()) v = dist(rng);
            for (auto& v : d->bias.values()) v = 0.0;
        } else if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
            const double n = static_cast<double>(c->kernel.extent(0));
            const double k2 = static_cast<double>(c->kernel.extent(2) * c->kernel.extent(3));
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (k2 * n)));
            for (auto& v : c->kernel.values()) v = dist(rng);
            for (auto& v : c->bias.values()) v = 0.0;
        }
    }
}

AnnModel make_mlp(const std::vector<std::size_t>& widths, const ActivationSpec& hidden,
                  double dropout_p) {
    if (widths.size() < 2) throw ConfigError("make_mlp: need at least input and output widths");
    AnnModel model;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = (i + 2 == widths.size());
        DenseLayer d;
        d.weight = Tensor({widths[i + 1], widths[i]});
        d.bias = Tensor({widths[i + 1]});
        d.activation = last ? ActivationSpec::none() : hidden;
        model.layers.emplace_back(std::move(d));
        if (!last && dropout_p > 0.0) {
            model.layers.emplace_back(DropoutLayer{dropout_p});
        }
    }
    return model;
}

}  // namespace snnforge
