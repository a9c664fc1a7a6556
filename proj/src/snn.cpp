#include "snnforge/snn.hpp"

#include <cmath>
#include <string>

#include "snnforge/numerics.hpp"
#include "snnforge/parallel.hpp"

namespace snnforge {

bool is_weighted(const SnnLayer& layer) {
    return !std::holds_alternative<SnnAvgPoolLayer>(layer);
}

std::size_t SnnModel::weighted_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (is_weighted(l)) ++n;
    }
    return n;
}

void SnnModel::validate() const {
    if (layers.empty()) throw ConfigError("snn: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        double v_th = 1.0;
        if (const auto* d = std::get_if<SnnDenseLayer>(&layers[i])) {
            v_th = d->v_th;
        } else if (const auto* c = std::get_if<SnnConv2dLayer>(&layers[i])) {
            v_th = c->v_th;
        } else {
            continue;
        }
        if (!(v_th > 0.0)) {
            throw ConfigError("snn: layer " + std::to_string(i) + " has v_th <= 0");
        }
    }
    if (!is_weighted(layers.back())) {
        throw ConfigError("snn: last layer must be weighted (it feeds the readout)");
    }
}

IfStepResult if_step(double v, double drive, double v_th) {
    const double temp = v + drive;
    if (temp >= v_th - kBoundaryEps) {
        return {temp - v_th, v_th};
    }
    return {temp, 0.0};
}

double closed_form_activation(double z, double v_th, int T) {
    double ratio = z * static_cast<double>(T) / v_th;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= kBoundaryEps) ratio = nearest;
    double steps = std::floor(ratio);
    if (steps < 0.0) steps = 0.0;
    if (steps > static_cast<double>(T)) steps = static_cast<double>(T);
    return v_th / static_cast<double>(T) * steps;
}

namespace {

Tensor layer_drive(const SnnLayer& layer, const Tensor& input) {
    if (const auto* d = std::get_if<SnnDenseLayer>(&layer)) {
        return affine(d->weight, d->bias, input);
    }
    const auto& c = std::get<SnnConv2dLayer>(layer);
    return conv2d(c.kernel, c.bias, input, c.stride, c.padding);
}

double layer_vth(const SnnLayer& layer) {
    if (const auto* d = std::get_if<SnnDenseLayer>(&layer)) return d->v_th;
    return std::get<SnnConv2dLayer>(layer).v_th;
}

}  // namespace

SimulationTrace simulate(const SnnModel& model, const Tensor& x, int T) {
    if (T < 1) throw ConfigError("simulate: T must be >= 1, got " + std::to_string(T));
    model.validate();

    const std::size_t n_weighted = model.weighted_count();
    SimulationTrace trace;
    trace.T = T;
    trace.readout = model.readout;
    trace.layers.resize(n_weighted);

    // Map each weighted layer to its position in the layer list and find the
    // last one (subject to the readout mode).
    std::vector<std::size_t> weighted_pos;
    weighted_pos.reserve(n_weighted);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (is_weighted(model.layers[i])) weighted_pos.push_back(i);
    }

    // The input is constant current, so everything up to and including the
    // first weighted layer's drive is the same every timestep.
    Tensor prefix = x;
    std::size_t li = 0;
    while (li < model.layers.size() && !is_weighted(model.layers[li])) {
        const auto& p = std::get<SnnAvgPoolLayer>(model.layers[li]);
        prefix = avgpool(prefix, p.k, p.stride);
        ++li;
    }
    const Tensor first_drive = layer_drive(model.layers[li], prefix);

    // Membrane state and bookkeeping per weighted layer.
    for (std::size_t w = 0; w < n_weighted; ++w) {
        trace.layers[w].v_th = layer_vth(model.layers[weighted_pos[w]]);
        trace.layers[w].spikes.reserve(static_cast<std::size_t>(T));
    }
    std::vector<Tensor> potential(n_weighted);
    potential[0] = Tensor(first_drive.shape());
    trace.layers[0].drive_sum = Tensor(first_drive.shape());

    for (int t = 0; t < T; ++t) {
        Tensor signal;  // spike output of the previous weighted layer
        for (std::size_t w = 0; w < n_weighted; ++w) {
            LayerTrace& lt = trace.layers[w];
            Tensor drive;
            if (w == 0) {
                drive = first_drive;
            } else {
                // pass spikes through any pooling between the layers
                std::size_t pos = weighted_pos[w - 1] + 1;
                while (pos < weighted_pos[w]) {
                    const auto& p = std::get<SnnAvgPoolLayer>(model.layers[pos]);
                    signal = avgpool(signal, p.k, p.stride);
                    ++pos;
                }
                drive = layer_drive(model.layers[weighted_pos[w]], signal);
                if (t == 0) {
                    potential[w] = Tensor(drive.shape());
                    lt.drive_sum = Tensor(drive.shape());
                }
            }
            for (std::size_t i = 0; i < drive.size(); ++i) lt.drive_sum[i] += drive[i];

            const bool fires =
                !(w + 1 == n_weighted && model.readout == Readout::AccumulatePotential);
            Tensor spikes(drive.shape());
            Tensor& v = potential[w];
            if (fires) {
                for (std::size_t i = 0; i < drive.size(); ++i) {
                    const IfStepResult r = if_step(v[i], drive[i], lt.v_th);
                    v[i] = r.v_next;
                    spikes[i] = r.spike;
                }
            } else {
                for (std::size_t i = 0; i < drive.size(); ++i) v[i] += drive[i];
            }
            lt.spikes.push_back(std::move(spikes));
            signal = lt.spikes.back();
        }
    }

    const double inv_T = 1.0 / static_cast<double>(T);
    for (std::size_t w = 0; w < n_weighted; ++w) {
        LayerTrace& lt = trace.layers[w];
        lt.final_potential = potential[w];
        lt.avg_psp = Tensor(potential[w].shape());
        for (const Tensor& s : lt.spikes) {
            for (std::size_t i = 0; i < s.size(); ++i) lt.avg_psp[i] += s[i];
        }
        for (std::size_t i = 0; i < lt.avg_psp.size(); ++i) lt.avg_psp[i] *= inv_T;
    }
    return trace;
}

ReadoutResult snn_readout(const SimulationTrace& trace, Readout mode) {
    if (trace.layers.empty()) throw ConfigError("readout: empty trace");
    const LayerTrace& last = trace.layers.back();
    Tensor scores;
    if (mode == Readout::AccumulatePotential) {
        scores = last.final_potential;
        const double inv_T = 1.0 / static_cast<double>(trace.T);
        for (auto& v : scores.values()) v *= inv_T;
    } else {
        scores = last.avg_psp;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return ReadoutResult{std::move(scores), static_cast<int>(best)};
}

Tensor readout_scores(const SimulationTrace& trace) {
    return snn_readout(trace, trace.readout).scores;
}

std::vector<Tensor> layer_average_outputs(const SimulationTrace& trace) {
    std::vector<Tensor> out;
    out.reserve(trace.layers.size());
    for (std::size_t w = 0; w < trace.layers.size(); ++w) {
        if (w + 1 == trace.layers.size() && trace.readout == Readout::AccumulatePotential) {
            Tensor scores = trace.layers[w].final_potential;
            const double inv_T = 1.0 / static_cast<double>(trace.T);
            for (auto& v : scores.values()) v *= inv_T;
            out.push_back(std::move(scores));
        } else {
            out.push_back(trace.layers[w].avg_psp);
        }
    }
    return out;
}

double evaluate_snn_accuracy(const SnnModel& model, const Dataset& dataset, int T, int threads) {
    if (dataset.size() == 0) throw DataError("evaluate: empty dataset");
    std::vector<std::uint8_t> correct(dataset.size(), 0);
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        const SimulationTrace trace = simulate(model, dataset.inputs[i], T);
        const ReadoutResult r = snn_readout(trace, model.readout);
        correct[i] = (r.predicted_class == dataset.labels[i]) ? 1 : 0;
    });
    std::size_t hits = 0;
    for (std::uint8_t c : correct) hits += c;
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace snnforge
