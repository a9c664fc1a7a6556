#pragma once

#include <variant>
#include <vector>

#include "snnforge/data.hpp"
#include "snnforge/tensor.hpp"

namespace snnforge {

// Firing/flooring boundary tolerance. Drives that reach the threshold up to
// rounding error still fire, and the closed form snaps z*T/v_th to the nearest
// integer within the same tolerance, so the two routes agree on grid-aligned
// inputs.
inline constexpr double kBoundaryEps = 1e-9;

enum class Readout {
    AccumulatePotential,  // final layer integrates drive without firing
    SpikeCount,           // final layer fires like any other
};

struct SnnDenseLayer {
    Tensor weight;
    Tensor bias;  // shift already folded in
    double v_th = 1.0;
};

struct SnnConv2dLayer {
    Tensor kernel;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
    double v_th = 1.0;
};

struct SnnAvgPoolLayer {
    std::size_t k = 1;
    std::size_t stride = 1;
};

using SnnLayer = std::variant<SnnDenseLayer, SnnConv2dLayer, SnnAvgPoolLayer>;

bool is_weighted(const SnnLayer& layer);

struct SnnModel {
    std::vector<SnnLayer> layers;
    Readout readout = Readout::AccumulatePotential;

    std::size_t weighted_count() const;
    void validate() const;  // v_th > 0 everywhere, weighted final layer
};

struct IfStepResult {
    double v_next;
    double spike;  // 0 or v_th
};

// One integrate-and-fire update with soft reset: temp = v + drive; at or above
// v_th the neuron emits v_th and keeps the residual temp - v_th.
IfStepResult if_step(double v, double drive, double v_th);

// Closed-form average activation of a neuron driven by constant z per step:
// (v_th/T) * clip(floor(z*T/v_th), 0, T), with the ratio snapped to the
// nearest integer when within kBoundaryEps.
double closed_form_activation(double z, double v_th, int T);

struct LayerTrace {
    double v_th = 0.0;
    std::vector<Tensor> spikes;  // one entry per timestep, values in {0, v_th}
    Tensor final_potential;      // v(T)
    Tensor avg_psp;              // sum_t spikes(t) / T
    Tensor drive_sum;            // sum_t per-step input current incl. bias
};

struct SimulationTrace {
    int T = 0;
    Readout readout = Readout::AccumulatePotential;
    std::vector<LayerTrace> layers;  // weighted layers, in order
};

// Constant-current simulation: the raw input is applied every timestep, biases
// contribute every timestep, pooling passes spikes through per timestep, and
// all membrane potentials start at zero.
SimulationTrace simulate(const SnnModel& model, const Tensor& x, int T);

struct ReadoutResult {
    Tensor scores;
    int predicted_class = 0;  // argmax, ties toward the lowest index
};

// AccumulatePotential reads the final layer's accumulated potential / T;
// SpikeCount reads the final layer's average PSP.
ReadoutResult snn_readout(const SimulationTrace& trace, Readout mode);

// Scores under the trace's own readout mode.
Tensor readout_scores(const SimulationTrace& trace);

// Effective average output per weighted layer: the average PSP, except that a
// non-firing readout layer contributes its accumulated potential / T.
std::vector<Tensor> layer_average_outputs(const SimulationTrace& trace);

double evaluate_snn_accuracy(const SnnModel& model, const Dataset& dataset, int T,
                             int threads = 1);

}  // namespace snnforge
