#pragma once

#include <map>
#include <string>
#include <vector>

#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/snn.hpp"

namespace snnforge {

// Per weighted layer, means over the dataset of the squared Euclidean norms of
//   dpsp = a'_l - h_l(W_l a'_{l-1} + b_l)   (activation-function mismatch,
//          computed against the ANN's unshifted bias), and
//   da   = a'_l - a_l                       (total output error).
struct LayerErrorTable {
    std::vector<double> mean_dpsp_sq;
    std::vector<double> mean_da_sq;

    double objective() const;  // mean of mean_dpsp_sq over layers
};

struct SweepPoint {
    double delta = 0.0;
    double objective = 0.0;
    double snn_accuracy = 0.0;
};

struct ScalingRow {
    int T = 0;
    double mean_sq_output_error = 0.0;
    double estimate = 0.0;  // L * v_th^2 / (4T) with the mean spiking-layer v_th
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    // Least-squares slope of log(rms output error) vs log(T).
    double slope = 0.0;
};

// ANN accuracy minus SNN accuracy at simulation length T (the accuracy
// difference convention; may be negative when the SNN wins).
double conversion_loss(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset, int T,
                       int threads = 1);

LayerErrorTable layerwise_error(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset,
                                int T, int threads = 1);

// Converts with an absolute bias shift delta on every weighted layer except
// the output layer, then measures the mismatch objective and SNN accuracy for
// each grid point.
std::vector<SweepPoint> shift_sweep(const AnnModel& ann, const CalibrationResult& calib,
                                    const Dataset& dataset, int T,
                                    const std::vector<double>& grid, int threads = 1);

// L * v_th^2 / (4 T)
double error_estimate(int num_layers, double v_th, int T);

// Converts (threshold + half-v_th/T shift) and simulates at every T, recording
// the mean squared final-layer output discrepancy next to the analytic
// estimate, plus the fitted log-log slope of the rms error.
ScalingResult scaling_experiment(const AnnModel& ann, const CalibrationResult& calib,
                                 const Dataset& dataset, const std::vector<int>& T_list,
                                 int threads = 1);

struct PerLayerErrorRow {
    int T = 0;
    int layer = 0;
    double mean_dpsp_sq = 0.0;
    double mean_da_sq = 0.0;
};

struct ConversionReport {
    double ann_accuracy = 0.0;
    std::map<int, double> snn_accuracy_by_T;
    std::map<int, double> conversion_loss_by_T;  // always ann_accuracy - snn_accuracy
    std::vector<PerLayerErrorRow> per_layer_error;
    std::vector<SweepPoint> shift_sweep;
    std::map<int, double> estimate_by_T;
    std::vector<ScalingRow> scaling_rows;
    double scaling_slope = 0.0;
    bool has_scaling = false;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config_echo;
};

// Accuracy/loss/layer-error analysis of a fixed SNN at each T.
ConversionReport analyze(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset,
                         const std::vector<int>& T_list, int threads = 1);

}  // namespace snnforge
