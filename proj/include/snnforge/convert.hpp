#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "snnforge/ann.hpp"
#include "snnforge/snn.hpp"

namespace snnforge {

enum class ThresholdMode { Max, Percentile };

enum class ShiftMode { None, HalfVthOverT, Custom };

struct ConversionConfig {
    int T = 1;
    ShiftMode shift_mode = ShiftMode::HalfVthOverT;
    double custom_scale = 0.0;  // shift = custom_scale * v_th per layer
    bool shift_output_layer = false;
    ThresholdMode threshold_mode = ThresholdMode::Max;
    double percentile = 1.0;  // in (0,1], Percentile mode only
    Readout readout = Readout::AccumulatePotential;

    void validate() const;
};

struct CalibrationResult {
    std::vector<double> v_th_per_layer;  // one per weighted layer
    std::size_t sample_count = 0;
    // Fixed 64-bin activation histograms over [0, v_th] per weighted layer.
    std::vector<std::array<std::uint64_t, 64>> histograms;
    std::vector<std::string> warnings;
};

// Records every weighted layer's post-activation over the calibration set and
// selects v_th per layer: the running max, or the ceil(p*N)-th smallest pooled
// value under Percentile. A layer with no positive activation falls back to
// v_th = 1 with a warning.
CalibrationResult calibrate(const AnnModel& model, const Dataset& calibration_set,
                            ThresholdMode mode = ThresholdMode::Max, double percentile = 1.0,
                            int threads = 1);

// Copies weights verbatim, takes v_th per layer from the calibration, applies
// the bias shift per cfg.shift_mode (the final weighted layer is exempt unless
// shift_output_layer is set), and drops dropout layers.
SnnModel convert(const AnnModel& model, const CalibrationResult& calib,
                 const ConversionConfig& cfg);

// Same conversion, but with an explicit absolute bias shift per layer
// (shift_sweep's contract). `deltas` has one entry per weighted layer.
SnnModel convert_with_shifts(const AnnModel& model, const CalibrationResult& calib,
                             const std::vector<double>& deltas, Readout readout);

}  // namespace snnforge
