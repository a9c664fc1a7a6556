#include "snnforge/convert.hpp"

#include <algorithm>
#include <cmath>

#include "snnforge/parallel.hpp"

namespace snnforge {

void ConversionConfig::validate() const {
    if (T < 1) throw ConfigError("convert: T must be >= 1, got " + std::to_string(T));
    if (shift_mode == ShiftMode::Custom && !std::isfinite(custom_scale)) {
        throw ConfigError("convert: custom shift scale must be finite");
    }
    if (threshold_mode == ThresholdMode::Percentile &&
        !(percentile > 0.0 && percentile <= 1.0)) {
        throw ConfigError("convert: percentile must be in (0,1]");
    }
}

CalibrationResult calibrate(const AnnModel& model, const Dataset& calibration_set,
                            ThresholdMode mode, double percentile, int threads) {
    if (calibration_set.size() == 0) throw DataError("calibrate: empty calibration set");
    const std::size_t n_weighted = model.weighted_count();
    if (n_weighted == 0) throw ConfigError("calibrate: model has no weighted layer");
    if (mode == ThresholdMode::Percentile && !(percentile > 0.0 && percentile <= 1.0)) {
        throw ConfigError("calibrate: percentile must be in (0,1]");
    }

    // Record activations per sample slot, then pool in sample order so the
    // result is independent of the thread count.
    std::vector<std::vector<Tensor>> recorded(calibration_set.size());
    parallel_for(calibration_set.size(), threads, [&](std::size_t s) {
        recorded[s] = ann_forward(model, calibration_set.inputs[s], /*record=*/true).activations;
    });

    std::vector<std::vector<double>> pooled(n_weighted);
    for (std::size_t s = 0; s < recorded.size(); ++s) {
        for (std::size_t l = 0; l < n_weighted; ++l) {
            const auto& vals = recorded[s][l].values();
            pooled[l].insert(pooled[l].end(), vals.begin(), vals.end());
        }
    }

    CalibrationResult result;
    result.sample_count = calibration_set.size();
    result.v_th_per_layer.resize(n_weighted);
    result.histograms.resize(n_weighted);
    for (std::size_t l = 0; l < n_weighted; ++l) {
        double v_th;
        if (mode == ThresholdMode::Max) {
            v_th = *std::max_element(pooled[l].begin(), pooled[l].end());
        } else {
            const std::size_t n = pooled[l].size();
            std::size_t rank = static_cast<std::size_t>(
                std::ceil(percentile * static_cast<double>(n) - 1e-9));
            rank = std::clamp<std::size_t>(rank, 1, n);
            std::vector<double> copy = pooled[l];
            std::nth_element(copy.begin(), copy.begin() + static_cast<long>(rank - 1), copy.end());
            v_th = copy[rank - 1];
        }
        if (!(v_th > 0.0)) {
            result.warnings.push_back("layer " + std::to_string(l) +
                                      ": no positive activation recorded; v_th set to 1");
            v_th = 1.0;
        }
        result.v_th_per_layer[l] = v_th;

        auto& hist = result.histograms[l];
        hist.fill(0);
        const double scale = 64.0 / v_th;
        for (double v : pooled[l]) {
            if (v < 0.0 || v > v_th) continue;
            std::size_t bin = static_cast<std::size_t>(v * scale);
            if (bin >= 64) bin = 63;
            ++hist[bin];
        }
    }
    return result;
}

namespace {

std::vector<double> shift_per_layer(const CalibrationResult& calib, const ConversionConfig& cfg,
                                    std::size_t n_weighted) {
    std::vector<double> deltas(n_weighted, 0.0);
    for (std::size_t l = 0; l < n_weighted; ++l) {
        switch (cfg.shift_mode) {
            case ShiftMode::None:
                break;
            case ShiftMode::HalfVthOverT:
                deltas[l] = calib.v_th_per_layer[l] / (2.0 * static_cast<double>(cfg.T));
                break;
            case ShiftMode::Custom:
                deltas[l] = cfg.custom_scale * calib.v_th_per_layer[l];
                break;
        }
    }
    if (!cfg.shift_output_layer && !deltas.empty()) deltas.back() = 0.0;
    return deltas;
}

}  // namespace

SnnModel convert_with_shifts(const AnnModel& model, const CalibrationResult& calib,
                             const std::vector<double>& deltas, Readout readout) {
    const std::size_t n_weighted = model.weighted_count();
    if (calib.v_th_per_layer.size() != n_weighted) {
        throw ConfigError("convert: calibration has " +
                          std::to_string(calib.v_th_per_layer.size()) +
                          " thresholds but the model has " + std::to_string(n_weighted) +
                          " weighted layers");
    }
    if (deltas.size() != n_weighted) {
        throw ConfigError("convert: need one shift per weighted layer");
    }

    SnnModel snn;
    snn.readout = readout;
    std::size_t w = 0;
    for (const auto& layer : model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            SnnDenseLayer out;
            out.weight = d->weight;
            out.bias = d->bias;
            for (auto& b : out.bias.values()) b += deltas[w];
            out.v_th = calib.v_th_per_layer[w];
            snn.layers.emplace_back(std::move(out));
            ++w;
        } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
            SnnConv2dLayer out;
            out.kernel = c->kernel;
            out.bias = c->bias;
            for (auto& b : out.bias.values()) b += deltas[w];
            out.stride = c->stride;
            out.padding = c->padding;
            out.v_th = calib.v_th_per_layer[w];
            snn.layers.emplace_back(std::move(out));
            ++w;
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
            snn.layers.emplace_back(SnnAvgPoolLayer{p->k, p->stride});
        }
        // dropout layers are identities at inference and are dropped
    }
    snn.validate();
    return snn;
}

SnnModel convert(const AnnModel& model, const CalibrationResult& calib,
                 const ConversionConfig& cfg) {
    cfg.validate();
    return convert_with_shifts(model, calib, shift_per_layer(calib, cfg, model.weighted_count()),
                               cfg.readout);
}

}  // namespace snnforge
