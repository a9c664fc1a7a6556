#include "snnforge/analysis.hpp"

#include <cmath>
#include <string>

#include "snnforge/parallel.hpp"

namespace snnforge {

namespace {

const char* ann_kind(const AnnLayer& l) {
    if (std::holds_alternative<DenseLayer>(l)) return "dense";
    if (std::holds_alternative<Conv2dLayer>(l)) return "conv2d";
    if (std::holds_alternative<AvgPoolLayer>(l)) return "avgpool";
    return "dropout";
}

// The SNN must mirror the ANN's topology (dropout aside); anything else is a
// configuration error before any simulation runs.
void check_topology(const AnnModel& ann, const SnnModel& snn) {
    std::size_t si = 0;
    for (std::size_t ai = 0; ai < ann.layers.size(); ++ai) {
        const AnnLayer& al = ann.layers[ai];
        if (std::holds_alternative<DropoutLayer>(al)) continue;
        if (si >= snn.layers.size()) {
            throw ConfigError("analysis: SNN has fewer layers than the ANN");
        }
        const SnnLayer& sl = snn.layers[si++];
        bool ok = false;
        if (const auto* d = std::get_if<DenseLayer>(&al)) {
            const auto* sd = std::get_if<SnnDenseLayer>(&sl);
            ok = sd && sd->weight.same_shape(d->weight);
        } else if (const auto* c = std::get_if<Conv2dLayer>(&al)) {
            const auto* sc = std::get_if<SnnConv2dLayer>(&sl);
            ok = sc && sc->kernel.same_shape(c->kernel) && sc->stride == c->stride &&
                 sc->padding == c->padding;
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&al)) {
            const auto* sp = std::get_if<SnnAvgPoolLayer>(&sl);
            ok = sp && sp->k == p->k && sp->stride == p->stride;
        }
        if (!ok) {
            throw ConfigError("analysis: SNN layer " + std::to_string(si - 1) +
                              " does not match ANN " + ann_kind(al) + " layer " +
                              std::to_string(ai));
        }
    }
    if (si != snn.layers.size()) {
        throw ConfigError("analysis: SNN has more layers than the ANN");
    }
}

double sq_norm_diff(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// h_l applied to the SNN's average input of layer l, using the ANN's own
// (unshifted) bias: the reference the average PSP is compared against.
std::vector<Tensor> teacher_forced_outputs(const AnnModel& ann,
                                           const std::vector<Tensor>& snn_avg, const Tensor& x) {
    std::vector<Tensor> expected;
    expected.reserve(snn_avg.size());
    Tensor cur = x;
    std::size_t w = 0;
    for (const auto& layer : ann.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            Tensor pre = affine(d->weight, d->bias, cur);
            for (auto& v : pre.values()) v = apply_activation(v, d->activation);
            expected.push_back(pre);
            cur = snn_avg[w++];
        } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
            Tensor pre = conv2d(c->kernel, c->bias, cur, c->stride, c->padding);
            for (auto& v : pre.values()) v = apply_activation(v, c->activation);
            expected.push_back(pre);
            cur = snn_avg[w++];
        } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
            cur = avgpool(cur, p->k, p->stride);
        }
    }
    return expected;
}

}  // namespace

double LayerErrorTable::objective() const {
    if (mean_dpsp_sq.empty()) return 0.0;
    double acc = 0.0;
    for (double v : mean_dpsp_sq) acc += v;
    return acc / static_cast<double>(mean_dpsp_sq.size());
}

double conversion_loss(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset, int T,
                       int threads) {
    check_topology(ann, snn);
    if (dataset.size() == 0) throw DataError("conversion_loss: empty dataset");
    const double ann_acc = evaluate_accuracy(ann, dataset, threads);
    const double snn_acc = evaluate_snn_accuracy(snn, dataset, T, threads);
    return ann_acc - snn_acc;
}

LayerErrorTable layerwise_error(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset,
                                int T, int threads) {
    check_topology(ann, snn);
    if (dataset.size() == 0) throw DataError("layerwise_error: empty dataset");
    const std::size_t n_layers = ann.weighted_count();
    const std::size_t n = dataset.size();

    std::vector<std::vector<double>> dpsp(n, std::vector<double>(n_layers, 0.0));
    std::vector<std::vector<double>> da(n, std::vector<double>(n_layers, 0.0));
    parallel_for(n, threads, [&](std::size_t s) {
        const Tensor& x = dataset.inputs[s];
        const ForwardResult fr = ann_forward(ann, x, /*record=*/true);
        const SimulationTrace trace = simulate(snn, x, T);
        const std::vector<Tensor> avg = layer_average_outputs(trace);
        const std::vector<Tensor> expected = teacher_forced_outputs(ann, avg, x);
        for (std::size_t l = 0; l < n_layers; ++l) {
            dpsp[s][l] = sq_norm_diff(avg[l], expected[l]);
            da[s][l] = sq_norm_diff(avg[l], fr.activations[l]);
        }
    });

    LayerErrorTable table;
    table.mean_dpsp_sq.assign(n_layers, 0.0);
    table.mean_da_sq.assign(n_layers, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t l = 0; l < n_layers; ++l) {
            table.mean_dpsp_sq[l] += dpsp[s][l];
            table.mean_da_sq[l] += da[s][l];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t l = 0; l < n_layers; ++l) {
        table.mean_dpsp_sq[l] *= inv_n;
        table.mean_da_sq[l] *= inv_n;
    }
    return table;
}

std::vector<SweepPoint> shift_sweep(const AnnModel& ann, const CalibrationResult& calib,
                                    const Dataset& dataset, int T,
                                    const std::vector<double>& grid, int threads) {
    if (grid.empty()) throw ConfigError("shift_sweep: empty delta grid");
    for (double d : grid) {
        if (!(d >= 0.0)) throw ConfigError("shift_sweep: deltas must be >= 0");
    }
    const std::size_t n_weighted = ann.weighted_count();
    std::vector<SweepPoint> points;
    points.reserve(grid.size());
    for (double delta : grid) {
        std::vector<double> deltas(n_weighted, delta);
        if (!deltas.empty()) deltas.back() = 0.0;  // output layer exempt
        const SnnModel snn =
            convert_with_shifts(ann, calib, deltas, Readout::AccumulatePotential);
        SweepPoint p;
        p.delta = delta;
        p.objective = layerwise_error(ann, snn, dataset, T, threads).objective();
        p.snn_accuracy = evaluate_snn_accuracy(snn, dataset, T, threads);
        points.push_back(p);
    }
    return points;
}

double error_estimate(int num_layers, double v_th, int T) {
    if (num_layers < 1 || !(v_th > 0.0) || T < 1) {
        throw ConfigError("error_estimate: arguments must be positive");
    }
    return static_cast<double>(num_layers) * v_th * v_th / (4.0 * static_cast<double>(T));
}

namespace {

// Mean v_th over the layers that actually fire, and their count.
std::pair<int, double> spiking_layer_stats(const SnnModel& snn) {
    int count = 0;
    double sum = 0.0;
    const std::size_t n_weighted = snn.weighted_count();
    std::size_t w = 0;
    for (const auto& layer : snn.layers) {
        double v_th = 0.0;
        if (const auto* d = std::get_if<SnnDenseLayer>(&layer)) {
            v_th = d->v_th;
        } else if (const auto* c = std::get_if<SnnConv2dLayer>(&layer)) {
            v_th = c->v_th;
        } else {
            continue;
        }
        ++w;
        if (w == n_weighted && snn.readout == Readout::AccumulatePotential) break;
        ++count;
        sum += v_th;
    }
    return {count, count > 0 ? sum / count : 0.0};
}

}  // namespace

ScalingResult scaling_experiment(const AnnModel& ann, const CalibrationResult& calib,
                                 const Dataset& dataset, const std::vector<int>& T_list,
                                 int threads) {
    if (T_list.empty()) throw ConfigError("scaling: empty T list");
    for (int T : T_list) {
        if (T < 1) throw ConfigError("scaling: T must be >= 1");
    }
    if (dataset.size() == 0) throw DataError("scaling: empty dataset");

    const std::size_t n = dataset.size();
    std::vector<Tensor> ann_logits(n);
    parallel_for(n, threads, [&](std::size_t s) {
        ann_logits[s] = ann_forward(ann, dataset.inputs[s]).logits;
    });

    ScalingResult result;
    for (int T : T_list) {
        ConversionConfig cfg;
        cfg.T = T;
        cfg.shift_mode = ShiftMode::HalfVthOverT;
        const SnnModel snn = convert(ann, calib, cfg);

        std::vector<double> errs(n, 0.0);
        parallel_for(n, threads, [&](std::size_t s) {
            const SimulationTrace trace = simulate(snn, dataset.inputs[s], T);
            errs[s] = sq_norm_diff(readout_scores(trace), ann_logits[s]);
        });
        double mean_err = 0.0;
        for (double e : errs) mean_err += e;
        mean_err /= static_cast<double>(n);

        const auto [count, mean_vth] = spiking_layer_stats(snn);
        ScalingRow row;
        row.T = T;
        row.mean_sq_output_error = mean_err;
        row.estimate = count > 0 ? error_estimate(count, mean_vth, T) : 0.0;
        result.rows.push_back(row);
    }

    // least-squares fit of log(rms error) against log(T); exactly-converted
    // rows carry no slope information and are skipped
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (const auto& row : result.rows) {
        if (!(row.mean_sq_output_error > 0.0)) continue;
        const double lx = std::log(static_cast<double>(row.T));
        const double ly = std::log(std::sqrt(row.mean_sq_output_error));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    result.slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    return result;
}

ConversionReport analyze(const AnnModel& ann, const SnnModel& snn, const Dataset& dataset,
                         const std::vector<int>& T_list, int threads) {
    if (T_list.empty()) throw ConfigError("analyze: empty T list");
    check_topology(ann, snn);
    ConversionReport report;
    report.ann_accuracy = evaluate_accuracy(ann, dataset, threads);
    const auto [spiking_count, mean_vth] = spiking_layer_stats(snn);
    for (int T : T_list) {
        const double snn_acc = evaluate_snn_accuracy(snn, dataset, T, threads);
        report.snn_accuracy_by_T[T] = snn_acc;
        report.conversion_loss_by_T[T] = report.ann_accuracy - snn_acc;
        const LayerErrorTable table = layerwise_error(ann, snn, dataset, T, threads);
        for (std::size_t l = 0; l < table.mean_dpsp_sq.size(); ++l) {
            report.per_layer_error.push_back(PerLayerErrorRow{
                T, static_cast<int>(l), table.mean_dpsp_sq[l], table.mean_da_sq[l]});
        }
        report.estimate_by_T[T] =
            spiking_count > 0 ? error_estimate(spiking_count, mean_vth, T) : 0.0;
    }
    return report;
}

}  // namespace snnforge
