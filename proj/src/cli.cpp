#include "snnforge/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "snnforge/analysis.hpp"
#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/io.hpp"
#include "snnforge/snn.hpp"
#include "snnforge/synth.hpp"

namespace snnforge {

namespace {

using nlohmann::json;

int resolve_threads(const CLI::Option* opt, int flag_value) {
    if (opt && opt->count() > 0) {
        if (flag_value < 1) throw ConfigError("--threads must be >= 1");
        return flag_value;
    }
    if (const char* env = std::getenv("SNNFORGE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ConfigError("SNNFORGE_THREADS must be a positive integer, got '" +
                              std::string(env) + "'");
        }
        return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

Dataset load_dataset_arg(const std::string& data, const std::string& images,
                         const std::string& labels, bool strict) {
    if (!data.empty()) {
        if (!images.empty() || !labels.empty()) {
            throw ConfigError("give either --data or --images/--labels, not both");
        }
        return load_dataset_json(data);
    }
    if (images.empty() || labels.empty()) {
        throw ConfigError("a dataset is required: --data FILE or --images FILE --labels FILE");
    }
    std::vector<std::string> warnings;
    Dataset d = load_idx(images, labels, strict, &warnings);
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    return d;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> widths;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        const std::string tok = s.substr(pos, next - pos);
        try {
            widths.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw ConfigError("bad width '" + tok + "' in '" + s + "'");
        }
        pos = next + 1;
    }
    if (widths.size() < 2) throw ConfigError("--widths needs at least two entries");
    return widths;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        const std::string tok = s.substr(pos, next - pos);
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " entry '" + tok + "'");
        }
        pos = next + 1;
    }
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        const std::string tok = s.substr(pos, next - pos);
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " entry '" + tok + "'");
        }
        pos = next + 1;
    }
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

void echo_run(std::uint64_t seed, const json& config) {
    std::cout << "seed: " << seed << "\n";
    std::cout << "config: " << config.dump() << "\n";
}

ActivationSpec activation_from_name(const std::string& name, double y_th) {
    if (name == "none") return ActivationSpec::none();
    if (name == "relu") return ActivationSpec::relu();
    if (name == "threshold_relu") {
        if (!(y_th > 0.0)) throw ConfigError("threshold_relu needs --y-th > 0");
        return ActivationSpec::threshold_relu(y_th);
    }
    throw ConfigError("unknown activation '" + name + "'");
}

ShiftMode shift_mode_from_name(const std::string& name) {
    if (name == "none") return ShiftMode::None;
    if (name == "half" || name == "half_vth_over_T") return ShiftMode::HalfVthOverT;
    if (name == "custom") return ShiftMode::Custom;
    throw ConfigError("unknown shift mode '" + name + "' (none|half|custom)");
}

Readout readout_from_name(const std::string& name) {
    if (name == "accumulate" || name == "accumulate_potential") {
        return Readout::AccumulatePotential;
    }
    if (name == "spike-count" || name == "spike_count") return Readout::SpikeCount;
    throw ConfigError("unknown readout '" + name + "' (accumulate|spike-count)");
}

struct DatasetOpts {
    std::string data;
    std::string images;
    std::string labels;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data, "dataset JSON file");
        cmd->add_option("--images", images, "IDX image file");
        cmd->add_option("--labels", labels, "IDX label file");
    }
};

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"snnforge: train threshold-ReLU ANNs, convert them to soft-reset IF "
                 "spiking networks and analyze the conversion error"};
    app.require_subcommand(1);

    bool strict_idx = false;
    int threads_flag = 1;
    app.add_flag("--strict-idx", strict_idx, "reject IDX files with trailing bytes");
    CLI::Option* threads_opt =
        app.add_option("--threads", threads_flag, "worker threads (env SNNFORGE_THREADS)");

    int exit_code = 0;

    // ---- train ----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train an ANN with momentum SGD");
    DatasetOpts train_data;
    train_data.attach(train_cmd);
    std::string train_config_path, train_out, train_widths = "196,100,10",
                                              train_activation = "threshold_relu";
    double train_lr = 0.01, train_y_th = 1.0, train_dropout = 0.0;
    int train_epochs = 10, train_batch = 32, train_warmup = -1;
    std::uint64_t train_seed = 1;
    train_cmd->add_option("--config", train_config_path, "TrainConfig JSON (flags win)");
    train_cmd->add_option("--out", train_out, "output model file")->required();
    CLI::Option* o_widths = train_cmd->add_option("--widths", train_widths, "dense widths, e.g. 196,100,10");
    CLI::Option* o_act = train_cmd->add_option("--activation", train_activation,
                                               "hidden activation (none|relu|threshold_relu)");
    CLI::Option* o_yth = train_cmd->add_option("--y-th", train_y_th, "threshold ReLU clamp");
    CLI::Option* o_drop = train_cmd->add_option("--dropout", train_dropout, "dropout p after hidden layers");
    CLI::Option* o_lr = train_cmd->add_option("--lr", train_lr, "learning rate");
    CLI::Option* o_epochs = train_cmd->add_option("--epochs", train_epochs, "training epochs");
    CLI::Option* o_batch = train_cmd->add_option("--batch-size", train_batch, "batch size");
    CLI::Option* o_warm = train_cmd->add_option("--warmup-epochs", train_warmup,
                                                "regular-ReLU warmup epochs (-1: epochs/10)");
    CLI::Option* o_seed = train_cmd->add_option("--seed", train_seed, "training seed");

    train_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        TrainConfig cfg;
        cfg.epochs = train_epochs;
        json arch_json;
        if (!train_config_path.empty()) {
            std::ifstream in(train_config_path);
            if (!in) throw DataError("cannot open '" + train_config_path + "'");
            json cj;
            try {
                in >> cj;
            } catch (const json::exception& e) {
                throw FormatError("'" + train_config_path + "': invalid JSON: " + e.what());
            }
            if (cj.contains("learning_rate")) cfg.learning_rate = cj["learning_rate"].get<double>();
            if (cj.contains("momentum")) cfg.momentum = cj["momentum"].get<double>();
            if (cj.contains("weight_decay")) cfg.weight_decay = cj["weight_decay"].get<double>();
            if (cj.contains("epochs")) cfg.epochs = cj["epochs"].get<int>();
            if (cj.contains("batch_size")) cfg.batch_size = cj["batch_size"].get<int>();
            if (cj.contains("lr_decay_epochs")) {
                cfg.lr_decay_epochs = cj["lr_decay_epochs"].get<std::vector<int>>();
            }
            if (cj.contains("lr_decay_factor")) cfg.lr_decay_factor = cj["lr_decay_factor"].get<double>();
            if (cj.contains("threshold_warmup_epochs")) {
                cfg.threshold_warmup_epochs = cj["threshold_warmup_epochs"].get<int>();
            }
            if (cj.contains("seed")) cfg.seed = cj["seed"].get<std::uint64_t>();
            if (cj.contains("arch")) arch_json = cj["arch"];
        }
        std::vector<std::size_t> widths =
            arch_json.contains("widths") ? arch_json["widths"].get<std::vector<std::size_t>>()
                                         : parse_widths(train_widths);
        std::string act_name =
            arch_json.contains("activation") ? arch_json["activation"].get<std::string>()
                                             : train_activation;
        double y_th = arch_json.contains("y_th") ? arch_json["y_th"].get<double>() : train_y_th;
        double dropout_p =
            arch_json.contains("dropout") ? arch_json["dropout"].get<double>() : train_dropout;
        // flags override the config file
        if (o_widths->count()) widths = parse_widths(train_widths);
        if (o_act->count()) act_name = train_activation;
        if (o_yth->count()) y_th = train_y_th;
        if (o_drop->count()) dropout_p = train_dropout;
        if (o_lr->count()) cfg.learning_rate = train_lr;
        if (o_epochs->count()) cfg.epochs = train_epochs;
        if (o_batch->count()) cfg.batch_size = train_batch;
        if (o_warm->count()) cfg.threshold_warmup_epochs = train_warmup;
        if (o_seed->count()) cfg.seed = train_seed;

        Dataset dataset =
            load_dataset_arg(train_data.data, train_data.images, train_data.labels, strict_idx);
        dataset.validate();

        AnnModel model = make_mlp(widths, activation_from_name(act_name, y_th), dropout_p);
        initialize_parameters(model, cfg.seed);

        json config_echo{{"command", "train"},
                         {"learning_rate", cfg.learning_rate},
                         {"momentum", cfg.momentum},
                         {"weight_decay", cfg.weight_decay},
                         {"epochs", cfg.epochs},
                         {"batch_size", cfg.batch_size},
                         {"lr_decay_epochs", cfg.lr_decay_epochs},
                         {"lr_decay_factor", cfg.lr_decay_factor},
                         {"threshold_warmup_epochs", cfg.resolved_warmup()},
                         {"arch", {{"widths", widths},
                                   {"activation", act_name},
                                   {"y_th", y_th},
                                   {"dropout", dropout_p}}},
                         {"threads", threads}};
        echo_run(cfg.seed, config_echo);

        TrainResult result = sgd_train(std::move(model), dataset, cfg);
        const double train_acc = evaluate_accuracy(result.model, dataset, threads);
        std::cout << "final_epoch_loss: " << result.epoch_loss.back() << "\n";
        std::cout << "train_accuracy: " << train_acc << "\n";

        json meta{{"format_version", kFormatVersion},
                  {"seed", cfg.seed},
                  {"config", config_echo},
                  {"train_accuracy", train_acc},
                  {"epoch_loss", result.epoch_loss}};
        save_ann(result.model, train_out, meta);
        std::cout << "wrote " << train_out << "\n";
    });

    // ---- calibrate ------------------------------------------------------
    auto* calib_cmd = app.add_subcommand("calibrate", "record per-layer activation thresholds");
    DatasetOpts calib_data;
    calib_data.attach(calib_cmd);
    std::string calib_model, calib_out, calib_mode = "max";
    double calib_percentile = 1.0;
    std::uint64_t calib_seed = 1;
    std::size_t calib_subsample = 0;
    calib_cmd->add_option("--model", calib_model, "ANN model file")->required();
    calib_cmd->add_option("--out", calib_out, "output thresholds file")->required();
    calib_cmd->add_option("--threshold-mode", calib_mode, "max|percentile");
    calib_cmd->add_option("--percentile", calib_percentile, "percentile p in (0,1]");
    calib_cmd->add_option("--calib-subsample", calib_subsample,
                          "use a seeded subsample of this size (0: full set)");
    calib_cmd->add_option("--seed", calib_seed, "subsampling seed");

    calib_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        ThresholdMode mode;
        if (calib_mode == "max") {
            mode = ThresholdMode::Max;
        } else if (calib_mode == "percentile") {
            mode = ThresholdMode::Percentile;
        } else {
            throw ConfigError("unknown threshold mode '" + calib_mode + "' (max|percentile)");
        }
        const AnnModel model = load_ann(calib_model);
        Dataset dataset =
            load_dataset_arg(calib_data.data, calib_data.images, calib_data.labels, strict_idx);
        if (calib_subsample > 0 && calib_subsample < dataset.size()) {
            dataset = dataset.subsample(calib_subsample, calib_seed);
        }
        json config_echo{{"command", "calibrate"},
                         {"model", calib_model},
                         {"threshold_mode", calib_mode},
                         {"percentile", calib_percentile},
                         {"calib_subsample", calib_subsample},
                         {"samples_used", dataset.size()},
                         {"threads", threads}};
        echo_run(calib_seed, config_echo);

        const CalibrationResult calib = calibrate(model, dataset, mode, calib_percentile, threads);
        for (std::size_t l = 0; l < calib.v_th_per_layer.size(); ++l) {
            std::cout << "v_th[" << l << "]: " << calib.v_th_per_layer[l] << "\n";
        }
        for (const auto& w : calib.warnings) std::cout << "warning: " << w << "\n";
        json meta{{"seed", calib_seed}, {"config", config_echo}};
        save_calibration(calib, calib_out, meta);
        std::cout << "wrote " << calib_out << "\n";
    });

    // ---- convert --------------------------------------------------------
    auto* convert_cmd = app.add_subcommand("convert", "build the SNN from an ANN and thresholds");
    std::string conv_model, conv_thresholds, conv_out, conv_shift = "half",
                                                       conv_readout = "accumulate";
    double conv_scale = 0.0;
    bool conv_shift_output = false;
    int conv_T = 0;
    convert_cmd->add_option("--model", conv_model, "ANN model file")->required();
    convert_cmd->add_option("--thresholds", conv_thresholds, "calibration file")->required();
    convert_cmd->add_option("--out", conv_out, "output SNN model file")->required();
    convert_cmd->add_option("--T", conv_T, "target simulation length")->required();
    convert_cmd->add_option("--shift-mode", conv_shift, "none|half|custom");
    convert_cmd->add_option("--shift-scale", conv_scale, "custom shift = scale * v_th");
    convert_cmd->add_flag("--shift-output-layer", conv_shift_output,
                          "also shift the output layer bias");
    convert_cmd->add_option("--readout", conv_readout, "accumulate|spike-count");

    convert_cmd->callback([&] {
        ConversionConfig cfg;
        cfg.T = conv_T;
        cfg.shift_mode = shift_mode_from_name(conv_shift);
        cfg.custom_scale = conv_scale;
        cfg.shift_output_layer = conv_shift_output;
        cfg.readout = readout_from_name(conv_readout);
        cfg.validate();

        json config_echo{{"command", "convert"},      {"model", conv_model},
                         {"thresholds", conv_thresholds}, {"T", cfg.T},
                         {"shift_mode", conv_shift},   {"shift_scale", conv_scale},
                         {"shift_output_layer", conv_shift_output}, {"readout", conv_readout}};
        echo_run(0, config_echo);

        const AnnModel ann = load_ann(conv_model);
        nlohmann::json calib_meta;
        const CalibrationResult calib = load_calibration(conv_thresholds, &calib_meta);
        const SnnModel snn = convert(ann, calib, cfg);
        json meta{{"seed", 0}, {"config", config_echo}, {"calibration_meta", calib_meta}};
        save_snn(snn, conv_out, meta);
        std::cout << "wrote " << conv_out << "\n";
    });

    // ---- simulate -------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "evaluate an SNN at simulation length T");
    DatasetOpts sim_data;
    sim_data.attach(sim_cmd);
    std::string sim_model, sim_out;
    int sim_T = 0;
    sim_cmd->add_option("--model", sim_model, "SNN model file")->required();
    sim_cmd->add_option("--T", sim_T, "simulation length")->required();
    sim_cmd->add_option("--out", sim_out, "optional report JSON");

    sim_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        if (sim_T < 1) throw ConfigError("simulate: T must be >= 1, got " + std::to_string(sim_T));
        json config_echo{{"command", "simulate"},
                         {"model", sim_model},
                         {"T", sim_T},
                         {"threads", threads}};
        echo_run(0, config_echo);
        const SnnModel snn = load_snn(sim_model);
        Dataset dataset =
            load_dataset_arg(sim_data.data, sim_data.images, sim_data.labels, strict_idx);
        dataset.validate();
        const double acc = evaluate_snn_accuracy(snn, dataset, sim_T, threads);
        std::cout << "snn_accuracy: " << acc << "\n";
        if (!sim_out.empty()) {
            json j{{"format_version", kFormatVersion},
                   {"kind", "simulation_report"},
                   {"seed", 0},
                   {"config", config_echo},
                   {"T", sim_T},
                   {"snn_accuracy", acc}};
            std::ofstream out(sim_out, std::ios::binary);
            if (!out) throw DataError("cannot write '" + sim_out + "'");
            out << j.dump(2) << "\n";
            std::cout << "wrote " << sim_out << "\n";
        }
    });

    // ---- analyze --------------------------------------------------------
    auto* an_cmd = app.add_subcommand("analyze", "accuracy + layer-wise error report");
    DatasetOpts an_data;
    an_data.attach(an_cmd);
    std::string an_ann, an_snn, an_out, an_csv, an_T_list = "8";
    an_cmd->add_option("--ann", an_ann, "ANN model file")->required();
    an_cmd->add_option("--snn", an_snn, "SNN model file")->required();
    an_cmd->add_option("--out", an_out, "report JSON")->required();
    an_cmd->add_option("--csv", an_csv, "CSV prefix");
    an_cmd->add_option("--T-list", an_T_list, "comma-separated simulation lengths");

    an_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        const std::vector<int> Ts = parse_int_list(an_T_list, "T");
        for (int T : Ts) {
            if (T < 1) throw ConfigError("analyze: T must be >= 1, got " + std::to_string(T));
        }
        json config_echo{{"command", "analyze"}, {"ann", an_ann},       {"snn", an_snn},
                         {"T_list", Ts},         {"threads", threads}};
        echo_run(0, config_echo);
        const AnnModel ann = load_ann(an_ann);
        const SnnModel snn = load_snn(an_snn);
        Dataset dataset = load_dataset_arg(an_data.data, an_data.images, an_data.labels, strict_idx);
        dataset.validate();
        ConversionReport report = analyze(ann, snn, dataset, Ts, threads);
        report.config_echo["command"] = "analyze";
        report.config_echo["ann"] = an_ann;
        report.config_echo["snn"] = an_snn;
        report.config_echo["threads"] = std::to_string(threads);
        std::cout << "ann_accuracy: " << report.ann_accuracy << "\n";
        for (const auto& [T, l] : report.conversion_loss_by_T) {
            std::cout << "T=" << T << " snn_accuracy: " << report.snn_accuracy_by_T[T]
                      << " conversion_loss: " << l << "\n";
        }
        save_report(report, an_out);
        std::cout << "wrote " << an_out << "\n";
        if (!an_csv.empty()) write_report_csvs(report, an_csv);
    });

    // ---- sweep-shift ----------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep-shift", "measure the objective along a shift grid");
    DatasetOpts sweep_data;
    sweep_data.attach(sweep_cmd);
    std::string sweep_ann, sweep_thresholds, sweep_out, sweep_csv, sweep_deltas;
    int sweep_T = 0, sweep_points = 33;
    double sweep_delta_max = -1.0;
    sweep_cmd->add_option("--ann", sweep_ann, "ANN model file")->required();
    sweep_cmd->add_option("--thresholds", sweep_thresholds, "calibration file")->required();
    sweep_cmd->add_option("--out", sweep_out, "report JSON")->required();
    sweep_cmd->add_option("--csv", sweep_csv, "CSV prefix");
    sweep_cmd->add_option("--T", sweep_T, "simulation length")->required();
    sweep_cmd->add_option("--grid-points", sweep_points, "number of evenly spaced deltas");
    sweep_cmd->add_option("--delta-max", sweep_delta_max,
                          "largest delta (default: max shifted-layer v_th / T)");
    sweep_cmd->add_option("--deltas", sweep_deltas, "explicit comma-separated deltas");

    sweep_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        if (sweep_T < 1) throw ConfigError("sweep-shift: T must be >= 1");
        const AnnModel ann = load_ann(sweep_ann);
        const CalibrationResult calib = load_calibration(sweep_thresholds);
        std::vector<double> grid;
        if (!sweep_deltas.empty()) {
            grid = parse_double_list(sweep_deltas, "delta");
        } else {
            if (sweep_points < 2) throw ConfigError("sweep-shift: need >= 2 grid points");
            double dmax = sweep_delta_max;
            if (dmax < 0.0) {
                double v = 0.0;  // output layer is exempt, take the max over the rest
                for (std::size_t l = 0; l + 1 < calib.v_th_per_layer.size(); ++l) {
                    v = std::max(v, calib.v_th_per_layer[l]);
                }
                if (v == 0.0) v = calib.v_th_per_layer.back();
                dmax = v / static_cast<double>(sweep_T);
            }
            for (int i = 0; i < sweep_points; ++i) {
                grid.push_back(dmax * static_cast<double>(i) /
                               static_cast<double>(sweep_points - 1));
            }
        }
        json config_echo{{"command", "sweep-shift"}, {"ann", sweep_ann},
                         {"thresholds", sweep_thresholds}, {"T", sweep_T},
                         {"grid", grid},             {"threads", threads}};
        echo_run(0, config_echo);
        Dataset dataset =
            load_dataset_arg(sweep_data.data, sweep_data.images, sweep_data.labels, strict_idx);
        dataset.validate();

        ConversionReport report;
        report.shift_sweep = shift_sweep(ann, calib, dataset, sweep_T, grid, threads);
        for (auto& [k, v] : config_echo.items()) {
            report.config_echo[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < report.shift_sweep.size(); ++i) {
            if (report.shift_sweep[i].objective < report.shift_sweep[best].objective) best = i;
        }
        std::cout << "best_delta: " << report.shift_sweep[best].delta
                  << " objective: " << report.shift_sweep[best].objective
                  << " snn_accuracy: " << report.shift_sweep[best].snn_accuracy << "\n";
        save_report(report, sweep_out);
        std::cout << "wrote " << sweep_out << "\n";
        if (!sweep_csv.empty()) write_report_csvs(report, sweep_csv);
    });

    // ---- scaling --------------------------------------------------------
    auto* scale_cmd = app.add_subcommand("scaling", "output error vs simulation length");
    DatasetOpts scale_data;
    scale_data.attach(scale_cmd);
    std::string scale_ann, scale_thresholds, scale_out, scale_csv, scale_T_list = "8,16,32,64,128";
    scale_cmd->add_option("--ann", scale_ann, "ANN model file")->required();
    scale_cmd->add_option("--thresholds", scale_thresholds, "calibration file")->required();
    scale_cmd->add_option("--out", scale_out, "report JSON")->required();
    scale_cmd->add_option("--csv", scale_csv, "CSV prefix");
    scale_cmd->add_option("--T-list", scale_T_list, "comma-separated simulation lengths");

    scale_cmd->callback([&] {
        const int threads = resolve_threads(threads_opt, threads_flag);
        const std::vector<int> Ts = parse_int_list(scale_T_list, "T");
        json config_echo{{"command", "scaling"},
                         {"ann", scale_ann},
                         {"thresholds", scale_thresholds},
                         {"T_list", Ts},
                         {"threads", threads}};
        echo_run(0, config_echo);
        const AnnModel ann = load_ann(scale_ann);
        const CalibrationResult calib = load_calibration(scale_thresholds);
        Dataset dataset =
            load_dataset_arg(scale_data.data, scale_data.images, scale_data.labels, strict_idx);
        dataset.validate();

        const ScalingResult res = scaling_experiment(ann, calib, dataset, Ts, threads);
        ConversionReport report;
        report.scaling_rows = res.rows;
        report.scaling_slope = res.slope;
        report.has_scaling = true;
        for (const auto& row : res.rows) report.estimate_by_T[row.T] = row.estimate;
        for (auto& [k, v] : config_echo.items()) {
            report.config_echo[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        for (const auto& row : res.rows) {
            std::cout << "T=" << row.T << " mean_sq_output_error: " << row.mean_sq_output_error
                      << " estimate: " << row.estimate << "\n";
        }
        std::cout << "slope_log_rms_vs_log_T: " << res.slope << "\n";
        save_report(report, scale_out);
        std::cout << "wrote " << scale_out << "\n";
        if (!scale_csv.empty()) write_report_csvs(report, scale_csv);
    });

    // ---- synth ----------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic benchmarks and fixtures");
    std::string synth_kind = "uniform", synth_out_model, synth_out_data, synth_out_test,
                synth_out_calib;
    std::size_t synth_n = 4096, synth_width = 64, synth_n_test = 1024, synth_dim = 196;
    int synth_classes = 10;
    double synth_v_th = 1.0, synth_latent_sigma = 0.16, synth_pixel_sigma = 0.02,
           synth_outlier_rate = 0.0, synth_outlier_scale = 1.0;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--kind", synth_kind, "uniform|blobs|exact-grid")->required();
    synth_cmd->add_option("--out-model", synth_out_model, "model output (uniform, exact-grid)");
    synth_cmd->add_option("--out-data", synth_out_data, "dataset output");
    synth_cmd->add_option("--out-test", synth_out_test, "test dataset output (blobs)");
    synth_cmd->add_option("--out-calib", synth_out_calib, "calibration dataset output (exact-grid)");
    synth_cmd->add_option("--n", synth_n, "sample count (uniform) / train count (blobs)");
    synth_cmd->add_option("--n-test", synth_n_test, "test sample count (blobs)");
    synth_cmd->add_option("--width", synth_width, "layer width (uniform)");
    synth_cmd->add_option("--v-th", synth_v_th, "activation threshold (uniform)");
    synth_cmd->add_option("--dim", synth_dim, "input dimension (blobs)");
    synth_cmd->add_option("--classes", synth_classes, "class count (blobs)");
    synth_cmd->add_option("--latent-sigma", synth_latent_sigma, "latent noise (blobs)");
    synth_cmd->add_option("--pixel-sigma", synth_pixel_sigma, "pixel noise (blobs)");
    synth_cmd->add_option("--outlier-rate", synth_outlier_rate,
                          "fraction of radially scaled samples (blobs)");
    synth_cmd->add_option("--outlier-scale", synth_outlier_scale,
                          "radial scale applied to outliers (blobs)");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    synth_cmd->callback([&] {
        json config_echo{{"command", "synth"}, {"kind", synth_kind}};
        if (synth_kind == "uniform") {
            config_echo["n"] = synth_n;
            config_echo["width"] = synth_width;
            config_echo["v_th"] = synth_v_th;
            echo_run(synth_seed, config_echo);
            if (synth_out_model.empty() || synth_out_data.empty()) {
                throw ConfigError("synth uniform needs --out-model and --out-data");
            }
            const SynthBenchmark bench =
                synth_uniform_benchmark(synth_n, synth_width, synth_v_th, synth_seed);
            save_ann(bench.ann, synth_out_model,
                     json{{"seed", synth_seed}, {"config", config_echo}});
            save_dataset_json(bench.dataset, synth_out_data);
            std::cout << "wrote " << synth_out_model << " and " << synth_out_data << "\n";
        } else if (synth_kind == "blobs") {
            config_echo["n_train"] = synth_n;
            config_echo["n_test"] = synth_n_test;
            config_echo["dim"] = synth_dim;
            config_echo["classes"] = synth_classes;
            config_echo["latent_sigma"] = synth_latent_sigma;
            config_echo["pixel_sigma"] = synth_pixel_sigma;
            config_echo["outlier_rate"] = synth_outlier_rate;
            config_echo["outlier_scale"] = synth_outlier_scale;
            echo_run(synth_seed, config_echo);
            if (synth_out_data.empty() || synth_out_test.empty()) {
                throw ConfigError("synth blobs needs --out-data and --out-test");
            }
            const BlobsDatasets blobs =
                synth_blobs(synth_n, synth_n_test, synth_dim, synth_classes, synth_latent_sigma,
                            synth_pixel_sigma, synth_seed, synth_outlier_rate,
                            synth_outlier_scale);
            save_dataset_json(blobs.train, synth_out_data);
            save_dataset_json(blobs.test, synth_out_test);
            std::cout << "wrote " << synth_out_data << " and " << synth_out_test << "\n";
        } else if (synth_kind == "exact-grid") {
            echo_run(0, config_echo);
            if (synth_out_model.empty() || synth_out_data.empty()) {
                throw ConfigError("synth exact-grid needs --out-model and --out-data");
            }
            const ExactGridFixture fx = exact_grid_fixture();
            save_ann(fx.ann, synth_out_model, json{{"seed", 0}, {"config", config_echo}});
            save_dataset_json(fx.eval_set, synth_out_data);
            std::cout << "wrote " << synth_out_model << " and " << synth_out_data << "\n";
            if (!synth_out_calib.empty()) {
                save_dataset_json(fx.calib_set, synth_out_calib);
                std::cout << "wrote " << synth_out_calib << "\n";
            }
        } else {
            throw ConfigError("unknown synth kind '" + synth_kind + "'");
        }
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "run 'snnforge --help' for usage\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}

}  // namespace snnforge
