#include "snnforge/io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace snnforge {

namespace {

using nlohmann::json;

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::string magic_str(std::uint32_t m) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", m);
    return buf;
}

struct IdxPayload {
    std::vector<std::uint32_t> dims;
    const unsigned char* data = nullptr;
    std::size_t count = 0;  // product of dims
};

IdxPayload parse_idx(const std::vector<unsigned char>& bytes, std::uint32_t expected_magic,
                     const std::string& path, bool strict, std::vector<std::string>* warnings) {
    if (bytes.size() < 4) {
        throw FormatError("idx '" + path + "': truncated header (" +
                          std::to_string(bytes.size()) + " bytes)");
    }
    const auto be32 = [&](std::size_t off) {
        return (std::uint32_t(bytes[off]) << 24) | (std::uint32_t(bytes[off + 1]) << 16) |
               (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]);
    };
    const std::uint32_t magic = be32(0);
    if (magic != expected_magic) {
        throw FormatError("idx '" + path + "': expected magic " + magic_str(expected_magic) +
                          ", found " + magic_str(magic));
    }
    const std::size_t ndims = magic & 0xff;
    if (bytes.size() < 4 + 4 * ndims) {
        throw FormatError("idx '" + path + "': truncated header (missing dimensions)");
    }
    IdxPayload out;
    std::uint64_t product = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        const std::uint32_t extent = be32(4 + 4 * d);
        if (extent == 0) throw FormatError("idx '" + path + "': zero dimension");
        if (product > UINT64_MAX / extent) {
            throw FormatError("idx '" + path + "': dimension product overflows");
        }
        product *= extent;
        out.dims.push_back(extent);
    }
    const std::size_t header = 4 + 4 * ndims;
    if (product > bytes.size() - header) {
        throw FormatError("idx '" + path + "': payload truncated (declared " +
                          std::to_string(product) + " values, found " +
                          std::to_string(bytes.size() - header) + ")");
    }
    const std::size_t trailing = bytes.size() - header - product;
    if (trailing > 0) {
        const std::string msg = "idx '" + path + "': " + std::to_string(trailing) +
                                " trailing bytes after payload";
        if (strict) throw FormatError(msg);
        if (warnings) warnings->push_back(msg);
    }
    out.data = bytes.data() + header;
    out.count = static_cast<std::size_t>(product);
    return out;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path, bool strict,
                 std::vector<std::string>* warnings) {
    const auto image_bytes = read_file_bytes(images_path);
    const auto label_bytes = read_file_bytes(labels_path);
    const IdxPayload images = parse_idx(image_bytes, 0x00000803u, images_path, strict, warnings);
    const IdxPayload labels = parse_idx(label_bytes, 0x00000801u, labels_path, strict, warnings);

    const std::size_t n = images.dims[0];
    if (n != labels.dims[0]) {
        throw DataError("idx: image count " + std::to_string(n) + " does not match label count " +
                        std::to_string(labels.dims[0]));
    }
    const std::size_t rows = images.dims[1];
    const std::size_t cols = images.dims[2];

    Dataset out;
    out.name = images_path;
    out.provenance["images"] = images_path;
    out.provenance["labels"] = labels_path;
    out.inputs.reserve(n);
    out.labels.reserve(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor t({rows, cols});
        const unsigned char* px = images.data + i * rows * cols;
        for (std::size_t j = 0; j < rows * cols; ++j) {
            t[j] = static_cast<double>(px[j]) / 255.0;
        }
        out.inputs.push_back(std::move(t));
        const int label = static_cast<int>(labels.data[i]);
        max_label = std::max(max_label, label);
        out.labels.push_back(label);
    }
    out.num_classes = max_label + 1;
    return out;
}

namespace {

json tensor_values(const Tensor& t) { return json(t.values()); }

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': invalid JSON: " + e.what());
    }
    return j;
}

void check_version(const json& j, const std::string& path) {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != kFormatVersion) {
        throw FormatError("'" + path + "': format_version must be " +
                          std::to_string(kFormatVersion));
    }
}

json activation_to_json(const ActivationSpec& act) {
    switch (act.kind) {
        case Activation::None:
            return json{{"kind", "none"}};
        case Activation::Relu:
            return json{{"kind", "relu"}};
        case Activation::ThresholdRelu:
            return json{{"kind", "threshold_relu"}, {"y_th", act.y_th}};
    }
    return json{{"kind", "none"}};
}

ActivationSpec activation_from_json(const json& j, const std::string& path) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return ActivationSpec::none();
    if (kind == "relu") return ActivationSpec::relu();
    if (kind == "threshold_relu") {
        return ActivationSpec::threshold_relu(j.at("y_th").get<double>());
    }
    throw FormatError("'" + path + "': unknown activation kind '" + kind + "'");
}

std::vector<double> checked_array(const json& j, const char* key, std::size_t expected,
                                  const std::string& path) {
    auto vals = j.at(key).get<std::vector<double>>();
    if (vals.size() != expected) {
        throw FormatError("'" + path + "': '" + std::string(key) + "' has " +
                          std::to_string(vals.size()) + " values, expected " +
                          std::to_string(expected));
    }
    return vals;
}

}  // namespace

void save_dataset_json(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "dataset";
    j["name"] = dataset.name;
    j["num_classes"] = dataset.num_classes;
    j["provenance"] = dataset.provenance;
    if (!dataset.inputs.empty()) {
        j["input_shape"] = dataset.inputs.front().shape();
    }
    json inputs = json::array();
    for (const Tensor& t : dataset.inputs) inputs.push_back(tensor_values(t));
    j["inputs"] = std::move(inputs);
    j["labels"] = dataset.labels;
    write_json_file(j, path);
}

Dataset load_dataset_json(const std::string& path) {
    const json j = load_json_file(path);
    check_version(j, path);
    try {
        if (j.at("kind").get<std::string>() != "dataset") {
            throw FormatError("'" + path + "': not a dataset file");
        }
        Dataset out;
        out.name = j.at("name").get<std::string>();
        out.num_classes = j.at("num_classes").get<int>();
        if (j.contains("provenance")) {
            out.provenance = j["provenance"].get<std::map<std::string, std::string>>();
        }
        const auto shape = j.at("input_shape").get<std::vector<std::size_t>>();
        for (const auto& sample : j.at("inputs")) {
            out.inputs.emplace_back(shape, sample.get<std::vector<double>>());
        }
        out.labels = j.at("labels").get<std::vector<int>>();
        out.validate();
        return out;
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

namespace {

json ann_layer_to_json(const AnnLayer& layer) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        return json{{"type", "dense"},
                    {"out", d->weight.extent(0)},
                    {"in", d->weight.extent(1)},
                    {"weight", tensor_values(d->weight)},
                    {"bias", tensor_values(d->bias)},
                    {"activation", activation_to_json(d->activation)}};
    }
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
        return json{{"type", "conv2d"},
                    {"out_channels", c->kernel.extent(0)},
                    {"in_channels", c->kernel.extent(1)},
                    {"kh", c->kernel.extent(2)},
                    {"kw", c->kernel.extent(3)},
                    {"stride", c->stride},
                    {"padding", c->padding},
                    {"kernel", tensor_values(c->kernel)},
                    {"bias", tensor_values(c->bias)},
                    {"activation", activation_to_json(c->activation)}};
    }
    if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
        return json{{"type", "avgpool"}, {"k", p->k}, {"stride", p->stride}};
    }
    const auto& dr = std::get<DropoutLayer>(layer);
    return json{{"type", "dropout"}, {"p", dr.p}};
}

}  // namespace

void save_ann(const AnnModel& model, const std::string& path, const nlohmann::json& meta) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "ann";
    json layers = json::array();
    for (const auto& layer : model.layers) layers.push_back(ann_layer_to_json(layer));
    j["layers"] = std::move(layers);
    j["meta"] = meta;
    write_json_file(j, path);
}

AnnModel load_ann(const std::string& path, nlohmann::json* meta) {
    const json j = load_json_file(path);
    check_version(j, path);
    try {
        if (j.at("kind").get<std::string>() != "ann") {
            throw FormatError("'" + path + "': kind is not 'ann'");
        }
        AnnModel model;
        for (const auto& lj : j.at("layers")) {
            const std::string type = lj.at("type").get<std::string>();
            if (type == "dense") {
                DenseLayer d;
                const auto out = lj.at("out").get<std::size_t>();
                const auto in = lj.at("in").get<std::size_t>();
                d.weight = Tensor({out, in}, checked_array(lj, "weight", out * in, path));
                d.bias = Tensor({out}, checked_array(lj, "bias", out, path));
                d.activation = activation_from_json(lj.at("activation"), path);
                model.layers.emplace_back(std::move(d));
            } else if (type == "conv2d") {
                Conv2dLayer c;
                const auto oc = lj.at("out_channels").get<std::size_t>();
                const auto ic = lj.at("in_channels").get<std::size_t>();
                const auto kh = lj.at("kh").get<std::size_t>();
                const auto kw = lj.at("kw").get<std::size_t>();
                c.kernel = Tensor({oc, ic, kh, kw}, checked_array(lj, "kernel", oc * ic * kh * kw, path));
                c.bias = Tensor({oc}, checked_array(lj, "bias", oc, path));
                c.stride = lj.at("stride").get<std::size_t>();
                c.padding = lj.at("padding").get<std::size_t>();
                c.activation = activation_from_json(lj.at("activation"), path);
                model.layers.emplace_back(std::move(c));
            } else if (type == "avgpool") {
                model.layers.emplace_back(AvgPoolLayer{lj.at("k").get<std::size_t>(),
                                                       lj.at("stride").get<std::size_t>()});
            } else if (type == "dropout") {
                model.layers.emplace_back(DropoutLayer{lj.at("p").get<double>()});
            } else {
                throw FormatError("'" + path + "': unknown layer type '" + type + "'");
            }
        }
        if (meta && j.contains("meta")) *meta = j["meta"];
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

void save_snn(const SnnModel& model, const std::string& path, const nlohmann::json& meta) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "snn";
    j["readout"] =
        model.readout == Readout::AccumulatePotential ? "accumulate_potential" : "spike_count";
    json layers = json::array();
    for (const auto& layer : model.layers) {
        if (const auto* d = std::get_if<SnnDenseLayer>(&layer)) {
            layers.push_back(json{{"type", "dense"},
                                  {"out", d->weight.extent(0)},
                                  {"in", d->weight.extent(1)},
                                  {"weight", tensor_values(d->weight)},
                                  {"bias", tensor_values(d->bias)},
                                  {"v_th", d->v_th}});
        } else if (const auto* c = std::get_if<SnnConv2dLayer>(&layer)) {
            layers.push_back(json{{"type", "conv2d"},
                                  {"out_channels", c->kernel.extent(0)},
                                  {"in_channels", c->kernel.extent(1)},
                                  {"kh", c->kernel.extent(2)},
                                  {"kw", c->kernel.extent(3)},
                                  {"stride", c->stride},
                                  {"padding", c->padding},
                                  {"kernel", tensor_values(c->kernel)},
                                  {"bias", tensor_values(c->bias)},
                                  {"v_th", c->v_th}});
        } else {
            const auto& p = std::get<SnnAvgPoolLayer>(layer);
            layers.push_back(json{{"type", "avgpool"}, {"k", p.k}, {"stride", p.stride}});
        }
    }
    j["layers"] = std::move(layers);
    j["meta"] = meta;
    write_json_file(j, path);
}

SnnModel load_snn(const std::string& path, nlohmann::json* meta) {
    const json j = load_json_file(path);
    check_version(j, path);
    try {
        if (j.at("kind").get<std::string>() != "snn") {
            throw FormatError("'" + path + "': kind is not 'snn'");
        }
        SnnModel model;
        const std::string readout = j.at("readout").get<std::string>();
        if (readout == "accumulate_potential") {
            model.readout = Readout::AccumulatePotential;
        } else if (readout == "spike_count") {
            model.readout = Readout::SpikeCount;
        } else {
            throw FormatError("'" + path + "': unknown readout '" + readout + "'");
        }
        for (const auto& lj : j.at("layers")) {
            const std::string type = lj.at("type").get<std::string>();
            if (type == "dense") {
                if (!lj.contains("v_th")) {
                    throw FormatError("'" + path + "': dense layer missing v_th");
                }
                SnnDenseLayer d;
                const auto out = lj.at("out").get<std::size_t>();
                const auto in = lj.at("in").get<std::size_t>();
                d.weight = Tensor({out, in}, checked_array(lj, "weight", out * in, path));
                d.bias = Tensor({out}, checked_array(lj, "bias", out, path));
                d.v_th = lj.at("v_th").get<double>();
                model.layers.emplace_back(std::move(d));
            } else if (type == "conv2d") {
                if (!lj.contains("v_th")) {
                    throw FormatError("'" + path + "': conv2d layer missing v_th");
                }
                SnnConv2dLayer c;
                const auto oc = lj.at("out_channels").get<std::size_t>();
                const auto ic = lj.at("in_channels").get<std::size_t>();
                const auto kh = lj.at("kh").get<std::size_t>();
                const auto kw = lj.at("kw").get<std::size_t>();
                c.kernel = Tensor({oc, ic, kh, kw}, checked_array(lj, "kernel", oc * ic * kh * kw, path));
                c.bias = Tensor({oc}, checked_array(lj, "bias", oc, path));
                c.stride = lj.at("stride").get<std::size_t>();
                c.padding = lj.at("padding").get<std::size_t>();
                c.v_th = lj.at("v_th").get<double>();
                model.layers.emplace_back(std::move(c));
            } else if (type == "avgpool") {
                model.layers.emplace_back(SnnAvgPoolLayer{lj.at("k").get<std::size_t>(),
                                                          lj.at("stride").get<std::size_t>()});
            } else {
                throw FormatError("'" + path + "': unknown layer type '" + type + "'");
            }
        }
        if (meta && j.contains("meta")) *meta = j["meta"];
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

void save_calibration(const CalibrationResult& calib, const std::string& path,
                      const nlohmann::json& meta) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "calibration";
    j["v_th_per_layer"] = calib.v_th_per_layer;
    j["sample_count"] = calib.sample_count;
    json hists = json::array();
    for (const auto& h : calib.histograms) {
        hists.push_back(std::vector<std::uint64_t>(h.begin(), h.end()));
    }
    j["histograms"] = std::move(hists);
    j["warnings"] = calib.warnings;
    j["meta"] = meta;
    write_json_file(j, path);
}

CalibrationResult load_calibration(const std::string& path, nlohmann::json* meta) {
    const json j = load_json_file(path);
    check_version(j, path);
    try {
        if (j.at("kind").get<std::string>() != "calibration") {
            throw FormatError("'" + path + "': kind is not 'calibration'");
        }
        CalibrationResult out;
        out.v_th_per_layer = j.at("v_th_per_layer").get<std::vector<double>>();
        out.sample_count = j.at("sample_count").get<std::size_t>();
        for (const auto& hj : j.at("histograms")) {
            const auto vals = hj.get<std::vector<std::uint64_t>>();
            if (vals.size() != 64) {
                throw FormatError("'" + path + "': histogram must have 64 bins");
            }
            std::array<std::uint64_t, 64> h{};
            std::copy(vals.begin(), vals.end(), h.begin());
            out.histograms.push_back(h);
        }
        if (j.contains("warnings")) {
            out.warnings = j["warnings"].get<std::vector<std::string>>();
        }
        if (meta && j.contains("meta")) *meta = j["meta"];
        for (double v : out.v_th_per_layer) {
            if (!(v > 0.0)) throw FormatError("'" + path + "': v_th entries must be positive");
        }
        return out;
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

nlohmann::json report_to_json(const ConversionReport& report) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "conversion_report";
    j["seed"] = report.seed;
    j["config"] = report.config_echo;
    j["ann_accuracy"] = report.ann_accuracy;
    json acc = json::object();
    json loss = json::object();
    for (const auto& [T, a] : report.snn_accuracy_by_T) acc[std::to_string(T)] = a;
    for (const auto& [T, l] : report.conversion_loss_by_T) loss[std::to_string(T)] = l;
    j["snn_accuracy_by_T"] = std::move(acc);
    j["conversion_loss_by_T"] = std::move(loss);
    json rows = json::array();
    for (const auto& r : report.per_layer_error) {
        rows.push_back(json{{"T", r.T},
                            {"layer", r.layer},
                            {"mean_dpsp_sq", r.mean_dpsp_sq},
                            {"mean_da_sq", r.mean_da_sq}});
    }
    j["per_layer_error"] = std::move(rows);
    json sweep = json::array();
    for (const auto& p : report.shift_sweep) {
        sweep.push_back(json{
            {"delta", p.delta}, {"objective", p.objective}, {"snn_accuracy", p.snn_accuracy}});
    }
    j["shift_sweep"] = std::move(sweep);
    json est = json::object();
    for (const auto& [T, e] : report.estimate_by_T) est[std::to_string(T)] = e;
    j["estimate_by_T"] = std::move(est);
    if (report.has_scaling) {
        json srows = json::array();
        for (const auto& r : report.scaling_rows) {
            srows.push_back(json{{"T", r.T},
                                 {"mean_sq_output_error", r.mean_sq_output_error},
                                 {"estimate", r.estimate}});
        }
        j["scaling"] = json{{"rows", std::move(srows)},
                            {"slope_log_rms_vs_log_T", report.scaling_slope}};
    }
    return j;
}

void save_report(const ConversionReport& report, const std::string& path) {
    write_json_file(report_to_json(report), path);
}

namespace {

std::string num(double v) { return json(v).dump(); }

}  // namespace

void write_report_csvs(const ConversionReport& report, const std::string& prefix) {
    if (!report.per_layer_error.empty()) {
        std::ofstream out(prefix + "_layers.csv", std::ios::binary);
        if (!out) throw DataError("cannot write '" + prefix + "_layers.csv'");
        out << "T,layer,mean_dpsp_sq,mean_da_sq\n";
        for (const auto& r : report.per_layer_error) {
            out << r.T << "," << r.layer << "," << num(r.mean_dpsp_sq) << ","
                << num(r.mean_da_sq) << "\n";
        }
    }
    if (!report.shift_sweep.empty()) {
        std::ofstream out(prefix + "_sweep.csv", std::ios::binary);
        if (!out) throw DataError("cannot write '" + prefix + "_sweep.csv'");
        out << "delta,objective,snn_accuracy\n";
        for (const auto& p : report.shift_sweep) {
            out << num(p.delta) << "," << num(p.objective) << "," << num(p.snn_accuracy) << "\n";
        }
    }
    if (report.has_scaling) {
        std::ofstream out(prefix + "_scaling.csv", std::ios::binary);
        if (!out) throw DataError("cannot write '" + prefix + "_scaling.csv'");
        out << "T,mean_sq_output_error,estimate\n";
        for (const auto& r : report.scaling_rows) {
            out << r.T << "," << num(r.mean_sq_output_error) << "," << num(r.estimate) << "\n";
        }
    }
}

}  // namespace snnforge
