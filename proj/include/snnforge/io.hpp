#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "snnforge/analysis.hpp"
#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/data.hpp"
#include "snnforge/snn.hpp"

namespace snnforge {

inline constexpr int kFormatVersion = 1;

// IDX ingestion: big-endian magic 0x00000803 for images (count x rows x cols,
// unsigned bytes, normalized by 255) and 0x00000801 for labels. Trailing bytes
// after a well-formed payload are tolerated with a warning unless strict.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 bool strict = false, std::vector<std::string>* warnings = nullptr);

// Value-exact dataset container for synthetic data (doubles survive the round
// trip; IDX bytes cannot carry them).
void save_dataset_json(const Dataset& dataset, const std::string& path);
Dataset load_dataset_json(const std::string& path);

// Model files, format_version 1, weights as decimal arrays that round-trip
// 64-bit floats exactly.
void save_ann(const AnnModel& model, const std::string& path,
              const nlohmann::json& meta = nlohmann::json::object());
AnnModel load_ann(const std::string& path, nlohmann::json* meta = nullptr);

void save_snn(const SnnModel& model, const std::string& path,
              const nlohmann::json& meta = nlohmann::json::object());
SnnModel load_snn(const std::string& path, nlohmann::json* meta = nullptr);

void save_calibration(const CalibrationResult& calib, const std::string& path,
                      const nlohmann::json& meta = nlohmann::json::object());
CalibrationResult load_calibration(const std::string& path, nlohmann::json* meta = nullptr);

nlohmann::json report_to_json(const ConversionReport& report);
void save_report(const ConversionReport& report, const std::string& path);

// Flat CSV exports for plotting: <prefix>_layers.csv, <prefix>_sweep.csv and
// <prefix>_scaling.csv, written only for the tables the report actually holds.
void write_report_csvs(const ConversionReport& report, const std::string& prefix);

}  // namespace snnforge
