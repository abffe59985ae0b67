#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uad/methods.hpp"
#include "uad/metrics.hpp"

namespace uad {

/// Metrics of one approach (method + scorer) on one test dataset at one
/// training-set fraction.
struct EvalRecord {
    std::string approach;
    MethodTag method = MethodTag::AE_dense;
    ScorerKind scorer = ScorerKind::Reconstruction;
    std::string dataset;
    double fraction = 1.0;
    int n_train_subjects = 0;
    std::vector<std::string> op_subjects;
    std::vector<std::string> test_subjects;
    double prevalence = 0.0;
    double auroc = 0.0;
    double auprc = 0.0;
    BestDice best_dice;
    double op_threshold = 0.0;
    PatientDice dice;
    ResidualStats residuals;
    ResidualHistograms histograms;
    std::optional<double> chi2;  // empty without lesion voxels
    /// Restoration only: slices scored, and those whose objective at the last
    /// iteration is no higher than at the first.
    std::optional<int> restored_slices;
    std::optional<int> non_increasing_slices;
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

/// Results directory layout:
///   manifest.json          completed cells in config order
///   cells/<cell>.json      {"cell": id, "records": [...]}
///   cache/models/<key>.ckpt, cache/results/<key>.json
///   report/                tables and plots
void write_cell_file(const std::filesystem::path& path, const std::string& cell_id, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_cell_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& output_dir, const std::vector<std::string>& completed_cells,
                    const std::vector<std::string>& pending_cells);
std::vector<std::string> read_manifest(const std::filesystem::path& output_dir);

/// Records of every completed cell in manifest order.
std::vector<EvalRecord> read_results(const std::filesystem::path& output_dir);

/// Writes through a temporary file and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace uad
