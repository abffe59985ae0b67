#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uad/results.hpp"

namespace uad {

inline constexpr const char* kResultsHeader = "Approach,AUROC,AUPRC,⌈DICE⌉,DICE,ℓ1-RE_N,ℓ1-RE_A,χ²";

/// One CSV row: AUROC, AUPRC and ⌈DICE⌉ with four decimals, DICE and the
/// residual means as "mean ± std". Missing values are written as "n/a".
std::string results_row(const EvalRecord& r);

/// Header plus one row per record, in the given order.
std::string results_table(const std::vector<EvalRecord>& records);

/// Writes into `report_dir`, per test dataset:
///   results_<ds>.csv           table at the largest training fraction
///   auprc_<ds>.svg             AUPRC bar chart
///   hist_<ds>_<approach>.svg   normal/anomalous residual histograms
///   correlation_<ds>.{csv,svg} only with at least three approaches
///   subjects_<ds>.{csv,svg}    AUPRC against training subjects, only with several fractions
/// Returns the written paths. Throws EmptyResults when `records` is empty.
std::vector<std::filesystem::path> emit_report(const std::vector<EvalRecord>& records, const std::filesystem::path& report_dir);

/// Reads output_dir's manifest and writes output_dir/report.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& output_dir);

/// File-name friendly form of an approach name: "VAE (mc)" -> "VAE_mc".
std::string slug(const std::string& name);

}  // namespace uad
