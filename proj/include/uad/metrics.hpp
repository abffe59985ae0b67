#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uad/postproc.hpp"
#include "uad/volume.hpp"

namespace uad {

struct PrCurve {
    std::vector<double> thresholds;  // descending distinct scores
    std::vector<double> precision;
    std::vector<double> recall;
};

struct PrResult {
    PrCurve curve;
    double auprc = 0.0;
};

/// Precision/recall at every distinct score (predict positive when score >= s),
/// anchored at recall 0 with the first point's precision, trapezoidal area.
/// Throws DegenerateLabels unless both classes are present.
PrResult prc_and_auprc(std::span<const float> scores, std::span<const std::uint8_t> labels);

/// Area under the ROC curve as the Mann-Whitney statistic (ties count one half).
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

/// 2|a & b| / (|a| + |b|); 1 when both are empty.
double dice(const BinaryVolume& a, const BinaryVolume& b);
double dice_from_counts(std::size_t intersection, std::size_t size_a, std::size_t size_b);

/// Continuous post-processed score volume paired with its annotation.
struct ScoredSubject {
    const FloatGrid* scores = nullptr;
    const MaskGrid* gt = nullptr;
};

/// Pooled DICE over all subjects after binarize + prune at t.
double pooled_dice_at(const std::vector<ScoredSubject>& subjects, double t, const PostprocConfig& cfg);

struct BestDice {
    double dice = 0.0;
    double threshold = 0.0;
};

/// Best pooled DICE over the thresholds {0, 0.001, ..., 1}. All 1001 candidates
/// are evaluated exactly in one descending sweep: voxels enter in score order
/// and a union-find keeps the size and lesion overlap of every component, so
/// pruning at each grid step costs nothing extra. Ties go to the lowest
/// threshold. Throws DegenerateLabels when no subject has lesion voxels.
BestDice greedy_best_dice(const std::vector<ScoredSubject>& subjects, const PostprocConfig& cfg);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

struct PatientDice {
    MeanStd summary;
    std::vector<double> per_patient;
};

PatientDice dice_at_op(const std::vector<ScoredSubject>& subjects, double t, const PostprocConfig& cfg);

struct ResidualStats {
    MeanStd normal;
    std::optional<MeanStd> anomalous;  // empty when there are no lesion voxels
};

/// Mean/std of scores over in-mask normal voxels and over lesion voxels.
ResidualStats residual_stats(std::span<const float> scores, std::span<const std::uint8_t> gt,
                             std::span<const std::uint8_t> brain_mask);

struct ResidualHistograms {
    int bin_count = 100;
    std::vector<double> normal;
    std::vector<double> anomalous;
};

/// Normalized histograms of scores in (0, 1] with uniform bins; zeros and
/// values above 1 are excluded.
ResidualHistograms residual_histograms(std::span<const float> scores, std::span<const std::uint8_t> gt,
                                       std::span<const std::uint8_t> brain_mask, int bin_count = 100);

/// Symmetric chi-square distance 0.5 * sum (p - q)^2 / (p + q) over bins with
/// p + q > 0. Throws BinMismatch for different lengths.
double chi_square_distance(std::span<const double> p, std::span<const double> q);

/// Pearson correlation; empty when either column has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

inline constexpr std::array<const char*, 5> kCorrelationColumns{"AUPRC", "⌈DICE⌉", "ℓ1-RE_N", "ℓ1-RE_A", "χ²"};

/// Per-model values of the correlation columns, in kCorrelationColumns order.
using CorrelationRow = std::array<double, 5>;
using CorrelationMatrix = std::array<std::array<std::optional<double>, 5>, 5>;

/// Pairwise Pearson correlation across models. Needs at least three rows.
CorrelationMatrix correlation_matrix(const std::vector<CorrelationRow>& rows);

}  // namespace uad
