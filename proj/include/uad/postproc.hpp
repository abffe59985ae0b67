#pragma once

#include <array>
#include <optional>

#include "uad/volume.hpp"

namespace uad {

struct PostprocConfig {
    int erosion_radius = 3;
    bool keep_positive_only = true;
    std::array<int, 3> median_kernel{5, 5, 5};
    int min_component_voxels = 8;
    int connectivity = 26;
    std::optional<double> threshold;

    /// Throws InvalidConfig for an even/negative kernel or unknown connectivity.
    void validate() const;
};

using BinaryVolume = MaskGrid;

/// Erosion by the 6-neighbourhood (L1) ball of the given radius. Voxels outside
/// the grid count as background.
MaskGrid erode_mask(const MaskGrid& mask, int radius);

/// max(r, 0) when keep_positive_only, |r| otherwise.
FloatGrid signed_to_scored(const FloatGrid& signed_residual, bool keep_positive_only);

/// Median over a box neighbourhood with replicate padding at the borders.
FloatGrid median_filter_3d(const FloatGrid& scores, std::array<int, 3> kernel = {5, 5, 5});

/// Voxel is true iff score > t.
BinaryVolume binarize(const FloatGrid& scores, double t);

/// Component labels (0 = background, 1..n) and per-label sizes (index 0 unused).
struct Components {
    Grid3<int> labels;
    std::vector<std::size_t> sizes;
};
Components label_components(const BinaryVolume& b, int connectivity);

/// Drops connected components with fewer than min_voxels voxels.
BinaryVolume prune_components(const BinaryVolume& b, int min_voxels = 8, int connectivity = 26);

/// Score volume as produced by a scorer: non-negative scores plus, for
/// residual-based scorers, the signed residual x - x_hat.
struct ResidualVolume {
    FloatGrid scores;
    std::optional<FloatGrid> signed_residual;
};

struct PipelineOutput {
    FloatGrid continuous;
    std::optional<BinaryVolume> binary;
};

/// Fixed order: erode mask -> multiply -> positive filter -> median, then
/// binarize + prune only when cfg.threshold is set.
PipelineOutput run_pipeline(const ResidualVolume& residual, const MaskGrid& brain_mask, const PostprocConfig& cfg);

/// Binarize at t and prune with the configured component rules.
BinaryVolume segment(const FloatGrid& continuous, double t, const PostprocConfig& cfg);

}  // namespace uad
