#pragma once

#include <span>

#include "uad/volume.hpp"

namespace uad {

enum class PercentileScope { BrainMask, WholeVolume };

/// Linear-interpolation percentile (q in [0,100]) of the given samples.
double percentile(std::span<const float> values, double q);

/// Divides by the 98th percentile and clips to 1.
///
/// Throws AlreadyNormalized if the flag is set and ZeroPercentile when the
/// percentile is not positive (empty or all-zero scan).
Volume normalize_volume(const Volume& v, PercentileScope scope = PercentileScope::BrainMask);

/// Every axial slice with at least one brain voxel, resized to size x size.
/// Intensities are resampled bilinearly and masks by nearest neighbour; an
/// in-plane shape that already matches is copied verbatim.
SliceBatch extract_slices(const Volume& v, int size = 128);

/// Writes per-slice values back into a grid of the volume's shape using the
/// batch provenance. Slices are resized bilinearly to the in-plane shape when
/// it differs from the batch size; otherwise they are copied exactly. Axial
/// slices absent from the batch stay 0.
FloatGrid reassemble(std::span<const float> slice_values, const SliceBatch& batch, const Shape3& shape);

/// Resamples one row-major plane (rows = height).
std::vector<float> resize_bilinear(std::span<const float> src, int src_w, int src_h, int dst_w, int dst_h);
std::vector<std::uint8_t> resize_nearest(std::span<const std::uint8_t> src, int src_w, int src_h, int dst_w,
                                         int dst_h);

}  // namespace uad
