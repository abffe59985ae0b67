#pragma once

#include <filesystem>
#include <string>

#include "uad/volume.hpp"

namespace uad {

/// Gzip-compressed NIfTI-1 single-file images (.nii.gz).
///
/// Float grids are stored as FLOAT32 and masks as UINT8 with unit voxel
/// spacing. The free-text description field carries a small key=value tag
/// used to round-trip the normalized flag.
void write_nifti(const std::filesystem::path& path, const FloatGrid& grid, const std::string& description = {});
void write_nifti(const std::filesystem::path& path, const MaskGrid& grid, const std::string& description = {});

FloatGrid read_nifti_float(const std::filesystem::path& path, std::string* description = nullptr);
MaskGrid read_nifti_mask(const std::filesystem::path& path);

/// Subject directory layout: <dataset_id>/<subject_id>/{image,mask,gt}.nii.gz
/// where gt is optional.
void save_volume(const std::filesystem::path& subject_dir, const Volume& v);

/// Reads a subject directory written by save_volume (or any directory with the
/// same file names). Throws UnreadableFile or ShapeMismatch.
Volume load_volume(const std::filesystem::path& subject_dir);

}  // namespace uad
