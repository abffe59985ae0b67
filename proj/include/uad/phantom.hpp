#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uad/volume.hpp"

namespace uad {

enum class LesionMode { Hyper, Mixed };

/// Synthetic brain-like volumes for desk-scale experiments.
struct PhantomConfig {
    int n_subjects = 10;
    double anomaly_rate = 0.0;
    LesionMode lesion_intensity_mode = LesionMode::Hyper;
    std::uint64_t seed = 0;
    Shape3 volume_shape{64, 64, 32};
    std::string dataset_id = "phantom";
    /// Gamma applied to the tissue contrast; values other than 1 emulate a
    /// scanner/domain shift between cohorts.
    double intensity_gamma = 1.0;

    void validate() const;
};

/// Each subject: an ellipsoidal brain with a radial intensity gradient,
/// low-frequency texture, a darker cortical shell and two dark ventricles,
/// plus mild noise. A fraction anomaly_rate of subjects (chosen by seeded
/// shuffle) receive 1-4 ellipsoidal lesions recorded in gt_mask. Output is
/// un-normalized (arbitrary units around 1000) and bit-identical for a
/// given config.
std::vector<Volume> generate_phantoms(const PhantomConfig& cfg);

std::string phantom_subject_id(int index);

}  // namespace uad
