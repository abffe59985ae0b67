#include "uad/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uad/error.hpp"

namespace uad {

void PostprocConfig::validate() const {
    if (erosion_radius < 0) throw Error(Errc::InvalidConfig, "erosion radius must be >= 0");
    for (int k : median_kernel) {
        if (k < 1 || k % 2 == 0) throw Error(Errc::InvalidConfig, "median kernel extents must be odd and positive");
    }
    if (min_component_voxels < 0) throw Error(Errc::InvalidConfig, "min_component_voxels must be >= 0");
    if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
        throw Error(Errc::InvalidConfig, "connectivity must be 6, 18 or 26");
    }
    if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
        throw Error(Errc::InvalidConfig, "threshold must lie in [0, 1]");
    }
}

MaskGrid erode_mask(const MaskGrid& mask, int radius) {
    // Iterating the unit 6-neighbourhood erosion r times equals erosion by the L1 ball of radius r.
    MaskGrid cur = mask;
    const Shape3& s = mask.shape();
    for (int it = 0; it < radius; ++it) {
        MaskGrid next(s, 0);
        for (int z = 0; z < s.nz; ++z) {
            for (int y = 0; y < s.ny; ++y) {
                for (int x = 0; x < s.nx; ++x) {
                    if (!cur(x, y, z)) continue;
                    auto on = [&](int xx, int yy, int zz) { return s.contains(xx, yy, zz) && cur(xx, yy, zz); };
                    next(x, y, z) = on(x - 1, y, z) && on(x + 1, y, z) && on(x, y - 1, z) && on(x, y + 1, z) &&
                                    on(x, y, z - 1) && on(x, y, z + 1);
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

FloatGrid signed_to_scored(const FloatGrid& signed_residual, bool keep_positive_only) {
    FloatGrid out(signed_residual.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float r = signed_residual[i];
        out[i] = keep_positive_only ? std::max(r, 0.0f) : std::abs(r);
    }
    return out;
}

FloatGrid median_filter_3d(const FloatGrid& scores, std::array<int, 3> kernel) {
    const Shape3& s = scores.shape();
    const int hx = kernel[0] / 2, hy = kernel[1] / 2, hz = kernel[2] / 2;
    FloatGrid out(s);
    std::vector<float> window(static_cast<std::size_t>(kernel[0]) * kernel[1] * kernel[2]);
    const auto mid = static_cast<std::ptrdiff_t>(window.size() / 2);
    for (int z = 0; z < s.nz; ++z) {
        for (int y = 0; y < s.ny; ++y) {
            for (int x = 0; x < s.nx; ++x) {
                std::size_t k = 0;
                for (int dz = -hz; dz <= hz; ++dz) {
                    const int zz = std::clamp(z + dz, 0, s.nz - 1);
                    for (int dy = -hy; dy <= hy; ++dy) {
                        const int yy = std::clamp(y + dy, 0, s.ny - 1);
                        for (int dx = -hx; dx <= hx; ++dx) {
                            window[k++] = scores(std::clamp(x + dx, 0, s.nx - 1), yy, zz);
                        }
                    }
                }
                std::nth_element(window.begin(), window.begin() + mid, window.end());
                out(x, y, z) = window[static_cast<std::size_t>(mid)];
            }
        }
    }
    return out;
}

BinaryVolume binarize(const FloatGrid& scores, double t) {
    BinaryVolume out(scores.shape(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(scores[i]) > t ? 1 : 0;
    return out;
}

namespace {

std::vector<std::array<int, 3>> neighbourhood(int connectivity) {
    std::vector<std::array<int, 3>> offsets;
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
                if (nonzero == 0) continue;
                if (connectivity == 6 && nonzero > 1) continue;
                if (connectivity == 18 && nonzero > 2) continue;
                offsets.push_back({dx, dy, dz});
            }
        }
    }
    return offsets;
}

}  // namespace

Components label_components(const BinaryVolume& b, int connectivity) {
    if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
        throw Error(Errc::InvalidConfig, "connectivity must be 6, 18 or 26");
    }
    const Shape3& s = b.shape();
    const auto offsets = neighbourhood(connectivity);
    Components c{Grid3<int>(s, 0), {0}};
    std::vector<std::array<int, 3>> stack;
    for (int z = 0; z < s.nz; ++z) {
        for (int y = 0; y < s.ny; ++y) {
            for (int x = 0; x < s.nx; ++x) {
                if (!b(x, y, z) || c.labels(x, y, z) != 0) continue;
                const int label = static_cast<int>(c.sizes.size());
                std::size_t size = 0;
                c.labels(x, y, z) = label;
                stack.push_back({x, y, z});
                while (!stack.empty()) {
                    const auto [cx, cy, cz] = stack.back();
                    stack.pop_back();
                    ++size;
                    for (const auto& [dx, dy, dz] : offsets) {
                        const int nx = cx + dx, ny = cy + dy, nz = cz + dz;
                        if (s.contains(nx, ny, nz) && b(nx, ny, nz) && c.labels(nx, ny, nz) == 0) {
                            c.labels(nx, ny, nz) = label;
                            stack.push_back({nx, ny, nz});
                        }
                    }
                }
                c.sizes.push_back(size);
            }
        }
    }
    return c;
}

BinaryVolume prune_components(const BinaryVolume& b, int min_voxels, int connectivity) {
    const Components c = label_components(b, connectivity);
    BinaryVolume out(b.shape(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int label = c.labels[i];
        out[i] = label != 0 && c.sizes[static_cast<std::size_t>(label)] >= static_cast<std::size_t>(min_voxels) ? 1 : 0;
    }
    return out;
}

BinaryVolume segment(const FloatGrid& continuous, double t, const PostprocConfig& cfg) {
    return prune_components(binarize(continuous, t), cfg.min_component_voxels, cfg.connectivity);
}

PipelineOutput run_pipeline(const ResidualVolume& residual, const MaskGrid& brain_mask, const PostprocConfig& cfg) {
    cfg.validate();
    if (residual.scores.shape() != brain_mask.shape() ||
        (residual.signed_residual && residual.signed_residual->shape() != brain_mask.shape())) {
        throw Error(Errc::ShapeMismatch, "score volume and brain mask shapes differ");
    }
    const MaskGrid eroded = erode_mask(brain_mask, cfg.erosion_radius);

    FloatGrid masked(brain_mask.shape());
    for (std::size_t i = 0; i < masked.size(); ++i) {
        const float v = residual.signed_residual ? (*residual.signed_residual)[i] : residual.scores[i];
        masked[i] = eroded[i] ? v : 0.0f;
    }
    // Scorers without a signed residual (gradient saliency) already deliver magnitudes.
    FloatGrid filtered = residual.signed_residual ? signed_to_scored(masked, cfg.keep_positive_only) : masked;

    PipelineOutput out;
    out.continuous = median_filter_3d(filtered, cfg.median_kernel);
    if (cfg.threshold) out.binary = segment(out.continuous, *cfg.threshold, cfg);
    return out;
}

}  // namespace uad
