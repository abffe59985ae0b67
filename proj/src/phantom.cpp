#include "uad/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "uad/error.hpp"
#include "uad/rng.hpp"

namespace uad {
namespace {

constexpr double kUnits = 1000.0;

struct Ellipsoid {
    double cx, cy, cz, ax, ay, az;
    double r2(double x, double y, double z) const {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
        return dx * dx + dy * dy + dz * dz;
    }
};

Volume make_subject(const PhantomConfig& cfg, int index, bool anomalous) {
    StableRng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
    const Shape3 s = cfg.volume_shape;
    const double sx = s.nx / 64.0, sy = s.ny / 64.0, sz = s.nz / 32.0;

    const Ellipsoid brain{s.nx / 2.0 + rng.uniform(-2, 2) * sx, s.ny / 2.0 + rng.uniform(-2, 2) * sy,
                          s.nz / 2.0 + rng.uniform(-1, 1) * sz, rng.uniform(22, 27) * sx,
                          rng.uniform(24, 29) * sy, rng.uniform(11, 14) * sz};

    struct Wave {
        double fx, fy, fz, phase;
    };
    std::array<Wave, 4> waves{};
    for (auto& w : waves) {
        w = {rng.uniform(0.05, 0.2) / sx, rng.uniform(0.05, 0.2) / sy, rng.uniform(0.05, 0.2) / sz,
             rng.uniform(0, 2 * 3.141592653589793)};
    }
    std::array<Ellipsoid, 2> ventricles{};
    for (int side = 0; side < 2; ++side) {
        const double sign = side == 0 ? -1.0 : 1.0;
        ventricles[static_cast<std::size_t>(side)] = {brain.cx + sign * rng.uniform(4, 6) * sx, brain.cy, brain.cz,
                                                      rng.uniform(2.5, 4) * sx, rng.uniform(7, 10) * sy,
                                                      rng.uniform(3, 5) * sz};
    }

    Volume v;
    v.intensities = FloatGrid(s, 0.0f);
    v.brain_mask = MaskGrid(s, 0);
    v.subject_id = phantom_subject_id(index);
    v.dataset_id = cfg.dataset_id;

    std::vector<double> tissue(s.size(), 0.0);
    for (int z = 0; z < s.nz; ++z) {
        for (int y = 0; y < s.ny; ++y) {
            for (int x = 0; x < s.nx; ++x) {
                const double r2 = brain.r2(x, y, z);
                const std::size_t i = v.intensities.index(x, y, z);
                if (r2 > 1.0) continue;
                v.brain_mask[i] = 1;
                double val = 0.55 + 0.15 * (1.0 - r2);
                for (const auto& w : waves) val += 0.03 * std::cos(w.fx * x + w.fy * y + w.fz * z + w.phase);
                if (r2 > 0.75) val -= 0.12;
                for (const auto& vent : ventricles) {
                    if (vent.r2(x, y, z) <= 1.0) val = 0.25;
                }
                tissue[i] = std::pow(std::max(val, 0.0), cfg.intensity_gamma);
            }
        }
    }

    if (anomalous) {
        MaskGrid gt(s, 0);
        const auto n_lesions = rng.uniform_int(1, 4);
        for (std::int64_t l = 0; l < n_lesions; ++l) {
            double px = 0, py = 0, pz = 0;
            for (int attempt = 0; attempt < 10000; ++attempt) {
                px = rng.uniform(0, s.nx);
                py = rng.uniform(0, s.ny);
                pz = rng.uniform(0, s.nz);
                if (brain.r2(px, py, pz) < 0.5) break;
            }
            const double radius = rng.uniform(2, 4);
            const Ellipsoid blob{px, py, pz, radius * sx, radius * sy, radius * 0.7 * sz};
            double offset = rng.uniform(0.35, 0.5);
            if (cfg.lesion_intensity_mode == LesionMode::Mixed && rng.uniform() < 0.5) offset = -rng.uniform(0.2, 0.35);
            for (int z = 0; z < s.nz; ++z) {
                for (int y = 0; y < s.ny; ++y) {
                    for (int x = 0; x < s.nx; ++x) {
                        const std::size_t i = gt.index(x, y, z);
                        if (!v.brain_mask[i] || blob.r2(x, y, z) > 1.0 || gt[i]) continue;
                        gt[i] = 1;
                        tissue[i] = std::max(tissue[i] + offset, 0.02);
                    }
                }
            }
        }
        v.gt_mask = std::move(gt);
    }

    for (std::size_t i = 0; i < tissue.size(); ++i) {
        const double noisy = v.brain_mask[i] ? std::max(tissue[i] + 0.01 * rng.normal(), 0.0) : 0.0;
        v.intensities[i] = static_cast<float>(noisy * kUnits);
    }
    if (!v.gt_mask) v.gt_mask = MaskGrid(s, 0);
    return v;
}

}  // namespace

void PhantomConfig::validate() const {
    if (n_subjects < 1) throw Error(Errc::InvalidConfig, "n_subjects must be positive");
    if (!(anomaly_rate >= 0.0 && anomaly_rate <= 1.0)) throw Error(Errc::InvalidConfig, "anomaly_rate must lie in [0,1]");
    if (volume_shape.nx < 16 || volume_shape.ny < 16 || volume_shape.nz < 4) {
        throw Error(Errc::InvalidConfig, "volume shape too small for a phantom");
    }
    if (!(intensity_gamma > 0.0)) throw Error(Errc::InvalidConfig, "intensity_gamma must be positive");
}

std::string phantom_subject_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sub-%04d", index);
    return buf;
}

std::vector<Volume> generate_phantoms(const PhantomConfig& cfg) {
    cfg.validate();
    std::vector<int> order(static_cast<std::size_t>(cfg.n_subjects));
    std::iota(order.begin(), order.end(), 0);
    StableRng pick(mix_seed(cfg.seed, 0xA5A5A5A5ULL));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    const auto n_anomalous = static_cast<std::size_t>(std::llround(cfg.anomaly_rate * cfg.n_subjects));
    std::vector<std::uint8_t> anomalous(order.size(), 0);
    for (std::size_t k = 0; k < n_anomalous; ++k) anomalous[static_cast<std::size_t>(order[k])] = 1;

    std::vector<Volume> out;
    out.reserve(order.size());
    for (int i = 0; i < cfg.n_subjects; ++i) out.push_back(make_subject(cfg, i, anomalous[static_cast<std::size_t>(i)] != 0));
    return out;
}

}  // namespace uad
