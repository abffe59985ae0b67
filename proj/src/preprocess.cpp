#include "uad/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uad/error.hpp"

namespace uad {

double percentile(std::span<const float> values, double q) {
    if (values.empty()) return 0.0;
    std::vector<float> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

Volume normalize_volume(const Volume& v, PercentileScope scope) {
    if (v.normalized) throw Error(Errc::AlreadyNormalized, "volume " + v.subject_id + " is already normalized");

    std::vector<float> samples;
    if (scope == PercentileScope::BrainMask) {
        samples.reserve(count_true(v.brain_mask));
        for (std::size_t i = 0; i < v.intensities.size(); ++i) {
            if (v.brain_mask[i]) samples.push_back(v.intensities[i]);
        }
    } else {
        samples = v.intensities.data();
    }
    const double p98 = percentile(samples, 98.0);
    if (!(p98 > 0.0)) throw Error(Errc::ZeroPercentile, "98th percentile is not positive for " + v.subject_id);

    Volume out = v;
    for (float& x : out.intensities.data()) {
        x = static_cast<float>(std::min(static_cast<double>(x) / p98, 1.0));
    }
    out.normalized = true;
    return out;
}

std::vector<float> resize_bilinear(std::span<const float> src, int src_w, int src_h, int dst_w, int dst_h) {
    std::vector<float> dst(static_cast<std::size_t>(dst_w) * static_cast<std::size_t>(dst_h));
    if (src_w == dst_w && src_h == dst_h) {
        std::copy(src.begin(), src.end(), dst.begin());
        return dst;
    }
    // Align pixel centres (half-pixel convention).
    const double sx = static_cast<double>(src_w) / dst_w;
    const double sy = static_cast<double>(src_h) / dst_h;
    for (int r = 0; r < dst_h; ++r) {
        const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double wy = fy - y0;
        for (int c = 0; c < dst_w; ++c) {
            const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double wx = fx - x0;
            auto at = [&](int y, int x) { return static_cast<double>(src[static_cast<std::size_t>(y) * src_w + x]); };
            const double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
            const double bottom = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
            dst[static_cast<std::size_t>(r) * dst_w + c] = static_cast<float>(top * (1 - wy) + bottom * wy);
        }
    }
    return dst;
}

std::vector<std::uint8_t> resize_nearest(std::span<const std::uint8_t> src, int src_w, int src_h, int dst_w,
                                         int dst_h) {
    std::vector<std::uint8_t> dst(static_cast<std::size_t>(dst_w) * static_cast<std::size_t>(dst_h));
    for (int r = 0; r < dst_h; ++r) {
        const int y = std::min(static_cast<int>((r + 0.5) * src_h / dst_h), src_h - 1);
        for (int c = 0; c < dst_w; ++c) {
            const int x = std::min(static_cast<int>((c + 0.5) * src_w / dst_w), src_w - 1);
            dst[static_cast<std::size_t>(r) * dst_w + c] = src[static_cast<std::size_t>(y) * src_w + x];
        }
    }
    return dst;
}

namespace {

template <class T>
std::vector<T> axial_plane(const Grid3<T>& g, int z) {
    const auto& s = g.shape();
    const auto begin = g.data().begin() + static_cast<std::ptrdiff_t>(g.index(0, 0, z));
    return std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(s.slice_size()));
}

}  // namespace

SliceBatch extract_slices(const Volume& v, int size) {
    if (!v.normalized) throw Error(Errc::InvalidSpec, "extract_slices requires a normalized volume");
    v.validate();
    const Shape3& s = v.shape();

    SliceBatch batch;
    batch.size = size;
    if (v.gt_mask) batch.gt.emplace();
    for (int z = 0; z < s.nz; ++z) {
        auto mask = axial_plane(v.brain_mask, z);
        if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) continue;

        auto pix = resize_bilinear(axial_plane(v.intensities, z), s.nx, s.ny, size, size);
        auto rmask = resize_nearest(mask, s.nx, s.ny, size, size);
        batch.pixels.insert(batch.pixels.end(), pix.begin(), pix.end());
        batch.masks.insert(batch.masks.end(), rmask.begin(), rmask.end());
        if (v.gt_mask) {
            auto g = resize_nearest(axial_plane(*v.gt_mask, z), s.nx, s.ny, size, size);
            batch.gt->insert(batch.gt->end(), g.begin(), g.end());
        }
        batch.provenance.push_back({v.subject_id, z});
        ++batch.count;
    }
    if (batch.count == 0) throw Error(Errc::EmptyBrain, "no axial slice of " + v.subject_id + " contains brain");
    return batch;
}

FloatGrid reassemble(std::span<const float> slice_values, const SliceBatch& batch, const Shape3& shape) {
    const std::size_t pps = batch.pixels_per_slice();
    if (slice_values.size() != pps * static_cast<std::size_t>(batch.count)) {
        throw Error(Errc::ShapeMismatch, "slice values do not match batch layout");
    }
    FloatGrid out(shape, 0.0f);
    for (int i = 0; i < batch.count; ++i) {
        const int z = batch.provenance[static_cast<std::size_t>(i)].axial_index;
        if (z < 0 || z >= shape.nz) throw Error(Errc::ShapeMismatch, "axial index outside target volume");
        auto plane = resize_bilinear(slice_values.subspan(static_cast<std::size_t>(i) * pps, pps), batch.size,
                                     batch.size, shape.nx, shape.ny);
        std::copy(plane.begin(), plane.end(), out.data().begin() + static_cast<std::ptrdiff_t>(out.index(0, 0, z)));
    }
    return out;
}

}  // namespace uad
