#include "uad/volume.hpp"

#include <algorithm>

#include "uad/error.hpp"

namespace uad {

std::size_t count_true(const MaskGrid& mask) noexcept {
    return static_cast<std::size_t>(
        std::count_if(mask.data().begin(), mask.data().end(), [](std::uint8_t v) { return v != 0; }));
}

void Volume::validate() const {
    if (brain_mask.shape() != intensities.shape()) {
        throw Error(Errc::ShapeMismatch, "brain mask shape differs from intensities for " + subject_id);
    }
    if (gt_mask) {
        if (gt_mask->shape() != intensities.shape()) {
            throw Error(Errc::ShapeMismatch, "gt mask shape differs from intensities for " + subject_id);
        }
        for (std::size_t i = 0; i < gt_mask->size(); ++i) {
            if ((*gt_mask)[i] && !brain_mask[i]) {
                throw Error(Errc::InvalidSpec, "lesion voxel outside brain mask in " + subject_id);
            }
        }
    }
    if (normalized) {
        for (float v : intensities.data()) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw Error(Errc::InvalidSpec, "normalized volume has intensity outside [0,1]");
            }
        }
    }
}

SliceBatch SliceBatch::range(int begin, int end) const {
    std::vector<int> idx;
    for (int i = begin; i < end; ++i) idx.push_back(i);
    return select(idx);
}

SliceBatch SliceBatch::select(const std::vector<int>& indices) const {
    SliceBatch out;
    out.size = size;
    out.count = static_cast<int>(indices.size());
    const std::size_t pps = pixels_per_slice();
    out.pixels.reserve(indices.size() * pps);
    out.masks.reserve(indices.size() * pps);
    if (gt) out.gt.emplace();
    for (int i : indices) {
        const auto off = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * pps);
        out.pixels.insert(out.pixels.end(), pixels.begin() + off, pixels.begin() + off + static_cast<std::ptrdiff_t>(pps));
        out.masks.insert(out.masks.end(), masks.begin() + off, masks.begin() + off + static_cast<std::ptrdiff_t>(pps));
        if (gt) out.gt->insert(out.gt->end(), gt->begin() + off, gt->begin() + off + static_cast<std::ptrdiff_t>(pps));
        out.provenance.push_back(provenance[static_cast<std::size_t>(i)]);
    }
    return out;
}

SliceBatch SliceBatch::concat(const std::vector<SliceBatch>& parts) {
    SliceBatch out;
    if (parts.empty()) return out;
    out.size = parts.front().size;
    const bool with_gt = std::all_of(parts.begin(), parts.end(), [](const SliceBatch& b) { return b.gt.has_value(); });
    if (with_gt) out.gt.emplace();
    for (const auto& p : parts) {
        if (p.size != out.size) throw Error(Errc::ShapeMismatch, "cannot concatenate slice batches of different size");
        out.count += p.count;
        out.pixels.insert(out.pixels.end(), p.pixels.begin(), p.pixels.end());
        out.masks.insert(out.masks.end(), p.masks.begin(), p.masks.end());
        if (with_gt) out.gt->insert(out.gt->end(), p.gt->begin(), p.gt->end());
        out.provenance.insert(out.provenance.end(), p.provenance.begin(), p.provenance.end());
    }
    return out;
}

}  // namespace uad
