#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace uad {

/// Extent of a 3D grid. x and y span the axial plane, z is the axial index.
struct Shape3 {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    std::size_t slice_size() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    }
    bool contains(int x, int y, int z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Dense 3D array stored x-fastest (the NIfTI voxel order).
template <class T>
class Grid3 {
public:
    Grid3() = default;
    explicit Grid3(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
    Grid3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {}

    const Shape3& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t index(int x, int y, int z) const noexcept {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(shape_.nx) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(shape_.ny) * z);
    }

    T& operator()(int x, int y, int z) noexcept { return data_[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const noexcept { return data_[index(x, y, z)]; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const Grid3&, const Grid3&) = default;

private:
    Shape3 shape_{};
    std::vector<T> data_;
};

using FloatGrid = Grid3<float>;
using MaskGrid = Grid3<std::uint8_t>;

std::size_t count_true(const MaskGrid& mask) noexcept;

/// A scan with its brain mask and optional lesion annotation.
struct Volume {
    FloatGrid intensities;
    MaskGrid brain_mask;
    std::optional<MaskGrid> gt_mask;
    std::string subject_id;
    std::string dataset_id;
    bool normalized = false;

    const Shape3& shape() const noexcept { return intensities.shape(); }

    /// Throws ShapeMismatch / InvalidSpec when the structural invariants are broken.
    void validate() const;
};

struct SliceOrigin {
    std::string subject_id;
    int axial_index = 0;
    friend bool operator==(const SliceOrigin&, const SliceOrigin&) = default;
};

/// A batch of square single-channel slices, row-major (row = y, column = x).
struct SliceBatch {
    int count = 0;
    int size = 128;
    std::vector<float> pixels;
    std::vector<std::uint8_t> masks;
    std::optional<std::vector<std::uint8_t>> gt;
    std::vector<SliceOrigin> provenance;

    std::size_t pixels_per_slice() const noexcept {
        return static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    }

    /// Slices [begin, end) as a new batch.
    SliceBatch range(int begin, int end) const;
    /// Selected slices in the given order.
    SliceBatch select(const std::vector<int>& indices) const;
    /// Concatenates batches of equal slice size.
    static SliceBatch concat(const std::vector<SliceBatch>& parts);
};

}  // namespace uad
