#include "uad/nifti_io.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <memory>
#include <vector>

#include "uad/error.hpp"

namespace uad {
namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

constexpr short kDtUint8 = 2;
constexpr short kDtInt16 = 4;
constexpr short kDtInt32 = 8;
constexpr short kDtFloat32 = 16;
constexpr short kDtFloat64 = 64;

// Byte offsets inside the NIfTI-1 header.
namespace off {
constexpr int sizeof_hdr = 0;
constexpr int dim = 40;
constexpr int datatype = 70;
constexpr int bitpix = 72;
constexpr int pixdim = 76;
constexpr int vox_offset = 108;
constexpr int scl_slope = 112;
constexpr int scl_inter = 116;
constexpr int xyzt_units = 123;
constexpr int descrip = 148;
constexpr int qform_code = 252;
constexpr int sform_code = 254;
constexpr int srow_x = 280;
constexpr int srow_y = 296;
constexpr int srow_z = 312;
constexpr int magic = 344;
}  // namespace off

template <class T>
void put(std::vector<char>& buf, int offset, T value) {
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <class T>
T get(const std::vector<char>& buf, int offset) {
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}

struct GzCloser {
    void operator()(gzFile_s* f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

std::vector<char> make_header(const Shape3& shape, short datatype, short bitpix, const std::string& description) {
    std::vector<char> h(kVoxOffset, 0);
    put<int>(h, off::sizeof_hdr, kHeaderSize);
    const std::array<short, 8> dim{3, static_cast<short>(shape.nx), static_cast<short>(shape.ny),
                                   static_cast<short>(shape.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put<short>(h, off::dim + 2 * i, dim[static_cast<std::size_t>(i)]);
    put<short>(h, off::datatype, datatype);
    put<short>(h, off::bitpix, bitpix);
    for (int i = 0; i < 8; ++i) put<float>(h, off::pixdim + 4 * i, 1.0f);
    put<float>(h, off::vox_offset, static_cast<float>(kVoxOffset));
    put<float>(h, off::scl_slope, 1.0f);
    put<float>(h, off::scl_inter, 0.0f);
    h[off::xyzt_units] = 2;  // millimetres
    std::strncpy(h.data() + off::descrip, description.c_str(), 79);
    put<short>(h, off::qform_code, 0);
    put<short>(h, off::sform_code, 1);
    put<float>(h, off::srow_x, 1.0f);
    put<float>(h, off::srow_y + 4, 1.0f);
    put<float>(h, off::srow_z + 8, 1.0f);
    std::memcpy(h.data() + off::magic, "n+1\0", 4);
    return h;
}

void write_raw(const std::filesystem::path& path, const std::vector<char>& header, const void* data, std::size_t bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Level 6 without a timestamp keeps the output byte-stable across runs.
    GzHandle f(gzopen(path.c_str(), "wb6"));
    if (!f) throw Error(Errc::UnreadableFile, "cannot open " + path.string() + " for writing");
    if (gzwrite(f.get(), header.data(), static_cast<unsigned>(header.size())) != static_cast<int>(header.size()) ||
        (bytes > 0 && gzwrite(f.get(), data, static_cast<unsigned>(bytes)) != static_cast<int>(bytes))) {
        throw Error(Errc::UnreadableFile, "short write to " + path.string());
    }
}

struct RawImage {
    Shape3 shape;
    short datatype = 0;
    float slope = 1.0f;
    float inter = 0.0f;
    std::string description;
    std::vector<char> bytes;
};

RawImage read_raw(const std::filesystem::path& path) {
    GzHandle f(gzopen(path.c_str(), "rb"));
    if (!f) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
    std::vector<char> h(kHeaderSize);
    if (gzread(f.get(), h.data(), kHeaderSize) != kHeaderSize || get<int>(h, off::sizeof_hdr) != kHeaderSize) {
        throw Error(Errc::UnreadableFile, path.string() + " is not a little-endian NIfTI-1 file");
    }
    if (std::memcmp(h.data() + off::magic, "n+1", 3) != 0) {
        throw Error(Errc::UnreadableFile, path.string() + " is not a single-file NIfTI-1 image");
    }
    RawImage img;
    const short ndim = get<short>(h, off::dim);
    if (ndim < 1 || ndim > 7) throw Error(Errc::UnreadableFile, "bad dimension count in " + path.string());
    std::array<int, 3> d{1, 1, 1};
    for (int i = 1; i <= ndim; ++i) {
        const short n = get<short>(h, off::dim + 2 * i);
        if (i <= 3) {
            d[static_cast<std::size_t>(i - 1)] = n;
        } else if (n > 1) {
            throw Error(Errc::UnreadableFile, path.string() + " has more than three non-singleton dimensions");
        }
    }
    img.shape = {d[0], d[1], d[2]};
    img.datatype = get<short>(h, off::datatype);
    img.slope = get<float>(h, off::scl_slope);
    img.inter = get<float>(h, off::scl_inter);
    img.description.assign(h.data() + off::descrip, strnlen(h.data() + off::descrip, 80));

    const auto vox_offset = static_cast<long>(get<float>(h, off::vox_offset));
    if (vox_offset < kHeaderSize) throw Error(Errc::UnreadableFile, "bad vox_offset in " + path.string());
    std::vector<char> skip(static_cast<std::size_t>(vox_offset - kHeaderSize));
    if (!skip.empty() && gzread(f.get(), skip.data(), static_cast<unsigned>(skip.size())) != static_cast<int>(skip.size())) {
        throw Error(Errc::UnreadableFile, "truncated header extension in " + path.string());
    }
    const short bitpix = get<short>(h, off::bitpix);
    const std::size_t nbytes = img.shape.size() * static_cast<std::size_t>(bitpix / 8);
    img.bytes.resize(nbytes);
    if (nbytes > 0 && gzread(f.get(), img.bytes.data(), static_cast<unsigned>(nbytes)) != static_cast<int>(nbytes)) {
        throw Error(Errc::UnreadableFile, "truncated voxel data in " + path.string());
    }
    return img;
}

template <class Src>
std::vector<double> widen(const std::vector<char>& bytes) {
    std::vector<double> out(bytes.size() / sizeof(Src));
    for (std::size_t i = 0; i < out.size(); ++i) {
        Src v;
        std::memcpy(&v, bytes.data() + i * sizeof(Src), sizeof(Src));
        out[i] = static_cast<double>(v);
    }
    return out;
}

std::vector<double> decode(const RawImage& img, const std::filesystem::path& path) {
    switch (img.datatype) {
        case kDtUint8: return widen<std::uint8_t>(img.bytes);
        case kDtInt16: return widen<std::int16_t>(img.bytes);
        case kDtInt32: return widen<std::int32_t>(img.bytes);
        case kDtFloat32: return widen<float>(img.bytes);
        case kDtFloat64: return widen<double>(img.bytes);
        default: throw Error(Errc::UnreadableFile, "unsupported NIfTI datatype in " + path.string());
    }
}

bool scaled(const RawImage& img) { return img.slope != 0.0f && (img.slope != 1.0f || img.inter != 0.0f); }

}  // namespace

void write_nifti(const std::filesystem::path& path, const FloatGrid& grid, const std::string& description) {
    write_raw(path, make_header(grid.shape(), kDtFloat32, 32, description), grid.data().data(),
              grid.size() * sizeof(float));
}

void write_nifti(const std::filesystem::path& path, const MaskGrid& grid, const std::string& description) {
    write_raw(path, make_header(grid.shape(), kDtUint8, 8, description), grid.data().data(), grid.size());
}

FloatGrid read_nifti_float(const std::filesystem::path& path, std::string* description) {
    RawImage img = read_raw(path);
    if (description) *description = img.description;
    FloatGrid grid(img.shape);
    if (img.datatype == kDtFloat32 && !scaled(img)) {
        std::memcpy(grid.data().data(), img.bytes.data(), img.bytes.size());
        return grid;
    }
    const auto values = decode(img, path);
    const bool apply = scaled(img);
    for (std::size_t i = 0; i < values.size(); ++i) {
        grid[i] = static_cast<float>(apply ? values[i] * img.slope + img.inter : values[i]);
    }
    return grid;
}

MaskGrid read_nifti_mask(const std::filesystem::path& path) {
    RawImage img = read_raw(path);
    const auto values = decode(img, path);
    MaskGrid grid(img.shape);
    for (std::size_t i = 0; i < values.size(); ++i) grid[i] = values[i] != 0.0 ? 1 : 0;
    return grid;
}

void save_volume(const std::filesystem::path& subject_dir, const Volume& v) {
    v.validate();
    write_nifti(subject_dir / "image.nii.gz", v.intensities, v.normalized ? "uad:normalized=1" : "uad:normalized=0");
    write_nifti(subject_dir / "mask.nii.gz", v.brain_mask);
    if (v.gt_mask) {
        write_nifti(subject_dir / "gt.nii.gz", *v.gt_mask);
    } else {
        std::filesystem::remove(subject_dir / "gt.nii.gz");
    }
}

Volume load_volume(const std::filesystem::path& subject_dir) {
    namespace fs = std::filesystem;
    const fs::path image = subject_dir / "image.nii.gz";
    const fs::path mask = subject_dir / "mask.nii.gz";
    if (!fs::exists(image) || !fs::exists(mask)) {
        throw Error(Errc::UnreadableFile, "missing image or mask in " + subject_dir.string());
    }
    Volume v;
    std::string description;
    v.intensities = read_nifti_float(image, &description);
    v.normalized = description.find("uad:normalized=1") != std::string::npos;
    v.brain_mask = read_nifti_mask(mask);
    if (v.brain_mask.shape() != v.intensities.shape()) {
        throw Error(Errc::ShapeMismatch, "mask shape differs from image in " + subject_dir.string());
    }
    if (fs::exists(subject_dir / "gt.nii.gz")) {
        v.gt_mask = read_nifti_mask(subject_dir / "gt.nii.gz");
        if (v.gt_mask->shape() != v.intensities.shape()) {
            throw Error(Errc::ShapeMismatch, "gt shape differs from image in " + subject_dir.string());
        }
    }
    fs::path dir = subject_dir;
    if (!dir.has_filename()) dir = dir.parent_path();
    v.subject_id = dir.filename().string();
    v.dataset_id = dir.parent_path().filename().string();
    return v;
}

}  // namespace uad
