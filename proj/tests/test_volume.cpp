#include <doctest.h>

#include <algorithm>
#include <random>

#include "uad/error.hpp"
#include "uad/preprocess.hpp"

using namespace uad;

namespace {

Volume ramp_volume() {
    // 101 in-mask voxels valued 0..100 followed by a bright out-of-mask block.
    Volume v;
    const Shape3 s{11, 11, 2};
    v.intensities = FloatGrid(s, 0.0f);
    v.brain_mask = MaskGrid(s, 0);
    for (int i = 0; i < 101; ++i) {
        v.intensities[static_cast<std::size_t>(i)] = static_cast<float>(i);
        v.brain_mask[static_cast<std::size_t>(i)] = 1;
    }
    for (std::size_t i = 121; i < s.size(); ++i) v.intensities[i] = 5000.0f;
    v.subject_id = "ramp";
    return v;
}

Volume box_volume(Shape3 s, int z_lo, int z_hi, std::uint64_t seed) {
    Volume v;
    v.intensities = FloatGrid(s, 0.0f);
    v.brain_mask = MaskGrid(s, 0);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int z = z_lo; z <= z_hi; ++z)
        for (int y = 2; y < s.ny - 2; ++y)
            for (int x = 3; x < s.nx - 3; ++x) {
                v.brain_mask(x, y, z) = 1;
                v.intensities(x, y, z) = u(gen);
            }
    v.subject_id = "box";
    v.normalized = true;
    return v;
}

}  // namespace

TEST_CASE("percentile uses linear interpolation") {
    std::vector<float> vals;
    for (int i = 0; i <= 100; ++i) vals.push_back(static_cast<float>(100 - i));
    CHECK(percentile(vals, 98.0) == doctest::Approx(98.0));
    // numpy.percentile([1, 2, 3, 4], 98) == 3.94
    CHECK(percentile(std::vector<float>{4, 1, 3, 2}, 98.0) == doctest::Approx(3.94));
}

TEST_CASE("normalize_volume divides by the in-mask 98th percentile") {
    const Volume out = normalize_volume(ramp_volume());
    CHECK(out.normalized);
    CHECK(out.intensities[49] == doctest::Approx(0.5));
    CHECK(out.intensities[100] == 1.0f);  // 100 / 98 clipped
    CHECK(out.intensities[130] == 1.0f);  // out-of-mask value also clipped
    CHECK(out.brain_mask == ramp_volume().brain_mask);
    for (float x : out.intensities.data()) CHECK((x >= 0.0f && x <= 1.0f));
}

TEST_CASE("whole-volume percentile scope is available") {
    const Volume out = normalize_volume(ramp_volume(), PercentileScope::WholeVolume);
    // 121 zeros/ramp values and many 5000s: p98 is 5000.
    CHECK(out.intensities[100] == doctest::Approx(100.0 / 5000.0));
}

TEST_CASE("constant volume maps to one, zero volume is rejected") {
    Volume v = ramp_volume();
    std::fill(v.intensities.data().begin(), v.intensities.data().end(), 7.5f);
    const Volume out = normalize_volume(v);
    for (std::size_t i = 0; i < out.intensities.size(); ++i) {
        if (out.brain_mask[i]) CHECK(out.intensities[i] == 1.0f);
    }
    std::fill(v.intensities.data().begin(), v.intensities.data().end(), 0.0f);
    try {
        normalize_volume(v);
        FAIL("expected ZeroPercentile");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ZeroPercentile);
    }
}

TEST_CASE("normalizing twice is an error") {
    const Volume once = normalize_volume(ramp_volume());
    try {
        normalize_volume(once);
        FAIL("expected AlreadyNormalized");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::AlreadyNormalized);
    }
}

TEST_CASE("extract_slices keeps only slices with brain, in axial order") {
    const Volume v = box_volume({128, 128, 32}, 10, 20, 1);
    const SliceBatch b = extract_slices(v, 128);
    REQUIRE(b.count == 11);
    for (int i = 0; i < b.count; ++i) {
        CHECK(b.provenance[static_cast<std::size_t>(i)].axial_index == 10 + i);
        CHECK(b.provenance[static_cast<std::size_t>(i)].subject_id == "box");
    }
    // 128x128 in-plane: pixels pass through bit-identically.
    for (int i = 0; i < b.count; ++i) {
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x) {
                const auto p = static_cast<std::size_t>(i) * 128 * 128 + static_cast<std::size_t>(y) * 128 + x;
                REQUIRE(b.pixels[p] == v.intensities(x, y, 10 + i));
                REQUIRE(b.masks[p] == v.brain_mask(x, y, 10 + i));
            }
    }
}

TEST_CASE("extract_slices rejects an empty brain") {
    Volume v = box_volume({16, 16, 4}, 1, 2, 2);
    std::fill(v.brain_mask.data().begin(), v.brain_mask.data().end(), 0);
    try {
        extract_slices(v, 16);
        FAIL("expected EmptyBrain");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyBrain);
    }
}

TEST_CASE("reassembling slices reproduces the in-mask region when no resize occurs") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Volume v = box_volume({24, 24, 9}, static_cast<int>(seed % 3), 7, seed);
        const SliceBatch b = extract_slices(v, 24);
        const FloatGrid back = reassemble(b.pixels, b, v.shape());
        for (std::size_t i = 0; i < back.size(); ++i) {
            if (v.brain_mask[i]) REQUIRE(back[i] == v.intensities[i]);
        }
    }
}

TEST_CASE("resizing preserves constants and mask labels") {
    std::vector<float> flat(40 * 30, 0.25f);
    for (float x : resize_bilinear(flat, 40, 30, 128, 128)) CHECK(x == doctest::Approx(0.25f));
    std::vector<std::uint8_t> m(40 * 30, 0);
    m[15 * 40 + 20] = 1;
    const auto rm = resize_nearest(m, 40, 30, 128, 128);
    for (auto x : rm) CHECK((x == 0 || x == 1));
    CHECK(std::count(rm.begin(), rm.end(), std::uint8_t{1}) > 0);
}

TEST_CASE("volume validation catches lesion voxels outside the brain") {
    Volume v = box_volume({16, 16, 4}, 1, 2, 3);
    v.gt_mask = MaskGrid(v.shape(), 0);
    (*v.gt_mask)(0, 0, 0) = 1;
    CHECK_THROWS_AS(v.validate(), Error);
    v.gt_mask = MaskGrid({8, 8, 8}, 0);
    CHECK_THROWS_AS(v.validate(), Error);
}
