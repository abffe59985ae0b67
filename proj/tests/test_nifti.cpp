#include <doctest.h>

#include <filesystem>

#include "uad/error.hpp"
#include "uad/nifti_io.hpp"
#include "uad/phantom.hpp"

using namespace uad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("uad_nifti_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("volume write/read round trip is bit-identical") {
    PhantomConfig cfg;
    cfg.n_subjects = 2;
    cfg.anomaly_rate = 0.5;
    cfg.seed = 9;
    cfg.dataset_id = "demo";
    const auto vols = generate_phantoms(cfg);
    const fs::path root = scratch("roundtrip");
    for (const Volume& v : vols) {
        save_volume(root / v.dataset_id / v.subject_id, v);
        const Volume back = load_volume(root / v.dataset_id / v.subject_id);
        CHECK(back.intensities == v.intensities);
        CHECK(back.brain_mask == v.brain_mask);
        REQUIRE(back.gt_mask.has_value());
        CHECK(*back.gt_mask == *v.gt_mask);
        CHECK(back.subject_id == v.subject_id);
        CHECK(back.dataset_id == "demo");
        CHECK(back.normalized == v.normalized);
        // lesion prevalence survives the trip
        CHECK(count_true(*back.gt_mask) == count_true(*v.gt_mask));
    }
    fs::remove_all(root);
}

TEST_CASE("mask with a different shape is rejected") {
    const fs::path dir = scratch("mismatch") / "d" / "s";
    write_nifti(dir / "image.nii.gz", FloatGrid({8, 8, 4}, 1.0f));
    write_nifti(dir / "mask.nii.gz", MaskGrid({8, 8, 5}, 1));
    try {
        load_volume(dir);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ShapeMismatch);
    }
}

TEST_CASE("missing or corrupt files are unreadable") {
    const fs::path dir = scratch("corrupt");
    CHECK_THROWS_AS(load_volume(dir), Error);
    fs::create_directories(dir);
    {
        std::FILE* f = std::fopen((dir / "image.nii.gz").c_str(), "wb");
        std::fputs("not a nifti file", f);
        std::fclose(f);
    }
    try {
        read_nifti_float(dir / "image.nii.gz");
        FAIL("expected UnreadableFile");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnreadableFile);
    }
}

TEST_CASE("writes are byte-stable") {
    const fs::path root = scratch("stable");
    FloatGrid g({5, 6, 7}, 0.0f);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(i) * 0.5f;
    write_nifti(root / "a.nii.gz", g);
    write_nifti(root / "b.nii.gz", g);
    CHECK(fs::file_size(root / "a.nii.gz") == fs::file_size(root / "b.nii.gz"));
    CHECK(read_nifti_float(root / "a.nii.gz") == g);
}
