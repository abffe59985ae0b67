#include "uad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <spawn.h>
#include <sys/wait.h>

#include "uad/checkpoint.hpp"
#include "uad/error.hpp"
#include "uad/nifti_io.hpp"
#include "uad/rng.hpp"
#include "uad/scoring.hpp"
#include "uad/split.hpp"

extern char** environ;

namespace uad {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& msg) { throw Error(Errc::InvalidConfig, msg); }

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) bad(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            bad("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void get_if(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const Json::exception& e) {
        bad(where + "." + key + ": " + e.what());
    }
}

// ---- JSON for the embedded config types ------------------------------------

std::string_view lesion_mode_name(LesionMode m) { return m == LesionMode::Hyper ? "hyper" : "mixed"; }

PhantomConfig phantom_from(const Json& j) {
    const std::string where = "phantom";
    check_keys(j, {"n_subjects", "anomaly_rate", "lesion_mode", "seed", "shape", "dataset_id", "intensity_gamma"}, where);
    PhantomConfig p;
    get_if(j, "n_subjects", p.n_subjects, where);
    get_if(j, "anomaly_rate", p.anomaly_rate, where);
    get_if(j, "seed", p.seed, where);
    get_if(j, "dataset_id", p.dataset_id, where);
    get_if(j, "intensity_gamma", p.intensity_gamma, where);
    if (j.contains("lesion_mode")) {
        const auto m = j.at("lesion_mode").get<std::string>();
        if (m == "hyper") p.lesion_intensity_mode = LesionMode::Hyper;
        else if (m == "mixed") p.lesion_intensity_mode = LesionMode::Mixed;
        else bad("phantom.lesion_mode must be 'hyper' or 'mixed'");
    }
    if (j.contains("shape")) {
        const auto s = j.at("shape").get<std::vector<int>>();
        if (s.size() != 3) bad("phantom.shape needs three extents");
        p.volume_shape = {s[0], s[1], s[2]};
    }
    try {
        p.validate();
    } catch (const Error& e) {
        bad(std::string("phantom: ") + e.what());
    }
    return p;
}

Json phantom_json(const PhantomConfig& p) {
    return {{"n_subjects", p.n_subjects},
            {"anomaly_rate", p.anomaly_rate},
            {"lesion_mode", std::string(lesion_mode_name(p.lesion_intensity_mode))},
            {"seed", p.seed},
            {"shape", {p.volume_shape.nx, p.volume_shape.ny, p.volume_shape.nz}},
            {"dataset_id", p.dataset_id},
            {"intensity_gamma", p.intensity_gamma}};
}

DataSource source_from(const Json& j, const std::string& where) {
    check_keys(j, {"phantom", "path"}, where);
    DataSource s;
    if (j.contains("phantom")) s.phantom = phantom_from(j.at("phantom"));
    if (j.contains("path")) s.path = fs::path(j.at("path").get<std::string>());
    if (static_cast<bool>(s.phantom) == static_cast<bool>(s.path)) bad(where + " needs exactly one of 'phantom' or 'path'");
    return s;
}

PostprocConfig postproc_from(const Json& j) {
    const std::string where = "postproc";
    check_keys(j, {"erosion_radius", "keep_positive_only", "median_kernel", "min_component_voxels", "connectivity"}, where);
    PostprocConfig p;
    get_if(j, "erosion_radius", p.erosion_radius, where);
    get_if(j, "keep_positive_only", p.keep_positive_only, where);
    get_if(j, "median_kernel", p.median_kernel, where);
    get_if(j, "min_component_voxels", p.min_component_voxels, where);
    get_if(j, "connectivity", p.connectivity, where);
    return p;
}

Json postproc_json(const PostprocConfig& p) {
    return {{"erosion_radius", p.erosion_radius},
            {"keep_positive_only", p.keep_positive_only},
            {"median_kernel", p.median_kernel},
            {"min_component_voxels", p.min_component_voxels},
            {"connectivity", p.connectivity}};
}

ScoringConfig scoring_from(const Json& j) {
    const std::string where = "scoring";
    check_keys(j, {"mc_samples", "restore_iters", "restore_step", "restore_fidelity", "batch_size", "max_subjects"}, where);
    ScoringConfig s;
    get_if(j, "mc_samples", s.mc_samples, where);
    get_if(j, "restore_iters", s.restore_iters, where);
    get_if(j, "restore_step", s.restore_step, where);
    get_if(j, "restore_fidelity", s.restore_fidelity, where);
    get_if(j, "batch_size", s.batch_size, where);
    if (j.contains("max_subjects")) {
        const auto& m = j.at("max_subjects");
        if (!m.is_object()) bad("scoring.max_subjects must map scorer names to counts");
        for (const auto& [name, v] : m.items()) s.max_subjects[parse_scorer(name)] = v.get<int>();
    }
    return s;
}

Json scoring_json(const ScoringConfig& s) {
    Json caps = Json::object();
    for (const auto& [k, v] : s.max_subjects) caps[std::string(to_string(k))] = v;
    return {{"mc_samples", s.mc_samples},
            {"restore_iters", s.restore_iters},
            {"restore_step", s.restore_step},
            {"restore_fidelity", s.restore_fidelity},
            {"batch_size", s.batch_size},
            {"max_subjects", caps}};
}

std::string_view scope_name(PercentileScope s) { return s == PercentileScope::BrainMask ? "brain_mask" : "whole_volume"; }

// ---- data ------------------------------------------------------------------

std::string file_sha256(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::UnreadableFile, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::vector<fs::path> subject_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error(Errc::UnreadableFile, root.string() + " is not a directory");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

/// Identifies the content of a cohort: the generator config for phantoms,
/// the file hashes for data on disk.
const std::string& source_manifest(const DataSource& s) {
    static std::map<std::string, std::string> memo;
    const std::string key = s.describe().dump();
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    Json m;
    if (s.phantom) {
        m = {{"phantom", phantom_json(*s.phantom)}};
    } else {
        Json files = Json::object();
        for (const auto& dir : subject_dirs(*s.path)) {
            std::vector<fs::path> names;
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.is_regular_file()) names.push_back(e.path());
            }
            std::sort(names.begin(), names.end());
            for (const auto& f : names) files[dir.filename().string() + "/" + f.filename().string()] = file_sha256(f);
        }
        m = {{"dataset_id", s.dataset_id()}, {"files", files}};
    }
    return memo[key] = m.dump();
}

using VolumeSet = std::shared_ptr<const std::vector<Volume>>;

/// Normalized volumes of a source, memoized per process.
VolumeSet normalized(const DataSource& s, PercentileScope scope) {
    static std::map<std::string, VolumeSet> memo;
    const std::string key = s.describe().dump() + std::string(scope_name(scope));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    auto out = std::make_shared<std::vector<Volume>>();
    for (const auto& v : s.load()) out->push_back(normalize_volume(v, scope));
    return memo[key] = out;
}

std::map<std::string, const Volume*> by_id(const std::vector<Volume>& vs) {
    std::map<std::string, const Volume*> m;
    for (const auto& v : vs) m[v.subject_id] = &v;
    return m;
}

std::vector<std::string> ids_of(const std::vector<Volume>& vs) {
    std::vector<std::string> ids;
    for (const auto& v : vs) ids.push_back(v.subject_id);
    return ids;
}

SliceBatch slices_of(const std::vector<std::string>& ids, const std::map<std::string, const Volume*>& vols, int size) {
    std::vector<SliceBatch> parts;
    for (const auto& id : ids) parts.push_back(extract_slices(*vols.at(id), size));
    return SliceBatch::concat(parts);
}

DatasetSplit healthy_split(const ExperimentConfig& cfg, const std::vector<Volume>& healthy) {
    return make_split(ids_of(healthy), cfg.train_fraction, cfg.val_fraction, cfg.split_seed);
}

struct TestSplit {
    std::vector<std::string> op;
    std::vector<std::string> test;
};

/// Seeded partition of a test cohort into operating-point and test subjects.
TestSplit test_split(const ExperimentConfig& cfg, std::size_t index, const std::vector<Volume>& vols) {
    const auto order = seeded_shuffle(ids_of(vols), mix_seed(cfg.split_seed, 100 + index));
    const auto n = order.size();
    auto n_op = static_cast<std::size_t>(std::llround(cfg.test_sets[index].op_fraction * static_cast<double>(n)));
    n_op = std::clamp<std::size_t>(n_op, 1, n - 1);
    TestSplit s;
    s.op.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_op));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_op), order.end());
    // Subject order inside each part does not matter; keep it sorted for readable outputs.
    std::sort(s.op.begin(), s.op.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::string format_fraction(double f) {
    std::ostringstream ss;
    ss << std::setprecision(6) << f;
    return ss.str();
}

// ---- scoring and evaluation ------------------------------------------------

struct ScoredSet {
    std::vector<FloatGrid> continuous;
    std::vector<const Volume*> volumes;
    std::vector<float> raw_scores;  // concatenated raw score volumes
    std::vector<std::uint8_t> raw_gt, raw_brain;
    int restored_slices = 0;
    int non_increasing = 0;
};

ScoredSet score_subjects(const ExperimentConfig& cfg, NetModel& model, ScorerKind kind, const std::vector<std::string>& ids,
                         const std::map<std::string, const Volume*>& vols, std::uint64_t stream) {
    ScoringOptions opts;
    opts.kind = kind;
    opts.mc_samples = cfg.scoring.mc_samples;
    opts.dropout_rate = cfg.train.dropout_rate;
    opts.lambda_kl = cfg.train.lambda_kl;
    opts.restore = {cfg.scoring.restore_iters, cfg.scoring.restore_step, cfg.train.lambda_kl, cfg.scoring.restore_fidelity};
    opts.batch_size = cfg.scoring.batch_size;

    ScoredSet out;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Volume& v = *vols.at(ids[k]);
        opts.seed = mix_seed(cfg.seed, stream * 100000 + k);
        std::vector<std::vector<double>> traj;
        const ScoreVolume sv = score_volume(model, v, cfg.slice_size, opts, kind == ScorerKind::Restoration ? &traj : nullptr);
        for (const auto& t : traj) {
            ++out.restored_slices;
            if (t.back() <= t.front()) ++out.non_increasing;
        }
        out.continuous.push_back(run_pipeline(sv.as_residual(), v.brain_mask, cfg.postproc).continuous);
        out.volumes.push_back(&v);
        const auto& s = sv.scores.data();
        out.raw_scores.insert(out.raw_scores.end(), s.begin(), s.end());
        out.raw_brain.insert(out.raw_brain.end(), v.brain_mask.data().begin(), v.brain_mask.data().end());
        if (v.gt_mask) out.raw_gt.insert(out.raw_gt.end(), v.gt_mask->data().begin(), v.gt_mask->data().end());
        else out.raw_gt.insert(out.raw_gt.end(), s.size(), 0);
    }
    return out;
}

std::vector<MaskGrid> gt_grids(const ScoredSet& s) {
    std::vector<MaskGrid> out;
    for (const auto* v : s.volumes) out.push_back(v->gt_mask ? *v->gt_mask : MaskGrid(v->shape(), 0));
    return out;
}

std::vector<ScoredSubject> scored_subjects(const ScoredSet& s, const std::vector<MaskGrid>& gts) {
    std::vector<ScoredSubject> out;
    for (std::size_t i = 0; i < s.continuous.size(); ++i) out.push_back({&s.continuous[i], &gts[i]});
    return out;
}

EvalRecord evaluate_scorer(const ExperimentConfig& cfg, NetModel& model, const CellSpec& cell, ScorerKind kind,
                           std::size_t test_index, int n_train) {
    const auto vols = normalized(cfg.test_sets[test_index].source, cfg.percentile_scope);
    const auto index = by_id(*vols);
    auto split = test_split(cfg, test_index, *vols);
    if (auto cap = cfg.scoring.max_subjects.find(kind); cap != cfg.scoring.max_subjects.end()) {
        const auto n = static_cast<std::size_t>(std::max(cap->second, 1));
        if (split.op.size() > n) split.op.resize(n);
        if (split.test.size() > n) split.test.resize(n);
    }

    const std::uint64_t stream = 2 * test_index;
    const ScoredSet op = score_subjects(cfg, model, kind, split.op, index, stream);
    const ScoredSet test = score_subjects(cfg, model, kind, split.test, index, stream + 1);

    EvalRecord r;
    r.approach = approach_name(cell.method.tag, kind);
    r.method = cell.method.tag;
    r.scorer = kind;
    r.dataset = cfg.test_sets[test_index].source.dataset_id();
    r.fraction = cell.fraction;
    r.n_train_subjects = n_train;
    r.op_subjects = split.op;
    r.test_subjects = split.test;

    // Pixel-wise metrics on the post-processed scores inside the brain.
    std::vector<float> scores;
    std::vector<std::uint8_t> labels;
    const auto test_gt = gt_grids(test);
    for (std::size_t i = 0; i < test.continuous.size(); ++i) {
        const auto& brain = test.volumes[i]->brain_mask.data();
        for (std::size_t k = 0; k < brain.size(); ++k) {
            if (!brain[k]) continue;
            scores.push_back(test.continuous[i][k]);
            labels.push_back(test_gt[i][k] ? 1 : 0);
        }
    }
    const auto pr = prc_and_auprc(scores, labels);
    r.auprc = pr.auprc;
    r.auroc = auroc(scores, labels);
    r.prevalence = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / static_cast<double>(labels.size());

    const auto test_subjects = scored_subjects(test, test_gt);
    r.best_dice = greedy_best_dice(test_subjects, cfg.postproc);
    const auto op_gt = gt_grids(op);
    r.op_threshold = greedy_best_dice(scored_subjects(op, op_gt), cfg.postproc).threshold;
    r.dice = dice_at_op(test_subjects, r.op_threshold, cfg.postproc);

    // Residual magnitudes are taken before post-processing.
    r.residuals = residual_stats(test.raw_scores, test.raw_gt, test.raw_brain);
    r.histograms = residual_histograms(test.raw_scores, test.raw_gt, test.raw_brain);
    if (r.residuals.anomalous) r.chi2 = chi_square_distance(r.histograms.normal, r.histograms.anomalous);
    if (kind == ScorerKind::Restoration) {
        r.restored_slices = test.restored_slices + op.restored_slices;
        r.non_increasing_slices = test.non_increasing + op.non_increasing;
    }
    return r;
}

std::string result_cache_key(const ExperimentConfig& cfg, const CellSpec& cell, const std::string& model_key) {
    Json tests = Json::array();
    for (const auto& t : cfg.test_sets) tests.push_back({{"manifest", source_manifest(t.source)}, {"op_fraction", t.op_fraction}});
    Json scorers = Json::array();
    for (auto s : cell.method.scorers) scorers.push_back(std::string(to_string(s)));
    const Json key{{"model", model_key},
                   {"seed", cfg.seed},
                   {"split_seed", cfg.split_seed},
                   {"fraction", cell.fraction},
                   {"tests", tests},
                   {"scorers", scorers},
                   {"scoring", scoring_json(cfg.scoring)},
                   {"postproc", postproc_json(cfg.postproc)},
                   {"dropout_rate", cfg.train.dropout_rate},
                   {"lambda_kl", cfg.train.lambda_kl}};
    return sha256_hex(key.dump());
}

int env_workers() {
    const char* v = std::getenv("UAD_WORKERS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw Error(Errc::InvalidConfig, "UAD_WORKERS must be a positive integer");
    return static_cast<int>(std::min<long>(n, 64));
}

fs::path cell_path(const fs::path& out, const std::string& id) { return out / "cells" / (id + ".json"); }
fs::path cell_error_path(const fs::path& out, const std::string& id) { return out / "cells" / (id + ".error"); }

[[noreturn]] void rethrow_worker_error(const fs::path& out, const std::string& id, int status) {
    std::ifstream in(cell_error_path(out, id));
    std::string name, msg;
    if (in && std::getline(in, name)) {
        std::getline(in, msg);
        if (auto code = parse_errc(name)) throw Error(*code, "cell " + id + ": " + msg);
    }
    throw Error(Errc::InvalidConfig, "worker for cell " + id + " exited with status " + std::to_string(status));
}

}  // namespace

// ---- public API -------------------------------------------------------------

std::string DataSource::dataset_id() const {
    if (phantom) return phantom->dataset_id;
    if (path) return path->lexically_normal().filename().empty() ? path->lexically_normal().parent_path().filename().string()
                                                                : path->lexically_normal().filename().string();
    return {};
}

std::vector<Volume> DataSource::load() const {
    if (phantom) return generate_phantoms(*phantom);
    if (!path) bad("data source has neither phantom config nor path");
    std::vector<Volume> out;
    for (const auto& dir : subject_dirs(*path)) out.push_back(load_volume(dir));
    if (out.empty()) throw Error(Errc::UnreadableFile, "no subject directories below " + path->string());
    return out;
}

Json DataSource::describe() const {
    if (phantom) return {{"phantom", phantom_json(*phantom)}};
    return {{"path", path ? path->string() : std::string()}};
}

void ExperimentConfig::validate() const {
    if (version != kConfigVersion) bad("unsupported config version " + std::to_string(version));
    if (slice_size < 16 || (slice_size & (slice_size - 1)) != 0) bad("slice_size must be a power of two >= 16");
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction <= 1.0 + 1e-12)) {
        bad("train_fraction and val_fraction must be positive and sum to at most 1");
    }
    if (test_sets.empty()) bad("at least one test set is required");
    std::set<std::string> datasets;
    for (const auto& t : test_sets) {
        if (!(t.op_fraction > 0.0 && t.op_fraction < 1.0)) bad("op_fraction must lie in (0,1)");
        if (!datasets.insert(t.source.dataset_id()).second) bad("duplicate test dataset id " + t.source.dataset_id());
    }
    if (methods.empty()) bad("at least one method is required");
    std::set<MethodTag> seen;
    for (const auto& m : methods) {
        if (!seen.insert(m.tag).second) bad("method " + std::string(to_string(m.tag)) + " listed twice");
        if (m.scorers.empty()) bad("method " + std::string(to_string(m.tag)) + " has no scorers");
        std::set<ScorerKind> kinds;
        for (auto s : m.scorers) {
            if (!admissible(m.tag, s)) {
                throw Error(Errc::Inadmissible, "scorer '" + std::string(to_string(s)) + "' cannot be used with " +
                                                    std::string(to_string(m.tag)));
            }
            if (!kinds.insert(s).second) bad("scorer listed twice for " + std::string(to_string(m.tag)));
        }
    }
    if (fractions.empty()) bad("fractions must not be empty");
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) bad("fractions must lie in (0,1]");
    }
    if (std::set<double>(fractions.begin(), fractions.end()).size() != fractions.size()) bad("duplicate fraction");
    if (scoring.mc_samples < 1) throw Error(Errc::InvalidN, "mc_samples must be at least 1");
    if (scoring.restore_iters < 0 || !(scoring.restore_step >= 0.0)) bad("invalid restoration settings");
    if (scoring.batch_size < 1) bad("scoring.batch_size must be positive");
    for (const auto& [k, v] : scoring.max_subjects) {
        if (v < 1) bad("max_subjects for " + std::string(to_string(k)) + " must be positive");
    }
    train.validate();
    postproc.validate();
    if (postproc.threshold) bad("postproc.threshold is chosen per approach and cannot be fixed");
}

ExperimentConfig parse_config(const Json& j) {
    check_keys(j, {"version", "seed", "split_seed", "output_dir", "slice_size", "percentile_scope", "data", "methods", "train",
                   "postproc", "scoring", "fractions"},
               "config");
    if (!j.contains("version")) bad("config needs a 'version' field");
    ExperimentConfig c;
    get_if(j, "version", c.version, "config");
    get_if(j, "seed", c.seed, "config");
    get_if(j, "split_seed", c.split_seed, "config");
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    get_if(j, "slice_size", c.slice_size, "config");
    if (j.contains("percentile_scope")) {
        const auto s = j.at("percentile_scope").get<std::string>();
        if (s == "brain_mask") c.percentile_scope = PercentileScope::BrainMask;
        else if (s == "whole_volume") c.percentile_scope = PercentileScope::WholeVolume;
        else bad("percentile_scope must be 'brain_mask' or 'whole_volume'");
    }
    if (!j.contains("data")) bad("config needs a 'data' section");
    const auto& d = j.at("data");
    check_keys(d, {"healthy", "train_fraction", "val_fraction", "test_sets"}, "data");
    if (!d.contains("healthy")) bad("data needs a 'healthy' source");
    c.healthy = source_from(d.at("healthy"), "data.healthy");
    get_if(d, "train_fraction", c.train_fraction, "data");
    get_if(d, "val_fraction", c.val_fraction, "data");
    if (d.contains("test_sets")) {
        for (const auto& t : d.at("test_sets")) {
            check_keys(t, {"source", "op_fraction"}, "data.test_sets[]");
            TestSetConfig ts;
            if (!t.contains("source")) bad("test set needs a 'source'");
            ts.source = source_from(t.at("source"), "data.test_sets[].source");
            get_if(t, "op_fraction", ts.op_fraction, "data.test_sets[]");
            c.test_sets.push_back(std::move(ts));
        }
    }
    if (j.contains("methods")) {
        for (const auto& m : j.at("methods")) {
            check_keys(m, {"tag", "scorers"}, "methods[]");
            MethodConfig mc;
            if (!m.contains("tag")) bad("method needs a 'tag'");
            mc.tag = parse_method(m.at("tag").get<std::string>());
            if (m.contains("scorers")) {
                mc.scorers.clear();
                for (const auto& s : m.at("scorers")) mc.scorers.push_back(parse_scorer(s.get<std::string>()));
            }
            c.methods.push_back(std::move(mc));
        }
    }
    if (j.contains("train")) {
        if (j.at("train").contains("seed")) bad("train.seed is not allowed; set the top-level seed");
        try {
            from_json(j.at("train"), c.train);
        } catch (const Json::exception& e) {
            bad(std::string("train: ") + e.what());
        }
    }
    if (j.contains("postproc")) c.postproc = postproc_from(j.at("postproc"));
    if (j.contains("scoring")) c.scoring = scoring_from(j.at("scoring"));
    get_if(j, "fractions", c.fractions, "config");
    c.train.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::UnreadableFile, "cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const Json::exception& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    return parse_config(j);
}

Json to_json(const ExperimentConfig& c) {
    Json tests = Json::array();
    for (const auto& t : c.test_sets) tests.push_back({{"source", t.source.describe()}, {"op_fraction", t.op_fraction}});
    Json methods = Json::array();
    for (const auto& m : c.methods) {
        Json scorers = Json::array();
        for (auto s : m.scorers) scorers.push_back(std::string(to_string(s)));
        methods.push_back({{"tag", std::string(to_string(m.tag))}, {"scorers", scorers}});
    }
    Json train = c.train;
    train.erase("seed");
    return {{"version", c.version},
            {"seed", c.seed},
            {"split_seed", c.split_seed},
            {"output_dir", c.output_dir.string()},
            {"slice_size", c.slice_size},
            {"percentile_scope", std::string(scope_name(c.percentile_scope))},
            {"data",
             {{"healthy", c.healthy.describe()},
              {"train_fraction", c.train_fraction},
              {"val_fraction", c.val_fraction},
              {"test_sets", tests}}},
            {"methods", methods},
            {"train", train},
            {"postproc", postproc_json(c.postproc)},
            {"scoring", scoring_json(c.scoring)},
            {"fractions", c.fractions}};
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::InvalidConfig, "SHA-256 digest failed");
    }
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return ss.str();
}

std::string CellSpec::id() const { return std::string(to_string(method.tag)) + "_f" + format_fraction(fraction); }

std::vector<CellSpec> enumerate_cells(const ExperimentConfig& cfg) {
    std::vector<CellSpec> cells;
    for (const auto& m : cfg.methods) {
        for (double f : cfg.fractions) cells.push_back({m, f});
    }
    return cells;
}

CellSpec find_cell(const ExperimentConfig& cfg, const std::string& id) {
    for (const auto& c : enumerate_cells(cfg)) {
        if (c.id() == id) return c;
    }
    bad("no cell named " + id);
}

std::string model_cache_key(const ExperimentConfig& cfg, const CellSpec& cell) {
    TrainConfig t = cfg.train;
    t.seed = cfg.seed;
    const Json key{{"version", cfg.version},
                   {"method", std::string(to_string(cell.method.tag))},
                   {"spec", spec_for(cell.method.tag, cfg.slice_size, t)},
                   {"train", t},
                   {"healthy", source_manifest(cfg.healthy)},
                   {"percentile_scope", std::string(scope_name(cfg.percentile_scope))},
                   {"split_seed", cfg.split_seed},
                   {"train_fraction", cfg.train_fraction},
                   {"val_fraction", cfg.val_fraction},
                   {"fraction", cell.fraction}};
    return sha256_hex(key.dump());
}

fs::path ensure_model(const ExperimentConfig& cfg, const CellSpec& cell, bool* cache_hit) {
    const auto key = model_cache_key(cfg, cell);
    const auto path = cfg.output_dir / "cache" / "models" / (key + ".ckpt");
    if (fs::exists(path)) {
        if (cache_hit) *cache_hit = true;
        return path;
    }
    if (cache_hit) *cache_hit = false;

    const auto healthy = normalized(cfg.healthy, cfg.percentile_scope);
    const auto index = by_id(*healthy);
    const auto split = subsample_training(healthy_split(cfg, *healthy), cell.fraction);
    const SliceBatch train_slices = slices_of(split.train, index, cfg.slice_size);
    const SliceBatch val_slices = slices_of(split.validation, index, cfg.slice_size);

    TrainConfig t = cfg.train;
    t.seed = cfg.seed;
    std::clog << "[" << cell.id() << "] training on " << split.train.size() << " subjects (" << train_slices.count
              << " slices)\n";
    const TrainedModel model = train(cell.method.tag, train_slices, val_slices, t);
    std::clog << "[" << cell.id() << "] stopped after epoch " << model.stopped_epoch << ", best epoch " << model.best_epoch
              << "\n";

    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    save_checkpoint(tmp, model);
    fs::rename(tmp, path);
    auto hist = path;
    hist.replace_extension(".history.jsonl");
    write_history(hist, model.history);
    return path;
}

CellResult run_cell(const ExperimentConfig& cfg, const CellSpec& cell) {
    CellResult res;
    res.cell_id = cell.id();
    res.model_key = model_cache_key(cfg, cell);
    const auto result_path = cfg.output_dir / "cache" / "results" / (result_cache_key(cfg, cell, res.model_key) + ".json");
    if (fs::exists(result_path)) {
        res.result_cache_hit = true;
        res.model_cache_hit = true;
        res.records = read_cell_file(result_path);
        return res;
    }

    const auto ckpt = ensure_model(cfg, cell, &res.model_cache_hit);
    TrainedModel model = load_checkpoint(ckpt, spec_for(cell.method.tag, cfg.slice_size, cfg.train));
    res.stopped_epoch = model.stopped_epoch;
    NetModel scorer(model);

    const auto healthy = normalized(cfg.healthy, cfg.percentile_scope);
    const int n_train = static_cast<int>(subsample_training(healthy_split(cfg, *healthy), cell.fraction).train.size());
    for (std::size_t ti = 0; ti < cfg.test_sets.size(); ++ti) {
        for (auto kind : cell.method.scorers) {
            std::clog << "[" << cell.id() << "] scoring " << cfg.test_sets[ti].source.dataset_id() << " with "
                      << to_string(kind) << "\n";
            res.records.push_back(evaluate_scorer(cfg, scorer, cell, kind, ti, n_train));
        }
    }
    write_cell_file(result_path, res.cell_id, res.records);
    return res;
}

std::vector<EvalRecord> run_experiment(const ExperimentConfig& cfg, const fs::path& self_exe) {
    cfg.validate();
    const auto out = cfg.output_dir;
    fs::create_directories(out / "cells");
    write_text_atomic(out / "config.json", to_json(cfg).dump(2) + "\n");

    const auto cells = enumerate_cells(cfg);
    std::vector<std::string> pending;
    for (const auto& c : cells) pending.push_back(c.id());
    std::vector<std::string> completed;
    auto mark_done = [&](const std::string& id) {
        completed.push_back(id);
        pending.erase(std::find(pending.begin(), pending.end(), id));
        // Keep config order in the manifest regardless of completion order.
        std::vector<std::string> ordered;
        for (const auto& c : cells) {
            if (std::find(completed.begin(), completed.end(), c.id()) != completed.end()) ordered.push_back(c.id());
        }
        write_manifest(out, ordered, pending);
    };
    write_manifest(out, {}, pending);

    const int workers = self_exe.empty() ? 1 : env_workers();
    if (workers <= 1) {
        for (const auto& c : cells) {
            const auto r = run_cell(cfg, c);
            write_cell_file(cell_path(out, c.id()), c.id(), r.records);
            mark_done(c.id());
        }
    } else {
        // Bounded pool of child processes, one cell each. The parent is the
        // only writer of the manifest.
        const auto config_path = (out / "config.json").string();
        const auto exe = self_exe.string();
        std::map<pid_t, std::string> running;
        std::size_t next = 0;
        std::optional<std::pair<std::string, int>> failure;
        while ((next < cells.size() && !failure) || !running.empty()) {
            while (!failure && next < cells.size() && static_cast<int>(running.size()) < workers) {
                const auto id = cells[next++].id();
                fs::remove(cell_error_path(out, id));
                std::vector<std::string> args{exe, "cell", "--config", config_path, "--cell", id};
                std::vector<char*> argv;
                for (auto& a : args) argv.push_back(a.data());
                argv.push_back(nullptr);
                pid_t pid = 0;
                if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
                    throw Error(Errc::InvalidConfig, "cannot start worker " + exe);
                }
                running[pid] = id;
            }
            int status = 0;
            const pid_t pid = waitpid(-1, &status, 0);
            if (pid < 0) break;
            const auto it = running.find(pid);
            if (it == running.end()) continue;
            const auto id = it->second;
            running.erase(it);
            if (WIFEXITED(status) && WEXITSTATUS(status) == 0 && fs::exists(cell_path(out, id))) {
                mark_done(id);
            } else if (!failure) {
                failure = {id, status};
            }
        }
        if (failure) rethrow_worker_error(out, failure->first, failure->second);
    }
    return read_results(out);
}

void materialize_phantoms(const ExperimentConfig& cfg, const fs::path& dir) {
    std::vector<const DataSource*> sources{&cfg.healthy};
    for (const auto& t : cfg.test_sets) sources.push_back(&t.source);
    for (const auto* s : sources) {
        if (!s->phantom) continue;
        for (const auto& v : s->load()) save_volume(dir / v.dataset_id / v.subject_id, v);
    }
}

}  // namespace uad
