#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uad/methods.hpp"
#include "uad/metrics.hpp"
#include "uad/phantom.hpp"
#include "uad/postproc.hpp"
#include "uad/preprocess.hpp"
#include "uad/results.hpp"
#include "uad/trainer.hpp"

namespace uad {

/// A cohort either generated on the fly from a phantom config or read from a
/// directory of subject folders (see save_volume).
struct DataSource {
    std::optional<PhantomConfig> phantom;
    std::optional<std::filesystem::path> path;

    std::string dataset_id() const;
    /// Raw (un-normalized) volumes sorted by subject id.
    std::vector<Volume> load() const;
    nlohmann::json describe() const;
};

struct TestSetConfig {
    DataSource source;
    /// Share of subjects held out to choose the operating point.
    double op_fraction = 0.25;
};

struct MethodConfig {
    MethodTag tag = MethodTag::AE_dense;
    std::vector<ScorerKind> scorers{ScorerKind::Reconstruction};
};

struct ScoringConfig {
    int mc_samples = 100;
    int restore_iters = 500;
    double restore_step = 5e-3;
    bool restore_fidelity = false;
    int batch_size = 64;
    /// Optional cap on subjects per scorer (applied to both the operating-point
    /// and the test subjects); restoration is two orders of magnitude slower
    /// than a forward pass.
    std::map<ScorerKind, int> max_subjects;
};

struct ExperimentConfig {
    int version = 1;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    std::filesystem::path output_dir = "runs/default";
    int slice_size = 128;
    PercentileScope percentile_scope = PercentileScope::BrainMask;
    DataSource healthy;
    double train_fraction = 0.8;
    double val_fraction = 0.2;
    std::vector<TestSetConfig> test_sets;
    std::vector<MethodConfig> methods;
    TrainConfig train;
    PostprocConfig postproc;
    ScoringConfig scoring;
    std::vector<double> fractions{1.0};

    /// Throws InvalidConfig, or Inadmissible for a scorer the method cannot use.
    void validate() const;
};

inline constexpr int kConfigVersion = 1;

/// Parses a config document. Unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Lowercase hex SHA-256 of a string.
std::string sha256_hex(const std::string& data);

/// One training job: a method at one training-set fraction.
struct CellSpec {
    MethodConfig method;
    double fraction = 1.0;
    std::string id() const;
};

std::vector<CellSpec> enumerate_cells(const ExperimentConfig& cfg);
/// Throws InvalidConfig for an unknown id.
CellSpec find_cell(const ExperimentConfig& cfg, const std::string& id);

struct CellResult {
    std::string cell_id;
    std::string model_key;
    bool model_cache_hit = false;
    bool result_cache_hit = false;
    int stopped_epoch = 0;
    std::vector<EvalRecord> records;
};

/// Content hash of everything that determines the trained weights of a cell.
std::string model_cache_key(const ExperimentConfig& cfg, const CellSpec& cell);

/// Checkpoint of the cell, trained now unless the cache already holds it.
std::filesystem::path ensure_model(const ExperimentConfig& cfg, const CellSpec& cell, bool* cache_hit = nullptr);

/// Trains (or loads the cached checkpoint for) one cell, scores every test
/// set with each configured scorer, post-processes and evaluates.
CellResult run_cell(const ExperimentConfig& cfg, const CellSpec& cell);

/// Runs every cell (in-process, or in UAD_WORKERS child processes when
/// `self_exe` is given and the variable is > 1), writes cell results and a
/// manifest under output_dir, and returns the records in config order.
/// Stops on the first failing cell; completed cells stay in the manifest.
std::vector<EvalRecord> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& self_exe = {});

/// Writes every phantom cohort of the config below `dir` as subject folders.
void materialize_phantoms(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace uad
