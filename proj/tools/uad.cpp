// Command-line front end: synth, train, score, evaluate, run, report.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <torch/torch.h>

#include "uad/checkpoint.hpp"
#include "uad/error.hpp"
#include "uad/experiment.hpp"
#include "uad/nifti_io.hpp"
#include "uad/phantom.hpp"
#include "uad/report.hpp"
#include "uad/scoring.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

/// Exit status for a failure category; 1 is reserved for unexpected errors and
/// 2 for usage errors.
int exit_code(uad::Errc code) { return 10 + static_cast<int>(code); }

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

uad::ExperimentConfig load(const Globals& g) {
    if (g.config.empty()) throw uad::Error(uad::Errc::InvalidConfig, "--config is required");
    auto cfg = uad::load_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (!g.out.empty()) cfg.output_dir = g.out;
    return cfg;
}

struct Subject {
    fs::path dir;
    uad::Volume volume;
};

/// A single subject folder or a dataset folder of subject folders.
std::vector<Subject> load_subjects(const fs::path& input) {
    if (fs::exists(input / "image.nii.gz")) return {{input, uad::load_volume(input)}};
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(input)) {
        if (e.is_directory() && fs::exists(e.path() / "image.nii.gz")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<Subject> out;
    for (const auto& d : dirs) out.push_back({d, uad::load_volume(d)});
    if (out.empty()) throw uad::Error(uad::Errc::UnreadableFile, "no subjects below " + input.string());
    return out;
}

/// Score files carry the scorer as a suffix, e.g. scores_mc.nii.gz.
fs::path score_file(const fs::path& dir, const std::string& stem, uad::ScorerKind kind) {
    return dir / (stem + "_" + std::string(uad::to_string(kind)) + ".nii.gz");
}

uad::PostprocConfig postproc_of(const Globals& g) { return g.config.empty() ? uad::PostprocConfig{} : load(g).postproc; }

Json mean_std(const uad::MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised anomaly segmentation benchmark on volumetric phantoms"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Experiment config (JSON)");
    app.add_option("--seed", g.seed, "Overrides the config seed");
    app.add_option("--out", g.out, "Output directory");

    auto* synth = app.add_subcommand("synth", "Write phantom cohorts as subject folders");
    uad::PhantomConfig pc;
    std::string lesion_mode = "hyper";
    std::vector<int> shape{64, 64, 32};
    synth->add_option("--subjects", pc.n_subjects, "Cohort size when no config is given");
    synth->add_option("--anomaly-rate", pc.anomaly_rate, "Share of subjects with lesions");
    synth->add_option("--lesion-mode", lesion_mode, "hyper or mixed")->check(CLI::IsMember({"hyper", "mixed"}));
    synth->add_option("--dataset-id", pc.dataset_id, "Dataset name");
    synth->add_option("--shape", shape, "Volume extents")->expected(3);
    synth->add_option("--gamma", pc.intensity_gamma, "Tissue contrast gamma");

    auto* train_cmd = app.add_subcommand("train", "Train (or fetch from the cache) the models of the config");
    std::string method_filter;
    std::optional<double> fraction_filter;
    train_cmd->add_option("--method", method_filter, "Only this method");
    train_cmd->add_option("--fraction", fraction_filter, "Only this training fraction");

    auto* score_cmd = app.add_subcommand("score", "Score subjects with a checkpoint");
    std::string ckpt, input, scorer_name = "reconstruction";
    uad::ScoringOptions sopts;
    score_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    score_cmd->add_option("--input", input, "Subject folder or dataset folder")->required();
    score_cmd->add_option("--scorer", scorer_name, "reconstruction, mc, gradient or restoration");
    score_cmd->add_option("--mc-samples", sopts.mc_samples, "Monte-Carlo samples");
    score_cmd->add_option("--restore-iters", sopts.restore.n_iters, "Restoration iterations");
    score_cmd->add_option("--restore-step", sopts.restore.step_size, "Restoration step size");

    auto* eval_cmd = app.add_subcommand("evaluate", "Metrics of scores written by 'score'");
    std::string scores_dir, data_dir;
    std::optional<double> threshold;
    std::string eval_scorer = "reconstruction";
    eval_cmd->add_option("--data", data_dir, "Dataset folder with annotations")->required();
    eval_cmd->add_option("--scores", scores_dir, "Folder holding the score volumes; defaults to --data");
    eval_cmd->add_option("--scorer", eval_scorer, "Which score volumes to read");
    eval_cmd->add_option("--threshold", threshold, "Operating point; defaults to the best DICE threshold");

    auto* run_cmd = app.add_subcommand("run", "Run the full matrix of the config and write the report");
    auto* report_cmd = app.add_subcommand("report", "Write tables and plots for a results folder");

    auto* cell_cmd = app.add_subcommand("cell", "Run one cell (worker process)");
    cell_cmd->group("");
    std::string cell_id;
    cell_cmd->add_option("--cell", cell_id)->required();

    // Global flags may follow the subcommand.
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*synth) {
            const fs::path out = g.out.empty() ? fs::path("data") : fs::path(g.out);
            if (!g.config.empty()) {
                auto cfg = load(g);
                uad::materialize_phantoms(cfg, out);
            } else {
                if (g.seed) pc.seed = *g.seed;
                pc.lesion_intensity_mode = lesion_mode == "hyper" ? uad::LesionMode::Hyper : uad::LesionMode::Mixed;
                pc.volume_shape = {shape[0], shape[1], shape[2]};
                pc.validate();
                for (const auto& v : uad::generate_phantoms(pc)) uad::save_volume(out / v.dataset_id / v.subject_id, v);
            }
            std::cout << out.string() << "\n";
        } else if (*train_cmd) {
            const auto cfg = load(g);
            for (const auto& cell : uad::enumerate_cells(cfg)) {
                if (!method_filter.empty() && uad::to_string(cell.method.tag) != method_filter) continue;
                if (fraction_filter && cell.fraction != *fraction_filter) continue;
                bool hit = false;
                const auto path = uad::ensure_model(cfg, cell, &hit);
                std::cout << cell.id() << " " << path.string() << (hit ? " cached" : " trained") << "\n";
            }
        } else if (*score_cmd) {
            uad::TrainedModel model = uad::load_checkpoint(ckpt);
            uad::NetModel net(model);
            sopts.kind = uad::parse_scorer(scorer_name);
            if (!uad::admissible(model.tag, sopts.kind)) {
                throw uad::Error(uad::Errc::Inadmissible, scorer_name + " cannot be used with " + std::string(uad::to_string(model.tag)));
            }
            sopts.dropout_rate = model.config.dropout_rate;
            sopts.lambda_kl = model.config.lambda_kl;
            sopts.restore.lambda_kl = model.config.lambda_kl;
            if (g.seed) sopts.seed = *g.seed;
            const auto pp = postproc_of(g);
            const bool single = fs::exists(fs::path(input) / "image.nii.gz");
            for (const auto& subj : load_subjects(input)) {
                const auto v = uad::normalize_volume(subj.volume);
                const auto sv = uad::score_volume(net, v, model.spec.input_size, sopts);
                fs::path dir = subj.dir;
                if (!g.out.empty()) dir = single ? fs::path(g.out) : fs::path(g.out) / subj.dir.filename();
                fs::create_directories(dir);
                uad::write_nifti(score_file(dir, "scores", sopts.kind), sv.scores);
                if (sv.signed_residual) uad::write_nifti(score_file(dir, "signed", sopts.kind), *sv.signed_residual);
                uad::write_nifti(score_file(dir, "continuous", sopts.kind),
                                 uad::run_pipeline(sv.as_residual(), v.brain_mask, pp).continuous);
                std::cout << dir.string() << "\n";
            }
        } else if (*eval_cmd) {
            const auto pp = postproc_of(g);
            std::vector<uad::FloatGrid> continuous;
            std::vector<uad::MaskGrid> gts;
            std::vector<float> raw, scores;
            std::vector<std::uint8_t> raw_gt, raw_brain, labels;
            const auto kind = uad::parse_scorer(eval_scorer);
            const bool single = fs::exists(fs::path(data_dir) / "image.nii.gz");
            for (const auto& subj : load_subjects(data_dir)) {
                const auto& v = subj.volume;
                fs::path dir = subj.dir;
                if (!scores_dir.empty()) dir = single ? fs::path(scores_dir) : fs::path(scores_dir) / subj.dir.filename();
                const auto c = uad::read_nifti_float(score_file(dir, "continuous", kind));
                const auto s = uad::read_nifti_float(score_file(dir, "scores", kind));
                if (c.shape() != v.shape() || s.shape() != v.shape()) throw uad::Error(uad::Errc::ShapeMismatch, v.subject_id);
                const auto gt = v.gt_mask ? *v.gt_mask : uad::MaskGrid(v.shape(), 0);
                for (std::size_t k = 0; k < c.size(); ++k) {
                    if (!v.brain_mask[k]) continue;
                    scores.push_back(c[k]);
                    labels.push_back(gt[k] ? 1 : 0);
                }
                raw.insert(raw.end(), s.data().begin(), s.data().end());
                raw_gt.insert(raw_gt.end(), gt.data().begin(), gt.data().end());
                raw_brain.insert(raw_brain.end(), v.brain_mask.data().begin(), v.brain_mask.data().end());
                continuous.push_back(c);
                gts.push_back(gt);
            }
            std::vector<uad::ScoredSubject> subjects;
            for (std::size_t i = 0; i < continuous.size(); ++i) subjects.push_back({&continuous[i], &gts[i]});
            const auto best = uad::greedy_best_dice(subjects, pp);
            const double t = threshold.value_or(best.threshold);
            const auto dice = uad::dice_at_op(subjects, t, pp);
            const auto stats = uad::residual_stats(raw, raw_gt, raw_brain);
            Json j{{"auroc", uad::auroc(scores, labels)},
                   {"auprc", uad::prc_and_auprc(scores, labels).auprc},
                   {"best_dice", best.dice},
                   {"best_threshold", best.threshold},
                   {"threshold", t},
                   {"dice", mean_std(dice.summary)},
                   {"re_normal", mean_std(stats.normal)},
                   {"re_anomalous", stats.anomalous ? mean_std(*stats.anomalous) : Json(nullptr)}};
            const auto text = j.dump(2) + "\n";
            if (!g.out.empty()) uad::write_text_atomic(fs::path(g.out) / "metrics.json", text);
            std::cout << text;
        } else if (*run_cmd) {
            const auto cfg = load(g);
            uad::run_experiment(cfg, fs::read_symlink("/proc/self/exe"));
            for (const auto& p : uad::emit_report(cfg.output_dir)) std::cout << p.string() << "\n";
        } else if (*report_cmd) {
            fs::path dir = g.out;
            if (dir.empty()) dir = load(g).output_dir;
            for (const auto& p : uad::emit_report(dir)) std::cout << p.string() << "\n";
        } else if (*cell_cmd) {
            torch::set_num_threads(1);
            const auto cfg = load(g);
            const auto error_path = cfg.output_dir / "cells" / (cell_id + ".error");
            try {
                const auto res = uad::run_cell(cfg, uad::find_cell(cfg, cell_id));
                uad::write_cell_file(cfg.output_dir / "cells" / (cell_id + ".json"), cell_id, res.records);
            } catch (const uad::Error& e) {
                uad::write_text_atomic(error_path, std::string(uad::to_string(e.code())) + "\n" + e.what() + "\n");
                throw;
            }
        }
    } catch (const uad::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
