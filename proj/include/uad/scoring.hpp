#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "uad/methods.hpp"
#include "uad/net.hpp"
#include "uad/postproc.hpp"
#include "uad/trainer.hpp"
#include "uad/volume.hpp"

namespace uad {

/// What the scorers need from a model. TrainedModel is adapted by NetModel;
/// tests plug in stubs.
class ScoringModel {
public:
    virtual ~ScoringModel() = default;
    virtual Encoded encode(const torch::Tensor& x) = 0;
    virtual torch::Tensor decode(const torch::Tensor& z) = 0;
    virtual bool variational() const = 0;
    /// KL of each posterior to the prior, shape (n,). Variational models only.
    virtual torch::Tensor kl_per_sample(const Encoded& enc) = 0;
};

class NetModel : public ScoringModel {
public:
    explicit NetModel(TrainedModel& model) : model_(model) {}
    Encoded encode(const torch::Tensor& x) override { return model_.net->encode(x); }
    torch::Tensor decode(const torch::Tensor& z) override { return model_.net->decode(z); }
    bool variational() const override { return model_.spec.variational; }
    torch::Tensor kl_per_sample(const Encoded& enc) override;

private:
    TrainedModel& model_;
};

/// Per-slice residuals (n,1,S,S). `signed_residual` is x - x_hat where it is
/// meaningful and undefined otherwise (gradient saliency).
struct SliceResiduals {
    torch::Tensor scores;
    torch::Tensor signed_residual;
};

/// |x - Dec(Enc(x))| using the posterior mean for variational models.
SliceResiduals reconstruction_residual(ScoringModel& model, const torch::Tensor& x);

/// (1/N) sum |x - x_hat_n|. Variational models draw N posterior samples;
/// deterministic ones apply latent dropout with rate p_r. The signed residual
/// is x minus the mean reconstruction. Throws InvalidN for N < 1.
SliceResiduals mc_residual(ScoringModel& model, const torch::Tensor& x, int n_samples, double p_r, std::uint64_t seed);

/// |d(l1(x, x_hat) + lambda_kl * KL) / dx| per slice, one backward pass.
/// Throws NoKLTerm for non-variational models.
torch::Tensor gradient_saliency(ScoringModel& model, const torch::Tensor& x, double lambda_kl);

struct RestoreOptions {
    int n_iters = 500;
    double step_size = 5e-3;
    double lambda_kl = 1.0;
    /// Adds l1(y, x) to the objective, anchoring the restoration to the input.
    bool fidelity = false;
};

struct Restoration {
    torch::Tensor restored;
    SliceResiduals residuals;  // signed = x - y
    /// Objective per slice at iterations 0..n_iters.
    std::vector<std::vector<double>> trajectory;
};

/// Adam on the image: y0 = x, minimize l1(y, Dec(Enc(y))) + lambda_kl * KL(q(z|y) || p)
/// per slice, clip y to [0,1] after every step. Throws DivergedRestoration,
/// NoKLTerm (non-variational model).
Restoration restore(ScoringModel& model, const torch::Tensor& x, const RestoreOptions& opts);

/// Continuous anomaly scores reassembled into a volume.
struct ScoreVolume {
    FloatGrid scores;
    std::optional<FloatGrid> signed_residual;
    std::string source_subject;
    ScorerKind method = ScorerKind::Reconstruction;
    std::optional<int> n_samples;
    std::optional<int> n_iters;

    ResidualVolume as_residual() const { return {scores, signed_residual}; }
};

struct ScoringOptions {
    ScorerKind kind = ScorerKind::Reconstruction;
    int mc_samples = 100;
    double dropout_rate = 0.2;
    double lambda_kl = 1.0;
    RestoreOptions restore;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

/// Scores every slice of a normalized volume and reassembles the result.
/// Slices without brain stay zero. `trajectories` (optional) receives the
/// restoration objective per slice.
ScoreVolume score_volume(ScoringModel& model, const Volume& v, int slice_size, const ScoringOptions& opts,
                         std::vector<std::vector<double>>* trajectories = nullptr);

}  // namespace uad
