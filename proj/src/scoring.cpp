#include "uad/scoring.hpp"

#include <cmath>

#include "uad/error.hpp"
#include "uad/losses.hpp"
#include "uad/preprocess.hpp"
#include "uad/rng.hpp"

namespace uad {
namespace {

void require_variational(ScoringModel& model, const char* what) {
    if (!model.variational()) throw Error(Errc::NoKLTerm, std::string(what) + " needs a variational model");
}

// Per-slice objective l1(target, Dec(Enc(y))) + lambda * KL, shape (n,).
torch::Tensor elbo_objective(ScoringModel& model, const torch::Tensor& y, const torch::Tensor& target, double lambda_kl) {
    const Encoded enc = model.encode(y);
    const auto x_hat = model.decode(enc.mu);
    auto obj = (target - x_hat).abs().flatten(1).mean(1);
    if (lambda_kl != 0.0) obj = obj + lambda_kl * model.kl_per_sample(enc);
    return obj;
}

std::vector<float> to_vector(const torch::Tensor& t) {
    const auto c = t.detach().to(torch::kFloat32).contiguous();
    return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

}  // namespace

torch::Tensor NetModel::kl_per_sample(const Encoded& enc) {
    if (!enc.variational()) throw Error(Errc::NoKLTerm, "model has no KL term");
    if (model_.spec.mixture_components > 0) {
        return mixture_kl_per_sample(enc.mu, enc.logvar,
                                     {model_.net->mixture_means, model_.net->mixture_logvars, model_.net->mixture_logits});
    }
    return kl_to_standard_normal_per_sample(enc.mu, enc.logvar);
}

SliceResiduals reconstruction_residual(ScoringModel& model, const torch::Tensor& x) {
    torch::NoGradGuard guard;
    const auto x_hat = model.decode(model.encode(x).mu);
    if (x_hat.sizes() != x.sizes()) throw Error(Errc::ShapeMismatch, "reconstruction shape differs from input");
    SliceResiduals out;
    out.signed_residual = x - x_hat;
    out.scores = out.signed_residual.abs();
    return out;
}

SliceResiduals mc_residual(ScoringModel& model, const torch::Tensor& x, int n_samples, double p_r, std::uint64_t seed) {
    if (n_samples < 1) throw Error(Errc::InvalidN, "need at least one Monte-Carlo sample");
    if (!(p_r >= 0.0 && p_r < 1.0)) throw Error(Errc::InvalidConfig, "dropout rate must lie in [0,1)");
    torch::NoGradGuard guard;
    auto gen = make_generator(seed);
    const Encoded enc = model.encode(x);
    auto abs_sum = torch::zeros_like(x);
    auto rec_sum = torch::zeros_like(x);
    for (int n = 0; n < n_samples; ++n) {
        torch::Tensor z;
        if (model.variational()) {
            z = reparameterize(enc.mu, enc.sigma(), gen);
        } else if (p_r > 0.0) {
            const auto keep = (at::rand(enc.mu.sizes(), gen, enc.mu.options()) >= p_r).to(enc.mu.dtype());
            z = enc.mu * keep / (1.0 - p_r);
        } else {
            z = enc.mu;
        }
        const auto x_hat = model.decode(z);
        abs_sum += (x - x_hat).abs();
        rec_sum += x_hat;
    }
    SliceResiduals out;
    out.scores = abs_sum / n_samples;
    out.signed_residual = x - rec_sum / n_samples;
    return out;
}

torch::Tensor gradient_saliency(ScoringModel& model, const torch::Tensor& x, double lambda_kl) {
    require_variational(model, "gradient saliency");
    auto input = x.detach().clone().requires_grad_(true);
    const auto obj = elbo_objective(model, input, input, lambda_kl).sum();
    const auto grads = torch::autograd::grad({obj}, {input});
    return grads[0].abs().detach();
}

Restoration restore(ScoringModel& model, const torch::Tensor& x, const RestoreOptions& opts) {
    require_variational(model, "restoration");
    if (opts.n_iters < 0 || !(opts.step_size >= 0.0)) throw Error(Errc::InvalidConfig, "invalid restoration options");
    const auto n = x.size(0);
    Restoration out;
    out.trajectory.assign(static_cast<std::size_t>(n), {});
    auto y = x.detach().clone().requires_grad_(true);
    const auto anchor = x.detach();

    auto objective = [&](const torch::Tensor& img) {
        auto obj = elbo_objective(model, img, img, opts.lambda_kl);
        if (opts.fidelity) obj = obj + (img - anchor).abs().flatten(1).mean(1);
        return obj;
    };
    auto record = [&](const torch::Tensor& obj) {
        const auto v = obj.detach().to(torch::kFloat64).contiguous();
        const double* p = v.data_ptr<double>();
        for (std::int64_t i = 0; i < n; ++i) {
            if (!std::isfinite(p[i])) throw Error(Errc::DivergedRestoration, "objective became non-finite");
            out.trajectory[static_cast<std::size_t>(i)].push_back(p[i]);
        }
    };

    if (opts.n_iters > 0 && opts.step_size > 0.0) {
        torch::optim::Adam opt({y}, torch::optim::AdamOptions(opts.step_size));
        for (int t = 0; t < opts.n_iters; ++t) {
            const auto obj = objective(y);
            record(obj);
            // Input gradient only; parameter gradients are never formed.
            y.mutable_grad() = torch::autograd::grad({obj.sum()}, {y})[0];
            opt.step();
            torch::NoGradGuard guard;
            y.clamp_(0.0, 1.0);
        }
        torch::NoGradGuard guard;
        record(objective(y));
    } else {
        // Nothing moves: every recorded objective equals the initial one.
        torch::NoGradGuard guard;
        const auto obj = objective(y);
        for (int t = 0; t <= opts.n_iters; ++t) record(obj);
    }
    out.restored = y.detach();
    out.residuals.signed_residual = anchor - out.restored;
    out.residuals.scores = out.residuals.signed_residual.abs();
    return out;
}

ScoreVolume score_volume(ScoringModel& model, const Volume& v, int slice_size, const ScoringOptions& opts,
                         std::vector<std::vector<double>>* trajectories) {
    const SliceBatch batch = extract_slices(v, slice_size);
    const std::int64_t s = slice_size;
    const auto images = torch::from_blob(const_cast<float*>(batch.pixels.data()), {batch.count, 1, s, s}, torch::kFloat32);
    std::vector<torch::Tensor> scores, signed_parts;
    for (std::int64_t start = 0; start < batch.count; start += opts.batch_size) {
        const auto len = std::min<std::int64_t>(opts.batch_size, batch.count - start);
        const auto x = images.narrow(0, start, len).clone();
        SliceResiduals r;
        switch (opts.kind) {
            case ScorerKind::Reconstruction: r = reconstruction_residual(model, x); break;
            case ScorerKind::MonteCarlo:
                r = mc_residual(model, x, opts.mc_samples, opts.dropout_rate, mix_seed(opts.seed, static_cast<std::uint64_t>(start)));
                break;
            case ScorerKind::Gradient: r.scores = gradient_saliency(model, x, opts.lambda_kl); break;
            case ScorerKind::Restoration: {
                auto res = restore(model, x, opts.restore);
                r = res.residuals;
                if (trajectories) {
                    for (auto& tr : res.trajectory) trajectories->push_back(std::move(tr));
                }
                break;
            }
        }
        scores.push_back(r.scores);
        if (r.signed_residual.defined()) signed_parts.push_back(r.signed_residual);
    }
    ScoreVolume out;
    out.source_subject = v.subject_id;
    out.method = opts.kind;
    out.scores = reassemble(to_vector(torch::cat(scores)), batch, v.shape());
    if (!signed_parts.empty()) out.signed_residual = reassemble(to_vector(torch::cat(signed_parts)), batch, v.shape());
    if (opts.kind == ScorerKind::MonteCarlo) out.n_samples = opts.mc_samples;
    if (opts.kind == ScorerKind::Restoration) out.n_iters = opts.restore.n_iters;
    return out;
}

}  // namespace uad
