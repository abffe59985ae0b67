#include "uad/losses.hpp"

#include <algorithm>
#include <cmath>

#include "uad/error.hpp"
#include "uad/rng.hpp"

namespace uad {
namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw Error(Errc::ShapeMismatch, std::string(what) + ": operand shapes differ");
}

// Zeroes rectangles in one S x S slice in place.
void corrupt_slice(float* px, const std::uint8_t* mask, int size, StableRng& rng, const ContextConfig& cfg) {
    const double scale = size / 128.0;
    const int lo = std::max(1, static_cast<int>(std::lround(cfg.min_side * scale)));
    const int hi = std::max(lo, static_cast<int>(std::lround(cfg.max_side * scale)));
    std::vector<int> brain;
    for (int i = 0; i < size * size; ++i)
        if (mask[i]) brain.push_back(i);
    const auto n = rng.uniform_int(cfg.min_patches, cfg.max_patches);
    for (std::int64_t p = 0; p < n; ++p) {
        const auto w = static_cast<int>(rng.uniform_int(lo, hi));
        const auto h = static_cast<int>(rng.uniform_int(lo, hi));
        int cx = 0, cy = 0;
        if (!brain.empty()) {
            const int c = brain[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(brain.size()) - 1))];
            cx = c % size;
            cy = c / size;
        } else {
            cx = static_cast<int>(rng.uniform_int(0, size - 1));
            cy = static_cast<int>(rng.uniform_int(0, size - 1));
        }
        const int x0 = std::clamp(cx - w / 2, 0, size - w), y0 = std::clamp(cy - h / 2, 0, size - h);
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) px[y * size + x] = 0.0f;
    }
}

void check_context(const ContextConfig& cfg) {
    if (cfg.min_patches < 0 || cfg.max_patches < cfg.min_patches || cfg.min_side < 1 || cfg.max_side < cfg.min_side) {
        throw Error(Errc::InvalidConfig, "invalid context-corruption settings");
    }
}

}  // namespace

torch::Tensor ae_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
    require_same_shape(x, x_hat, "ae_loss");
    return (x - x_hat).abs().mean();
}

torch::Tensor kl_to_standard_normal_per_sample(const torch::Tensor& mu, const torch::Tensor& logvar) {
    require_same_shape(mu, logvar, "kl_to_standard_normal");
    return 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).flatten(1).sum(1);
}

torch::Tensor kl_to_standard_normal(const torch::Tensor& mu, const torch::Tensor& logvar) {
    return kl_to_standard_normal_per_sample(mu, logvar).mean();
}

torch::Tensor vae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                       const torch::Tensor& logvar, double lambda_kl) {
    return ae_loss(x, x_hat) + lambda_kl * kl_to_standard_normal(mu, logvar);
}

torch::Tensor constrained_loss_term(const torch::Tensor& z, const torch::Tensor& z_of_x_hat) {
    require_same_shape(z, z_of_x_hat, "constrained_loss_term");
    return (z - z_of_x_hat).pow(2).mean();
}

SliceBatch context_corrupt(const SliceBatch& batch, std::uint64_t seed, const ContextConfig& cfg) {
    check_context(cfg);
    SliceBatch out = batch;
    StableRng rng(seed);
    const auto pp = batch.pixels_per_slice();
    for (int i = 0; i < batch.count; ++i) {
        const auto off = static_cast<std::size_t>(i) * pp;
        corrupt_slice(out.pixels.data() + off, batch.masks.data() + off, batch.size, rng, cfg);
    }
    return out;
}

torch::Tensor context_corrupt(const torch::Tensor& x, const torch::Tensor& mask, std::uint64_t seed,
                              const ContextConfig& cfg) {
    check_context(cfg);
    require_same_shape(x, mask, "context_corrupt");
    auto out = x.detach().to(torch::kFloat32).contiguous().clone();
    const auto m = mask.to(torch::kUInt8).contiguous();
    const int size = static_cast<int>(x.size(-1));
    StableRng rng(seed);
    float* px = out.data_ptr<float>();
    const std::uint8_t* mk = m.data_ptr<std::uint8_t>();
    const auto pp = static_cast<std::size_t>(size) * size;
    for (std::int64_t i = 0; i < x.size(0); ++i) {
        corrupt_slice(px + static_cast<std::size_t>(i) * pp, mk + static_cast<std::size_t>(i) * pp, size, rng, cfg);
    }
    return out.to(x.dtype());
}

torch::Tensor gradient_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& critic, const torch::Tensor& a,
                               const torch::Tensor& b, torch::Generator& gen) {
    require_same_shape(a, b, "gradient_penalty");
    std::vector<std::int64_t> shape(static_cast<std::size_t>(a.dim()), 1);
    shape[0] = a.size(0);
    const auto alpha = at::rand(shape, gen, a.options());
    auto mix = (alpha * a.detach() + (1 - alpha) * b.detach()).requires_grad_(true);
    const auto out = critic(mix);
    // A critic that ignores its input has zero gradient everywhere.
    if (!out.requires_grad()) return torch::zeros({}, a.options());
    auto grads = torch::autograd::grad({out.sum()}, {mix}, {}, /*retain_graph=*/true, /*create_graph=*/true,
                                       /*allow_unused=*/true);
    if (!grads[0].defined()) return torch::zeros({}, a.options());
    const auto norm = grads[0].flatten(1).norm(2, 1);
    return torch::relu(norm - 1.0).pow(2).mean();
}

AdversarialLosses aae_adversarial_step(const std::function<torch::Tensor(const torch::Tensor&)>& latent_critic,
                                       const torch::Tensor& prior_codes, const torch::Tensor& encoder_codes,
                                       double lambda_gp, torch::Generator& gen) {
    require_same_shape(prior_codes, encoder_codes, "aae_adversarial_step");
    AdversarialLosses out;
    out.critic = latent_critic(encoder_codes.detach()).mean() - latent_critic(prior_codes.detach()).mean() +
                 lambda_gp * gradient_penalty(latent_critic, prior_codes, encoder_codes, gen);
    out.generator = -latent_critic(encoder_codes).mean();
    return out;
}

AdversarialLosses wgan_losses(const std::function<torch::Tensor(const torch::Tensor&)>& critic,
                              const torch::Tensor& real, const torch::Tensor& fake, double lambda_gp,
                              torch::Generator& gen) {
    require_same_shape(real, fake, "wgan_losses");
    AdversarialLosses out;
    out.critic = critic(fake.detach()).mean() - critic(real.detach()).mean() +
                 lambda_gp * gradient_penalty(critic, real, fake, gen);
    out.generator = -critic(fake).mean();
    return out;
}

namespace {

// log pi_k - KL(q || p_k) for every sample and component: (n,K).
torch::Tensor mixture_scores(const torch::Tensor& mu, const torch::Tensor& logvar, const MixturePrior& prior) {
    require_same_shape(mu, logvar, "mixture_kl");
    const auto weights = torch::softmax(prior.logits, 0);
    if (weights.min().item<double>() < 1e-12) throw Error(Errc::DegenerateMixture, "a mixture weight underflowed");
    const auto m = mu.flatten(1).unsqueeze(1);       // (n,1,D)
    const auto lv = logvar.flatten(1).unsqueeze(1);  // (n,1,D)
    const auto pm = prior.means.unsqueeze(0);        // (1,K,D)
    const auto plv = prior.logvars.unsqueeze(0);
    // Closed-form KL between diagonal Gaussians.
    const auto kl_k = 0.5 * (plv - lv + (lv.exp() + (m - pm).pow(2)) / plv.exp() - 1.0).sum(2);
    return torch::log_softmax(prior.logits, 0).unsqueeze(0) - kl_k;
}

}  // namespace

torch::Tensor mixture_kl_per_sample(const torch::Tensor& mu, const torch::Tensor& logvar, const MixturePrior& prior) {
    return -torch::logsumexp(mixture_scores(mu, logvar, prior), 1);
}

MixtureKl mixture_kl(const torch::Tensor& mu, const torch::Tensor& logvar, const MixturePrior& prior) {
    const auto a = mixture_scores(mu, logvar, prior);
    MixtureKl out;
    out.responsibilities = torch::softmax(a, 1);
    const auto mean_resp = out.responsibilities.mean(0);
    const double k = static_cast<double>(prior.logits.size(0));
    const auto uniformity = (mean_resp * (mean_resp * k).clamp_min(1e-30).log()).sum();
    out.kl = (-torch::logsumexp(a, 1)).mean() + uniformity;
    return out;
}

torch::Tensor gmvae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                         const torch::Tensor& logvar, const MixturePrior& prior, double lambda_kl) {
    const auto rec = ae_loss(x, x_hat);
    if (lambda_kl == 0.0) return rec;
    return rec + lambda_kl * mixture_kl(mu, logvar, prior).kl;
}

AnoVaeGanLosses anovaegan_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                               const torch::Tensor& logvar,
                               const std::function<torch::Tensor(const torch::Tensor&)>& critic, double lambda_kl,
                               double lambda_adv, double lambda_gp, torch::Generator& gen) {
    AnoVaeGanLosses out;
    out.vae = vae_loss(x, x_hat, mu, logvar, lambda_kl);
    const auto w = wgan_losses(critic, x, x_hat, lambda_gp, gen);
    out.generator = lambda_adv == 0.0 ? out.vae : out.vae + lambda_adv * w.generator;
    out.critic = w.critic;
    return out;
}

}  // namespace uad
