#pragma once

#include <cstdint>
#include <functional>

#include <torch/torch.h>

#include "uad/volume.hpp"

namespace uad {

/// Mean absolute deviation over every element. Throws ShapeMismatch.
torch::Tensor ae_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

/// 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2) over code elements, averaged over the batch.
torch::Tensor kl_to_standard_normal(const torch::Tensor& mu, const torch::Tensor& logvar);
/// Per-sample version of the above, shape (n,).
torch::Tensor kl_to_standard_normal_per_sample(const torch::Tensor& mu, const torch::Tensor& logvar);

torch::Tensor vae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                       const torch::Tensor& logvar, double lambda_kl);

/// Mean squared deviation between the code of x and the code of its reconstruction.
torch::Tensor constrained_loss_term(const torch::Tensor& z, const torch::Tensor& z_of_x_hat);

struct ContextConfig {
    int min_patches = 1;
    int max_patches = 3;
    /// Patch side range at 128 px; scaled linearly for other slice sizes.
    int min_side = 16;
    int max_side = 32;
};

/// Zeroes 1-3 rectangles per slice, centred on a random brain pixel so the
/// patch covers tissue where possible. Deterministic under seed.
SliceBatch context_corrupt(const SliceBatch& batch, std::uint64_t seed, const ContextConfig& cfg = {});
/// Tensor variant used by the trainer: x is (n,1,S,S), mask matches.
torch::Tensor context_corrupt(const torch::Tensor& x, const torch::Tensor& mask, std::uint64_t seed,
                              const ContextConfig& cfg = {});

/// One-sided gradient penalty mean(max(0, |grad c(x)| - 1)^2) on random
/// interpolates between a and b. Zero for a constant critic.
torch::Tensor gradient_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& critic, const torch::Tensor& a,
                               const torch::Tensor& b, torch::Generator& gen);

struct AdversarialLosses {
    torch::Tensor critic;     // minimized by the critic
    torch::Tensor generator;  // minimized by the encoder / decoder
};

/// Wasserstein game on codes: the critic scores prior samples high and encoder
/// codes low; the encoder regularizer pushes its codes toward high critic values.
AdversarialLosses aae_adversarial_step(const std::function<torch::Tensor(const torch::Tensor&)>& latent_critic,
                                       const torch::Tensor& prior_codes, const torch::Tensor& encoder_codes,
                                       double lambda_gp, torch::Generator& gen);

/// critic = mean c(fake) - mean c(real) + lambda_gp * penalty; generator = -mean c(fake).
AdversarialLosses wgan_losses(const std::function<torch::Tensor(const torch::Tensor&)>& critic,
                              const torch::Tensor& real, const torch::Tensor& fake, double lambda_gp,
                              torch::Generator& gen);

/// Learned Gaussian-mixture prior over flattened codes.
struct MixturePrior {
    torch::Tensor means;    // (K, D)
    torch::Tensor logvars;  // (K, D)
    torch::Tensor logits;   // (K,)
};

struct MixtureKl {
    torch::Tensor kl;                // scalar, batch mean
    torch::Tensor responsibilities;  // (n, K)
};

/// KL(q || mixture) approximated by -log sum_k pi_k exp(-KL(q || p_k)) (>= 0
/// and exact for one component) plus KL(mean responsibility || uniform).
/// Throws DegenerateMixture if a component weight underflows.
MixtureKl mixture_kl(const torch::Tensor& mu, const torch::Tensor& logvar, const MixturePrior& prior);
/// The per-sample part only (no uniformity term), shape (n,).
torch::Tensor mixture_kl_per_sample(const torch::Tensor& mu, const torch::Tensor& logvar, const MixturePrior& prior);

torch::Tensor gmvae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                         const torch::Tensor& logvar, const MixturePrior& prior, double lambda_kl);

struct AnoVaeGanLosses {
    torch::Tensor vae;        // reconstruction + KL
    torch::Tensor generator;  // vae + lambda_adv * (-mean c(x_hat))
    torch::Tensor critic;     // Wasserstein critic loss on (x, x_hat)
};

AnoVaeGanLosses anovaegan_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mu,
                               const torch::Tensor& logvar,
                               const std::function<torch::Tensor(const torch::Tensor&)>& critic, double lambda_kl,
                               double lambda_adv, double lambda_gp, torch::Generator& gen);

}  // namespace uad
