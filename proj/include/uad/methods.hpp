#pragma once

#include <array>
#include <string>
#include <string_view>

namespace uad {

enum class MethodTag {
    AE_dense,
    AE_spatial,
    ContextAE,
    ConstrainedAE,
    VAE,
    ContextVAE,
    ConstrainedAAE,
    GMVAE_dense,
    GMVAE_spatial,
    AnoVAEGAN,
    fAnoGAN,
};

inline constexpr std::array<MethodTag, 11> kAllMethods{
    MethodTag::AE_dense,   MethodTag::AE_spatial,     MethodTag::ContextAE,   MethodTag::ConstrainedAE,
    MethodTag::VAE,        MethodTag::ContextVAE,     MethodTag::ConstrainedAAE, MethodTag::GMVAE_dense,
    MethodTag::GMVAE_spatial, MethodTag::AnoVAEGAN, MethodTag::fAnoGAN};

enum class ScorerKind { Reconstruction, MonteCarlo, Gradient, Restoration };

std::string_view to_string(MethodTag tag);
std::string_view to_string(ScorerKind kind);
/// Throw InvalidConfig on unknown names.
MethodTag parse_method(std::string_view name);
ScorerKind parse_scorer(std::string_view name);

/// Traits that determine the bottleneck and loss assembly.
struct MethodTraits {
    bool spatial = false;
    bool variational = false;
    bool mixture = false;
    bool context = false;
    bool constrained = false;
    bool latent_adversarial = false;
    bool image_critic = false;
    bool two_phase = false;  // f-AnoGAN
};

MethodTraits traits(MethodTag tag);

/// True when the objective contains a KL term to the prior.
bool has_kl_term(MethodTag tag);

/// Gradient saliency needs a KL term; restoration needs a variational model.
bool admissible(MethodTag tag, ScorerKind scorer);

/// Display name used in report rows, e.g. "VAE (restoration)".
std::string approach_name(MethodTag tag, ScorerKind scorer);

}  // namespace uad
