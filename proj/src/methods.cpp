#include "uad/methods.hpp"

#include "uad/error.hpp"

namespace uad {

std::string_view to_string(MethodTag tag) {
    switch (tag) {
        case MethodTag::AE_dense: return "AE_dense";
        case MethodTag::AE_spatial: return "AE_spatial";
        case MethodTag::ContextAE: return "ContextAE";
        case MethodTag::ConstrainedAE: return "ConstrainedAE";
        case MethodTag::VAE: return "VAE";
        case MethodTag::ContextVAE: return "ContextVAE";
        case MethodTag::ConstrainedAAE: return "ConstrainedAAE";
        case MethodTag::GMVAE_dense: return "GMVAE_dense";
        case MethodTag::GMVAE_spatial: return "GMVAE_spatial";
        case MethodTag::AnoVAEGAN: return "AnoVAEGAN";
        case MethodTag::fAnoGAN: return "fAnoGAN";
    }
    return "?";
}

std::string_view to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::Reconstruction: return "reconstruction";
        case ScorerKind::MonteCarlo: return "mc";
        case ScorerKind::Gradient: return "gradient";
        case ScorerKind::Restoration: return "restoration";
    }
    return "?";
}

MethodTag parse_method(std::string_view name) {
    for (auto tag : kAllMethods)
        if (to_string(tag) == name) return tag;
    throw Error(Errc::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

ScorerKind parse_scorer(std::string_view name) {
    for (auto k : {ScorerKind::Reconstruction, ScorerKind::MonteCarlo, ScorerKind::Gradient, ScorerKind::Restoration})
        if (to_string(k) == name) return k;
    throw Error(Errc::InvalidConfig, "unknown scorer '" + std::string(name) + "'");
}

MethodTraits traits(MethodTag tag) {
    MethodTraits t;
    switch (tag) {
        case MethodTag::AE_dense: break;
        case MethodTag::AE_spatial: t.spatial = true; break;
        case MethodTag::ContextAE: t.context = true; break;
        case MethodTag::ConstrainedAE: t.constrained = true; break;
        case MethodTag::VAE: t.variational = true; break;
        case MethodTag::ContextVAE:
            t.variational = true;
            t.context = true;
            break;
        case MethodTag::ConstrainedAAE:
            t.constrained = true;
            t.latent_adversarial = true;
            break;
        case MethodTag::GMVAE_dense:
            t.variational = true;
            t.mixture = true;
            break;
        case MethodTag::GMVAE_spatial:
            t.variational = true;
            t.mixture = true;
            t.spatial = true;
            break;
        case MethodTag::AnoVAEGAN:
            t.variational = true;
            t.image_critic = true;
            break;
        case MethodTag::fAnoGAN:
            t.image_critic = true;
            t.two_phase = true;
            break;
    }
    return t;
}

bool has_kl_term(MethodTag tag) { return traits(tag).variational; }

bool admissible(MethodTag tag, ScorerKind scorer) {
    switch (scorer) {
        case ScorerKind::Reconstruction:
        case ScorerKind::MonteCarlo: return true;
        case ScorerKind::Gradient: return has_kl_term(tag);
        case ScorerKind::Restoration: return traits(tag).variational;
    }
    return false;
}

std::string approach_name(MethodTag tag, ScorerKind scorer) {
    return std::string(to_string(tag)) + " (" + std::string(to_string(scorer)) + ")";
}

}  // namespace uad
