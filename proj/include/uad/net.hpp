#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

namespace uad {

enum class BottleneckKind { Dense, Spatial };

/// Architecture of the shared encoder/decoder. The default build takes
/// 128x128 slices; input_size may shrink it (any power of two >= 16) for
/// desk-scale runs, in which case the spatial code is input_size/16 wide.
struct BottleneckSpec {
    BottleneckKind kind = BottleneckKind::Dense;
    int dense_dim = 128;
    int spatial_channels = 128;
    bool variational = false;
    int mixture_components = 0;  // > 0 only for the Gaussian-mixture prior
    int input_size = 128;
    std::array<int, 4> channels{32, 64, 128, 128};

    /// Throws InvalidSpec.
    void validate() const;
    int spatial_size() const { return input_size / 16; }
    /// Flattened size of one code (dense_dim or h*w*c).
    std::int64_t code_numel() const;
    bool operator==(const BottleneckSpec&) const = default;
};

void to_json(nlohmann::json& j, const BottleneckSpec& s);
void from_json(const nlohmann::json& j, BottleneckSpec& s);

/// Posterior or deterministic code. logvar is undefined for plain autoencoders.
struct Encoded {
    torch::Tensor mu;
    torch::Tensor logvar;
    bool variational() const { return logvar.defined(); }
    torch::Tensor sigma() const { return torch::exp(0.5 * logvar); }
};

/// Four 5x5 stride-2 convolutions with leaky rectifiers.
class ConvStackImpl : public torch::nn::Module {
public:
    ConvStackImpl(const std::array<int, 4>& channels);
    torch::Tensor forward(torch::Tensor x);

private:
    torch::nn::Sequential layers_{nullptr};
};
TORCH_MODULE(ConvStack);

/// Encoder, bottleneck and decoder. Images are (n, 1, S, S) in [0, 1].
class UnifiedNetImpl : public torch::nn::Module {
public:
    explicit UnifiedNetImpl(BottleneckSpec spec);

    const BottleneckSpec& spec() const { return spec_; }

    Encoded encode(const torch::Tensor& x);
    torch::Tensor decode(const torch::Tensor& z);
    /// Deterministic reconstruction: decodes the posterior mean.
    torch::Tensor forward(const torch::Tensor& x);

    /// Gaussian-mixture prior parameters (defined only when mixture_components > 0).
    torch::Tensor mixture_means, mixture_logvars, mixture_logits;

    /// Parameters of the encoder/decoder trunk, excluding the variance head and
    /// the mixture prior. Used for the parameter-parity contract.
    std::int64_t trunk_parameter_count() const;

private:
    BottleneckSpec spec_;
    ConvStack encoder_{nullptr};
    torch::nn::Linear fc_mu_{nullptr}, fc_logvar_{nullptr}, fc_up_{nullptr};
    torch::nn::Conv2d conv_mu_{nullptr}, conv_logvar_{nullptr};
    torch::nn::Sequential decoder_{nullptr};
};
TORCH_MODULE(UnifiedNet);

/// Image critic: a replica of the encoder topology with a scalar head.
class CriticImpl : public torch::nn::Module {
public:
    CriticImpl(int input_size, const std::array<int, 4>& channels);
    /// Flattened convolutional features (used for feature matching).
    torch::Tensor features(const torch::Tensor& x);
    /// One value per sample, shape (n,).
    torch::Tensor forward(const torch::Tensor& x);

private:
    ConvStack body_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Critic);

/// Small fully-connected critic on flattened codes.
class LatentCriticImpl : public torch::nn::Module {
public:
    LatentCriticImpl(std::int64_t code_numel, int hidden = 256);
    torch::Tensor forward(const torch::Tensor& z);

private:
    torch::nn::Sequential mlp_{nullptr};
};
TORCH_MODULE(LatentCritic);

/// mu + sigma * eps with eps drawn from a generator seeded by `seed`.
/// Throws NonPositiveSigma unless sigma > 0 everywhere.
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& sigma, std::uint64_t seed);
/// Same, drawing eps from the given generator (training path).
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& sigma, torch::Generator& gen);

/// Seeded CPU generator.
torch::Generator make_generator(std::uint64_t seed);

}  // namespace uad
