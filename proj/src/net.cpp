#include "uad/net.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "uad/error.hpp"

namespace uad {
namespace {

constexpr double kLeak = 0.2;

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

torch::nn::Conv2dOptions down(int in, int out) { return torch::nn::Conv2dOptions(in, out, 5).stride(2).padding(2); }

torch::nn::ConvTranspose2dOptions up(int in, int out) {
    return torch::nn::ConvTranspose2dOptions(in, out, 5).stride(2).padding(2).output_padding(1);
}

}  // namespace

void BottleneckSpec::validate() const {
    if (!power_of_two(input_size) || input_size < 16) {
        throw Error(Errc::InvalidSpec, "input_size must be a power of two >= 16, got " + std::to_string(input_size));
    }
    for (int c : channels)
        if (c < 1) throw Error(Errc::InvalidSpec, "channel widths must be positive");
    if (kind == BottleneckKind::Dense && dense_dim < 1) throw Error(Errc::InvalidSpec, "dense_dim must be positive");
    if (kind == BottleneckKind::Spatial && spatial_channels < 1) {
        throw Error(Errc::InvalidSpec, "spatial_channels must be positive");
    }
    if (mixture_components < 0) throw Error(Errc::InvalidSpec, "mixture_components must be >= 0");
    if (mixture_components > 0 && !variational) {
        throw Error(Errc::InvalidSpec, "a mixture prior needs a variational bottleneck");
    }
}

std::int64_t BottleneckSpec::code_numel() const {
    if (kind == BottleneckKind::Dense) return dense_dim;
    return static_cast<std::int64_t>(spatial_channels) * spatial_size() * spatial_size();
}

void to_json(nlohmann::json& j, const BottleneckSpec& s) {
    j = nlohmann::json{{"kind", s.kind == BottleneckKind::Dense ? "dense" : "spatial"},
                       {"dense_dim", s.dense_dim},
                       {"spatial_channels", s.spatial_channels},
                       {"variational", s.variational},
                       {"mixture_components", s.mixture_components},
                       {"input_size", s.input_size},
                       {"channels", s.channels}};
}

void from_json(const nlohmann::json& j, BottleneckSpec& s) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "dense" && kind != "spatial") throw Error(Errc::InvalidSpec, "unknown bottleneck kind " + kind);
    s.kind = kind == "dense" ? BottleneckKind::Dense : BottleneckKind::Spatial;
    j.at("dense_dim").get_to(s.dense_dim);
    j.at("spatial_channels").get_to(s.spatial_channels);
    j.at("variational").get_to(s.variational);
    j.at("mixture_components").get_to(s.mixture_components);
    j.at("input_size").get_to(s.input_size);
    j.at("channels").get_to(s.channels);
}

ConvStackImpl::ConvStackImpl(const std::array<int, 4>& channels) {
    layers_ = torch::nn::Sequential();
    int in = 1;
    for (int c : channels) {
        layers_->push_back(torch::nn::Conv2d(down(in, c)));
        layers_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kLeak)));
        in = c;
    }
    register_module("layers", layers_);
}

torch::Tensor ConvStackImpl::forward(torch::Tensor x) { return layers_->forward(x); }

UnifiedNetImpl::UnifiedNetImpl(BottleneckSpec spec) : spec_(spec) {
    spec_.validate();
    const auto& ch = spec_.channels;
    const int s = spec_.spatial_size();
    encoder_ = register_module("encoder", ConvStack(ch));

    int decoder_in = ch[3];
    if (spec_.kind == BottleneckKind::Dense) {
        const std::int64_t flat = static_cast<std::int64_t>(ch[3]) * s * s;
        fc_mu_ = register_module("fc_mu", torch::nn::Linear(flat, spec_.dense_dim));
        if (spec_.variational) fc_logvar_ = register_module("fc_logvar", torch::nn::Linear(flat, spec_.dense_dim));
        fc_up_ = register_module("fc_up", torch::nn::Linear(spec_.dense_dim, flat));
    } else {
        // One set of 1x1 kernels replaces flatten/dense/reshape.
        const auto opts = torch::nn::Conv2dOptions(ch[3], spec_.spatial_channels, 1);
        conv_mu_ = register_module("conv_mu", torch::nn::Conv2d(opts));
        if (spec_.variational) conv_logvar_ = register_module("conv_logvar", torch::nn::Conv2d(opts));
        decoder_in = spec_.spatial_channels;
    }

    decoder_ = torch::nn::Sequential();
    const std::array<int, 4> outs{ch[2], ch[1], ch[0], 1};
    int in = decoder_in;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        decoder_->push_back(torch::nn::ConvTranspose2d(up(in, outs[i])));
        if (i + 1 < outs.size()) decoder_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kLeak)));
        in = outs[i];
    }
    decoder_->push_back(torch::nn::Sigmoid());
    register_module("decoder", decoder_);

    if (spec_.mixture_components > 0) {
        const auto k = spec_.mixture_components;
        const auto d = spec_.code_numel();
        // Spread initial means so components are distinguishable from the start.
        mixture_means = register_parameter("mixture_means", torch::randn({k, d}) * 0.5);
        mixture_logvars = register_parameter("mixture_logvars", torch::zeros({k, d}));
        mixture_logits = register_parameter("mixture_logits", torch::zeros({k}));
    }
}

Encoded UnifiedNetImpl::encode(const torch::Tensor& x) {
    const auto h = encoder_->forward(x);
    Encoded out;
    if (spec_.kind == BottleneckKind::Dense) {
        const auto flat = h.flatten(1);
        out.mu = fc_mu_->forward(flat);
        if (spec_.variational) out.logvar = fc_logvar_->forward(flat);
    } else {
        out.mu = conv_mu_->forward(h);
        if (spec_.variational) out.logvar = conv_logvar_->forward(h);
    }
    return out;
}

torch::Tensor UnifiedNetImpl::decode(const torch::Tensor& z) {
    torch::Tensor h = z;
    if (spec_.kind == BottleneckKind::Dense) {
        const int s = spec_.spatial_size();
        h = fc_up_->forward(z).view({z.size(0), spec_.channels[3], s, s});
    }
    return decoder_->forward(h);
}

torch::Tensor UnifiedNetImpl::forward(const torch::Tensor& x) { return decode(encode(x).mu); }

std::int64_t UnifiedNetImpl::trunk_parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : named_parameters()) {
        const auto& key = p.key();
        if (key.rfind("fc_logvar", 0) == 0 || key.rfind("conv_logvar", 0) == 0 || key.rfind("mixture_", 0) == 0) continue;
        n += p.value().numel();
    }
    return n;
}

CriticImpl::CriticImpl(int input_size, const std::array<int, 4>& channels) {
    const int s = input_size / 16;
    body_ = register_module("body", ConvStack(channels));
    head_ = register_module("head", torch::nn::Linear(static_cast<std::int64_t>(channels[3]) * s * s, 1));
}

torch::Tensor CriticImpl::features(const torch::Tensor& x) { return body_->forward(x).flatten(1); }

torch::Tensor CriticImpl::forward(const torch::Tensor& x) { return head_->forward(features(x)).squeeze(1); }

LatentCriticImpl::LatentCriticImpl(std::int64_t code_numel, int hidden) {
    const auto act = torch::nn::LeakyReLUOptions().negative_slope(kLeak);
    mlp_ = register_module("mlp", torch::nn::Sequential(torch::nn::Linear(code_numel, hidden), torch::nn::LeakyReLU(act),
                                                        torch::nn::Linear(hidden, hidden), torch::nn::LeakyReLU(act),
                                                        torch::nn::Linear(hidden, 1)));
}

torch::Tensor LatentCriticImpl::forward(const torch::Tensor& z) { return mlp_->forward(z.flatten(1)).squeeze(1); }

torch::Generator make_generator(std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return gen;
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& sigma, torch::Generator& gen) {
    if (!(sigma > 0).all().item<bool>()) throw Error(Errc::NonPositiveSigma, "sigma must be strictly positive");
    const auto eps = at::randn(mu.sizes(), gen, mu.options());
    return mu + sigma * eps;
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& sigma, std::uint64_t seed) {
    auto gen = make_generator(seed);
    return reparameterize(mu, sigma, gen);
}

}  // namespace uad
