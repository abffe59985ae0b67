#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "uad/losses.hpp"
#include "uad/methods.hpp"
#include "uad/net.hpp"
#include "uad/volume.hpp"

namespace uad {

struct TrainConfig {
    double learning_rate = 1e-4;
    double lambda_kl = 1.0;
    double dropout_rate = 0.2;  // latent dropout for MC scoring of deterministic models
    int batch_size = 64;
    int patience = 5;
    double eps_improve = 1e-9;
    int max_epochs = 100;
    std::uint64_t seed = 0;

    double lambda_constraint = 1.0;
    double lambda_adv = 1e-2;
    double lambda_gp = 10.0;
    int critic_steps = 5;
    double kappa = 1.0;  // f-AnoGAN feature-matching weight
    int mixture_components = 6;
    int dense_dim = 128;
    ContextConfig context;

    /// Throws InvalidConfig.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::map<std::string, double> components;
};
using History = std::vector<EpochRecord>;

/// Stops once the monitored loss has failed to drop by more than eps for
/// `patience` consecutive epochs.
class EarlyStopping {
public:
    EarlyStopping(int patience, double eps);
    /// Feeds one epoch; returns true when training should stop.
    bool update(double val_loss);
    bool last_improved() const { return last_improved_; }
    int best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    int patience_;
    double eps_;
    double best_;
    int best_epoch_ = 0;
    int epoch_ = 0;
    int stale_ = 0;
    bool last_improved_ = false;
};

struct LoopResult {
    History history;
    int stopped_epoch = 0;
    int best_epoch = 0;
};

/// The epoch loop shared by every model: calls step(epoch) until early
/// stopping fires or max_epochs is reached. on_improve runs after each epoch
/// that sets a new best validation loss.
LoopResult run_epochs(int max_epochs, int patience, double eps, const std::function<EpochRecord(int)>& step,
                      const std::function<void(int)>& on_improve = {});

BottleneckSpec spec_for(MethodTag tag, int input_size, const TrainConfig& cfg);

struct TrainedModel {
    MethodTag tag = MethodTag::AE_dense;
    BottleneckSpec spec;
    TrainConfig config;
    UnifiedNet net{nullptr};
    Critic critic{nullptr};
    LatentCritic latent_critic{nullptr};
    History history;
    History phase1_history;  // f-AnoGAN generator/critic phase
    int stopped_epoch = 0;
    int best_epoch = 0;
};

/// Training tensors: images (n,1,S,S) float and brain masks of the same shape.
struct TensorSet {
    torch::Tensor images;
    torch::Tensor masks;
    std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
};
TensorSet to_tensors(const SliceBatch& batch);

/// Mean l1 reconstruction error (posterior mean decoding) over all pixels.
double validation_l1(UnifiedNet& net, const TensorSet& val, int batch_size);

/// Trains `tag` on healthy slices with early stopping on the validation l1.
/// The returned model holds the parameters of the best validation epoch.
/// Throws NonFiniteLoss, EmptyTrain.
TrainedModel train(MethodTag tag, const SliceBatch& train_slices, const SliceBatch& val_slices, const TrainConfig& cfg);

/// Two-phase f-AnoGAN: WGAN generator/critic first, then the encoder against
/// the frozen pair. Phase order is enforced.
class FAnoGanTrainer {
public:
    FAnoGanTrainer(const BottleneckSpec& spec, const TrainConfig& cfg);
    void train_phase1(const TensorSet& train_set, const TensorSet& val_set);
    /// Throws PhaseOrderViolation unless phase 1 has completed.
    void train_phase2(const TensorSet& train_set, const TensorSet& val_set);
    bool phase1_complete() const { return phase1_done_; }
    TrainedModel& model() { return model_; }

private:
    TrainedModel model_;
    bool phase1_done_ = false;
};

/// Line-delimited JSON training history.
void write_history(const std::filesystem::path& path, const History& history);
History read_history(const std::filesystem::path& path);

/// Encoder-side parameters (convolutions, bottleneck heads, mixture prior) and decoder-side ones.
std::vector<torch::Tensor> encoder_parameters(UnifiedNet& net);
std::vector<torch::Tensor> decoder_parameters(UnifiedNet& net);

}  // namespace uad
