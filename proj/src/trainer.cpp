#include "uad/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "uad/error.hpp"
#include "uad/rng.hpp"

namespace uad {
namespace {

using Json = nlohmann::json;

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
    std::vector<torch::Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.detach().clone());
    return out;
}

void restore(const std::vector<torch::Tensor>& params, const std::vector<torch::Tensor>& saved) {
    torch::NoGradGuard guard;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].copy_(saved[i]);
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, int epoch) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    StableRng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    return idx;
}

double checked(const torch::Tensor& loss, int epoch, int batch) {
    const double v = loss.item<double>();
    if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteLoss,
                    "loss became " + std::to_string(v) + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
    }
    return v;
}

/// Running means of named loss components over one epoch.
struct Tally {
    std::map<std::string, double> sums;
    int batches = 0;
    void add(const std::string& key, double v) { sums[key] += v; }
    std::map<std::string, double> means() const {
        std::map<std::string, double> out;
        for (const auto& [k, v] : sums) out[k] = batches ? v / batches : 0.0;
        return out;
    }
};

template <typename F>
void for_each_batch(const TensorSet& data, int batch_size, std::uint64_t seed, int epoch, F&& body) {
    const auto order = epoch_order(data.size(), seed, epoch);
    const auto perm = torch::tensor(order, torch::kLong);
    int b = 0;
    for (std::int64_t start = 0; start < data.size(); start += batch_size, ++b) {
        const auto len = std::min<std::int64_t>(batch_size, data.size() - start);
        const auto idx = perm.narrow(0, start, len);
        body(data.images.index_select(0, idx), data.masks.index_select(0, idx), b);
    }
}

torch::optim::AdamOptions adversarial_adam(double lr) { return torch::optim::AdamOptions(lr).betas({0.5, 0.9}); }

std::vector<torch::Tensor> select_parameters(UnifiedNet& net, bool encoder_side) {
    std::vector<torch::Tensor> out;
    for (const auto& p : net->named_parameters()) {
        const auto& k = p.key();
        const bool dec = k.rfind("decoder", 0) == 0 || k.rfind("fc_up", 0) == 0;
        if (dec != encoder_side) out.push_back(p.value());
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::InvalidConfig, m); };
    if (!(learning_rate >= 0.0)) bad("learning_rate must be >= 0");
    if (!(lambda_kl >= 0.0)) bad("lambda_kl must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout_rate must lie in [0,1)");
    if (batch_size < 1) bad("batch_size must be positive");
    if (patience < 1) bad("patience must be positive");
    if (!(eps_improve >= 0.0)) bad("eps_improve must be >= 0");
    if (max_epochs < 1) bad("max_epochs must be positive");
    if (critic_steps < 1) bad("critic_steps must be positive");
    if (mixture_components < 2) bad("mixture_components must be >= 2");
    if (dense_dim < 1) bad("dense_dim must be positive");
    if (context.min_patches < 0 || context.max_patches < context.min_patches || context.min_side < 1 ||
        context.max_side < context.min_side) {
        bad("invalid context settings");
    }
}

void to_json(Json& j, const TrainConfig& c) {
    j = Json{{"learning_rate", c.learning_rate},
             {"lambda_kl", c.lambda_kl},
             {"dropout_rate", c.dropout_rate},
             {"batch_size", c.batch_size},
             {"patience", c.patience},
             {"eps_improve", c.eps_improve},
             {"max_epochs", c.max_epochs},
             {"seed", c.seed},
             {"lambda_constraint", c.lambda_constraint},
             {"lambda_adv", c.lambda_adv},
             {"lambda_gp", c.lambda_gp},
             {"critic_steps", c.critic_steps},
             {"kappa", c.kappa},
             {"mixture_components", c.mixture_components},
             {"dense_dim", c.dense_dim},
             {"context",
              {{"min_patches", c.context.min_patches},
               {"max_patches", c.context.max_patches},
               {"min_side", c.context.min_side},
               {"max_side", c.context.max_side}}}};
}

void from_json(const Json& j, TrainConfig& c) {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "train config must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "learning_rate") v.get_to(c.learning_rate);
        else if (key == "lambda_kl") v.get_to(c.lambda_kl);
        else if (key == "dropout_rate") v.get_to(c.dropout_rate);
        else if (key == "batch_size") v.get_to(c.batch_size);
        else if (key == "patience") v.get_to(c.patience);
        else if (key == "eps_improve") v.get_to(c.eps_improve);
        else if (key == "max_epochs") v.get_to(c.max_epochs);
        else if (key == "seed") v.get_to(c.seed);
        else if (key == "lambda_constraint") v.get_to(c.lambda_constraint);
        else if (key == "lambda_adv") v.get_to(c.lambda_adv);
        else if (key == "lambda_gp") v.get_to(c.lambda_gp);
        else if (key == "critic_steps") v.get_to(c.critic_steps);
        else if (key == "kappa") v.get_to(c.kappa);
        else if (key == "mixture_components") v.get_to(c.mixture_components);
        else if (key == "dense_dim") v.get_to(c.dense_dim);
        else if (key == "context") {
            for (const auto& [ck, cv] : v.items()) {
                if (ck == "min_patches") cv.get_to(c.context.min_patches);
                else if (ck == "max_patches") cv.get_to(c.context.max_patches);
                else if (ck == "min_side") cv.get_to(c.context.min_side);
                else if (ck == "max_side") cv.get_to(c.context.max_side);
                else throw Error(Errc::InvalidConfig, "unknown key train.context." + ck);
            }
        } else {
            throw Error(Errc::InvalidConfig, "unknown key train." + key);
        }
    }
}

EarlyStopping::EarlyStopping(int patience, double eps)
    : patience_(patience), eps_(eps), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::update(double val_loss) {
    ++epoch_;
    last_improved_ = val_loss < best_ - eps_;
    if (last_improved_) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        stale_ = 0;
    } else {
        ++stale_;
    }
    return stale_ >= patience_;
}

LoopResult run_epochs(int max_epochs, int patience, double eps, const std::function<EpochRecord(int)>& step,
                      const std::function<void(int)>& on_improve) {
    EarlyStopping stopper(patience, eps);
    LoopResult out;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        EpochRecord rec = step(epoch);
        rec.epoch = epoch;
        out.history.push_back(rec);
        out.stopped_epoch = epoch;
        const bool stop = stopper.update(rec.val_loss);
        if (stopper.last_improved() && on_improve) on_improve(epoch);
        if (stop) break;
    }
    out.best_epoch = stopper.best_epoch();
    return out;
}

BottleneckSpec spec_for(MethodTag tag, int input_size, const TrainConfig& cfg) {
    const auto t = traits(tag);
    BottleneckSpec s;
    s.kind = t.spatial ? BottleneckKind::Spatial : BottleneckKind::Dense;
    s.dense_dim = cfg.dense_dim;
    s.variational = t.variational;
    s.mixture_components = t.mixture ? cfg.mixture_components : 0;
    s.input_size = input_size;
    s.validate();
    return s;
}

std::vector<torch::Tensor> encoder_parameters(UnifiedNet& net) { return select_parameters(net, true); }
std::vector<torch::Tensor> decoder_parameters(UnifiedNet& net) { return select_parameters(net, false); }

TensorSet to_tensors(const SliceBatch& batch) {
    TensorSet out;
    const std::int64_t n = batch.count, s = batch.size;
    out.images = torch::from_blob(const_cast<float*>(batch.pixels.data()), {n, 1, s, s}, torch::kFloat32).clone();
    out.masks = torch::from_blob(const_cast<std::uint8_t*>(batch.masks.data()), {n, 1, s, s}, torch::kUInt8).clone();
    return out;
}

double validation_l1(UnifiedNet& net, const TensorSet& val, int batch_size) {
    torch::NoGradGuard guard;
    net->eval();
    double sum = 0.0;
    double count = 0.0;
    for (std::int64_t start = 0; start < val.size(); start += batch_size) {
        const auto len = std::min<std::int64_t>(batch_size, val.size() - start);
        const auto x = val.images.narrow(0, start, len);
        sum += (x - net->forward(x)).abs().to(torch::kFloat64).sum().item<double>();
        count += static_cast<double>(x.numel());
    }
    return sum / count;
}

TrainedModel train(MethodTag tag, const SliceBatch& train_slices, const SliceBatch& val_slices, const TrainConfig& cfg) {
    cfg.validate();
    if (train_slices.count == 0) throw Error(Errc::EmptyTrain, "no training slices");
    if (val_slices.count == 0) throw Error(Errc::InvalidConfig, "validation set is empty");
    if (val_slices.gt) {
        for (auto v : *val_slices.gt)
            if (v) throw Error(Errc::InvalidConfig, "validation slices must be healthy");
    }
    if (val_slices.size != train_slices.size) throw Error(Errc::ShapeMismatch, "train/validation slice sizes differ");

    const TensorSet tr = to_tensors(train_slices), va = to_tensors(val_slices);
    const BottleneckSpec spec = spec_for(tag, train_slices.size, cfg);
    const auto t = traits(tag);

    if (t.two_phase) {
        FAnoGanTrainer trainer(spec, cfg);
        trainer.train_phase1(tr, va);
        trainer.train_phase2(tr, va);
        return std::move(trainer.model());
    }

    torch::manual_seed(cfg.seed);
    TrainedModel model;
    model.tag = tag;
    model.spec = spec;
    model.config = cfg;
    model.net = UnifiedNet(spec);
    if (t.latent_adversarial) model.latent_critic = LatentCritic(spec.code_numel());
    if (t.image_critic) model.critic = Critic(spec.input_size, spec.channels);

    torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
    std::unique_ptr<torch::optim::Adam> critic_opt;
    std::function<torch::Tensor(const torch::Tensor&)> critic_fn;
    if (t.latent_adversarial) {
        critic_opt = std::make_unique<torch::optim::Adam>(model.latent_critic->parameters(), adversarial_adam(cfg.learning_rate));
        critic_fn = [&](const torch::Tensor& z) { return model.latent_critic->forward(z); };
    } else if (t.image_critic) {
        critic_opt = std::make_unique<torch::optim::Adam>(model.critic->parameters(), adversarial_adam(cfg.learning_rate));
        critic_fn = [&](const torch::Tensor& x) { return model.critic->forward(x); };
    }
    auto gen = make_generator(mix_seed(cfg.seed, 1));
    const auto params = model.net->parameters();
    auto best = snapshot(params);

    auto step = [&](int epoch) {
        model.net->train();
        Tally tally;
        for_each_batch(tr, cfg.batch_size, cfg.seed, epoch, [&](const torch::Tensor& x, const torch::Tensor& mask, int b) {
            const auto input =
                t.context ? context_corrupt(x, mask, mix_seed(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) + b), cfg.context) : x;
            const Encoded enc = model.net->encode(input);
            const auto z = t.variational ? reparameterize(enc.mu, enc.sigma(), gen) : enc.mu;
            const auto x_hat = model.net->decode(z);
            const auto rec = ae_loss(x, x_hat);
            auto total = rec;
            tally.add("reconstruction", rec.item<double>());
            if (t.variational) {
                const auto kl = t.mixture ? mixture_kl(enc.mu, enc.logvar,
                                                       {model.net->mixture_means, model.net->mixture_logvars,
                                                        model.net->mixture_logits})
                                                .kl
                                          : kl_to_standard_normal(enc.mu, enc.logvar);
                total = total + cfg.lambda_kl * kl;
                tally.add("kl", kl.item<double>());
            }
            if (t.constrained) {
                const auto c = constrained_loss_term(enc.mu, model.net->encode(x_hat).mu);
                total = total + cfg.lambda_constraint * c;
                tally.add("constraint", c.item<double>());
            }
            if (critic_opt) {
                double critic_loss = 0.0;
                for (int k = 0; k < cfg.critic_steps; ++k) {
                    AdversarialLosses adv;
                    if (t.latent_adversarial) {
                        const auto prior = at::randn(enc.mu.sizes(), gen, enc.mu.options());
                        adv = aae_adversarial_step(critic_fn, prior, enc.mu.detach(), cfg.lambda_gp, gen);
                    } else {
                        adv = wgan_losses(critic_fn, x, x_hat.detach(), cfg.lambda_gp, gen);
                    }
                    critic_opt->zero_grad();
                    adv.critic.backward();
                    critic_opt->step();
                    critic_loss = checked(adv.critic, epoch, b);
                }
                tally.add("critic", critic_loss);
                const auto g = t.latent_adversarial ? -critic_fn(enc.mu).mean() : -critic_fn(x_hat).mean();
                total = total + cfg.lambda_adv * g;
                tally.add("adversarial", g.item<double>());
            }
            const double v = checked(total, epoch, b);
            opt.zero_grad();
            total.backward();
            opt.step();
            tally.add("total", v);
            ++tally.batches;
        });
        EpochRecord rec;
        rec.components = tally.means();
        rec.train_loss = rec.components["total"];
        rec.val_loss = validation_l1(model.net, va, cfg.batch_size);
        if (!std::isfinite(rec.val_loss)) throw Error(Errc::NonFiniteLoss, "validation loss non-finite at epoch " + std::to_string(epoch));
        return rec;
    };

    auto result = run_epochs(cfg.max_epochs, cfg.patience, cfg.eps_improve, step, [&](int) { best = snapshot(params); });
    restore(params, best);
    model.net->eval();
    model.history = std::move(result.history);
    model.stopped_epoch = result.stopped_epoch;
    model.best_epoch = result.best_epoch;
    return model;
}

FAnoGanTrainer::FAnoGanTrainer(const BottleneckSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    if (spec.variational || spec.kind != BottleneckKind::Dense) {
        throw Error(Errc::InvalidSpec, "f-AnoGAN uses a deterministic dense code");
    }
    torch::manual_seed(cfg.seed);
    model_.tag = MethodTag::fAnoGAN;
    model_.spec = spec;
    model_.config = cfg;
    model_.net = UnifiedNet(spec);
    model_.critic = Critic(spec.input_size, spec.channels);
}

void FAnoGanTrainer::train_phase1(const TensorSet& tr, const TensorSet& va) {
    const auto& cfg = model_.config;
    auto& net = model_.net;
    auto& critic = model_.critic;
    auto gen = make_generator(mix_seed(cfg.seed, 2));
    const auto dec_params = decoder_parameters(net);
    torch::optim::Adam gen_opt(dec_params, adversarial_adam(cfg.learning_rate));
    torch::optim::Adam critic_opt(critic->parameters(), adversarial_adam(cfg.learning_rate));
    auto critic_fn = [&](const torch::Tensor& x) { return critic->forward(x); };
    const auto dim = model_.spec.dense_dim;
    const auto fixed_noise = at::randn({va.size(), dim}, gen);

    std::vector<torch::Tensor> tracked = dec_params;
    for (const auto& p : critic->parameters()) tracked.push_back(p);
    auto best = snapshot(tracked);

    auto step = [&](int epoch) {
        net->train();
        Tally tally;
        for_each_batch(tr, cfg.batch_size, cfg.seed, epoch, [&](const torch::Tensor& x, const torch::Tensor&, int b) {
            double critic_loss = 0.0;
            for (int k = 0; k < cfg.critic_steps; ++k) {
                const auto fake = net->decode(at::randn({x.size(0), dim}, gen));
                const auto adv = wgan_losses(critic_fn, x, fake.detach(), cfg.lambda_gp, gen);
                critic_opt.zero_grad();
                adv.critic.backward();
                critic_opt.step();
                critic_loss = checked(adv.critic, epoch, b);
            }
            const auto g = -critic_fn(net->decode(at::randn({x.size(0), dim}, gen))).mean();
            const double gv = checked(g, epoch, b);
            gen_opt.zero_grad();
            g.backward();
            gen_opt.step();
            tally.add("critic", critic_loss);
            tally.add("generator", gv);
            ++tally.batches;
        });
        EpochRecord rec;
        rec.components = tally.means();
        rec.train_loss = rec.components["critic"];
        // Monitored quantity: Wasserstein estimate between validation images and
        // samples from a fixed noise batch.
        torch::NoGradGuard guard;
        double real = 0.0, fake = 0.0;
        for (std::int64_t start = 0; start < va.size(); start += cfg.batch_size) {
            const auto len = std::min<std::int64_t>(cfg.batch_size, va.size() - start);
            real += critic_fn(va.images.narrow(0, start, len)).sum().item<double>();
            fake += critic_fn(net->decode(fixed_noise.narrow(0, start, len))).sum().item<double>();
        }
        rec.val_loss = (real - fake) / static_cast<double>(va.size());
        if (!std::isfinite(rec.val_loss)) throw Error(Errc::NonFiniteLoss, "critic estimate non-finite at epoch " + std::to_string(epoch));
        return rec;
    };
    auto result = run_epochs(cfg.max_epochs, cfg.patience, cfg.eps_improve, step, [&](int) { best = snapshot(tracked); });
    restore(tracked, best);
    model_.phase1_history = std::move(result.history);
    phase1_done_ = true;
}

void FAnoGanTrainer::train_phase2(const TensorSet& tr, const TensorSet& va) {
    if (!phase1_done_) throw Error(Errc::PhaseOrderViolation, "encoder training needs a converged generator/critic");
    const auto& cfg = model_.config;
    auto& net = model_.net;
    auto& critic = model_.critic;
    const auto frozen_dec = decoder_parameters(net);
    const auto frozen_critic = critic->parameters();
    for (auto p : frozen_dec) p.requires_grad_(false);
    for (auto p : frozen_critic) p.requires_grad_(false);

    const auto enc_params = encoder_parameters(net);
    torch::optim::Adam opt(enc_params, torch::optim::AdamOptions(cfg.learning_rate));
    auto best = snapshot(enc_params);

    auto step = [&](int epoch) {
        net->train();
        Tally tally;
        for_each_batch(tr, cfg.batch_size, mix_seed(cfg.seed, 3), epoch, [&](const torch::Tensor& x, const torch::Tensor&, int b) {
            const auto x_hat = net->forward(x);
            const auto rec = ae_loss(x, x_hat);
            const auto feat = (critic->features(x) - critic->features(x_hat)).pow(2).mean();
            const auto loss = rec + cfg.kappa * feat;
            const double v = checked(loss, epoch, b);
            opt.zero_grad();
            loss.backward();
            opt.step();
            tally.add("reconstruction", rec.item<double>());
            tally.add("features", feat.item<double>());
            tally.add("total", v);
            ++tally.batches;
        });
        EpochRecord rec;
        rec.components = tally.means();
        rec.train_loss = rec.components["total"];
        rec.val_loss = validation_l1(net, va, cfg.batch_size);
        if (!std::isfinite(rec.val_loss)) throw Error(Errc::NonFiniteLoss, "validation loss non-finite at epoch " + std::to_string(epoch));
        return rec;
    };
    auto result = run_epochs(cfg.max_epochs, cfg.patience, cfg.eps_improve, step, [&](int) { best = snapshot(enc_params); });
    restore(enc_params, best);
    for (auto p : frozen_dec) p.requires_grad_(true);
    for (auto p : frozen_critic) p.requires_grad_(true);
    net->eval();
    model_.history = std::move(result.history);
    model_.stopped_epoch = result.stopped_epoch;
    model_.best_epoch = result.best_epoch;
}

void write_history(const std::filesystem::path& path, const History& history) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::UnreadableFile, "cannot write " + path.string());
    for (const auto& r : history) {
        out << Json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"components", r.components}}.dump()
            << '\n';
    }
}

History read_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::UnreadableFile, "cannot read " + path.string());
    History out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = Json::parse(line);
        EpochRecord r;
        j.at("epoch").get_to(r.epoch);
        j.at("train_loss").get_to(r.train_loss);
        j.at("val_loss").get_to(r.val_loss);
        j.at("components").get_to(r.components);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace uad
