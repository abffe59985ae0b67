#include "uad/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "uad/error.hpp"

namespace uad {
namespace {

using Json = nlohmann::json;
constexpr const char* kMagic = "UADCKPT1";

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

/// Every tensor that defines the model, with a stable prefix per module.
std::vector<std::pair<std::string, torch::Tensor>> model_tensors(const TrainedModel& m) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    auto add = [&](const std::string& prefix, const torch::nn::Module& mod) {
        for (const auto& p : mod.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
        for (const auto& b : mod.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
    };
    add("net.", *m.net);
    if (m.critic) add("critic.", *m.critic);
    if (m.latent_critic) add("latent_critic.", *m.latent_critic);
    return out;
}

Json history_json(const History& h) {
    Json arr = Json::array();
    for (const auto& r : h) arr.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"components", r.components}});
    return arr;
}

History history_from(const Json& arr) {
    History h;
    for (const auto& j : arr) {
        EpochRecord r;
        j.at("epoch").get_to(r.epoch);
        j.at("train_loss").get_to(r.train_loss);
        j.at("val_loss").get_to(r.val_loss);
        j.at("components").get_to(r.components);
        h.push_back(std::move(r));
    }
    return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
    const auto tensors = model_tensors(model);
    Json table = Json::array();
    for (const auto& [name, t] : tensors) table.push_back({{"name", name}, {"shape", t.sizes().vec()}});
    const Json header{{"method", std::string(to_string(model.tag))},
                      {"spec", model.spec},
                      {"train_config", model.config},
                      {"stopped_epoch", model.stopped_epoch},
                      {"best_epoch", model.best_epoch},
                      {"history", history_json(model.history)},
                      {"phase1_history", history_json(model.phase1_history)},
                      {"has_critic", static_cast<bool>(model.critic)},
                      {"has_latent_critic", static_cast<bool>(model.latent_critic)},
                      {"tensors", table}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::UnreadableFile, "cannot write " + path.string());
    out << kMagic << '\n' << header.dump() << '\n';
    for (const auto& [name, t] : tensors) {
        const auto c = t.detach().to(torch::kFloat32).contiguous();
        out.write(reinterpret_cast<const char*>(c.data_ptr<float>()), static_cast<std::streamsize>(c.numel() * sizeof(float)));
    }
    if (!out) throw Error(Errc::UnreadableFile, "short write to " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path, const std::optional<BottleneckSpec>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
    std::string magic, line;
    if (!std::getline(in, magic) || magic != kMagic || !std::getline(in, line)) {
        throw Error(Errc::UnreadableFile, path.string() + " is not a checkpoint");
    }
    Json header;
    try {
        header = Json::parse(line);
    } catch (const Json::exception& e) {
        throw Error(Errc::UnreadableFile, "corrupt checkpoint header: " + std::string(e.what()));
    }

    TrainedModel m;
    m.tag = parse_method(header.at("method").get<std::string>());
    header.at("spec").get_to(m.spec);
    m.spec.validate();
    if (expected && !(*expected == m.spec)) throw Error(Errc::InvalidSpec, "checkpoint architecture differs from the requested one");
    TrainConfig cfg;
    from_json(header.at("train_config"), cfg);
    m.config = cfg;
    m.stopped_epoch = header.at("stopped_epoch").get<int>();
    m.best_epoch = header.at("best_epoch").get<int>();
    m.history = history_from(header.at("history"));
    m.phase1_history = history_from(header.at("phase1_history"));
    m.net = UnifiedNet(m.spec);
    if (header.at("has_critic").get<bool>()) m.critic = Critic(m.spec.input_size, m.spec.channels);
    if (header.at("has_latent_critic").get<bool>()) m.latent_critic = LatentCritic(m.spec.code_numel());

    const auto tensors = model_tensors(m);
    const auto& table = header.at("tensors");
    if (table.size() != tensors.size()) throw Error(Errc::InvalidSpec, "checkpoint tensor table does not match the architecture");
    torch::NoGradGuard guard;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& [name, t] = tensors[i];
        if (table[i].at("name").get<std::string>() != name ||
            table[i].at("shape").get<std::vector<std::int64_t>>() != t.sizes().vec()) {
            throw Error(Errc::InvalidSpec, "checkpoint tensor " + name + " does not match the architecture");
        }
        auto buf = torch::empty(t.sizes(), torch::kFloat32);
        in.read(reinterpret_cast<char*>(buf.data_ptr<float>()), static_cast<std::streamsize>(buf.numel() * sizeof(float)));
        if (!in) throw Error(Errc::UnreadableFile, "truncated checkpoint " + path.string());
        t.copy_(buf);
    }
    m.net->eval();
    return m;
}

}  // namespace uad
