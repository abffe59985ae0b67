#include "uad/results.hpp"

#include <fstream>
#include <sstream>

#include "uad/error.hpp"

namespace uad {
namespace {

using Json = nlohmann::json;

Json mean_std(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }
MeanStd mean_std_from(const Json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

template <class T>
Json opt(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}
template <class T>
std::optional<T> opt_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json parse_file(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        throw Error(Errc::UnreadableFile, path.string() + ": " + e.what());
    }
}

}  // namespace

Json to_json(const EvalRecord& r) {
    Json j{{"approach", r.approach},
           {"method", std::string(to_string(r.method))},
           {"scorer", std::string(to_string(r.scorer))},
           {"dataset", r.dataset},
           {"fraction", r.fraction},
           {"n_train_subjects", r.n_train_subjects},
           {"op_subjects", r.op_subjects},
           {"test_subjects", r.test_subjects},
           {"prevalence", r.prevalence},
           {"auroc", r.auroc},
           {"auprc", r.auprc},
           {"best_dice", {{"dice", r.best_dice.dice}, {"threshold", r.best_dice.threshold}}},
           {"op_threshold", r.op_threshold},
           {"dice", {{"summary", mean_std(r.dice.summary)}, {"per_patient", r.dice.per_patient}}},
           {"re_normal", mean_std(r.residuals.normal)},
           {"re_anomalous", r.residuals.anomalous ? mean_std(*r.residuals.anomalous) : Json(nullptr)},
           {"histograms", {{"bins", r.histograms.bin_count}, {"normal", r.histograms.normal}, {"anomalous", r.histograms.anomalous}}},
           {"chi2", opt(r.chi2)},
           {"restored_slices", opt(r.restored_slices)},
           {"non_increasing_slices", opt(r.non_increasing_slices)}};
    return j;
}

EvalRecord eval_record_from_json(const Json& j) {
    try {
        EvalRecord r;
        j.at("approach").get_to(r.approach);
        r.method = parse_method(j.at("method").get<std::string>());
        r.scorer = parse_scorer(j.at("scorer").get<std::string>());
        j.at("dataset").get_to(r.dataset);
        j.at("fraction").get_to(r.fraction);
        j.at("n_train_subjects").get_to(r.n_train_subjects);
        j.at("op_subjects").get_to(r.op_subjects);
        j.at("test_subjects").get_to(r.test_subjects);
        j.at("prevalence").get_to(r.prevalence);
        j.at("auroc").get_to(r.auroc);
        j.at("auprc").get_to(r.auprc);
        r.best_dice = {j.at("best_dice").at("dice").get<double>(), j.at("best_dice").at("threshold").get<double>()};
        j.at("op_threshold").get_to(r.op_threshold);
        r.dice.summary = mean_std_from(j.at("dice").at("summary"));
        j.at("dice").at("per_patient").get_to(r.dice.per_patient);
        r.residuals.normal = mean_std_from(j.at("re_normal"));
        if (!j.at("re_anomalous").is_null()) r.residuals.anomalous = mean_std_from(j.at("re_anomalous"));
        const auto& h = j.at("histograms");
        h.at("bins").get_to(r.histograms.bin_count);
        h.at("normal").get_to(r.histograms.normal);
        h.at("anomalous").get_to(r.histograms.anomalous);
        r.chi2 = opt_from<double>(j, "chi2");
        r.restored_slices = opt_from<int>(j, "restored_slices");
        r.non_increasing_slices = opt_from<int>(j, "non_increasing_slices");
        return r;
    } catch (const Json::exception& e) {
        throw Error(Errc::UnreadableFile, std::string("malformed result record: ") + e.what());
    }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::UnreadableFile, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(Errc::UnreadableFile, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_cell_file(const std::filesystem::path& path, const std::string& cell_id, const std::vector<EvalRecord>& records) {
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    write_text_atomic(path, Json{{"cell", cell_id}, {"records", arr}}.dump(1) + "\n");
}

std::vector<EvalRecord> read_cell_file(const std::filesystem::path& path) {
    const Json j = parse_file(path);
    std::vector<EvalRecord> out;
    for (const auto& r : j.at("records")) out.push_back(eval_record_from_json(r));
    return out;
}

void write_manifest(const std::filesystem::path& output_dir, const std::vector<std::string>& completed,
                    const std::vector<std::string>& pending) {
    write_text_atomic(output_dir / "manifest.json", Json{{"completed", completed}, {"pending", pending}}.dump(1) + "\n");
}

std::vector<std::string> read_manifest(const std::filesystem::path& output_dir) {
    const auto path = output_dir / "manifest.json";
    if (!std::filesystem::exists(path)) return {};
    try {
        return parse_file(path).at("completed").get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
        throw Error(Errc::UnreadableFile, "malformed manifest: " + std::string(e.what()));
    }
}

std::vector<EvalRecord> read_results(const std::filesystem::path& output_dir) {
    std::vector<EvalRecord> out;
    for (const auto& id : read_manifest(output_dir)) {
        auto recs = read_cell_file(output_dir / "cells" / (id + ".json"));
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

}  // namespace uad
