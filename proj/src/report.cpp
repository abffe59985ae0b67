#include "uad/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>

#include "uad/error.hpp"
#include "uad/plots.hpp"

namespace uad {
namespace {

namespace fs = std::filesystem;

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string pm(const MeanStd& m) { return fixed(m.mean) + " ± " + fixed(m.std); }

std::vector<std::string> datasets_in_order(const std::vector<EvalRecord>& records) {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (std::find(out.begin(), out.end(), r.dataset) == out.end()) out.push_back(r.dataset);
    }
    return out;
}

void put(std::vector<fs::path>& written, const fs::path& path, const std::string& text) {
    write_text_atomic(path, text);
    written.push_back(path);
}

}  // namespace

std::string slug(const std::string& name) {
    std::string out;
    for (char ch : name) {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') out += ch;
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string results_row(const EvalRecord& r) {
    std::string row = r.approach;
    row += "," + fixed(r.auroc);
    row += "," + fixed(r.auprc);
    row += "," + fixed(r.best_dice.dice);
    row += "," + pm(r.dice.summary);
    row += "," + pm(r.residuals.normal);
    row += "," + (r.residuals.anomalous ? pm(*r.residuals.anomalous) : std::string("n/a"));
    row += "," + (r.chi2 ? fixed(*r.chi2) : std::string("n/a"));
    return row;
}

std::string results_table(const std::vector<EvalRecord>& records) {
    std::string out = std::string(kResultsHeader) + "\n";
    for (const auto& r : records) out += results_row(r) + "\n";
    return out;
}

std::vector<fs::path> emit_report(const std::vector<EvalRecord>& records, const fs::path& dir) {
    if (records.empty()) throw Error(Errc::EmptyResults, "no completed cells to report");
    fs::create_directories(dir);
    std::vector<fs::path> written;

    for (const auto& ds : datasets_in_order(records)) {
        std::vector<EvalRecord> all;
        for (const auto& r : records) {
            if (r.dataset == ds) all.push_back(r);
        }
        const double top_fraction =
            std::max_element(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.fraction < b.fraction; })->fraction;
        std::vector<EvalRecord> main;
        for (const auto& r : all) {
            if (r.fraction == top_fraction) main.push_back(r);
        }
        const std::string tag = slug(ds);

        put(written, dir / ("results_" + tag + ".csv"), results_table(main));

        std::vector<std::string> labels;
        std::vector<double> auprc;
        for (const auto& r : main) {
            labels.push_back(r.approach);
            auprc.push_back(r.auprc);
        }
        put(written, dir / ("auprc_" + tag + ".svg"), svg::bar_chart("AUPRC on " + ds, labels, auprc, "AUPRC"));

        for (const auto& r : main) {
            put(written, dir / ("hist_" + tag + "_" + slug(r.approach) + ".svg"),
                svg::histogram_pair(r.approach + " on " + ds, r.histograms.normal, r.histograms.anomalous));
        }

        // Correlation across approaches; rows without lesion statistics cannot contribute.
        std::vector<CorrelationRow> rows;
        for (const auto& r : main) {
            if (!r.residuals.anomalous || !r.chi2) continue;
            rows.push_back({r.auprc, r.best_dice.dice, r.residuals.normal.mean, r.residuals.anomalous->mean, *r.chi2});
        }
        if (rows.size() >= 3) {
            const auto m = correlation_matrix(rows);
            std::vector<std::string> names(kCorrelationColumns.begin(), kCorrelationColumns.end());
            std::string csv = ",";
            for (std::size_t j = 0; j < names.size(); ++j) csv += names[j] + (j + 1 < names.size() ? "," : "\n");
            std::vector<std::vector<std::optional<double>>> grid;
            for (std::size_t i = 0; i < names.size(); ++i) {
                csv += names[i];
                grid.emplace_back(m[i].begin(), m[i].end());
                for (std::size_t j = 0; j < names.size(); ++j) csv += "," + (m[i][j] ? fixed(*m[i][j]) : std::string("n/a"));
                csv += "\n";
            }
            put(written, dir / ("correlation_" + tag + ".csv"), csv);
            put(written, dir / ("correlation_" + tag + ".svg"), svg::heatmap("Pearson correlation on " + ds, names, grid));
        }

        std::set<double> fractions;
        for (const auto& r : all) fractions.insert(r.fraction);
        if (fractions.size() > 1) {
            std::map<std::string, svg::Series> series;
            std::vector<std::string> order;
            std::string csv = "Approach,Fraction,Training subjects,AUPRC\n";
            for (const auto& r : all) {
                auto [it, fresh] = series.try_emplace(r.approach);
                if (fresh) {
                    it->second.name = r.approach;
                    order.push_back(r.approach);
                }
                it->second.x.push_back(r.n_train_subjects);
                it->second.y.push_back(r.auprc);
                char buf[64];
                std::snprintf(buf, sizeof buf, "%g", r.fraction);
                csv += r.approach + "," + buf + "," + std::to_string(r.n_train_subjects) + "," + fixed(r.auprc) + "\n";
            }
            std::vector<svg::Series> lines;
            for (const auto& name : order) {
                auto s = series.at(name);
                std::vector<std::size_t> idx(s.x.size());
                for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
                std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
                svg::Series sorted{s.name, {}, {}};
                for (auto i : idx) {
                    sorted.x.push_back(s.x[i]);
                    sorted.y.push_back(s.y[i]);
                }
                lines.push_back(std::move(sorted));
            }
            put(written, dir / ("subjects_" + tag + ".csv"), csv);
            put(written, dir / ("subjects_" + tag + ".svg"),
                svg::line_plot("AUPRC vs. training subjects on " + ds, "training subjects", "AUPRC", lines));
        }
    }
    return written;
}

std::vector<fs::path> emit_report(const fs::path& output_dir) {
    return emit_report(read_results(output_dir), output_dir / "report");
}

}  // namespace uad
