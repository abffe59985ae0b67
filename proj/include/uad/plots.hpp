#pragma once

#include <optional>
#include <string>
#include <vector>

namespace uad::svg {

/// Minimal static SVG charts. Output depends only on the inputs, so reports
/// stay byte-identical across runs.

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& y_label, double y_max = 1.0);

/// Two normalized histograms over (0,1] drawn as step outlines.
std::string histogram_pair(const std::string& title, const std::vector<double>& normal, const std::vector<double>& anomalous);

/// Square matrix in [-1,1]; empty cells are drawn grey and labelled "n/a".
std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<std::optional<double>>>& values);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

/// Escapes &, <, > and quotes.
std::string escape(const std::string& text);

}  // namespace uad::svg
