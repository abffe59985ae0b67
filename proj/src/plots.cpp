#include "uad/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace uad::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct Canvas {
    int width, height;
    std::ostringstream body;

    Canvas(int w, int h, const std::string& title) : width(w), height(h) {
        body << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
             << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
        body << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        text(w / 2.0, 18, title, "middle", 14);
    }
    void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 11, double rotate = 0) {
        body << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-size=\"" << size << '"';
        if (rotate != 0) body << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
        body << '>' << escape(s) << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "black", double w = 1) {
        body << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
             << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w) << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        body << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
             << "\" fill=\"" << fill << "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke, bool markers) {
        body << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) body << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
        body << "\"/>\n";
        if (markers) {
            for (const auto& [x, y] : pts) body << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"" << stroke << "\"/>\n";
        }
    }
    std::string finish() {
        body << "</svg>\n";
        return body.str();
    }
};

struct Frame {
    double left, top, right, bottom;
    double w() const { return right - left; }
    double h() const { return bottom - top; }
};

void y_axis(Canvas& c, const Frame& f, double y_max, const std::string& label) {
    c.line(f.left, f.top, f.left, f.bottom);
    c.line(f.left, f.bottom, f.right, f.bottom);
    for (int i = 0; i <= 4; ++i) {
        const double v = y_max * i / 4.0;
        const double y = f.bottom - f.h() * i / 4.0;
        c.line(f.left - 4, y, f.left, y);
        c.text(f.left - 6, y + 4, num(v, 3), "end");
    }
    c.text(14, (f.top + f.bottom) / 2, label, "middle", 11, -90);
}

double nice_max(double v) {
    if (!(v > 0)) return 1.0;
    const double p = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (v <= m * p) return m * p;
    }
    return 10 * p;
}

}  // namespace

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& y_label, double y_max) {
    const int n = static_cast<int>(values.size());
    const double top_value = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    y_max = std::max(y_max, top_value);
    Canvas c(std::max(320, 90 + 60 * n), 380, title);
    const Frame f{70, 40, c.width - 20.0, 250};
    y_axis(c, f, y_max, y_label);
    const double slot = f.w() / std::max(n, 1);
    for (int i = 0; i < n; ++i) {
        const double h = f.h() * std::clamp(values[i] / y_max, 0.0, 1.0);
        const double x = f.left + slot * i + slot * 0.15;
        c.rect(x, f.bottom - h, slot * 0.7, h, kPalette[i % 10]);
        c.text(x + slot * 0.35, f.bottom - h - 4, num(values[i], 3), "middle", 9);
        c.text(x + slot * 0.35, f.bottom + 12, labels[i], "end", 10, -40);
    }
    return c.finish();
}

std::string histogram_pair(const std::string& title, const std::vector<double>& normal, const std::vector<double>& anomalous) {
    Canvas c(520, 340, title);
    const Frame f{70, 40, 500, 290};
    double peak = 0.0;
    for (double v : normal) peak = std::max(peak, v);
    for (double v : anomalous) peak = std::max(peak, v);
    const double y_max = nice_max(peak);
    y_axis(c, f, y_max, "fraction of voxels");
    for (int i = 0; i <= 4; ++i) c.text(f.left + f.w() * i / 4.0, f.bottom + 14, num(i / 4.0, 2), "middle");
    c.text((f.left + f.right) / 2, f.bottom + 32, "residual", "middle");
    auto steps = [&](const std::vector<double>& h) {
        std::vector<std::pair<double, double>> pts;
        const double bw = f.w() / std::max<std::size_t>(h.size(), 1);
        pts.emplace_back(f.left, f.bottom);
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double y = f.bottom - f.h() * h[i] / y_max;
            pts.emplace_back(f.left + bw * i, y);
            pts.emplace_back(f.left + bw * (i + 1), y);
        }
        pts.emplace_back(f.right, f.bottom);
        return pts;
    };
    c.polyline(steps(normal), kPalette[0], false);
    if (!anomalous.empty()) c.polyline(steps(anomalous), kPalette[1], false);
    c.rect(f.right - 110, f.top + 4, 10, 10, kPalette[0]);
    c.text(f.right - 95, f.top + 13, "normal");
    c.rect(f.right - 110, f.top + 20, 10, 10, kPalette[1]);
    c.text(f.right - 95, f.top + 29, "anomalous");
    return c.finish();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<std::optional<double>>>& values) {
    const int n = static_cast<int>(labels.size());
    const double cell = 60;
    Canvas c(static_cast<int>(110 + cell * n + 20), static_cast<int>(50 + cell * n + 20), title);
    const double x0 = 110, y0 = 50;
    for (int i = 0; i < n; ++i) {
        c.text(x0 - 6, y0 + cell * i + cell / 2 + 4, labels[i], "end");
        c.text(x0 + cell * i + cell / 2, y0 - 6, labels[i], "middle");
        for (int j = 0; j < n; ++j) {
            const auto& v = values[i][j];
            std::string fill = "#cccccc";
            if (v) {
                // Diverging blue-white-red.
                const double t = std::clamp(*v, -1.0, 1.0);
                const int r = t < 0 ? static_cast<int>(255 * (1 + t)) : 255;
                const int b = t > 0 ? static_cast<int>(255 * (1 - t)) : 255;
                const int g = static_cast<int>(255 * (1 - std::abs(t)));
                char buf[16];
                std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
                fill = buf;
            }
            c.rect(x0 + cell * j, y0 + cell * i, cell - 1, cell - 1, fill);
            c.text(x0 + cell * j + cell / 2, y0 + cell * i + cell / 2 + 4, v ? num(*v, 2) : "n/a", "middle");
        }
    }
    return c.finish();
}

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
    Canvas c(560, 360, title);
    const Frame f{70, 40, 400, 300};
    double x_min = 0, x_max = 1, y_top = 0;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) x_min = x_max = s.x[i];
            first = false;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_top = std::max(y_top, s.y[i]);
        }
    }
    if (x_max == x_min) x_max = x_min + 1;
    const double y_max = nice_max(y_top);
    y_axis(c, f, y_max, y_label);
    for (int i = 0; i <= 4; ++i) {
        const double v = x_min + (x_max - x_min) * i / 4.0;
        c.text(f.left + f.w() * i / 4.0, f.bottom + 14, num(v, 1), "middle");
    }
    c.text((f.left + f.right) / 2, f.bottom + 32, x_label, "middle");
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            pts.emplace_back(f.left + f.w() * (s.x[i] - x_min) / (x_max - x_min), f.bottom - f.h() * s.y[i] / y_max);
        }
        c.polyline(pts, kPalette[k % 10], true);
        c.rect(f.right + 12, f.top + 16.0 * k, 10, 10, kPalette[k % 10]);
        c.text(f.right + 26, f.top + 16.0 * k + 9, s.name);
    }
    return c.finish();
}

}  // namespace uad::svg
