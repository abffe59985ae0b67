#pragma once

// Brute-force reference implementations used only by tests. They follow the
// textbook definitions directly and share no code with src/.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "uad/volume.hpp"

namespace oracle {

inline uad::MaskGrid erode(const uad::MaskGrid& m, int r) {
    const auto& s = m.shape();
    uad::MaskGrid out(s, 0);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                bool keep = m(x, y, z) != 0;
                for (int dz = -r; dz <= r && keep; ++dz)
                    for (int dy = -r; dy <= r && keep; ++dy)
                        for (int dx = -r; dx <= r && keep; ++dx) {
                            if (std::abs(dx) + std::abs(dy) + std::abs(dz) > r) continue;
                            if (!s.contains(x + dx, y + dy, z + dz) || !m(x + dx, y + dy, z + dz)) keep = false;
                        }
                out(x, y, z) = keep ? 1 : 0;
            }
    return out;
}

inline uad::FloatGrid median(const uad::FloatGrid& g, int k = 5) {
    const auto& s = g.shape();
    const int h = k / 2;
    uad::FloatGrid out(s);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                std::vector<float> w;
                for (int dz = -h; dz <= h; ++dz)
                    for (int dy = -h; dy <= h; ++dy)
                        for (int dx = -h; dx <= h; ++dx)
                            w.push_back(g(std::clamp(x + dx, 0, s.nx - 1), std::clamp(y + dy, 0, s.ny - 1),
                                          std::clamp(z + dz, 0, s.nz - 1)));
                std::sort(w.begin(), w.end());
                out(x, y, z) = w[w.size() / 2];
            }
    return out;
}

/// Component id per voxel via breadth-first flood fill from every unvisited seed.
inline std::vector<std::size_t> component_ids(const uad::MaskGrid& b, int connectivity) {
    const auto& s = b.shape();
    const std::size_t none = b.size();
    std::vector<std::size_t> id(b.size(), none);
    std::vector<std::array<int, 3>> queue;
    for (std::size_t seed = 0; seed < b.size(); ++seed) {
        if (!b[seed] || id[seed] != none) continue;
        queue.clear();
        const int sx = static_cast<int>(seed % s.nx), sy = static_cast<int>((seed / s.nx) % s.ny),
                  sz = static_cast<int>(seed / (static_cast<std::size_t>(s.nx) * s.ny));
        queue.push_back({sx, sy, sz});
        id[seed] = seed;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const auto [x, y, z] = queue[head];
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int n = std::abs(dx) + std::abs(dy) + std::abs(dz);
                        if (n == 0 || (connectivity == 6 && n > 1) || (connectivity == 18 && n > 2)) continue;
                        if (!s.contains(x + dx, y + dy, z + dz) || !b(x + dx, y + dy, z + dz)) continue;
                        const std::size_t j = b.index(x + dx, y + dy, z + dz);
                        if (id[j] != none) continue;
                        id[j] = seed;
                        queue.push_back({x + dx, y + dy, z + dz});
                    }
        }
    }
    return id;
}

inline uad::MaskGrid prune(const uad::MaskGrid& b, int min_voxels, int connectivity) {
    const auto id = component_ids(b, connectivity);
    std::vector<std::size_t> count(b.size() + 1, 0);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i]) ++count[id[i]];
    uad::MaskGrid out(b.shape(), 0);
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = (b[i] && count[id[i]] >= static_cast<std::size_t>(min_voxels)) ? 1 : 0;
    return out;
}

inline std::vector<std::size_t> component_sizes(const uad::MaskGrid& b, int connectivity) {
    const auto id = component_ids(b, connectivity);
    std::vector<std::size_t> count(b.size() + 1, 0);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i]) ++count[id[i]];
    std::vector<std::size_t> sizes;
    for (auto c : count)
        if (c > 0) sizes.push_back(c);
    return sizes;
}

inline uad::MaskGrid threshold(const uad::FloatGrid& g, double t) {
    uad::MaskGrid out(g.shape(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<double>(g[i]) > t ? 1 : 0;
    return out;
}

inline double dice(const uad::MaskGrid& a, const uad::MaskGrid& b) {
    double inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += (a[i] && b[i]);
        na += a[i] != 0;
        nb += b[i] != 0;
    }
    return na + nb == 0 ? 1.0 : 2 * inter / (na + nb);
}

/// AUPRC by enumerating every distinct score as threshold with a full scan.
inline double auprc(const std::vector<float>& s, const std::vector<std::uint8_t>& l) {
    std::set<float, std::greater<>> thresholds(s.begin(), s.end());
    double pos = 0;
    for (auto v : l) pos += v != 0;
    std::vector<std::pair<double, double>> pts;  // (recall, precision)
    for (float t : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) (l[i] ? tp : fp) += 1;
        pts.emplace_back(tp / pos, tp / (tp + fp));
    }
    double area = 0, r0 = 0, p0 = pts.front().second;
    for (auto [r, p] : pts) {
        area += (r - r0) * (p + p0) / 2;
        r0 = r;
        p0 = p;
    }
    return area;
}

/// AUROC as the fraction of (positive, negative) pairs ranked correctly.
inline double auroc(const std::vector<float>& s, const std::vector<std::uint8_t>& l) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!l[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j]) continue;
            pairs += 1;
            num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return num / pairs;
}

inline double chi_square(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] + q[i] > 0) acc += std::pow(p[i] - q[i], 2) / (p[i] + q[i]);
    return acc / 2;
}

/// Pearson via sample covariance / (sample std * sample std).
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my) / (n - 1);
        vx += (x[i] - mx) * (x[i] - mx) / (n - 1);
        vy += (y[i] - my) * (y[i] - my) / (n - 1);
    }
    return cov / std::sqrt(vx * vy);
}

/// Best pooled DICE over the 0.001 grid by exhaustive evaluation.
inline std::pair<double, double> best_dice_grid(const std::vector<uad::FloatGrid>& scores,
                                                const std::vector<uad::MaskGrid>& gt, int min_voxels,
                                                int connectivity) {
    double best = -1, best_t = 0;
    for (int k = 0; k <= 1000; ++k) {
        const double t = k / 1000.0;
        double inter = 0, np = 0, ng = 0;
        for (std::size_t v = 0; v < scores.size(); ++v) {
            const auto pred = prune(threshold(scores[v], t), min_voxels, connectivity);
            for (std::size_t i = 0; i < pred.size(); ++i) {
                inter += pred[i] && gt[v][i];
                np += pred[i] != 0;
                ng += gt[v][i] != 0;
            }
        }
        const double d = np + ng == 0 ? 1.0 : 2 * inter / (np + ng);
        if (d > best) {
            best = d;
            best_t = t;
        }
    }
    return {best, best_t};
}

inline uad::FloatGrid random_grid(uad::Shape3 s, std::mt19937_64& gen, float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    uad::FloatGrid g(s);
    for (auto& v : g.data()) v = u(gen);
    return g;
}

inline uad::MaskGrid random_mask(uad::Shape3 s, std::mt19937_64& gen, double p) {
    std::bernoulli_distribution b(p);
    uad::MaskGrid m(s);
    for (auto& v : m.data()) v = b(gen) ? 1 : 0;
    return m;
}

}  // namespace oracle
