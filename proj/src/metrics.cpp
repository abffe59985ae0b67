#include "uad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uad/error.hpp"

namespace uad {
namespace {

void check_labels(std::span<const float> scores, std::span<const std::uint8_t> labels, std::size_t& positives) {
    if (scores.size() != labels.size()) throw Error(Errc::ShapeMismatch, "scores and labels differ in length");
    positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
    if (positives == 0 || positives == labels.size()) {
        throw Error(Errc::DegenerateLabels, "need at least one positive and one negative label");
    }
}

std::vector<std::size_t> order_descending(std::span<const float> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

MeanStd mean_std(double sum, double sum_sq, std::size_t n) {
    if (n == 0) return {};
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sum_sq / static_cast<double>(n) - mean * mean, 0.0);
    return {mean, std::sqrt(var)};
}

}  // namespace

PrResult prc_and_auprc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    std::size_t positives = 0;
    check_labels(scores, labels, positives);
    const auto order = order_descending(scores);

    PrResult out;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const float s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (labels[order[i]]) ++tp; else ++fp;
        }
        out.curve.thresholds.push_back(s);
        out.curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        out.curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }
    double prev_r = 0.0, prev_p = out.curve.precision.front();
    for (std::size_t k = 0; k < out.curve.recall.size(); ++k) {
        out.auprc += (out.curve.recall[k] - prev_r) * (out.curve.precision[k] + prev_p) * 0.5;
        prev_r = out.curve.recall[k];
        prev_p = out.curve.precision[k];
    }
    return out;
}

double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    std::size_t positives = 0;
    check_labels(scores, labels, positives);
    const std::size_t negatives = labels.size() - positives;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of (1-based, tie-averaged) ranks of the positives.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            pos_in_group += labels[order[j]] ? 1 : 0;
            ++j;
        }
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) * 0.5;
        rank_sum += avg_rank * static_cast<double>(pos_in_group);
        i = j;
    }
    const double p = static_cast<double>(positives);
    const double u = rank_sum - p * (p + 1.0) * 0.5;
    return u / (p * static_cast<double>(negatives));
}

double dice_from_counts(std::size_t intersection, std::size_t size_a, std::size_t size_b) {
    if (size_a + size_b == 0) return 1.0;
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(size_a + size_b);
}

double dice(const BinaryVolume& a, const BinaryVolume& b) {
    if (a.shape() != b.shape()) throw Error(Errc::ShapeMismatch, "dice needs equal shapes");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] ? 1 : 0;
        nb += b[i] ? 1 : 0;
        inter += (a[i] && b[i]) ? 1 : 0;
    }
    return dice_from_counts(inter, na, nb);
}

double pooled_dice_at(const std::vector<ScoredSubject>& subjects, double t, const PostprocConfig& cfg) {
    std::size_t inter = 0, npred = 0, ngt = 0;
    for (const auto& s : subjects) {
        const BinaryVolume pred = segment(*s.scores, t, cfg);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            npred += pred[i] ? 1 : 0;
            ngt += (*s.gt)[i] ? 1 : 0;
            inter += (pred[i] && (*s.gt)[i]) ? 1 : 0;
        }
    }
    return dice_from_counts(inter, npred, ngt);
}

namespace {

constexpr int kGridSteps = 1000;

class ComponentForest {
public:
    explicit ComponentForest(std::size_t n) : parent_(n), size_(n, 0), lesion_(n, 0) {}

    void add(std::size_t i, bool lesion, std::size_t min_size) {
        parent_[i] = i;
        size_[i] = 1;
        lesion_[i] = lesion ? 1 : 0;
        credit(i, min_size, +1);
    }

    void unite(std::size_t a, std::size_t b, std::size_t min_size) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        credit(a, min_size, -1);
        credit(b, min_size, -1);
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        lesion_[a] += lesion_[b];
        credit(a, min_size, +1);
    }

    std::size_t kept_size = 0;
    std::size_t kept_lesion = 0;

private:
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void credit(std::size_t root, std::size_t min_size, int sign) {
        if (size_[root] < min_size) return;
        if (sign > 0) {
            kept_size += size_[root];
            kept_lesion += lesion_[root];
        } else {
            kept_size -= size_[root];
            kept_lesion -= lesion_[root];
        }
    }

    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
    std::vector<std::size_t> lesion_;
};

}  // namespace

BestDice greedy_best_dice(const std::vector<ScoredSubject>& subjects, const PostprocConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> pred(kGridSteps + 1, 0), inter(kGridSteps + 1, 0);
    std::size_t ngt = 0;

    std::vector<std::array<int, 3>> offsets;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nz = (dx != 0) + (dy != 0) + (dz != 0);
                if (nz == 0 || (cfg.connectivity == 6 && nz > 1) || (cfg.connectivity == 18 && nz > 2)) continue;
                offsets.push_back({dx, dy, dz});
            }
    const auto min_size = static_cast<std::size_t>(cfg.min_component_voxels);

    for (const auto& subj : subjects) {
        const FloatGrid& sc = *subj.scores;
        const MaskGrid& gt = *subj.gt;
        if (sc.shape() != gt.shape()) throw Error(Errc::ShapeMismatch, "scores and gt shapes differ");
        const Shape3& s = sc.shape();
        ngt += count_true(gt);

        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < sc.size(); ++i) {
            if (static_cast<double>(sc[i]) > 0.0) order.push_back(i);
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sc[a] > sc[b]; });

        ComponentForest forest(sc.size());
        std::vector<std::uint8_t> active(sc.size(), 0);
        std::size_t next = 0;
        for (int k = kGridSteps; k >= 0; --k) {
            const double t = static_cast<double>(k) / kGridSteps;
            while (next < order.size() && static_cast<double>(sc[order[next]]) > t) {
                const std::size_t i = order[next++];
                active[i] = 1;
                forest.add(i, gt[i] != 0, min_size);
                const int x = static_cast<int>(i % static_cast<std::size_t>(s.nx));
                const int y = static_cast<int>((i / static_cast<std::size_t>(s.nx)) % static_cast<std::size_t>(s.ny));
                const int z = static_cast<int>(i / s.slice_size());
                for (const auto& [dx, dy, dz] : offsets) {
                    if (!s.contains(x + dx, y + dy, z + dz)) continue;
                    const std::size_t j = sc.index(x + dx, y + dy, z + dz);
                    if (active[j]) forest.unite(i, j, min_size);
                }
            }
            pred[static_cast<std::size_t>(k)] += forest.kept_size;
            inter[static_cast<std::size_t>(k)] += forest.kept_lesion;
        }
    }
    if (ngt == 0) throw Error(Errc::DegenerateLabels, "no lesion voxels in the pooled ground truth");

    BestDice best{-1.0, 0.0};
    for (int k = 0; k <= kGridSteps; ++k) {
        const double d = dice_from_counts(inter[static_cast<std::size_t>(k)], pred[static_cast<std::size_t>(k)], ngt);
        if (d > best.dice) best = {d, static_cast<double>(k) / kGridSteps};
    }
    return best;
}

PatientDice dice_at_op(const std::vector<ScoredSubject>& subjects, double t, const PostprocConfig& cfg) {
    PatientDice out;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& s : subjects) {
        const double d = dice(segment(*s.scores, t, cfg), *s.gt);
        out.per_patient.push_back(d);
        sum += d;
        sum_sq += d * d;
    }
    out.summary = mean_std(sum, sum_sq, out.per_patient.size());
    return out;
}

ResidualStats residual_stats(std::span<const float> scores, std::span<const std::uint8_t> gt,
                             std::span<const std::uint8_t> brain_mask) {
    if (scores.size() != gt.size() || scores.size() != brain_mask.size()) {
        throw Error(Errc::ShapeMismatch, "residual_stats inputs differ in length");
    }
    double sn = 0, sn2 = 0, sa = 0, sa2 = 0;
    std::size_t nn = 0, na = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double v = scores[i];
        if (gt[i]) {
            sa += v;
            sa2 += v * v;
            ++na;
        } else if (brain_mask[i]) {
            sn += v;
            sn2 += v * v;
            ++nn;
        }
    }
    ResidualStats out;
    out.normal = mean_std(sn, sn2, nn);
    if (na > 0) out.anomalous = mean_std(sa, sa2, na);
    return out;
}

ResidualHistograms residual_histograms(std::span<const float> scores, std::span<const std::uint8_t> gt,
                                       std::span<const std::uint8_t> brain_mask, int bin_count) {
    if (scores.size() != gt.size() || scores.size() != brain_mask.size()) {
        throw Error(Errc::ShapeMismatch, "histogram inputs differ in length");
    }
    if (bin_count < 1) throw Error(Errc::BinMismatch, "bin count must be positive");
    ResidualHistograms h;
    h.bin_count = bin_count;
    h.normal.assign(static_cast<std::size_t>(bin_count), 0.0);
    h.anomalous.assign(static_cast<std::size_t>(bin_count), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double v = scores[i];
        if (!(v > 0.0 && v <= 1.0) || !(brain_mask[i] || gt[i])) continue;
        // Bin k covers (k/B, (k+1)/B].
        const auto bin = static_cast<std::size_t>(std::clamp(static_cast<int>(std::ceil(v * bin_count)) - 1, 0, bin_count - 1));
        (gt[i] ? h.anomalous : h.normal)[bin] += 1.0;
    }
    for (auto* hist : {&h.normal, &h.anomalous}) {
        const double total = std::accumulate(hist->begin(), hist->end(), 0.0);
        if (total > 0) {
            for (double& b : *hist) b /= total;
        }
    }
    return h;
}

double chi_square_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error(Errc::BinMismatch, "histograms have different bin counts");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = p[i] + q[i];
        if (s > 0) acc += (p[i] - q[i]) * (p[i] - q[i]) / s;
    }
    return 0.5 * acc;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw Error(Errc::ShapeMismatch, "pearson needs equal non-empty columns");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const std::vector<CorrelationRow>& rows) {
    if (rows.size() < 3) throw Error(Errc::EmptyResults, "correlation needs at least three models");
    std::array<std::vector<double>, 5> cols;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < 5; ++c) cols[c].push_back(r[c]);
    }
    CorrelationMatrix m;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) m[i][j] = pearson(cols[i], cols[j]);
    }
    return m;
}

}  // namespace uad
