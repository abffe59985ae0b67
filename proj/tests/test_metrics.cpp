#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "uad/error.hpp"
#include "uad/metrics.hpp"

using namespace uad;

namespace {

struct Labelled {
    std::vector<float> scores;
    std::vector<std::uint8_t> labels;
};

// Scores on a coarse lattice so ties are frequent; both classes present.
Labelled random_labelled(std::mt19937_64& gen, std::size_t n, int levels) {
    std::uniform_int_distribution<int> lvl(0, levels - 1);
    std::bernoulli_distribution pos(0.3);
    Labelled out;
    for (std::size_t i = 0; i < n; ++i) {
        out.scores.push_back(static_cast<float>(lvl(gen)) / static_cast<float>(levels));
        out.labels.push_back(pos(gen) ? 1 : 0);
    }
    out.labels[0] = 1;
    out.labels[1] = 0;
    return out;
}

}  // namespace

TEST_CASE("AUPRC of a small hand-checked ranking") {
    const std::vector<float> s{0.9f, 0.8f, 0.3f, 0.1f};
    const std::vector<std::uint8_t> l{1, 0, 1, 0};
    // (0,1) -> (0.5,1) -> (0.5,0.5) -> (1,2/3) -> (1,0.5): area 19/24.
    CHECK(prc_and_auprc(s, l).auprc == doctest::Approx(19.0 / 24.0).epsilon(1e-12));
    CHECK(oracle::auprc(s, l) == doctest::Approx(19.0 / 24.0).epsilon(1e-12));
    CHECK(auroc(s, l) == doctest::Approx(0.75));
}

TEST_CASE("constant scores give AUPRC equal to prevalence") {
    std::vector<float> s(200, 0.4f);
    std::vector<std::uint8_t> l(200, 0);
    for (std::size_t i = 0; i < 200; i += 8) l[i] = 1;
    CHECK(prc_and_auprc(s, l).auprc == doctest::Approx(25.0 / 200.0));
    CHECK(auroc(s, l) == doctest::Approx(0.5));
}

TEST_CASE("AUPRC and AUROC match the enumeration oracles on random instances") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 120; ++trial) {
        const auto d = random_labelled(gen, 50 + static_cast<std::size_t>(trial % 7) * 10, trial % 2 ? 10 : 1000);
        REQUIRE(prc_and_auprc(d.scores, d.labels).auprc == doctest::Approx(oracle::auprc(d.scores, d.labels)).epsilon(1e-12));
        REQUIRE(auroc(d.scores, d.labels) == doctest::Approx(oracle::auroc(d.scores, d.labels)).epsilon(1e-12));
    }
}

TEST_CASE("ranking metrics are invariant to strictly increasing transforms") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = random_labelled(gen, 80, 40);
        std::vector<float> affine, expo;
        for (float v : d.scores) {
            affine.push_back(3.0f * v + 2.0f);
            expo.push_back(std::exp(v));
        }
        const double base = prc_and_auprc(d.scores, d.labels).auprc;
        REQUIRE(prc_and_auprc(affine, d.labels).auprc == doctest::Approx(base).epsilon(1e-12));
        REQUIRE(prc_and_auprc(expo, d.labels).auprc == doctest::Approx(base).epsilon(1e-12));
        REQUIRE(auroc(expo, d.labels) == doctest::Approx(auroc(d.scores, d.labels)).epsilon(1e-12));
    }
}

TEST_CASE("AUROC of shuffled labels hovers around one half") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::bernoulli_distribution b(0.5);
    std::vector<float> s(20000);
    std::vector<std::uint8_t> l(20000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(gen);
        l[i] = b(gen) ? 1 : 0;
    }
    const double a = auroc(s, l);
    CHECK(a > 0.45);
    CHECK(a < 0.55);
}

TEST_CASE("degenerate labels are rejected") {
    const std::vector<float> s{0.1f, 0.2f};
    const std::vector<std::uint8_t> zeros{0, 0}, ones{1, 1};
    CHECK_THROWS_AS(prc_and_auprc(s, zeros), Error);
    CHECK_THROWS_AS(prc_and_auprc(s, ones), Error);
    CHECK_THROWS_AS(auroc(s, zeros), Error);
}

TEST_CASE("DICE basics") {
    MaskGrid a({4, 1, 1}, 0), b({4, 1, 1}, 0);
    CHECK(dice(a, b) == 1.0);
    a[0] = a[1] = 1;
    b[1] = b[2] = 1;
    CHECK(dice(a, b) == doctest::Approx(0.5));
    CHECK(dice(a, a) == 1.0);
    CHECK(dice_from_counts(0, 3, 0) == 0.0);

    std::mt19937_64 gen(14);
    for (int trial = 0; trial < 100; ++trial) {
        const MaskGrid x = oracle::random_mask({6, 6, 6}, gen, 0.3), y = oracle::random_mask({6, 6, 6}, gen, 0.3);
        REQUIRE(dice(x, y) == doctest::Approx(oracle::dice(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("greedy best DICE equals the exhaustive grid search") {
    std::mt19937_64 gen(15);
    PostprocConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        const Shape3 s{8, 8, 8};
        std::vector<FloatGrid> scores;
        std::vector<MaskGrid> gts;
        for (int v = 0; v < 2; ++v) {
            FloatGrid g = oracle::random_grid(s, gen, 0.0f, 0.6f);
            MaskGrid gt = oracle::random_mask(s, gen, 0.02);
            // A brighter block that mostly overlaps a lesion block.
            const int o = static_cast<int>(gen() % 4);
            for (int z = o; z < o + 3; ++z)
                for (int y = o; y < o + 3; ++y)
                    for (int x = o; x < o + 3; ++x) {
                        g(x, y, z) = std::min(1.0f, g(x, y, z) + 0.4f);
                        gt(x, y + 1, z) = 1;
                    }
            // Snap a share of voxels onto grid thresholds to exercise ties.
            for (std::size_t i = 0; i < g.size(); i += 5) g[i] = std::round(g[i] * 100.0f) / 100.0f;
            scores.push_back(std::move(g));
            gts.push_back(std::move(gt));
        }
        std::vector<ScoredSubject> subj{{&scores[0], &gts[0]}, {&scores[1], &gts[1]}};
        const auto got = greedy_best_dice(subj, cfg);
        const auto [want, want_t] = oracle::best_dice_grid(scores, gts, cfg.min_component_voxels, cfg.connectivity);
        REQUIRE(got.dice == doctest::Approx(want).epsilon(1e-12));
        REQUIRE(got.threshold == doctest::Approx(want_t));
        REQUIRE(pooled_dice_at(subj, got.threshold, cfg) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("greedy best DICE on a 16^3 volume") {
    std::mt19937_64 gen(16);
    const Shape3 s{16, 16, 16};
    FloatGrid g = oracle::random_grid(s, gen, 0.0f, 0.5f);
    MaskGrid gt(s, 0);
    for (int z = 4; z < 10; ++z)
        for (int y = 5; y < 11; ++y)
            for (int x = 3; x < 9; ++x) {
                gt(x, y, z) = 1;
                g(x, y, z) += 0.3f;
            }
    PostprocConfig cfg;
    const auto got = greedy_best_dice({{&g, &gt}}, cfg);
    const auto [want, want_t] = oracle::best_dice_grid({g}, {gt}, cfg.min_component_voxels, cfg.connectivity);
    CHECK(got.dice == doctest::Approx(want).epsilon(1e-12));
    CHECK(got.threshold == doctest::Approx(want_t));
    CHECK(got.dice > 0.5);
}

TEST_CASE("per-patient DICE at an operating point") {
    const Shape3 s{10, 10, 10};
    FloatGrid hit(s, 0.0f), miss(s, 0.0f);
    MaskGrid gt(s, 0);
    for (int z = 2; z < 5; ++z)
        for (int y = 2; y < 5; ++y)
            for (int x = 2; x < 5; ++x) {
                gt(x, y, z) = 1;
                hit(x, y, z) = 0.9f;
            }
    const auto out = dice_at_op({{&hit, &gt}, {&miss, &gt}}, 0.5, PostprocConfig{});
    REQUIRE(out.per_patient.size() == 2);
    CHECK(out.per_patient[0] == doctest::Approx(1.0));
    CHECK(out.per_patient[1] == doctest::Approx(0.0));
    CHECK(out.summary.mean == doctest::Approx(0.5));
    CHECK(out.summary.std == doctest::Approx(0.5));
}

TEST_CASE("residual statistics split normal and lesion voxels") {
    const std::vector<float> s{0.1f, 0.3f, 0.9f, 0.7f, 5.0f};
    const std::vector<std::uint8_t> gt{0, 0, 1, 1, 0};
    const std::vector<std::uint8_t> brain{1, 1, 1, 1, 0};
    const auto st = residual_stats(s, gt, brain);
    CHECK(st.normal.mean == doctest::Approx(0.2));
    CHECK(st.normal.std == doctest::Approx(0.1));
    REQUIRE(st.anomalous.has_value());
    CHECK(st.anomalous->mean == doctest::Approx(0.8));
    CHECK(st.anomalous->std == doctest::Approx(0.1));

    const std::vector<std::uint8_t> none{0, 0, 0, 0, 0};
    CHECK_FALSE(residual_stats(s, none, brain).anomalous.has_value());
}

TEST_CASE("residual histograms are normalized over (0, 1]") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> s(5000);
    std::vector<std::uint8_t> gt(5000), brain(5000, 1);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = i % 10 == 0 ? 0.0f : u(gen);
        gt[i] = i % 3 == 0 ? 1 : 0;
    }
    const auto h = residual_histograms(s, gt, brain);
    REQUIRE(h.normal.size() == 100);
    REQUIRE(h.anomalous.size() == 100);
    double sn = 0, sa = 0;
    for (int b = 0; b < 100; ++b) {
        sn += h.normal[static_cast<std::size_t>(b)];
        sa += h.anomalous[static_cast<std::size_t>(b)];
    }
    CHECK(sn == doctest::Approx(1.0));
    CHECK(sa == doctest::Approx(1.0));

    // 1.0 lands in the last bin, 0.005 in the first.
    const std::vector<float> edge{1.0f, 0.005f};
    const std::vector<std::uint8_t> g2{0, 0}, b2{1, 1};
    const auto he = residual_histograms(edge, g2, b2);
    CHECK(he.normal.front() == doctest::Approx(0.5));
    CHECK(he.normal.back() == doctest::Approx(0.5));
}

TEST_CASE("chi-square distance") {
    const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
    CHECK(chi_square_distance(p, q) == doctest::Approx(1.0));
    CHECK(chi_square_distance(p, p) == 0.0);
    const std::vector<double> short_q{1.0};
    CHECK_THROWS_AS(chi_square_distance(p, short_q), Error);

    std::mt19937_64 gen(18);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(100), b(100);
        double sa = 0, sb = 0;
        for (std::size_t i = 0; i < 100; ++i) {
            a[i] = u(gen) < 0.2 ? 0.0 : u(gen);
            b[i] = u(gen);
            sa += a[i];
            sb += b[i];
        }
        for (std::size_t i = 0; i < 100; ++i) {
            a[i] /= sa;
            b[i] /= sb;
        }
        const double d = chi_square_distance(a, b);
        REQUIRE(d == doctest::Approx(oracle::chi_square(a, b)).epsilon(1e-12));
        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0 + 1e-12);
    }
}

TEST_CASE("Pearson agrees with the sample-covariance form") {
    std::mt19937_64 gen(19);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(30), y(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = n(gen);
            y[i] = 0.5 * x[i] + n(gen);
        }
        const auto r = pearson(x, y);
        REQUIRE(r.has_value());
        REQUIRE(std::abs(*r - oracle::pearson(x, y)) < 1e-9);
    }
    const std::vector<double> flat(5, 2.0), ramp{1, 2, 3, 4, 5};
    CHECK_FALSE(pearson(flat, ramp).has_value());
    CHECK(*pearson(ramp, ramp) == doctest::Approx(1.0));
}

TEST_CASE("correlation matrix is symmetric with a unit diagonal") {
    std::vector<CorrelationRow> rows{{0.1, 0.2, 0.05, 0.2, 0.3}, {0.3, 0.4, 0.04, 0.3, 0.5}, {0.2, 0.1, 0.06, 0.1, 0.2},
                                     {0.4, 0.5, 0.03, 0.4, 0.7}};
    const auto m = correlation_matrix(rows);
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(m[i][i].has_value());
        CHECK(*m[i][i] == doctest::Approx(1.0));
        for (std::size_t j = 0; j < 5; ++j) {
            REQUIRE(m[i][j].has_value());
            CHECK(*m[i][j] == doctest::Approx(*m[j][i]));
        }
    }
    rows.resize(2);
    CHECK_THROWS_AS(correlation_matrix(rows), Error);
}
