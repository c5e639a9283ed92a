#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mf/metrics.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

Matrix random_pred(Rng& rng, int h, int w) { return rng.uniform_matrix(h, w, 0.0, 1.0); }

Matrix random_mask(Rng& rng, int h, int w, double fg_prob = 0.4) {
    Matrix m(h, w);
    for (double& v : m.vec()) v = rng.uniform() < fg_prob ? 1.0 : 0.0;
    return m;
}

Matrix blob_mask(int h, int w, int cy, int cx, int r) {
    Matrix m(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if ((i - cy) * (i - cy) + (j - cx) * (j - cx) <= r * r) m(i, j) = 1.0;
    return m;
}

} // namespace

TEST_CASE("mae basics") {
    Matrix gt(2, 2);
    gt(0, 1) = gt(1, 0) = 1.0;
    CHECK(mae(gt, gt) == 0.0);
    CHECK(mae(Matrix::full(2, 2, 1.0), Matrix(2, 2)) == 1.0);
    const Matrix pred{{0.2, 0.8}, {0.5, 0.0}};
    CHECK(mae(pred, gt) == doctest::Approx(0.225).epsilon(1e-15));
    CHECK_THROWS_AS(mae(Matrix(2, 3), gt), ShapeError);
}

TEST_CASE("pr curve on a perfect binary prediction") {
    Matrix gt(3, 3);
    gt(1, 1) = gt(0, 2) = 1.0;
    const PrCurve c = pr_curve(gt, gt);
    for (int k = 1; k < 256; ++k) {
        CHECK(c.points[k].precision == 1.0);
        CHECK(c.points[k].recall == 1.0);
    }
    // Threshold 0 marks everything positive.
    CHECK(c.points[0].recall == 1.0);
    CHECK(c.points[0].precision == doctest::Approx(2.0 / 9.0));
}

TEST_CASE("pr curve at constant 0.5 with half foreground") {
    Matrix gt(2, 2);
    gt(0, 0) = gt(0, 1) = 1.0;
    const Matrix pred = Matrix::full(2, 2, 0.5);
    const PrCurve c = pr_curve(pred, gt);
    for (int k = 0; k < 256; ++k) {
        if (k / 255.0 <= 0.5) {
            CHECK(c.points[k].precision == 0.5);
            CHECK(c.points[k].recall == 1.0);
        } else {
            CHECK(c.points[k].precision == 1.0); // zero-prediction convention
            CHECK(c.points[k].recall == 0.0);
        }
    }
}

TEST_CASE("pr curve rejects empty-foreground masks") {
    CHECK_THROWS_AS(pr_curve(Matrix(2, 2), Matrix(2, 2)), DomainError);
}

TEST_CASE("recall is non-increasing in the threshold") {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix gt = random_mask(rng, 6, 6);
        if (sum_all(gt) == 0.0) gt(0, 0) = 1.0;
        const PrCurve c = pr_curve(random_pred(rng, 6, 6), gt);
        for (int k = 1; k < 256; ++k) CHECK(c.points[k].recall <= c.points[k - 1].recall + 1e-15);
    }
}

TEST_CASE("f-measure max analytic points") {
    PrCurve c;
    for (auto& p : c.points) p = {0.0, 0.0};
    c.points[0] = {1.0, 1.0};
    CHECK(f_measure_max(c) == doctest::Approx(1.0).epsilon(1e-15));

    for (auto& p : c.points) p = {1.0, 0.0};
    CHECK(f_measure_max(c) == 0.0);

    for (auto& p : c.points) p = {0.0, 0.0};
    c.points[10] = {0.8, 0.6};
    CHECK(f_measure_max(c) == doctest::Approx(1.3 * 0.8 * 0.6 / (0.3 * 0.8 + 0.6)).epsilon(1e-15));
    CHECK(f_measure_max(c) == doctest::Approx(0.742857142857).epsilon(1e-9));
}

TEST_CASE("exhaustive 3x3 binary pairs: P, R, F, MAE match counting") {
    std::array<PrPoint, 256> unused{};
    (void)unused;
    for (int gt_bits = 1; gt_bits < 512; ++gt_bits) {
        Matrix gt(3, 3);
        for (int b = 0; b < 9; ++b) gt.data()[b] = (gt_bits >> b) & 1 ? 1.0 : 0.0;
        for (int pred_bits = 0; pred_bits < 512; pred_bits += 37) { // sampled stride keeps runtime low
            Matrix pred(3, 3);
            for (int b = 0; b < 9; ++b) pred.data()[b] = (pred_bits >> b) & 1 ? 1.0 : 0.0;
            const PrCurve c = pr_curve(pred, gt);
            const oracle::Counts at_half = oracle::count_at(pred, gt, 128.0 / 255.0);
            const double want_p = (at_half.tp + at_half.fp) > 0 ? double(at_half.tp) / (at_half.tp + at_half.fp) : 1.0;
            const double want_r = double(at_half.tp) / (at_half.tp + at_half.fn);
            CHECK(c.points[128].precision == doctest::Approx(want_p).epsilon(1e-12));
            CHECK(c.points[128].recall == doctest::Approx(want_r).epsilon(1e-12));
            double want_mae = 0.0;
            for (int b = 0; b < 9; ++b) want_mae += std::abs(pred.data()[b] - gt.data()[b]);
            CHECK(mae(pred, gt) == doctest::Approx(want_mae / 9.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("s-measure: perfect binary prediction scores exactly 1") {
    Matrix gt = blob_mask(16, 16, 8, 8, 4);
    CHECK(s_measure(gt, gt) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("s-measure degenerate masks") {
    Rng rng(2);
    const Matrix pred = random_pred(rng, 8, 8);
    CHECK(s_measure(pred, Matrix(8, 8)) == doctest::Approx(1.0 - mean_all(pred)).epsilon(1e-15));
    CHECK(s_measure(pred, Matrix::full(8, 8, 1.0)) == doctest::Approx(mean_all(pred)).epsilon(1e-15));
}

TEST_CASE("s-measure matches the reference reimplementation") {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const Matrix gt = trial % 2 == 0 ? blob_mask(16, 16, rng.uniform_int(4, 11), rng.uniform_int(4, 11), 3)
                                         : random_mask(rng, 16, 16, 0.3);
        if (sum_all(gt) == 0.0 || sum_all(gt) == gt.size()) continue;
        const Matrix pred = random_pred(rng, 16, 16);
        CHECK(s_measure(pred, gt) == doctest::Approx(oracle::reference_s_measure(pred, gt)).epsilon(1e-12));
        // Inverted prediction also agrees with the oracle.
        const Matrix inv = affine(pred, -1.0, 1.0);
        CHECK(s_measure(inv, gt) == doctest::Approx(oracle::reference_s_measure(inv, gt)).epsilon(1e-12));
    }
}

TEST_CASE("e-measure: perfect binary prediction scores exactly 1") {
    Matrix gt = blob_mask(12, 12, 6, 6, 3);
    CHECK(e_measure_max(gt, gt) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("e-measure matches the reference reimplementation") {
    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        Matrix gt = random_mask(rng, 12, 12, 0.35);
        if (sum_all(gt) == 0.0) gt(5, 5) = 1.0;
        const Matrix pred = random_pred(rng, 12, 12);
        CHECK(e_measure_max(pred, gt) == doctest::Approx(oracle::reference_e_measure_max(pred, gt)).epsilon(1e-12));
    }
}

TEST_CASE("e-measure degenerate: prediction equal to the mask mean") {
    Matrix gt = blob_mask(10, 10, 5, 5, 2);
    const Matrix pred = Matrix::full(10, 10, mean_all(gt));
    CHECK(e_measure_max(pred, gt) ==
          doctest::Approx(oracle::reference_e_measure_max(pred, gt)).epsilon(1e-12));
}

TEST_CASE("metrics live in [0,1]") {
    Rng rng(5);
    for (int trial = 0; trial < 15; ++trial) {
        Matrix gt = random_mask(rng, 10, 10, 0.4);
        if (sum_all(gt) == 0.0) gt(0, 0) = 1.0;
        const Matrix pred = random_pred(rng, 10, 10);
        const double s = s_measure(pred, gt);
        const double e = e_measure_max(pred, gt);
        const double m = mae(pred, gt);
        const double f = f_measure_max(pr_curve(pred, gt));
        for (double v : {s, e, m, f}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("MAE and per-threshold P/R are permutation invariant") {
    Rng rng(6);
    Matrix gt = random_mask(rng, 5, 5, 0.4);
    if (sum_all(gt) == 0.0) gt(2, 2) = 1.0;
    const Matrix pred = random_pred(rng, 5, 5);

    // A fixed permutation of the 25 pixels applied to both maps.
    std::vector<int> perm(25);
    for (int i = 0; i < 25; ++i) perm[i] = (i * 7 + 3) % 25;
    Matrix gtp(5, 5), predp(5, 5);
    for (int i = 0; i < 25; ++i) {
        gtp.data()[i] = gt.data()[perm[i]];
        predp.data()[i] = pred.data()[perm[i]];
    }
    CHECK(mae(pred, gt) == doctest::Approx(mae(predp, gtp)).epsilon(1e-15));
    const PrCurve a = pr_curve(pred, gt);
    const PrCurve b = pr_curve(predp, gtp);
    for (int k = 0; k < 256; ++k) {
        CHECK(a.points[k].precision == b.points[k].precision);
        CHECK(a.points[k].recall == b.points[k].recall);
    }
}

TEST_CASE("S and E are stable under identical interior translations") {
    // Interior-supported pred/gt shifted together: E is exactly invariant;
    // S moves only through quadrant re-weighting (border effects).
    Matrix gt(16, 16), pred(16, 16);
    for (int i = 5; i < 9; ++i)
        for (int j = 5; j < 9; ++j) {
            gt(i, j) = 1.0;
            pred(i, j) = 0.9;
        }
    pred(6, 6) = 0.4;
    Matrix gt2(16, 16), pred2(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            if (i >= 2 && j >= 3) {
                gt2(i, j) = gt(i - 2, j - 3);
                pred2(i, j) = pred(i - 2, j - 3);
            }
    CHECK(e_measure_max(pred2, gt2) == doctest::Approx(e_measure_max(pred, gt)).epsilon(1e-12));
    CHECK(s_measure(pred2, gt2) == doctest::Approx(s_measure(pred, gt)).epsilon(0.05));
}
