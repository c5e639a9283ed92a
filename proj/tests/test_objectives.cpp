#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mf/objectives.hpp"
#include "oracles.hpp"

using namespace mf;

TEST_CASE("focal regularization vanishes on perfect agreeing predictions") {
    Matrix y = Matrix::full(3, 3, 1.0);
    Matrix ones = Matrix::full(3, 3, 1.0);
    CHECK(focal_regularization(ones, ones, y) < 1e-6);

    // Perfect on a mixed mask under the true-class reading.
    Matrix y2(2, 2);
    y2(0, 0) = 1.0;
    Matrix p = y2;
    CHECK(focal_regularization(p, p, y2) < 1e-6);
}

TEST_CASE("focal regularization single-pixel value") {
    Matrix y{{1.0}};
    Matrix half{{0.5}};
    const double got = focal_regularization(half, half, y);
    const double want = 0.25 * (1.0 - 0.5 * 0.5) * (1.0 - 0.5 * 0.5) * std::log(2.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.09748).epsilon(1e-3));
}

TEST_CASE("focal regularization stays finite at the clamp boundary") {
    Matrix y{{1.0}};
    Matrix tiny{{1e-7}};
    Matrix half{{0.5}};
    const double v = focal_regularization(tiny, half, y);
    CHECK(std::isfinite(v));
    CHECK(v > 1.0); // large but finite
}

TEST_CASE("focal regularization is positive unless perfect") {
    Rng rng(1);
    Matrix y(4, 4);
    y(0, 1) = y(2, 2) = y(3, 0) = 1.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix pr = rng.uniform_matrix(4, 4, 0.05, 0.95);
        const Matrix pd = rng.uniform_matrix(4, 4, 0.05, 0.95);
        const double v = focal_regularization(pr, pd, y);
        CHECK(v > 0.0);
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("literal mode reproduces the verbatim formula") {
    Matrix y(1, 2); // one bg pixel, one fg pixel
    y(0, 1) = 1.0;
    Matrix pr{{0.3, 0.6}};
    Matrix pd{{0.4, 0.7}};
    FocalConfig cfg;
    cfg.literal = true;
    const double got = focal_regularization(pr, pd, y, cfg);
    auto term = [](double alpha, double p_r, double p_d) {
        const double dice = 2.0 * p_r * p_d / (p_r + p_d);
        return -alpha * (1.0 - p_r * dice) * (1.0 - p_r * dice) * std::log(p_r);
    };
    const double want = (term(0.75, 0.3, 0.4) + term(0.25, 0.6, 0.7)) / 2.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("position weight is 1 on constant masks") {
    for (double c : {0.0, 1.0}) {
        const Matrix w = position_weight(Matrix::full(8, 8, c), 5);
        for (double v : w.vec()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("position weight on a single interior foreground pixel") {
    const int k = 5;
    Matrix y(16, 16);
    y(8, 8) = 1.0;
    const Matrix w = position_weight(y, k);
    const double want = 1.0 + 5.0 * (1.0 - 1.0 / (k * k));
    CHECK(w(8, 8) == doctest::Approx(want).epsilon(1e-12));
    // Far corner is untouched by the window.
    CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("position weight on a checkerboard with 3x3 windows") {
    const int s = 9;
    Matrix y(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) y(i, j) = (i + j) % 2 == 0 ? 1.0 : 0.0;
    const Matrix w = position_weight(y, 3);
    for (int i = 1; i < s - 1; ++i)
        for (int j = 1; j < s - 1; ++j) {
            const double ap = y(i, j) == 1.0 ? 5.0 / 9.0 : 4.0 / 9.0;
            CHECK(w(i, j) == doctest::Approx(1.0 + 5.0 * std::abs(ap - y(i, j))).epsilon(1e-12));
        }
}

TEST_CASE("pixel-position-aware loss on perfect binary prediction is ~0") {
    Matrix y(6, 6);
    for (int i = 2; i < 5; ++i)
        for (int j = 1; j < 4; ++j) y(i, j) = 1.0;
    CHECK(pixel_position_aware_loss(y, y, 5) <= 1e-6);
}

TEST_CASE("pixel-position-aware loss closed form at p=0.5 on all-ones mask") {
    const int s = 8, k = 5;
    const Matrix y = Matrix::full(s, s, 1.0);
    const Matrix p = Matrix::full(s, s, 0.5);
    const Matrix w = position_weight(y, k);
    const double ws = sum_all(w);
    const double want_bce = std::log(2.0);
    const double want_iou = 1.0 - (0.5 * ws + 1.0) / (ws + 1.0);
    const double got = pixel_position_aware_loss(p, y, k);
    CHECK(got == doctest::Approx(0.5 * (want_bce + want_iou)).epsilon(1e-9));
}

TEST_CASE("pixel-position-aware loss is finite at the extremes") {
    Matrix y = Matrix::full(4, 4, 1.0);
    const double v = pixel_position_aware_loss(Matrix(4, 4), y, 3);
    CHECK(std::isfinite(v));
    CHECK(v > 1.0);
    CHECK_THROWS_AS(pixel_position_aware_loss(Matrix(3, 3), y, 3), ShapeError);
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(3);
    Matrix y(4, 4);
    y(1, 1) = y(1, 2) = y(2, 2) = 1.0;
    Matrix p = rng.uniform_matrix(4, 4, 0.1, 0.9);
    Matrix p2 = rng.uniform_matrix(4, 4, 0.1, 0.9);

    SUBCASE("pixel position aware") {
        auto f = [&]() {
            Tape t;
            return t.val(pixel_position_aware_loss_t(t, t.constant(p), y, 3))(0, 0);
        };
        Tape t;
        Var pv = t.leaf(p, true);
        t.backward(pixel_position_aware_loss_t(t, pv, y, 3));
        std::vector<double*> slots;
        std::vector<double> analytic;
        for (size_t i = 0; i < p.size(); ++i) {
            slots.push_back(&p.data()[i]);
            analytic.push_back(t.grad(pv).data()[i]);
        }
        CHECK(oracle::fd_max_rel_err(f, slots, analytic) < 1e-4);
    }
    SUBCASE("focal both arguments") {
        auto f = [&]() {
            Tape t;
            return t.val(focal_regularization_t(t, t.constant(p), t.constant(p2), y))(0, 0);
        };
        Tape t;
        Var pr = t.leaf(p, true);
        Var pd = t.leaf(p2, true);
        t.backward(focal_regularization_t(t, pr, pd, y));
        std::vector<double*> slots;
        std::vector<double> analytic;
        for (size_t i = 0; i < p.size(); ++i) {
            slots.push_back(&p.data()[i]);
            analytic.push_back(t.grad(pr).data()[i]);
        }
        for (size_t i = 0; i < p2.size(); ++i) {
            slots.push_back(&p2.data()[i]);
            analytic.push_back(t.grad(pd).data()[i]);
        }
        CHECK(oracle::fd_max_rel_err(f, slots, analytic) < 1e-4);
    }
}

TEST_CASE("total loss: lambda = 0 collapses to L_P") {
    const LossBreakdown lb = total_loss({0.7, 0.3}, {0.1, 0.2, 0.3, 0.4}, {{1, 2}, {3, 4}, {5, 6}, {7, 8}}, 0.0);
    CHECK(lb.total == lb.l_p);
}

TEST_CASE("total loss: unit components arithmetic") {
    const LossBreakdown lb = total_loss({1, 1}, {1, 1, 1, 1}, {}, 0.0);
    CHECK(lb.l_p == doctest::Approx(1.9375).epsilon(1e-15));
    CHECK(lb.total == doctest::Approx(1.9375).epsilon(1e-15));
}

TEST_CASE("total loss: lambda blend") {
    // L_P = 1 with focal sum 1 at lambda 0.4 gives exactly 1.
    const LossBreakdown lb = total_loss({1.0, 1.0}, {0, 0, 0, 0}, {{0.25, 0.25}, {0.25, 0.25}, {0, 0}, {0, 0}}, 0.4);
    CHECK(lb.l_p == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lb.focal_sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lb.total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("total loss is affine in lambda") {
    const std::vector<double> dec{0.9, 0.5};
    const std::vector<double> lev{0.2, 0.3, 0.4, 0.5};
    const std::vector<std::pair<double, double>> foc{{0.1, 0.2}, {0.3, 0.1}, {0.2, 0.2}, {0.1, 0.1}};
    const double t0 = total_loss(dec, lev, foc, 0.0).total;
    const double t4 = total_loss(dec, lev, foc, 0.4).total;
    const double t8 = total_loss(dec, lev, foc, 0.8).total;
    CHECK(t4 == doctest::Approx(0.5 * (t0 + t8)).epsilon(1e-12));
}

TEST_CASE("total loss input validation") {
    CHECK_THROWS_AS(total_loss({}, {1, 1, 1, 1}, {}, 0.2), DomainError);
    CHECK_THROWS_AS(total_loss({1}, {1, 1}, {}, 0.2), DomainError);
    CHECK_THROWS_AS(total_loss({1}, {1, 1, 1, 1}, {}, 0.95), DomainError);
}
