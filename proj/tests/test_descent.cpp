#include "priorseg/contour.hpp"
#include "priorseg/descent.hpp"
#include "priorseg/errors.hpp"
#include "priorseg/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace priorseg {
namespace {

ScalarField circle(int size, double r, double cx, double cy, double scale = 1.0)
{
    return ScalarField::generate(size, size, [&](int x, int y) { return scale * (std::hypot(x - cx, y - cy) - r); });
}

ShapeModel disk_model(int size, std::vector<double> radii)
{
    std::vector<ScalarField> sdfs;
    const double c = 0.5 * (size - 1);
    for (double r : radii) {
        sdfs.push_back(sdf_from_mask(BinaryMask::generate(size, size, [&](int x, int y) { return std::hypot(x - c, y - c) <= r; })));
    }
    return build_shape_model(sdfs, static_cast<int>(radii.size()) - 1);
}

// Change of the total energy under phi(x, y) += h, from the densities the probe touches.
double local_difference(const SegmentationState& s, const ScalarField& img, const ScalarField& g, const ShapeModel* m,
                        const EnergyWeights& w, int x, int y, double h)
{
    auto plus = s;
    auto minus = s;
    plus.phi(x, y) += h;
    minus.phi(x, y) -= h;
    const auto dp = term_densities(plus, img, g, m, w).weighted(w);
    const auto dm = term_densities(minus, img, g, m, w).weighted(w);
    double acc = 0;
    for (int yy = std::max(0, y - 1); yy <= y; ++yy) {
        for (int xx = std::max(0, x - 1); xx <= x; ++xx) {
            acc += dp(yy, xx) - dm(yy, xx);
        }
    }
    return acc / (2 * h);
}

class DescentFixture : public ::testing::Test
{
protected:
    void SetUp() override
    {
        SceneSpec spec;
        spec.width = spec.height = 48;
        spec.shape = Disk{24.0, 22.5, 12.0};
        spec.noise_std = 5;
        spec.noise_seed = 3;
        img = render(spec).first;
        model = disk_model(48, {8, 11, 14, 16});
        g = edge_indicator(img, w.eta, w.sigma);
        w.gamma = 0.05;
        state.phi = circle(48, 13, 23.2, 24.1);
        state.phi.array() += 0.3 * (0.2 * state.phi.array()).sin();
        state.lambda = Eigen::Vector3d(2.0, -1.0, 0.5);
        state.pose = Pose{1.04, 0.07, 0.6, -0.8};
        state.i_in = ScalarField::generate(48, 48, [](int x, int) { return 190.0 + 0.2 * x; });
        state.i_out = ScalarField::generate(48, 48, [](int, int y) { return 55.0 - 0.1 * y; });
    }

    ScalarField img;
    ShapeModel model;
    ScalarField g;
    EnergyWeights w;
    SegmentationState state;
};

TEST_F(DescentFixture, PhiGradientMatchesFiniteDifferences)
{
    const auto grad_phi = grad_phi_total(state, img, g, &model, w);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> coord(0, 47);
    for (int i = 0; i < 200; ++i) {
        const int x = coord(rng), y = coord(rng);
        const double fd = local_difference(state, img, g, &model, w, x, y, 1e-5);
        EXPECT_NEAR(grad_phi(x, y), fd, std::max(1e-9, 1e-5 * std::abs(fd))) << x << "," << y;
    }
}

TEST_F(DescentFixture, PhiGradientMatchesTotalEnergyDifferences)
{
    // Same check through the full total, near the interface where entries are large.
    const auto grad_phi = grad_phi_total(state, img, g, &model, w);
    for (int x = 8; x < 40; x += 3) {
        const int y = 12;
        auto plus = state, minus = state;
        plus.phi(x, y) += 1e-4;
        minus.phi(x, y) -= 1e-4;
        const double fd =
            (total_energy(plus, img, g, &model, w).total - total_energy(minus, img, g, &model, w).total) / 2e-4;
        EXPECT_NEAR(grad_phi(x, y), fd, 1e-6 + 1e-5 * std::abs(fd)) << x;
    }
}

TEST_F(DescentFixture, PhiGradientPriorFreeAndArctan)
{
    auto wa = w;
    wa.heaviside = HeavisideKind::arctan;
    for (const ShapeModel* m : std::vector<const ShapeModel*>{nullptr, &model}) {
        const auto grad_phi = grad_phi_total(state, img, g, m, wa);
        std::mt19937_64 rng(5);
        std::uniform_int_distribution<int> coord(0, 47);
        for (int i = 0; i < 60; ++i) {
            const int x = coord(rng), y = coord(rng);
            const double fd = local_difference(state, img, g, m, wa, x, y, 1e-5);
            EXPECT_NEAR(grad_phi(x, y), fd, std::max(1e-9, 1e-5 * std::abs(fd)));
        }
    }
}

TEST(PhiGradientTest, ExactDistanceIsCriticalForF1)
{
    EnergyWeights w;
    w.beta = 0;
    w.gamma = 0;
    w.xi = 0;
    SegmentationState s;
    s.phi = ScalarField::generate(64, 64, [](int x, int) { return x - 32.0; });
    const ScalarField img(64, 64, 0.0);
    const ScalarField g(64, 64, 1.0);
    const auto grad_phi = grad_phi_total(s, img, g, nullptr, w);
    EXPECT_LE(grad_phi.array().abs().maxCoeff(), 1e-7);
}

TEST_F(DescentFixture, F1ComponentIsLinearInAlpha)
{
    auto w1 = w;
    w1.beta = 0;
    w1.xi = 0;
    w1.gamma = 0;
    auto w2 = w1;
    w2.alpha = 2 * w1.alpha;
    const auto a = grad_phi_total(state, img, g, nullptr, w1);
    const auto b = grad_phi_total(state, img, g, nullptr, w2);
    EXPECT_LE((b.array() - 2 * a.array()).abs().maxCoeff(), 1e-12 * a.array().abs().maxCoeff());
}

TEST_F(DescentFixture, ParameterGradientVanishesWithoutPriorWeights)
{
    auto w0 = w;
    w0.gamma = 0;
    w0.nu = 0;
    const auto gp = grad_params(state, img, g, &model, w0, 1e-3);
    ASSERT_EQ(gp.size(), 3 + 4);
    EXPECT_LE(gp.cwiseAbs().maxCoeff(), 1e-10);
    const auto free = grad_params(state, img, g, nullptr, w, 1e-3);
    ASSERT_EQ(free.size(), 3 + 4);
    EXPECT_EQ(free.cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(DescentFixture, ParameterGradientMatchesLineProbes)
{
    const auto gp = grad_params(state, img, g, &model, w, 1e-3);
    const double e0 = total_energy(state, img, g, &model, w).total;
    // Step along -gradient in each coordinate separately; energy must drop.
    for (int k = 0; k < gp.size(); ++k) {
        if (std::abs(gp[k]) < 1e-6) {
            continue;
        }
        auto s = state;
        const double t = 1e-4 / std::abs(gp[k]);
        if (k < 3) {
            s.lambda[k] -= t * gp[k];
        } else {
            auto v = s.pose.to_vector();
            v[k - 3] -= t * gp[k];
            s.pose = Pose::from_vector(v);
        }
        EXPECT_LT(total_energy(s, img, g, &model, w).total, e0) << k;
    }
}

TEST_F(DescentFixture, ParameterGradientRichardson)
{
    // Lambda and translation are smooth in the energy: halving the probe must
    // shrink the error like h^2 (ratio near 4).
    const auto g1 = grad_params(state, img, g, &model, w, 1e-1);
    const auto g2 = grad_params(state, img, g, &model, w, 5e-2);
    const auto g4 = grad_params(state, img, g, &model, w, 2.5e-2);
    for (int k : {0, 1, 2}) {
        const double e1 = std::abs(g1[k] - g2[k]);
        const double e2 = std::abs(g2[k] - g4[k]);
        EXPECT_GE(e1 / e2, 3.5) << k;
    }
}

TEST_F(DescentFixture, ParameterGradientOneSidedAtBox)
{
    auto s = state;
    s.lambda[0] = model.lambda_upper[0];
    s.pose.tau = 4.0;
    const auto gp = grad_params(s, img, g, &model, w, 1e-3);
    EXPECT_TRUE(gp.allFinite());
    // The probe never leaves the box, so the energy is only ever evaluated inside it.
    EXPECT_NE(gp[0], 0.0);
}

TEST(ParamGradientTest, TranslationPointsTowardAlignment)
{
    SceneSpec spec;
    spec.width = spec.height = 64;
    spec.shape = Disk{31.5, 31.5, 12.0};
    const auto img = render(spec).first;
    const auto model = disk_model(64, {10, 12, 14});
    EnergyWeights w;
    w.gamma = 0.05;
    const auto g = edge_indicator(img, w.eta, w.sigma);
    SegmentationState s;
    s.phi = circle(64, 12, 31.5, 31.5);
    s.lambda = project_shape(model, sdf_from_mask(render(spec).second));
    s.pose = Pose{1, 0, 5, 0}; // prior sampled 5 px to the right: its shape sits 5 px left
    s.i_in = ScalarField(64, 64, 200.0);
    s.i_out = ScalarField(64, 64, 50.0);
    const auto gp = grad_params(s, img, g, &model, w, 1e-3);
    const double tx_grad = gp[model.num_modes() + 2];
    EXPECT_GT(tx_grad, 0.0);
    const double e0 = total_energy(s, img, g, &model, w).total;
    auto moved = s;
    moved.pose.tx -= 0.5;
    EXPECT_LT(total_energy(moved, img, g, &model, w).total, e0);
}

TEST(SmoothApproximantTest, ZeroMuReturnsImageOnSupport)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 255);
    const auto img = ScalarField::generate(20, 14, [&](int, int) { return u(rng); });
    FieldArray<double> weight = FieldArray<double>::Zero(14, 20);
    weight.leftCols(10) = 0.3;
    const ScalarField warm(20, 14, -7.0);
    const auto j = solve_smooth_approximant(img, weight, 0.0, 3, warm);
    for (int y = 0; y < 14; ++y) {
        for (int x = 0; x < 20; ++x) {
            EXPECT_NEAR(j(x, y), x < 10 ? img(x, y) : -7.0, 1e-15);
        }
    }
}

TEST(SmoothApproximantTest, LargeMuApproachesMean)
{
    const auto img = ScalarField::generate(24, 24, [](int x, int) { return x < 12 ? 0.0 : 100.0; });
    const FieldArray<double> weight = FieldArray<double>::Ones(24, 24);
    const auto j = solve_smooth_approximant(img, weight, 1e4, 20000, img);
    const double mean = img.array().mean();
    EXPECT_LE((j.array() - mean).abs().maxCoeff(), 0.02 * mean);
}

TEST(SmoothApproximantTest, ObjectiveNeverIncreases)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 255);
    std::uniform_real_distribution<double> uw(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto img = ScalarField::generate(18, 15, [&](int, int) { return u(rng); });
        FieldArray<double> weight(15, 18);
        for (int i = 0; i < weight.size(); ++i) {
            weight(i) = uw(rng);
        }
        auto j = ScalarField::generate(18, 15, [&](int, int) { return u(rng); });
        double prev = smooth_objective(img, weight, 2.5, j);
        for (int sweep = 0; sweep < 30; ++sweep) {
            j = solve_smooth_approximant(img, weight, 2.5, 1, j);
            const double cur = smooth_objective(img, weight, 2.5, j);
            EXPECT_LE(cur, prev * (1 + 1e-14));
            prev = cur;
        }
    }
}

TEST_F(DescentFixture, ZeroStepsOnlyRefreshApproximants)
{
    DescentConfig cfg;
    cfg.dt_phi = 0;
    cfg.step_lambda = 0;
    cfg.step_pose = 0;
    auto s = state;
    s.trace.push_back(total_energy(s, img, g, &model, w));
    const auto next = step(s, img, g, &model, w, cfg);
    EXPECT_TRUE((next.phi.array() == s.phi.array()).all());
    EXPECT_EQ(next.lambda, s.lambda);
    EXPECT_EQ(next.pose, s.pose);
    EXPECT_EQ(next.iter, s.iter + 1);
    auto refreshed = s;
    refresh_approximants(refreshed, img, model, w, cfg.inner_ms_iters);
    EXPECT_TRUE((next.i_in.array() == refreshed.i_in.array()).all());
    EXPECT_TRUE((next.i_out.array() == refreshed.i_out.array()).all());
    EXPECT_LE(next.trace.back().total, s.trace.back().total);
}

TEST_F(DescentFixture, StepsKeepParametersInTheirBoxes)
{
    DescentConfig cfg;
    cfg.step_lambda = 10;
    cfg.step_pose = 1;
    auto s = state;
    for (int i = 0; i < 15; ++i) {
        s = step(s, img, g, &model, w, cfg);
        EXPECT_TRUE(model.lambda_in_box(s.lambda));
        EXPECT_TRUE(contains(cfg.pose_box, s.pose));
    }
}

TEST(StepTest, NearMinimizerIsNearlyStationary)
{
    SceneSpec spec;
    spec.width = spec.height = 64;
    spec.shape = Disk{31.5, 31.5, 13.0};
    const auto [img, truth] = render(spec);
    const auto model = disk_model(64, {9, 11, 13, 15, 17});
    EnergyWeights w;
    DescentConfig cfg;
    const auto g = edge_indicator(img, w.eta, w.sigma);
    SegmentationState s;
    s.phi = sdf_from_mask(truth);
    s.lambda = project_shape(model, s.phi);
    s.i_in = ScalarField(64, 64, 200.0);
    s.i_out = ScalarField(64, 64, 50.0);
    // Start from the truth, let the smoothed energy settle, then watch 50 more steps.
    for (int i = 0; i < 200; ++i) {
        s = step(s, img, g, &model, w, cfg);
    }
    const double e0 = total_energy(s, img, g, &model, w).total;
    for (int i = 0; i < 50; ++i) {
        s = step(s, img, g, &model, w, cfg);
    }
    const double e1 = total_energy(s, img, g, &model, w).total;
    EXPECT_LT(std::abs(e1 - e0) / std::abs(e0), 0.005);
}

TEST(StepTest, NonFiniteEnergyAbortsNamingTheTerm)
{
    const ScalarField img(16, 16, 1e200);
    const auto model = disk_model(16, {3, 4, 5});
    EnergyWeights w;
    SegmentationState s;
    s.phi = circle(16, 4, 7.5, 7.5);
    s.lambda = Eigen::VectorXd::Zero(2);
    s.i_in = ScalarField(16, 16, 0.0);
    s.i_out = ScalarField(16, 16, 0.0);
    try {
        step(s, img, ScalarField(16, 16, 1.0), &model, w, DescentConfig{});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("F4"), std::string::npos) << e.what();
    }
}

TEST(SegmentTest, ZeroIterationsReturnsInitialState)
{
    SceneSpec spec;
    spec.width = spec.height = 40;
    spec.shape = Disk{19.5, 19.5, 8.0};
    const auto img = render(spec).first;
    EnergyWeights w;
    DescentConfig cfg;
    cfg.max_iters = 0;
    const auto s = segment(img, nullptr, w, cfg);
    const auto init = initial_state(img, nullptr, w, cfg, {});
    EXPECT_TRUE((s.phi.array() == init.phi.array()).all());
    EXPECT_EQ(s.iter, 0);
    ASSERT_EQ(s.trace.size(), 1u);
    EXPECT_EQ(s.trace[0].iter, 0);
}

TEST(SegmentTest, PriorFreeDiskTraceIsMonotoneAndDeterministic)
{
    SceneSpec spec;
    spec.width = spec.height = 64;
    spec.shape = Disk{31.5, 31.5, 10.0};
    const auto img = render(spec).first;
    EnergyWeights w;
    DescentConfig cfg;
    const auto a = segment(img, nullptr, w, cfg);
    const auto b = segment(img, nullptr, w, cfg);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].total, b.trace[i].total);
    }
    for (std::size_t i = 1; i < a.trace.size(); ++i) {
        EXPECT_LE(a.trace[i].total, a.trace[i - 1].total * (1 + cfg.tol));
    }
    const auto contours = extract_contours(a.phi);
    ASSERT_FALSE(contours.empty());
    double miss = 0;
    int n = 0;
    for (const auto& c : contours) {
        for (const auto& p : c.points) {
            miss += std::abs(std::hypot(p.x() - 31.5, p.y() - 31.5) - 10.0);
            ++n;
        }
    }
    EXPECT_LE(miss / n, 2.0);
}

TEST(SegmentTest, RecordEvery)
{
    SceneSpec spec;
    spec.width = spec.height = 40;
    spec.shape = Disk{19.5, 19.5, 7.0};
    const auto img = render(spec).first;
    DescentConfig cfg;
    cfg.max_iters = 10;
    cfg.stall_window = 100;
    cfg.record_every = 3;
    const auto s = segment(img, nullptr, EnergyWeights{}, cfg);
    ASSERT_EQ(s.trace.size(), 4u);
    EXPECT_EQ(s.trace[1].iter, 3);
    EXPECT_EQ(s.trace[3].iter, 9);
}

TEST(SegmentTest, InputValidation)
{
    const ScalarField img(32, 32, 1.0);
    DescentConfig cfg;
    cfg.tol = 0;
    EXPECT_THROW(segment(img, nullptr, EnergyWeights{}, cfg), std::invalid_argument);
    const auto model = disk_model(16, {3, 4});
    EXPECT_THROW(segment(img, &model, EnergyWeights{}, DescentConfig{}), std::invalid_argument);
}

TEST(ReinitTest, HalfPlaneIsAFixedPoint)
{
    const auto phi = ScalarField::generate(64, 64, [](int x, int) { return x - 32.0; });
    const auto out = reinitialize(phi, 50);
    EXPECT_LE((out.array() - phi.array()).abs().maxCoeff(), 1e-3);
}

TEST(ReinitTest, RestoresUnitSlope)
{
    const auto sdf = circle(96, 25, 47.5, 47.5);
    const auto steep = circle(96, 25, 47.5, 47.5, 3.0);
    const auto out = reinitialize(steep, 200);
    const auto m = grad_magnitude(out);
    std::vector<double> far;
    int ok = 0;
    for (int y = 0; y + 1 < 96; ++y) {
        for (int x = 0; x + 1 < 96; ++x) {
            if (std::abs(sdf(x, y)) > 3) {
                far.push_back(m(x, y));
                ok += m(x, y) >= 0.9 && m(x, y) <= 1.1;
            }
        }
    }
    std::nth_element(far.begin(), far.begin() + far.size() / 2, far.end());
    EXPECT_NEAR(far[far.size() / 2], 1.0, 0.05);
    EXPECT_GE(double(ok) / far.size(), 0.9);
    const auto before = extract_contours(steep);
    const auto after = extract_contours(out);
    for (const auto& c : after) {
        for (const auto& p : c.points) {
            EXPECT_LE(distance_to_contours(p, before), 1.0);
        }
    }
}

TEST(ReinitTest, OddSymmetry)
{
    const auto phi = circle(48, 11, 20.3, 25.1, 2.0);
    const ScalarField neg((-phi.array()).eval());
    const auto a = reinitialize(phi, 40);
    const auto b = reinitialize(neg, 40);
    EXPECT_LE((a.array() + b.array()).abs().maxCoeff(), 1e-6);
}

TEST(ReinitTest, RejectsUnstableStep)
{
    EXPECT_THROW(reinitialize(ScalarField(8, 8, 1.0), 5, 0.6), std::invalid_argument);
    EXPECT_THROW(reinitialize(ScalarField(8, 8, 1.0), 5, 0.0), std::invalid_argument);
}

TEST(DescentConfigTest, Validation)
{
    DescentConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.fd_h = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = DescentConfig{};
    cfg.record_every = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = DescentConfig{};
    cfg.pose_box.tau_min = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

} // namespace
} // namespace priorseg
