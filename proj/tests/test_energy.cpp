#include "priorseg/energy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace priorseg {
namespace {

constexpr double kPi = std::numbers::pi;

ScalarField disk_sdf(int size, double r, double cx = -1, double cy = -1)
{
    if (cx < 0) {
        cx = cy = 0.5 * (size - 1);
    }
    return ScalarField::generate(size, size, [&](int x, int y) { return std::hypot(x - cx, y - cy) - r; });
}

TEST(HeavisideTest, LogisticIdentities)
{
    const double eps = 1.5;
    EXPECT_EQ(heaviside_eps(0.0, eps), 0.5);
    EXPECT_NEAR(heaviside_eps(1e6 * eps, eps), 1.0, 1e-5);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        const double z = u(rng);
        EXPECT_NEAR(heaviside_eps(z, eps) + heaviside_eps(-z, eps), 1.0, 1e-15);
        EXPECT_GT(dirac_eps(z, eps), 0.0);
    }
    EXPECT_DOUBLE_EQ(dirac_eps(0.0, eps), 0.5 / eps);
}

TEST(HeavisideTest, ArctanMatchesClosedForm)
{
    const double eps = 1.5;
    const auto k = HeavisideKind::arctan;
    EXPECT_EQ(heaviside_eps(0.0, eps, k), 0.5);
    EXPECT_NEAR(heaviside_eps(1e6 * eps, eps, k), 1.0, 1e-5);
    EXPECT_DOUBLE_EQ(dirac_eps(0.0, eps, k), 1.0 / (kPi * eps));
    for (double z : {-7.0, -0.3, 2.0, 40.0}) {
        EXPECT_NEAR(heaviside_eps(z, eps, k), 0.5 * (1 + 2 / kPi * std::atan(z / eps)), 1e-15);
        EXPECT_NEAR(dirac_eps(z, eps, k), eps / (kPi * (eps * eps + z * z)), 1e-15);
        EXPECT_NEAR(heaviside_eps(z, eps, k) + heaviside_eps(-z, eps, k), 1.0, 1e-15);
    }
}

class DiracDerivativeTest : public ::testing::TestWithParam<HeavisideKind> {};

TEST_P(DiracDerivativeTest, DiracIsDerivativeOfHeaviside)
{
    const auto kind = GetParam();
    const double eps = 1.5;
    const double h = 1e-4;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-4 * eps, 4 * eps);
    for (int i = 0; i < 1000; ++i) {
        const double z = u(rng);
        const double fd = (heaviside_eps(z + h, eps, kind) - heaviside_eps(z - h, eps, kind)) / (2 * h);
        const double d = dirac_eps(z, eps, kind);
        EXPECT_NEAR(fd, d, 1e-8 * d) << z;
        const double fd2 = (dirac_eps(z + h, eps, kind) - dirac_eps(z - h, eps, kind)) / (2 * h);
        EXPECT_NEAR(fd2, dirac_eps_derivative(z, eps, kind), 1e-7 * std::abs(d) / eps) << z;
    }
}

TEST_P(DiracDerivativeTest, ArrayFormsMatchScalarForms)
{
    const auto kind = GetParam();
    FieldArray<double> z(2, 3);
    z << -3, -0.5, 0, 0.25, 2, 9;
    const auto hz = heaviside_eps(z, 1.2, kind);
    const auto dz = dirac_eps(z, 1.2, kind);
    for (int i = 0; i < z.size(); ++i) {
        EXPECT_EQ(hz(i), heaviside_eps(z(i), 1.2, kind));
        EXPECT_EQ(dz(i), dirac_eps(z(i), 1.2, kind));
    }
}

INSTANTIATE_TEST_SUITE_P(Kinds, DiracDerivativeTest,
                         ::testing::Values(HeavisideKind::logistic, HeavisideKind::arctan));

TEST(HeavisideTest, DiracHasUnitMass)
{
    for (auto kind : {HeavisideKind::logistic, HeavisideKind::arctan}) {
        const double eps = 1.5;
        const double step = eps / 100;
        double mass = 0;
        for (int i = -5000; i < 5000; ++i) {
            const double a = i * step;
            mass += 0.5 * step * (dirac_eps(a, eps, kind) + dirac_eps(a + step, eps, kind));
        }
        // Arctan tails are algebraic: only 2/pi atan(L/eps) of the mass lies in [-L, L].
        const double expected = kind == HeavisideKind::logistic ? 1.0 : 2 / std::numbers::pi * std::atan(5000 * step / eps);
        EXPECT_NEAR(mass, expected, 1e-4);
    }
}

TEST(EdgeIndicatorTest, ConstantImage)
{
    const auto g = edge_indicator(ScalarField(20, 20, 77.0), 10, 1.5);
    EXPECT_EQ(g.array().minCoeff(), 1.0);
    EXPECT_EQ(g.array().maxCoeff(), 1.0);
}

TEST(EdgeIndicatorTest, StepEdgeMatchesReference)
{
    // numpy/scipy recomputation of the formula (tests/oracles/generate.py).
    const auto step = ScalarField::generate(20, 8, [](int x, int) { return x < 10 ? 0.0 : 1.0; });
    const auto g = edge_indicator(step, 10, 1.5);
    const double expected[] = {0.997376020408727,  0.9313172831467718, 0.6472795428355188, 0.48511334045015264,
                               0.6472795428355184, 0.931317283146772,  0.997376020408727,  0.9999752609394198};
    for (int i = 0; i < 8; ++i) {
        EXPECT_NEAR(g(6 + i, 4), expected[i], 1e-14) << i;
    }
    int argmin = 0;
    for (int x = 0; x < 20; ++x) {
        if (g(x, 4) < g(argmin, 4)) {
            argmin = x;
        }
    }
    EXPECT_LT(g(argmin, 4), 0.5);
    EXPECT_LE(std::abs(argmin - 9.5), 1.0);
}

TEST(EdgeIndicatorTest, DoublingEta)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 255);
    const auto img = ScalarField::generate(24, 18, [&](int, int) { return u(rng); });
    const auto g1 = edge_indicator(img, 10, 1.5);
    const auto g2 = edge_indicator(img, 20, 1.5);
    for (int i = 0; i < g1.size(); ++i) {
        const double s = (1 / g1.array()(i) - 1) / 10;
        EXPECT_NEAR(g2.array()(i), 1 / (1 + 20 * s), 1e-12);
        EXPECT_GT(g1.array()(i), 0.0);
        EXPECT_LE(g1.array()(i), 1.0);
    }
}

TEST(EnergyTermTest, FrozenFixture)
{
    // Values computed independently with numpy (tests/oracles/generate.py).
    const auto phi = ScalarField::generate(12, 10, [](int x, int y) {
        return std::hypot(x - 5.3, y - 4.1) - 3.2 + 0.3 * std::sin(0.7 * x + 0.4 * y);
    });
    const auto img = ScalarField::generate(12, 10, [](int x, int y) { return 50 + 30 * std::cos(0.5 * x) + 20 * std::sin(0.3 * y); });
    const auto i_in = ScalarField::generate(12, 10, [](int x, int) { return 120.0 + x; });
    const auto i_out = ScalarField::generate(12, 10, [](int, int y) { return 40 + 0.5 * y; });
    const auto prior = ScalarField::generate(12, 10, [](int x, int y) { return std::hypot(x - 6.0, y - 4.5) - 3.0; });
    EnergyWeights w;
    w.alpha = 0.7;
    w.beta = 1.3;
    w.nu = 0.05;
    w.xi = 2.0;
    w.gamma = 0.3;
    w.mu = 0.8;
    w.zeta = 0.4;
    w.eta = 10;
    w.sigma = 1.5;
    w.eps = 1.5;
    const auto g = edge_indicator(img, w.eta, w.sigma);
    EXPECT_NEAR(g(3, 2), 0.00061436931058219, 1e-16);
    EXPECT_NEAR(g(8, 7), 0.0007915225440368655, 1e-16);

    const double f1 = energy_f1(phi);
    const double f2 = energy_f2(phi, g, &prior, w);
    const double f3 = energy_f3(phi, g, w);
    const double f4 = energy_f4(img, i_in, i_out, prior, w);
    EXPECT_NEAR(f1, 11.748037276120252, 1e-12);
    EXPECT_NEAR(f2, 4.773920629302491, 1e-12);
    EXPECT_NEAR(f3, 0.1893625187321449, 1e-13);
    EXPECT_NEAR(f4, 296963.05572648684, 1e-8);
    EXPECT_NEAR(curve_length(phi, w.eps), 18.206741698483604, 1e-12);
    EXPECT_NEAR(compose(f1, f2, f3, f4, w).total, 14857.284691274639, 1e-9);
}

TEST(EnergyTermTest, F1)
{
    const auto half = ScalarField::generate(64, 64, [](int x, int) { return x - 32.0; });
    const auto d = grad_magnitude(half);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 63; ++x) {
            EXPECT_LE(std::pow(d(x, y) - 1, 2), 1e-6);
        }
    }
    // Only the last column (zero forward difference) contributes.
    EXPECT_NEAR(energy_f1(half), 64.0, 1e-6);

    const auto steep = ScalarField::generate(64, 64, [](int x, int) { return 2 * (x - 32.0); });
    const double kappa = 1e-8;
    const double slope = std::sqrt(4 + kappa * kappa) - kappa;
    EXPECT_NEAR(energy_f1(steep), 63 * 64 * std::pow(slope - 1, 2) + 64 * 1.0, 1e-8);

    EXPECT_NEAR(energy_f1(ScalarField(30, 20, 4.0)), 600.0, 600 * 1e-9);
}

TEST(EnergyTermTest, F2)
{
    EnergyWeights w;
    w.xi = 1.0;
    const ScalarField ones(128, 128, 1.0);
    EXPECT_LE(energy_f2(ScalarField(128, 128, 100.0), ones, nullptr, w), 1e-3);

    const auto phi = disk_sdf(128, 20);
    const double plain = energy_f2(phi, ones, nullptr, w);
    EXPECT_NEAR(plain, 2 * kPi * 20, 0.05 * 2 * kPi * 20);

    const ScalarField zero(128, 128, 0.0);
    EXPECT_DOUBLE_EQ(energy_f2(phi, ones, &zero, w), plain);
    const double with_prior = energy_f2(phi, ones, &phi, w);
    const FieldArray<double> extra = 0.5 * w.gamma * phi.array().square() * dirac_eps(phi.array(), w.eps, w.heaviside) *
                                     smoothed_magnitude(grad(phi));
    EXPECT_NEAR(with_prior, plain + extra.sum(), 1e-9);
    EXPECT_NEAR(with_prior, plain, 0.05 * plain);
    EXPECT_THROW(energy_f2(phi, ScalarField(10, 10), nullptr, w), std::invalid_argument);
}

TEST(EnergyTermTest, F3)
{
    EnergyWeights w;
    const ScalarField ones(128, 128, 1.0);
    for (double r : {15.0, 20.0, 30.0}) {
        EXPECT_NEAR(energy_f3(disk_sdf(128, r), ones, w), kPi * r * r, 0.03 * kPi * r * r) << r;
    }
    EXPECT_LE(energy_f3(ScalarField(128, 128, 100.0), ones, w), 1e-3);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.01, 1);
    const auto g = ScalarField::generate(64, 64, [&](int, int) { return u(rng); });
    const ScalarField half((0.5 * g.array()).eval());
    const auto phi = disk_sdf(64, 12);
    EXPECT_EQ(energy_f3(phi, half, w), 0.5 * energy_f3(phi, g, w));
}

TEST(EnergyTermTest, F3MatchesPixelAreaWithinBand)
{
    EnergyWeights w;
    const ScalarField ones(128, 128, 1.0);
    for (double r : {15.0, 20.0, 30.0}) {
        const auto phi = disk_sdf(128, r);
        int inside = 0, band = 0;
        for (int i = 0; i < phi.size(); ++i) {
            inside += phi.array()(i) < 0;
            band += std::abs(phi.array()(i)) <= 3 * w.eps;
        }
        EXPECT_NEAR(energy_f3(phi, ones, w), inside, band) << r;
    }
}

TEST(EnergyTermTest, F4)
{
    EnergyWeights w;
    w.mu = 0;
    w.zeta = 0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 255);
    const auto img = ScalarField::generate(64, 64, [&](int, int) { return u(rng); });
    const auto prior = disk_sdf(64, 20);
    EXPECT_EQ(energy_f4(img, img, img, prior, w), 0.0);

    const auto two = ScalarField::generate(64, 64, [&](int x, int y) { return prior(x, y) < 0 ? 1.0 : 0.0; });
    int band = 0;
    for (int i = 0; i < prior.size(); ++i) {
        band += std::abs(prior.array()(i)) <= 3 * w.eps;
    }
    EXPECT_LE(energy_f4(two, ScalarField(64, 64, 1.0), ScalarField(64, 64, 0.0), prior, w), 1.0 * band);

    w.zeta = 1;
    const auto big = disk_sdf(128, 20);
    const ScalarField flat(128, 128, 9.0);
    EXPECT_NEAR(energy_f4(flat, flat, flat, big, w), 2 * kPi * 20, 0.05 * 2 * kPi * 20);
}

TEST(EnergyTermTest, F4IsShiftInvariant)
{
    EnergyWeights w;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0, 255);
    auto rnd = [&] { return ScalarField::generate(32, 24, [&](int, int) { return u(rng); }); };
    const auto img = rnd(), in = rnd(), out = rnd();
    const auto prior = ScalarField::generate(32, 24, [](int x, int y) { return std::hypot(x - 15.0, y - 12.0) - 7; });
    const double c = 37.25;
    auto shift = [&](const ScalarField& f) { return ScalarField((f.array() + c).eval()); };
    const double a = energy_f4(img, in, out, prior, w);
    const double b = energy_f4(shift(img), shift(in), shift(out), prior, w);
    EXPECT_NEAR(a, b, 1e-10 * a);
}

TEST(CurveLengthTest, DiskAndTvCrossCheck)
{
    EnergyWeights w;
    EXPECT_NEAR(curve_length(disk_sdf(128, 30), 1.5), 188.5, 0.05 * 188.5);
    EXPECT_LE(curve_length(ScalarField(64, 64, 50.0), 1.5), 1e-3);
    for (double r : {15.0, 20.0, 30.0}) {
        const auto phi = disk_sdf(128, r);
        const double len = curve_length(phi, 1.5);
        EXPECT_NEAR(len, 2 * kPi * r, 0.05 * 2 * kPi * r);
        const ScalarField h(heaviside_eps((-phi.array()).eval(), 1.5, w.heaviside));
        EXPECT_NEAR(len, total_variation(h), 0.05 * len) << r;
    }
    EXPECT_THROW(curve_length(ScalarField(4, 4), 0.0), std::invalid_argument);
}

TEST(WeightsTest, Validation)
{
    EnergyWeights w;
    EXPECT_NO_THROW(w.validate());
    w.eps = 0;
    EXPECT_THROW(w.validate(), std::invalid_argument);
    w = EnergyWeights{};
    w.sigma = -1;
    EXPECT_THROW(w.validate(), std::invalid_argument);
    w = EnergyWeights{};
    w.alpha = std::nan("");
    EXPECT_THROW(w.validate(), std::invalid_argument);
    w = EnergyWeights{};
    w.gamma = 0;
    w.nu = 0;
    EXPECT_NO_THROW(w.validate());
}

class TotalEnergyTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        std::vector<ScalarField> sdfs{disk_sdf(48, 8), disk_sdf(48, 11), disk_sdf(48, 14)};
        model = build_shape_model(sdfs, 2);
        img = ScalarField::generate(48, 48, [](int x, int y) { return std::hypot(x - 23.5, y - 23.5) < 11 ? 200.0 : 50.0; });
        state.phi = disk_sdf(48, 13, 24, 23);
        state.lambda = Eigen::Vector2d(1.5, -0.5);
        state.pose = Pose{1.05, 0.1, 0.7, -0.4};
        state.i_in = ScalarField(48, 48, 180.0);
        state.i_out = ScalarField(48, 48, 60.0);
        g = edge_indicator(img, w.eta, w.sigma);
    }

    ShapeModel model;
    ScalarField img;
    ScalarField g;
    SegmentationState state;
    EnergyWeights w;
};

TEST_F(TotalEnergyTest, BreakdownRecomposes)
{
    const auto e = total_energy(state, img, g, &model, w);
    const auto prior = warped_prior(model, state.lambda, state.pose);
    EXPECT_DOUBLE_EQ(e.f1, energy_f1(state.phi));
    EXPECT_NEAR(e.f2, energy_f2(state.phi, g, &prior, w), 1e-12 * std::abs(e.f2));
    EXPECT_NEAR(e.f3, energy_f3(state.phi, g, w), 1e-12 * e.f3);
    EXPECT_NEAR(e.f4, energy_f4(img, state.i_in, state.i_out, prior, w), 1e-12 * e.f4);
    EXPECT_NEAR(e.total, 0.5 * w.alpha * e.f1 + e.f2 + w.beta * e.f3 + w.nu * e.f4, 1e-12 * e.total);
}

TEST_F(TotalEnergyTest, NuScalesLinearly)
{
    const auto e1 = total_energy(state, img, g, &model, w);
    auto w2 = w;
    w2.nu *= 2;
    const auto e2 = total_energy(state, img, g, &model, w2);
    EXPECT_NEAR(e2.total - e1.total, w.nu * e1.f4, 1e-9 * e1.total);
}

TEST_F(TotalEnergyTest, PriorFreeModeDropsPriorTerms)
{
    const auto e = total_energy(state, img, g, nullptr, w);
    EXPECT_EQ(e.f4, 0.0);
    EXPECT_DOUBLE_EQ(e.f2, energy_f2(state.phi, g, nullptr, w));
}

TEST_F(TotalEnergyTest, ComponentRecompositionOnTrivialInputs)
{
    // Flat image (g = 1), perfect approximants, mu = zeta = 0 and an exact SDF:
    // total = alpha/2 F1 + xi L + beta A with every piece known independently.
    const ScalarField flat(48, 48, 10.0);
    auto s = state;
    s.i_in = flat;
    s.i_out = flat;
    s.phi = disk_sdf(48, 12);
    auto wt = w;
    wt.mu = 0;
    wt.zeta = 0;
    wt.gamma = 0;
    const auto gf = edge_indicator(flat, wt.eta, wt.sigma);
    const auto e = total_energy(s, flat, gf, &model, wt);
    EXPECT_EQ(e.f4, 0.0);
    const double length = curve_length(s.phi, wt.eps);
    const double area = energy_f3(s.phi, ScalarField(48, 48, 1.0), wt);
    EXPECT_NEAR(e.total, 0.5 * wt.alpha * energy_f1(s.phi) + wt.xi * length + wt.beta * area, 1e-9 * e.total);
}

TEST_F(TotalEnergyTest, DimensionMismatchThrows)
{
    EXPECT_THROW(total_energy(state, ScalarField(10, 10), g, &model, w), std::invalid_argument);
}

TEST(WarpedPriorTest, FarOutsideFill)
{
    std::vector<ScalarField> sdfs{disk_sdf(32, 6), disk_sdf(32, 9)};
    const auto model = build_shape_model(sdfs, 1);
    const auto p = warped_prior(model, Eigen::VectorXd::Zero(1), Pose{1, 0, 100, 0});
    EXPECT_EQ(p(0, 0), far_outside(32, 32));
    EXPECT_DOUBLE_EQ(far_outside(3, 4), 5.0);
}

} // namespace
} // namespace priorseg
