#include "priorseg/energy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace priorseg {

void EnergyWeights::validate() const
{
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("EnergyWeights: ") + name + " must be finite and >= 0");
        }
    };
    auto positive = [](double v, const char* name) {
        if (!(v > 0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("EnergyWeights: ") + name + " must be finite and > 0");
        }
    };
    non_negative(alpha, "alpha");
    non_negative(beta, "beta");
    non_negative(nu, "nu");
    non_negative(xi, "xi");
    non_negative(gamma, "gamma");
    non_negative(mu, "mu");
    non_negative(zeta, "zeta");
    positive(eta, "eta");
    positive(sigma, "sigma");
    positive(eps, "eps");
}

double heaviside_eps(double z, double eps, HeavisideKind kind)
{
    if (kind == HeavisideKind::arctan) {
        return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(z / eps));
    }
    return 0.5 * (1.0 + std::tanh(z / eps));
}

double dirac_eps(double z, double eps, HeavisideKind kind)
{
    if (kind == HeavisideKind::arctan) {
        return eps / (std::numbers::pi * (eps * eps + z * z));
    }
    const double c = std::cosh(z / eps);
    return 0.5 / (eps * c * c);
}

double dirac_eps_derivative(double z, double eps, HeavisideKind kind)
{
    if (kind == HeavisideKind::arctan) {
        const double q = eps * eps + z * z;
        return -2.0 * eps * z / (std::numbers::pi * q * q);
    }
    return -(2.0 / eps) * std::tanh(z / eps) * dirac_eps(z, eps, kind);
}

FieldArray<double> heaviside_eps(const FieldArray<double>& z, double eps, HeavisideKind kind)
{
    return z.unaryExpr([&](double v) { return heaviside_eps(v, eps, kind); });
}

FieldArray<double> dirac_eps(const FieldArray<double>& z, double eps, HeavisideKind kind)
{
    return z.unaryExpr([&](double v) { return dirac_eps(v, eps, kind); });
}

ScalarField edge_indicator(const ScalarField& image, double eta, double sigma)
{
    if (!(eta > 0) || !(sigma > 0)) {
        throw std::invalid_argument("edge_indicator: eta and sigma must be positive");
    }
    // sigma is the variance of G_sigma.
    const auto g = grad(gaussian_convolve(image, std::sqrt(sigma)));
    return ScalarField((1.0 / (1.0 + eta * (g.gx.array().square() + g.gy.array().square()))).eval());
}

namespace {

void require_same(const ScalarField& a, const ScalarField& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": field dimensions differ");
    }
}

FieldArray<double> f1_density(const ScalarField& phi)
{
    return (smoothed_magnitude(grad(phi)) - 1.0).square();
}

FieldArray<double> f2_density(const ScalarField& phi, const ScalarField& g, const ScalarField* prior,
                              const EnergyWeights& w)
{
    FieldArray<double> weight = w.xi * g.array();
    if (prior != nullptr) {
        weight += 0.5 * w.gamma * prior->array().square();
    }
    return weight * dirac_eps(phi.array(), w.eps, w.heaviside) * smoothed_magnitude(grad(phi));
}

FieldArray<double> f3_density(const ScalarField& phi, const ScalarField& g, const EnergyWeights& w)
{
    return g.array() * heaviside_eps((-phi.array()).eval(), w.eps, w.heaviside);
}

FieldArray<double> length_density(const ScalarField& phi, double eps, HeavisideKind kind)
{
    return dirac_eps(phi.array(), eps, kind) * smoothed_magnitude(grad(phi));
}

FieldArray<double> f4_density(const ScalarField& image, const ScalarField& i_in, const ScalarField& i_out,
                              const ScalarField& prior, const EnergyWeights& w)
{
    const auto region = prior_region(prior, w);
    const auto gin = grad(i_in);
    const auto gout = grad(i_out);
    const FieldArray<double> in_term =
        (image.array() - i_in.array()).square() + w.mu * (gin.gx.array().square() + gin.gy.array().square());
    const FieldArray<double> out_term =
        (image.array() - i_out.array()).square() + w.mu * (gout.gx.array().square() + gout.gy.array().square());
    FieldArray<double> d = in_term * region + out_term * (1.0 - region);
    if (w.zeta != 0) {
        d += w.zeta * length_density(prior, w.eps, w.heaviside);
    }
    return d;
}

} // namespace

FieldArray<double> prior_region(const ScalarField& prior_warped, const EnergyWeights& w)
{
    return w.f4_literal_sign ? heaviside_eps(prior_warped.array(), w.eps, w.heaviside)
                             : heaviside_eps((-prior_warped.array()).eval(), w.eps, w.heaviside);
}

double energy_f1(const ScalarField& phi)
{
    return f1_density(phi).sum();
}

double energy_f2(const ScalarField& phi, const ScalarField& g, const ScalarField* prior_warped,
                 const EnergyWeights& w)
{
    require_same(phi, g, "energy_f2");
    if (prior_warped != nullptr) {
        require_same(phi, *prior_warped, "energy_f2");
    }
    return f2_density(phi, g, prior_warped, w).sum();
}

double energy_f3(const ScalarField& phi, const ScalarField& g, const EnergyWeights& w)
{
    require_same(phi, g, "energy_f3");
    return f3_density(phi, g, w).sum();
}

double energy_f4(const ScalarField& image, const ScalarField& i_in, const ScalarField& i_out,
                 const ScalarField& prior_warped, const EnergyWeights& w)
{
    require_same(image, i_in, "energy_f4");
    require_same(image, i_out, "energy_f4");
    require_same(image, prior_warped, "energy_f4");
    return f4_density(image, i_in, i_out, prior_warped, w).sum();
}

double curve_length(const ScalarField& phi, double eps, HeavisideKind kind)
{
    if (!(eps > 0)) {
        throw std::invalid_argument("curve_length: eps must be positive");
    }
    return length_density(phi, eps, kind).sum();
}

double far_outside(int width, int height)
{
    return std::hypot(double(width), double(height));
}

ScalarField warped_prior(const ShapeModel& model, const Eigen::VectorXd& lambda, const Pose& pose)
{
    return warp(synthesize_shape(model, lambda), pose, far_outside(model.width(), model.height()), model.center);
}

FieldArray<double> TermDensities::weighted(const EnergyWeights& w) const
{
    return 0.5 * w.alpha * f1 + f2 + w.beta * f3 + w.nu * f4;
}

TermDensities term_densities(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                             const ShapeModel* model, const EnergyWeights& w)
{
    require_same(state.phi, image, "total_energy");
    require_same(state.phi, g, "total_energy");
    TermDensities d;
    d.f1 = f1_density(state.phi);
    d.f3 = f3_density(state.phi, g, w);
    if (model == nullptr) {
        d.f2 = f2_density(state.phi, g, nullptr, w);
        d.f4 = FieldArray<double>::Zero(image.height(), image.width());
        return d;
    }
    if (model->width() != image.width() || model->height() != image.height()) {
        throw std::invalid_argument("total_energy: shape model size differs from the image");
    }
    require_same(image, state.i_in, "total_energy");
    require_same(image, state.i_out, "total_energy");
    const ScalarField prior = warped_prior(*model, state.lambda, state.pose);
    d.f2 = f2_density(state.phi, g, &prior, w);
    d.f4 = f4_density(image, state.i_in, state.i_out, prior, w);
    return d;
}

EnergyBreakdown compose(double f1, double f2, double f3, double f4, const EnergyWeights& w)
{
    return {0, f1, f2, f3, f4, 0.5 * w.alpha * f1 + f2 + w.beta * f3 + w.nu * f4};
}

EnergyBreakdown total_energy(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                             const ShapeModel* model, const EnergyWeights& w)
{
    const auto d = term_densities(state, image, g, model, w);
    return compose(d.f1.sum(), d.f2.sum(), d.f3.sum(), d.f4.sum(), w);
}

std::string to_string(HeavisideKind kind)
{
    return kind == HeavisideKind::arctan ? "arctan" : "logistic";
}

HeavisideKind heaviside_kind_from_string(const std::string& s)
{
    if (s == "logistic") {
        return HeavisideKind::logistic;
    }
    if (s == "arctan") {
        return HeavisideKind::arctan;
    }
    throw std::invalid_argument("unknown heaviside kind '" + s + "'");
}

} // namespace priorseg
