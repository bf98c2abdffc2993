#pragma once

// The four-term segmentation energy
//
//   F = alpha/2 F1 + F2 + beta F3 + nu F4
//   F1 = sum (|grad phi| - 1)^2
//   F2 = sum [xi g + gamma/2 prior^2] delta(phi) |grad phi|
//   F3 = sum g H(-phi)
//   F4 = sum [(I - I_in)^2 + mu |grad I_in|^2] Hin
//      + sum [(I - I_out)^2 + mu |grad I_out|^2] (1 - Hin)
//      + zeta * curve_length(prior)
//
// where prior is the shape model instance warped into the image, Hin its
// object indicator and every sum runs over pixels with unit area.

#include "priorseg/field.hpp"
#include "priorseg/shape_prior.hpp"
#include "priorseg/state.hpp"

#include <string>

namespace priorseg {

/// Smooth Heaviside / Dirac pair.
enum class HeavisideKind {
    /// H = (1 + tanh(z/eps)) / 2, exponentially decaying tails.
    logistic,
    /// H = (1 + 2/pi atan(z/eps)) / 2, algebraic tails.
    arctan,
};

struct EnergyWeights
{
    double alpha = 1.0;
    double beta = 1.5;
    double nu = 0.01;
    double xi = 5.0;
    double gamma = 0.002;
    double mu = 1.0;
    double zeta = 0.1;
    double eta = 10.0;
    double sigma = 1.5;
    double eps = 1.5;
    HeavisideKind heaviside = HeavisideKind::logistic;
    /// Use H(prior) instead of H(-prior) as the I_in region of F4.
    bool f4_literal_sign = false;

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

double heaviside_eps(double z, double eps, HeavisideKind kind = HeavisideKind::logistic);
double dirac_eps(double z, double eps, HeavisideKind kind = HeavisideKind::logistic);
/// d/dz dirac_eps
double dirac_eps_derivative(double z, double eps, HeavisideKind kind = HeavisideKind::logistic);

FieldArray<double> heaviside_eps(const FieldArray<double>& z, double eps, HeavisideKind kind);
FieldArray<double> dirac_eps(const FieldArray<double>& z, double eps, HeavisideKind kind);

/// g = 1 / (1 + eta |grad (G_sigma * I)|^2), values in (0, 1]. sigma is the
/// variance of the Gaussian (standard deviation sqrt(sigma)).
ScalarField edge_indicator(const ScalarField& image, double eta, double sigma);

double energy_f1(const ScalarField& phi);
/// `prior_warped` may be null (prior-free mode: the gamma term vanishes).
double energy_f2(const ScalarField& phi, const ScalarField& g, const ScalarField* prior_warped,
                 const EnergyWeights& w);
double energy_f3(const ScalarField& phi, const ScalarField& g, const EnergyWeights& w);
double energy_f4(const ScalarField& image, const ScalarField& i_in, const ScalarField& i_out,
                 const ScalarField& prior_warped, const EnergyWeights& w);
/// sum delta_eps(phi) |grad phi|, the regularized length of the zero set.
double curve_length(const ScalarField& phi, double eps, HeavisideKind kind = HeavisideKind::logistic);

/// Object indicator of the warped prior used as the I_in region weight.
FieldArray<double> prior_region(const ScalarField& prior_warped, const EnergyWeights& w);

/// Value used for warp samples that fall outside the prior's grid: the domain
/// diagonal, i.e. far outside the object.
double far_outside(int width, int height);

/// Shape instance for lambda, warped by pose into image coordinates.
ScalarField warped_prior(const ShapeModel& model, const Eigen::VectorXd& lambda, const Pose& pose);

/// Per-pixel integrands of the four terms (unweighted). Their sums are the
/// breakdown terms; f4 includes the zeta length density.
struct TermDensities
{
    FieldArray<double> f1;
    FieldArray<double> f2;
    FieldArray<double> f3;
    FieldArray<double> f4;

    /// alpha/2 f1 + f2 + beta f3 + nu f4, pixel by pixel.
    FieldArray<double> weighted(const EnergyWeights& w) const;
};

TermDensities term_densities(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                             const ShapeModel* model, const EnergyWeights& w);

EnergyBreakdown compose(double f1, double f2, double f3, double f4, const EnergyWeights& w);

/// `model` may be null (prior-free mode: F4 and the gamma part of F2 vanish).
EnergyBreakdown total_energy(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                             const ShapeModel* model, const EnergyWeights& w);

std::string to_string(HeavisideKind kind);
HeavisideKind heaviside_kind_from_string(const std::string& s);

} // namespace priorseg
