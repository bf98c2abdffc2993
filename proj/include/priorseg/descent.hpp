#pragma once

// Projected gradient descent on the segmentation energy.
//
// One outer iteration alternates over the coordinate blocks of the problem:
// the smooth approximants I_in / I_out (Gauss-Seidel on their quadratic
// objective), the shape parameters lambda, the pose, and finally the level
// set phi (explicit Euler on the exact gradient of the discrete energy).
// Each block update is accepted only if it does not raise the energy by
// more than its share of tol; an offending update is retried once at half
// the step and dropped if it still fails.

#include "priorseg/energy.hpp"
#include "priorseg/field.hpp"
#include "priorseg/shape_prior.hpp"
#include "priorseg/state.hpp"

#include <Eigen/Core>

#include <optional>

namespace priorseg {

struct DescentConfig
{
    double dt_phi = 0.3;
    double step_lambda = 1e-2;
    double step_pose = 1e-4;
    /// Largest boundary displacement (px) a single lambda or pose update may cause.
    double max_param_move = 0.5;
    double fd_h = 1e-3;
    int max_iters = 2000;
    double tol = 1e-6;
    /// Consecutive iterations with relative decrease < tol before stopping.
    int stall_window = 20;
    int inner_ms_iters = 5;
    int record_every = 1;
    /// Step halvings tried after a rejected block update before it is dropped.
    int max_halvings = 1;
    PoseBox pose_box;

    void validate() const;
};

/// Exact gradient of total_energy with respect to every pixel of phi.
ScalarField grad_phi_total(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                           const ShapeModel* model, const EnergyWeights& w);

/// Central differences of total_energy in (lambda_1..lambda_p, tau, theta, tx,
/// ty). Entries whose probe would leave the box fall back to one-sided
/// differences; entries whose box is narrower than the probe are zero.
Eigen::VectorXd grad_params(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                            const ShapeModel* model, const EnergyWeights& w, double fd_h,
                            const PoseBox& box = {});

/// sum w (I - J)^2 + mu * w * |grad J|^2, the objective solve_smooth_approximant descends.
double smooth_objective(const ScalarField& image, const FieldArray<double>& weight, double mu, const ScalarField& j);

/// Lexicographic Gauss-Seidel sweeps on the normal equations of
/// smooth_objective. With mu = 0 returns the image wherever weight > 0.
ScalarField solve_smooth_approximant(const ScalarField& image, const FieldArray<double>& weight, double mu,
                                     int sweeps, const ScalarField& warm_start);

/// Gauss-Seidel sweeps on I_in / I_out against the current prior region,
/// warm-started from the state's approximants.
void refresh_approximants(SegmentationState& state, const ScalarField& image, const ShapeModel& model,
                          const EnergyWeights& w, int sweeps);

/// One outer iteration. Throws NumericalError on a non-finite energy or gradient.
SegmentationState step(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                       const ShapeModel* model, const EnergyWeights& w, const DescentConfig& cfg);

struct InitSpec
{
    /// Radius of the initial circle as a fraction of min(width, height).
    double radius_fraction = 0.25;
    /// Explicit initial level set; overrides the circle when set.
    std::optional<ScalarField> phi;
    /// Initial shape parameters; zero (the mean shape) when empty.
    Eigen::VectorXd lambda;
    Pose pose;
};

/// Initial state: phi, lambda, pose from `init`; I_in / I_out set to the image
/// means over the prior's region (phi's region without a model).
SegmentationState initial_state(const ScalarField& image, const ShapeModel* model, const EnergyWeights& w,
                                const DescentConfig& cfg, const InitSpec& init);

/// Runs step() until max_iters or until the relative energy decrease stays
/// below tol for stall_window consecutive iterations. trace[0] is the initial
/// energy.
SegmentationState segment(const ScalarField& image, const ShapeModel* model, const EnergyWeights& w,
                          const DescentConfig& cfg, const InitSpec& init = {});

/// Godunov upwind solver of phi_t = s(phi0) (1 - |grad phi|) with the smoothed
/// sign s = phi0 / sqrt(phi0^2 + 1). Requires 0 < dt <= 0.5.
ScalarField reinitialize(const ScalarField& phi0, int iters, double dt = 0.5);

} // namespace priorseg
