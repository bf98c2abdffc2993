#include "priorseg/descent.hpp"

#include "priorseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace priorseg {

void DescentConfig::validate() const
{
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("DescentConfig: ") + name + " must be finite and >= 0");
        }
    };
    non_negative(dt_phi, "dt_phi");
    non_negative(step_lambda, "step_lambda");
    non_negative(step_pose, "step_pose");
    if (!(max_param_move > 0)) {
        throw std::invalid_argument("DescentConfig: max_param_move must be > 0");
    }
    if (!(fd_h > 0)) {
        throw std::invalid_argument("DescentConfig: fd_h must be > 0");
    }
    if (max_iters < 0) {
        throw std::invalid_argument("DescentConfig: max_iters must be >= 0");
    }
    if (!(tol > 0 && tol < 1)) {
        throw std::invalid_argument("DescentConfig: tol must lie in (0, 1)");
    }
    if (max_halvings < 0) {
        throw std::invalid_argument("DescentConfig: max_halvings must be >= 0");
    }
    if (stall_window < 1 || inner_ms_iters < 1 || record_every < 1) {
        throw std::invalid_argument("DescentConfig: stall_window, inner_ms_iters and record_every must be >= 1");
    }
    if (!(pose_box.tau_min > 0 && pose_box.tau_min <= pose_box.tau_max && pose_box.t_min <= pose_box.t_max)) {
        throw std::invalid_argument("DescentConfig: invalid pose box");
    }
}

ScalarField grad_phi_total(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                           const ShapeModel* model, const EnergyWeights& w)
{
    const auto& phi = state.phi;
    if (!phi.same_shape(image) || !phi.same_shape(g)) {
        throw std::invalid_argument("grad_phi_total: field dimensions differ");
    }

    FieldArray<double> f = w.xi * g.array();
    if (model != nullptr && w.gamma != 0) {
        const ScalarField prior = warped_prior(*model, state.lambda, state.pose);
        f += 0.5 * w.gamma * prior.array().square();
    }

    const auto gp = grad(phi);
    const double kappa = kGradientSmoothing;
    const FieldArray<double> root = (gp.gx.array().square() + gp.gy.array().square() + kappa * kappa).sqrt();
    const FieldArray<double> mag = root - kappa;
    const FieldArray<double> delta = dirac_eps(phi.array(), w.eps, w.heaviside);
    const FieldArray<double> delta_prime =
        phi.array().unaryExpr([&](double z) { return dirac_eps_derivative(z, w.eps, w.heaviside); });

    // d/dphi sum c(|grad phi|) = -div(c'(|grad phi|) grad phi / |grad phi|)
    const FieldArray<double> coeff = (w.alpha * (mag - 1.0) + f * delta) / root;
    const Gradient2<double> flux{ScalarField((coeff * gp.gx.array()).eval()),
                                 ScalarField((coeff * gp.gy.array()).eval())};
    FieldArray<double> out = -divergence(flux).array();
    out += f * delta_prime * mag;
    // d/dphi H(-phi) = -delta(-phi)
    const FieldArray<double> delta_neg = dirac_eps((-phi.array()).eval(), w.eps, w.heaviside);
    out -= w.beta * g.array() * delta_neg;

    if (!out.isFinite().all()) {
        throw NumericalError("grad_phi_total: non-finite gradient");
    }
    return ScalarField(std::move(out));
}

namespace {

// sum over pixels of (weighted density of a) - (weighted density of b).
// Differencing before summing keeps the probe free of cancellation in the
// large total.
double energy_difference(const SegmentationState& a, const SegmentationState& b, const ScalarField& image,
                         const ScalarField& g, const ShapeModel* model, const EnergyWeights& w)
{
    const auto da = term_densities(a, image, g, model, w).weighted(w);
    const auto db = term_densities(b, image, g, model, w).weighted(w);
    return (da - db).sum();
}

// Parameter vector layout: lambda_1..lambda_p, tau, theta, tx, ty.
Eigen::VectorXd pack(const SegmentationState& s)
{
    Eigen::VectorXd v(s.lambda.size() + 4);
    v.head(s.lambda.size()) = s.lambda;
    v.tail<4>() = s.pose.to_vector();
    return v;
}

void unpack(SegmentationState& s, const Eigen::VectorXd& v)
{
    const auto p = s.lambda.size();
    s.lambda = v.head(p);
    s.pose = Pose::from_vector(v.tail<4>());
}

} // namespace

Eigen::VectorXd grad_params(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                            const ShapeModel* model, const EnergyWeights& w, double fd_h, const PoseBox& box)
{
    if (!(fd_h > 0)) {
        throw std::invalid_argument("grad_params: fd_h must be positive");
    }
    const auto p = state.lambda.size();
    Eigen::VectorXd grad_out = Eigen::VectorXd::Zero(p + 4);
    if (model == nullptr) {
        return grad_out;
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd lower(p + 4), upper(p + 4);
    lower.head(p) = model->lambda_lower;
    upper.head(p) = model->lambda_upper;
    // Theta is periodic; no clamping.
    lower.tail<4>() << box.tau_min, -inf, box.t_min, box.t_min;
    upper.tail<4>() << box.tau_max, inf, box.t_max, box.t_max;

    const Eigen::VectorXd x0 = pack(state);
    SegmentationState plus = state;
    SegmentationState minus = state;
    plus.trace.clear();
    minus.trace.clear();
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        const bool up_ok = x0[i] + fd_h <= upper[i];
        const bool down_ok = x0[i] - fd_h >= lower[i];
        Eigen::VectorXd xp = x0, xm = x0;
        double span = 0;
        if (up_ok && down_ok) {
            xp[i] += fd_h;
            xm[i] -= fd_h;
            span = 2 * fd_h;
        } else if (up_ok) {
            xp[i] += fd_h;
            span = fd_h;
        } else if (down_ok) {
            xm[i] -= fd_h;
            span = fd_h;
        } else {
            continue;
        }
        unpack(plus, xp);
        unpack(minus, xm);
        grad_out[i] = energy_difference(plus, minus, image, g, model, w) / span;
    }
    if (!grad_out.allFinite()) {
        throw NumericalError("grad_params: non-finite parameter gradient");
    }
    return grad_out;
}

double smooth_objective(const ScalarField& image, const FieldArray<double>& weight, double mu, const ScalarField& j)
{
    const auto gj = grad(j);
    return (weight * ((image.array() - j.array()).square() +
                      mu * (gj.gx.array().square() + gj.gy.array().square())))
        .sum();
}

ScalarField solve_smooth_approximant(const ScalarField& image, const FieldArray<double>& weight, double mu,
                                     int sweeps, const ScalarField& warm_start)
{
    if (!image.same_shape(warm_start) || weight.rows() != image.height() || weight.cols() != image.width()) {
        throw std::invalid_argument("solve_smooth_approximant: field dimensions differ");
    }
    if (!(mu >= 0)) {
        throw std::invalid_argument("solve_smooth_approximant: mu must be >= 0");
    }
    ScalarField j = warm_start;
    const int w = image.width();
    const int h = image.height();
    if (mu == 0) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (weight(y, x) > 0) {
                    j(x, y) = image(x, y);
                }
            }
        }
        return j;
    }
    // Exact minimization of the objective in one pixel at a time; the forward
    // difference at p couples p to its right/lower neighbour with weight w_p.
    for (int s = 0; s < sweeps; ++s) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double wp = weight(y, x);
                double num = wp * image(x, y);
                double den = wp;
                if (x + 1 < w) {
                    num += mu * wp * j(x + 1, y);
                    den += mu * wp;
                }
                if (y + 1 < h) {
                    num += mu * wp * j(x, y + 1);
                    den += mu * wp;
                }
                if (x > 0) {
                    const double wl = weight(y, x - 1);
                    num += mu * wl * j(x - 1, y);
                    den += mu * wl;
                }
                if (y > 0) {
                    const double wu = weight(y - 1, x);
                    num += mu * wu * j(x, y - 1);
                    den += mu * wu;
                }
                if (den > 0) {
                    j(x, y) = num / den;
                }
            }
        }
    }
    return j;
}

namespace {

void check_finite(const EnergyBreakdown& e)
{
    const char* names[] = {"F1", "F2", "F3", "F4"};
    const double vals[] = {e.f1, e.f2, e.f3, e.f4};
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(vals[i])) {
            throw NumericalError(std::string("non-finite energy term ") + names[i]);
        }
    }
    if (!std::isfinite(e.total)) {
        throw NumericalError("non-finite total energy");
    }
}

struct Evaluator
{
    const ScalarField& image;
    const ScalarField& g;
    const ShapeModel* model;
    const EnergyWeights& w;

    EnergyBreakdown operator()(const SegmentationState& s) const
    {
        auto e = total_energy(s, image, g, model, w);
        check_finite(e);
        return e;
    }
};

double pose_length_scale(const ScalarField& image)
{
    return 0.25 * std::min(image.width(), image.height());
}

// Tries `propose(scale)`; keeps it if the energy does not rise by more than
// `allowance`, otherwise halves the step up to `halvings` times, then drops it.
template <typename Propose>
void try_update(SegmentationState& current, EnergyBreakdown& energy, double allowance, int halvings,
                const Evaluator& eval, Propose&& propose)
{
    double scale = 1.0;
    for (int k = 0; k <= halvings; ++k, scale *= 0.5) {
        SegmentationState candidate = propose(current, scale);
        const auto e = eval(candidate);
        if (e.total <= energy.total + allowance) {
            current = std::move(candidate);
            energy = e;
            return;
        }
    }
}

} // namespace

void refresh_approximants(SegmentationState& state, const ScalarField& image, const ShapeModel& model,
                          const EnergyWeights& w, int sweeps)
{
    const auto region = prior_region(warped_prior(model, state.lambda, state.pose), w);
    state.i_in = solve_smooth_approximant(image, region, w.mu, sweeps, state.i_in);
    state.i_out = solve_smooth_approximant(image, (1.0 - region).eval(), w.mu, sweeps, state.i_out);
}

SegmentationState step(const SegmentationState& state, const ScalarField& image, const ScalarField& g,
                       const ShapeModel* model, const EnergyWeights& w, const DescentConfig& cfg)
{
    const Evaluator eval{image, g, model, w};
    SegmentationState s = state;
    EnergyBreakdown energy = eval(s);
    const int groups = model != nullptr ? 3 : 1;
    const double allowance = cfg.tol * std::abs(energy.total) / groups;

    if (model != nullptr) {
        // (a) smooth approximants; exact coordinate descent, never increases F4.
        refresh_approximants(s, image, *model, w, cfg.inner_ms_iters);
        energy = eval(s);

        // (b) shape and pose, projected onto their boxes.
        const Eigen::VectorXd gp = grad_params(s, image, g, model, w, cfg.fd_h, cfg.pose_box);
        const auto p = s.lambda.size();
        if (p > 0 && cfg.step_lambda > 0) {
            Eigen::VectorXd delta = -cfg.step_lambda * gp.head(p);
            FieldArray<double> move = FieldArray<double>::Zero(image.height(), image.width());
            for (Eigen::Index i = 0; i < p; ++i) {
                move += delta[i] * model->modes[i].array();
            }
            const double largest = move.abs().maxCoeff();
            if (largest > cfg.max_param_move) {
                delta *= cfg.max_param_move / largest;
            }
            try_update(s, energy, allowance, cfg.max_halvings, eval, [&](const SegmentationState& cur, double scale) {
                SegmentationState c = cur;
                c.lambda = model->project_lambda(cur.lambda + scale * delta);
                return c;
            });
        }
        if (cfg.step_pose > 0) {
            const double len = pose_length_scale(image);
            Eigen::Vector4d delta = -cfg.step_pose * gp.tail<4>();
            delta[0] /= len * len;
            delta[1] /= len * len;
            const double move = len * (std::abs(delta[0]) + std::abs(delta[1])) + std::abs(delta[2]) +
                                std::abs(delta[3]);
            if (move > cfg.max_param_move) {
                delta *= cfg.max_param_move / move;
            }
            try_update(s, energy, allowance, cfg.max_halvings, eval, [&](const SegmentationState& cur, double scale) {
                SegmentationState c = cur;
                c.pose = project(Pose::from_vector(cur.pose.to_vector() + scale * delta), cfg.pose_box);
                return c;
            });
        }
    }

    // (c) explicit Euler step on phi with a CFL-style cap.
    if (cfg.dt_phi > 0) {
        const ScalarField gphi = grad_phi_total(s, image, g, model, w);
        const double largest = gphi.array().abs().maxCoeff();
        if (largest > 0) {
            const double dt = std::min(cfg.dt_phi, 0.5 / largest);
            try_update(s, energy, allowance, cfg.max_halvings, eval, [&](const SegmentationState& cur, double scale) {
                SegmentationState c = cur;
                c.phi.array() -= (scale * dt) * gphi.array();
                return c;
            });
        }
    }

    s.iter = state.iter + 1;
    if (s.iter % cfg.record_every == 0) {
        energy.iter = s.iter;
        s.trace.push_back(energy);
    }
    return s;
}

SegmentationState initial_state(const ScalarField& image, const ShapeModel* model, const EnergyWeights& w,
                                const DescentConfig& cfg, const InitSpec& init)
{
    const int width = image.width();
    const int height = image.height();
    SegmentationState s;
    if (init.phi) {
        if (!init.phi->same_shape(image)) {
            throw std::invalid_argument("initial_state: initial level set size differs from the image");
        }
        s.phi = *init.phi;
    } else {
        const double r = init.radius_fraction * std::min(width, height);
        const double cx = 0.5 * (width - 1);
        const double cy = 0.5 * (height - 1);
        s.phi = ScalarField::generate(width, height, [&](int x, int y) { return std::hypot(x - cx, y - cy) - r; });
    }

    FieldArray<double> region;
    if (model != nullptr) {
        if (model->width() != width || model->height() != height) {
            throw std::invalid_argument("initial_state: shape model size differs from the image");
        }
        s.lambda = init.lambda.size() == 0 ? Eigen::VectorXd::Zero(model->num_modes()) : init.lambda;
        if (s.lambda.size() != model->num_modes()) {
            throw std::invalid_argument("initial_state: lambda length differs from the number of modes");
        }
        s.lambda = model->project_lambda(s.lambda);
        s.pose = project(init.pose, cfg.pose_box);
        region = prior_region(warped_prior(*model, s.lambda, s.pose), w);
    } else {
        s.lambda = Eigen::VectorXd();
        s.pose = init.pose;
        region = heaviside_eps((-s.phi.array()).eval(), w.eps, w.heaviside);
    }
    const double in_mass = region.sum();
    const double out_mass = (1.0 - region).sum();
    const double mean_in = in_mass > 0 ? (region * image.array()).sum() / in_mass : image.array().mean();
    const double mean_out = out_mass > 0 ? ((1.0 - region) * image.array()).sum() / out_mass : image.array().mean();
    s.i_in = ScalarField(width, height, mean_in);
    s.i_out = ScalarField(width, height, mean_out);
    return s;
}

SegmentationState segment(const ScalarField& image, const ShapeModel* model, const EnergyWeights& w,
                          const DescentConfig& cfg, const InitSpec& init)
{
    w.validate();
    cfg.validate();
    const ScalarField g = edge_indicator(image, w.eta, w.sigma);
    SegmentationState s = initial_state(image, model, w, cfg, init);
    auto e0 = total_energy(s, image, g, model, w);
    check_finite(e0);
    s.trace.push_back(e0);

    double previous = e0.total;
    int stalled = 0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        s = step(s, image, g, model, w, cfg);
        const double current = total_energy(s, image, g, model, w).total;
        const double rel = (previous - current) / std::max(std::abs(previous), 1e-300);
        stalled = rel < cfg.tol ? stalled + 1 : 0;
        previous = current;
        if (stalled >= cfg.stall_window) {
            break;
        }
    }
    return s;
}

ScalarField reinitialize(const ScalarField& phi0, int iters, double dt)
{
    if (!(dt > 0 && dt <= 0.5)) {
        throw std::invalid_argument("reinitialize: dt must lie in (0, 0.5]");
    }
    if (iters < 0) {
        throw std::invalid_argument("reinitialize: iters must be >= 0");
    }
    const int w = phi0.width();
    const int h = phi0.height();
    const FieldArray<double> sign = phi0.array() / (phi0.array().square() + 1.0).sqrt();
    ScalarField phi = phi0;
    ScalarField next = phi0;
    for (int it = 0; it < iters; ++it) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double c = phi(x, y);
                const double a = x > 0 ? c - phi(x - 1, y) : 0.0;     // D-x
                const double b = x + 1 < w ? phi(x + 1, y) - c : 0.0; // D+x
                const double cm = y > 0 ? c - phi(x, y - 1) : 0.0;    // D-y
                const double dp = y + 1 < h ? phi(x, y + 1) - c : 0.0; // D+y
                const double s = sign(y, x);
                double gx2 = 0, gy2 = 0;
                if (s > 0) {
                    gx2 = std::max(std::pow(std::max(a, 0.0), 2), std::pow(std::min(b, 0.0), 2));
                    gy2 = std::max(std::pow(std::max(cm, 0.0), 2), std::pow(std::min(dp, 0.0), 2));
                } else if (s < 0) {
                    gx2 = std::max(std::pow(std::min(a, 0.0), 2), std::pow(std::max(b, 0.0), 2));
                    gy2 = std::max(std::pow(std::min(cm, 0.0), 2), std::pow(std::max(dp, 0.0), 2));
                }
                next(x, y) = c - dt * s * (std::sqrt(gx2 + gy2) - 1.0);
            }
        }
        std::swap(phi, next);
    }
    return phi;
}

} // namespace priorseg
