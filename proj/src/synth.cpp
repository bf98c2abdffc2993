#include "priorseg/synth.hpp"

#include "priorseg/errors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace priorseg {

std::uint64_t SplitMix64::next()
{
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double SplitMix64::uniform()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

namespace {

struct Inside
{
    double x, y;

    bool operator()(const Disk& d) const
    {
        const double dx = x - d.cx;
        const double dy = y - d.cy;
        return dx * dx + dy * dy <= d.r * d.r;
    }
    bool operator()(const Ellipse& e) const
    {
        const double c = std::cos(e.angle);
        const double s = std::sin(e.angle);
        const double u = c * (x - e.cx) + s * (y - e.cy);
        const double v = -s * (x - e.cx) + c * (y - e.cy);
        return (u / e.a) * (u / e.a) + (v / e.b) * (v / e.b) <= 1.0;
    }
    bool operator()(const HalfPlane& h) const { return h.nx * x + h.ny * y < h.offset; }
};

struct Center
{
    std::optional<Eigen::Vector2d> operator()(const Disk& d) const { return Eigen::Vector2d(d.cx, d.cy); }
    std::optional<Eigen::Vector2d> operator()(const Ellipse& e) const { return Eigen::Vector2d(e.cx, e.cy); }
    std::optional<Eigen::Vector2d> operator()(const HalfPlane&) const { return std::nullopt; }
};

void check_bounds(const Shape& shape, int width, int height)
{
    constexpr double margin = 2.0;
    auto fits = [&](double cx, double cy, double ex, double ey) {
        return cx - ex >= margin && cx + ex <= width - 1 - margin && cy - ey >= margin &&
               cy + ey <= height - 1 - margin;
    };
    if (const auto* d = std::get_if<Disk>(&shape)) {
        if (!(d->r > 0) || !fits(d->cx, d->cy, d->r, d->r)) {
            throw std::invalid_argument("render: disk does not fit inside the domain with a 2 px margin");
        }
    } else if (const auto* e = std::get_if<Ellipse>(&shape)) {
        const double c = std::cos(e->angle);
        const double s = std::sin(e->angle);
        const double ex = std::sqrt(e->a * e->a * c * c + e->b * e->b * s * s);
        const double ey = std::sqrt(e->a * e->a * s * s + e->b * e->b * c * c);
        if (!(e->a > 0 && e->b > 0) || !fits(e->cx, e->cy, ex, ey)) {
            throw std::invalid_argument("render: ellipse does not fit inside the domain with a 2 px margin");
        }
    } else {
        const auto& h = std::get<HalfPlane>(shape);
        if (h.nx == 0 && h.ny == 0) {
            throw std::invalid_argument("render: half-plane normal must be non-zero");
        }
        if (!rasterize(shape, width, height).non_degenerate()) {
            throw std::invalid_argument("render: half-plane boundary misses the domain");
        }
    }
}

bool angle_in_arc(double angle, const ArcOcclusion& arc)
{
    constexpr double two_pi = 2 * std::numbers::pi;
    auto wrap = [&](double t) {
        t = std::fmod(t, two_pi);
        return t < 0 ? t + two_pi : t;
    };
    const double a = wrap(angle - arc.theta0);
    const double span = arc.theta1 - arc.theta0;
    if (span >= two_pi) {
        return true;
    }
    return a <= wrap(span);
}

} // namespace

BinaryMask rasterize(const Shape& shape, int width, int height)
{
    return BinaryMask::generate(width, height,
                                [&](int x, int y) { return std::visit(Inside{double(x), double(y)}, shape); });
}

std::pair<ScalarField, BinaryMask> render(const SceneSpec& spec)
{
    if (spec.width < 2 || spec.height < 2) {
        throw std::invalid_argument("render: domain must be at least 2x2");
    }
    if (!(spec.noise_std >= 0)) {
        throw std::invalid_argument("render: noise_std must be >= 0");
    }
    check_bounds(spec.shape, spec.width, spec.height);
    BinaryMask truth = rasterize(spec.shape, spec.width, spec.height);

    ScalarField image(spec.width, spec.height, spec.bg);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            if (truth(x, y)) {
                image(x, y) = spec.fg;
            }
        }
    }

    if (spec.occlusion) {
        if (const auto* arc = std::get_if<ArcOcclusion>(&*spec.occlusion)) {
            const auto c = std::visit(Center{}, spec.shape);
            if (!c) {
                throw std::invalid_argument("render: arc occlusion needs a shape with a center");
            }
            for (int y = 0; y < spec.height; ++y) {
                for (int x = 0; x < spec.width; ++x) {
                    if (truth(x, y) && angle_in_arc(std::atan2(y - c->y(), x - c->x()), *arc)) {
                        image(x, y) = spec.bg;
                    }
                }
            }
        } else {
            const auto& box = std::get<BoxOcclusion>(*spec.occlusion);
            for (int y = std::max(box.y0, 0); y <= std::min(box.y1, spec.height - 1); ++y) {
                for (int x = std::max(box.x0, 0); x <= std::min(box.x1, spec.width - 1); ++x) {
                    image(x, y) = spec.bg;
                }
            }
        }
    }

    if (spec.noise_std > 0) {
        SplitMix64 rng(spec.noise_seed);
        double spare = 0;
        bool have_spare = false;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                double z = 0;
                if (have_spare) {
                    z = spare;
                    have_spare = false;
                } else {
                    const double u1 = rng.uniform();
                    const double u2 = rng.uniform();
                    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
                    z = r * std::cos(2 * std::numbers::pi * u2);
                    spare = r * std::sin(2 * std::numbers::pi * u2);
                    have_spare = true;
                }
                image(x, y) += spec.noise_std * z;
            }
        }
    }
    return {std::move(image), std::move(truth)};
}

std::vector<BinaryMask> ellipse_training_set(int n, std::pair<double, double> a_range,
                                             std::pair<double, double> b_range, int width, int height,
                                             std::uint64_t seed, double jitter)
{
    if (n < 2) {
        throw std::invalid_argument("ellipse_training_set: need n >= 2");
    }
    if (!(a_range.first > 0 && a_range.second > 0 && b_range.first > 0 && b_range.second > 0)) {
        throw std::invalid_argument("ellipse_training_set: semi-axis ranges must be positive");
    }
    SplitMix64 rng(seed);
    std::vector<BinaryMask> out;
    const double cx = 0.5 * (width - 1);
    const double cy = 0.5 * (height - 1);
    for (int i = 0; i < n; ++i) {
        const double t = double(i) / (n - 1);
        Ellipse e{cx, cy, a_range.first + t * (a_range.second - a_range.first),
                  b_range.first + t * (b_range.second - b_range.first), 0.0};
        if (jitter > 0) {
            e.cx += jitter * (2 * rng.uniform() - 1);
            e.cy += jitter * (2 * rng.uniform() - 1);
        }
        check_bounds(e, width, height);
        out.push_back(rasterize(e, width, height));
    }
    return out;
}

ScalarField disk_sdf(int width, int height, double cx, double cy, double r)
{
    return ScalarField::generate(width, height, [&](int x, int y) { return std::hypot(x - cx, y - cy) - r; });
}

SceneSpec SceneSpec::from_key_values(const KeyValues& kv)
{
    SceneSpec s;
    s.width = kv.get_int("width", s.width);
    s.height = kv.get_int("height", s.height);
    const auto shape = kv.get_string("shape", "disk");
    const double cx = kv.get_double("cx", 0.5 * (s.width - 1));
    const double cy = kv.get_double("cy", 0.5 * (s.height - 1));
    if (shape == "disk") {
        s.shape = Disk{cx, cy, kv.get_double("r", 20.0)};
    } else if (shape == "ellipse") {
        s.shape = Ellipse{cx, cy, kv.get_double("a", 20.0), kv.get_double("b", 20.0), kv.get_double("angle", 0.0)};
    } else if (shape == "halfplane") {
        s.shape = HalfPlane{kv.get_double("nx", 1.0), kv.get_double("ny", 0.0),
                            kv.get_double("offset", 0.5 * s.width)};
    } else {
        throw FormatError("scene: unknown shape '" + shape + "'");
    }
    s.fg = kv.get_double("fg", s.fg);
    s.bg = kv.get_double("bg", s.bg);
    s.noise_std = kv.get_double("noise_std", s.noise_std);
    s.noise_seed = kv.get_u64("noise_seed", s.noise_seed);
    const auto occ = kv.get_string("occlusion", "none");
    if (occ == "arc") {
        s.occlusion = ArcOcclusion{kv.get_double("occ_theta0", 0.0), kv.get_double("occ_theta1", 0.0)};
    } else if (occ == "box") {
        s.occlusion = BoxOcclusion{kv.get_int("occ_x0", 0), kv.get_int("occ_y0", 0), kv.get_int("occ_x1", 0),
                                   kv.get_int("occ_y1", 0)};
    } else if (occ != "none") {
        throw FormatError("scene: unknown occlusion '" + occ + "'");
    }
    kv.reject_unused();
    if (s.width < 2 || s.height < 2 || !(s.noise_std >= 0)) {
        throw FormatError("scene: invalid dimensions or noise_std");
    }
    return s;
}

KeyValues SceneSpec::to_key_values() const
{
    KeyValues kv;
    kv.set("width", width);
    kv.set("height", height);
    if (const auto* d = std::get_if<Disk>(&shape)) {
        kv.set("shape", std::string("disk"));
        kv.set("cx", d->cx);
        kv.set("cy", d->cy);
        kv.set("r", d->r);
    } else if (const auto* e = std::get_if<Ellipse>(&shape)) {
        kv.set("shape", std::string("ellipse"));
        kv.set("cx", e->cx);
        kv.set("cy", e->cy);
        kv.set("a", e->a);
        kv.set("b", e->b);
        kv.set("angle", e->angle);
    } else {
        const auto& h = std::get<HalfPlane>(shape);
        kv.set("shape", std::string("halfplane"));
        kv.set("nx", h.nx);
        kv.set("ny", h.ny);
        kv.set("offset", h.offset);
    }
    kv.set("fg", fg);
    kv.set("bg", bg);
    kv.set("noise_std", noise_std);
    kv.set("noise_seed", std::to_string(noise_seed));
    if (!occlusion) {
        kv.set("occlusion", std::string("none"));
    } else if (const auto* arc = std::get_if<ArcOcclusion>(&*occlusion)) {
        kv.set("occlusion", std::string("arc"));
        kv.set("occ_theta0", arc->theta0);
        kv.set("occ_theta1", arc->theta1);
    } else {
        const auto& b = std::get<BoxOcclusion>(*occlusion);
        kv.set("occlusion", std::string("box"));
        kv.set("occ_x0", b.x0);
        kv.set("occ_y0", b.y0);
        kv.set("occ_x1", b.x1);
        kv.set("occ_y1", b.y1);
    }
    return kv;
}

} // namespace priorseg
