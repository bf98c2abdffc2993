#pragma once

// Synthetic ground-truth scenes and parametric training sets.
//
// Noise generator (bit-reproducible across platforms): SplitMix64 seeded with
// noise_seed. Each 64-bit draw becomes a uniform u = (draw >> 11) * 2^-53 in
// [0, 1). Pairs (u1, u2) feed Box-Muller, z0 = r cos(2 pi u2),
// z1 = r sin(2 pi u2) with r = sqrt(-2 ln(1 - u1)); pixels consume z0, z1,
// z0, ... in row-major order.

#include "priorseg/config.hpp"
#include "priorseg/field.hpp"
#include "priorseg/shape_prior.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace priorseg {

struct Disk
{
    double cx, cy, r;
};

struct Ellipse
{
    double cx, cy, a, b;
    double angle = 0; // radians, rotation of the a axis
};

/// Inside: nx * x + ny * y < offset.
struct HalfPlane
{
    double nx, ny, offset;
};

using Shape = std::variant<Disk, Ellipse, HalfPlane>;

/// Sector of the shape between two angles (radians, atan2 convention in
/// image coordinates, wrapped into [0, 2 pi)) about the shape center.
struct ArcOcclusion
{
    double theta0, theta1;
};

/// Inclusive pixel box.
struct BoxOcclusion
{
    int x0, y0, x1, y1;
};

using Occlusion = std::variant<ArcOcclusion, BoxOcclusion>;

struct SceneSpec
{
    int width = 128;
    int height = 128;
    Shape shape = Disk{63.5, 63.5, 20.0};
    double fg = 200.0;
    double bg = 50.0;
    double noise_std = 0.0;
    std::uint64_t noise_seed = 1;
    std::optional<Occlusion> occlusion;

    static SceneSpec from_key_values(const KeyValues& kv);
    KeyValues to_key_values() const;
};

class SplitMix64
{
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform(); // [0, 1)

private:
    std::uint64_t state_;
};

/// Indicator of the shape at pixel centers.
BinaryMask rasterize(const Shape& shape, int width, int height);

/// image = bg + (fg - bg) * chi_shape, occlusion painted with bg, then noise.
/// The truth mask is the shape alone.
std::pair<ScalarField, BinaryMask> render(const SceneSpec& spec);

/// n centered ellipse masks with semi-axes evenly spaced over the ranges.
/// `jitter` > 0 shifts each center by a uniform offset in [-jitter, jitter]
/// drawn from `seed`.
std::vector<BinaryMask> ellipse_training_set(int n, std::pair<double, double> a_range,
                                             std::pair<double, double> b_range, int width, int height,
                                             std::uint64_t seed = 0, double jitter = 0.0);

/// Analytic signed distance to a circle, negative inside.
ScalarField disk_sdf(int width, int height, double cx, double cy, double r);

} // namespace priorseg
