#pragma once

// Statistical shape prior: signed distance transforms of training masks, PCA
// over the SDF stack (phi = mean + U * lambda) and rigid pose warping.
//
// Sign convention: every SDF in this project is negative inside the object.

#include "priorseg/field.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace priorseg {

using MaskArray = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class BinaryMask
{
public:
    BinaryMask() = default;
    BinaryMask(int width, int height);
    explicit BinaryMask(MaskArray inside);

    template <typename Pred>
    static BinaryMask generate(int width, int height, Pred&& inside)
    {
        BinaryMask m(width, height);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                m.set(x, y, inside(x, y));
            }
        }
        return m;
    }

    /// inside = value > threshold
    static BinaryMask from_field(const ScalarField& f, double threshold = 127.5);

    int width() const { return static_cast<int>(inside_.cols()); }
    int height() const { return static_cast<int>(inside_.rows()); }
    bool operator()(int x, int y) const { return inside_(y, x) != 0; }
    void set(int x, int y, bool v) { inside_(y, x) = v ? 1 : 0; }
    const MaskArray& array() const { return inside_; }

    long count() const;
    /// At least one inside and one outside pixel.
    bool non_degenerate() const;
    BinaryMask complement() const;
    /// 255 inside, 0 outside.
    ScalarField to_field() const;

    bool operator==(const BinaryMask& other) const;

private:
    MaskArray inside_;
};

/// Exact Euclidean signed distance: distance to the nearest pixel of the other
/// class minus 1/2, negative inside, so the zero level set runs halfway
/// between inside/outside neighbours.
ScalarField sdf_from_mask(const BinaryMask& mask);

struct Pose
{
    double tau = 1.0;
    double theta = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    Eigen::Vector4d to_vector() const { return {tau, theta, tx, ty}; }
    static Pose from_vector(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
    bool operator==(const Pose&) const = default;
};

/// Admissible pose box. Theta always lives in [-pi, pi] (wrapped).
struct PoseBox
{
    double tau_min = 0.25;
    double tau_max = 4.0;
    double t_min = -255.0;
    double t_max = 255.0;
};

double wrap_angle(double theta);
Pose project(const Pose& pose, const PoseBox& box);
bool contains(const PoseBox& box, const Pose& pose);

/// Where the rotation/scaling of h(x) is anchored.
enum class PoseCenter : std::uint8_t { domain_center = 0, origin = 1 };

/// h(x) = tau * R(theta) * (x - c) + c + T.
Eigen::Vector2d apply_pose(const Pose& pose, const Eigen::Vector2d& x, const Eigen::Vector2d& c);

/// output(x) = bilinear_sample(f, h(x), outside).
ScalarField warp(const ScalarField& f, const Pose& pose, double outside, const Eigen::Vector2d& center);
ScalarField warp(const ScalarField& f, const Pose& pose, double outside, PoseCenter center = PoseCenter::domain_center);

Eigen::Vector2d pose_center(PoseCenter convention, int width, int height);

/// How the lambda box half-widths are derived from the PCA variances.
enum class LambdaBoxRule {
    std_dev,    // +/- k * sqrt(variance)
    eigenvalue, // +/- k * variance
};

struct ShapeModel
{
    ScalarField mean;
    std::vector<ScalarField> modes;
    Eigen::VectorXd variances;
    Eigen::VectorXd lambda_lower;
    Eigen::VectorXd lambda_upper;
    int n_training = 0;
    /// Set when at least one variance is numerically zero; the matching modes
    /// are an arbitrary orthonormal completion.
    bool degenerate = false;
    PoseCenter center_convention = PoseCenter::domain_center;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();

    int num_modes() const { return static_cast<int>(modes.size()); }
    int width() const { return mean.width(); }
    int height() const { return mean.height(); }

    void set_lambda_box(LambdaBoxRule rule, double k = 3.0);
    Eigen::VectorXd project_lambda(const Eigen::VectorXd& lambda) const;
    bool lambda_in_box(const Eigen::VectorXd& lambda) const;
};

/// PCA over N training SDFs via the N x N Gram matrix of centered fields.
ShapeModel build_shape_model(const std::vector<ScalarField>& sdfs, int num_modes,
                             PoseCenter convention = PoseCenter::domain_center);

/// mean + sum_i lambda_i * modes_i. Only approximately a signed distance.
ScalarField synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& lambda);

/// Coordinates of `sdf - mean` in the mode basis.
Eigen::VectorXd project_shape(const ShapeModel& model, const ScalarField& sdf);

/// Integer translation of each mask so its centroid lands on the domain
/// center. Throws if any inside pixel would leave the domain.
std::vector<BinaryMask> centroid_align(const std::vector<BinaryMask>& masks);
Eigen::Vector2d centroid(const BinaryMask& mask);

// SMDL codec: "SMDL" | u32 version=1 | u32 width, height, N, p | mean | p modes
// | p f64 variances | f64 center flag | f64 cx | f64 cy. All little-endian.
void write_shape_model(const ShapeModel& model, std::ostream& out);
ShapeModel read_shape_model(std::istream& in, LambdaBoxRule rule = LambdaBoxRule::std_dev, double k = 3.0);
void write_shape_model(const ShapeModel& model, const std::string& path);
ShapeModel read_shape_model(const std::string& path, LambdaBoxRule rule = LambdaBoxRule::std_dev, double k = 3.0);

} // namespace priorseg
