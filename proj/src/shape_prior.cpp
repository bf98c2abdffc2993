#include "priorseg/shape_prior.hpp"

#include "priorseg/errors.hpp"
#include "priorseg/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace priorseg {

BinaryMask::BinaryMask(int width, int height)
{
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("BinaryMask: dimensions must be positive");
    }
    inside_ = MaskArray::Zero(height, width);
}

BinaryMask::BinaryMask(MaskArray inside) : inside_(std::move(inside))
{
    if (inside_.size() == 0) {
        throw std::invalid_argument("BinaryMask: dimensions must be positive");
    }
    inside_ = (inside_ != 0).cast<std::uint8_t>();
}

BinaryMask BinaryMask::from_field(const ScalarField& f, double threshold)
{
    return BinaryMask((f.array() > threshold).cast<std::uint8_t>().eval());
}

long BinaryMask::count() const
{
    return inside_.cast<long>().sum();
}

bool BinaryMask::non_degenerate() const
{
    const long n = count();
    return n > 0 && n < inside_.size();
}

BinaryMask BinaryMask::complement() const
{
    return BinaryMask((inside_ == 0).cast<std::uint8_t>().eval());
}

ScalarField BinaryMask::to_field() const
{
    return ScalarField((inside_.cast<double>() * 255.0).eval());
}

bool BinaryMask::operator==(const BinaryMask& other) const
{
    return width() == other.width() && height() == other.height() && (inside_ == other.inside_).all();
}

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher); squared distances.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z)
{
    const int n = static_cast<int>(f.size());
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        auto intersect = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
        double s = intersect(v[k]);
        // z[0] = -inf terminates the loop.
        while (s <= z[k]) {
            --k;
            s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) {
            ++k;
        }
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

// Squared Euclidean distance from every pixel to the nearest site.
FieldArray<double> squared_distance(const MaskArray& sites)
{
    const int h = static_cast<int>(sites.rows());
    const int w = static_cast<int>(sites.cols());
    FieldArray<double> g(h, w);
    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);

    f.resize(h);
    d.resize(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            f[y] = sites(y, x) ? 0.0 : kFar;
        }
        edt_1d(f, d, v, z);
        for (int y = 0; y < h; ++y) {
            g(y, x) = std::min(d[y], kFar);
        }
    }
    f.resize(w);
    d.resize(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            f[x] = g(y, x);
        }
        edt_1d(f, d, v, z);
        for (int x = 0; x < w; ++x) {
            g(y, x) = d[x];
        }
    }
    return g;
}

} // namespace

ScalarField sdf_from_mask(const BinaryMask& mask)
{
    if (!mask.non_degenerate()) {
        throw std::invalid_argument("sdf_from_mask: mask must contain inside and outside pixels");
    }
    const auto& in = mask.array();
    const MaskArray out = (in == 0).cast<std::uint8_t>();
    const auto to_inside = squared_distance(in);
    const auto to_outside = squared_distance(out);
    FieldArray<double> sdf(in.rows(), in.cols());
    for (Eigen::Index i = 0; i < sdf.size(); ++i) {
        sdf(i) = in(i) ? -(std::sqrt(to_outside(i)) - 0.5) : std::sqrt(to_inside(i)) - 0.5;
    }
    return ScalarField(std::move(sdf));
}

double wrap_angle(double theta)
{
    constexpr double pi = std::numbers::pi;
    if (theta >= -pi && theta <= pi) {
        return theta;
    }
    double t = std::fmod(theta + pi, 2 * pi);
    if (t < 0) {
        t += 2 * pi;
    }
    return t - pi;
}

Pose project(const Pose& pose, const PoseBox& box)
{
    return {std::clamp(pose.tau, box.tau_min, box.tau_max), wrap_angle(pose.theta),
            std::clamp(pose.tx, box.t_min, box.t_max), std::clamp(pose.ty, box.t_min, box.t_max)};
}

bool contains(const PoseBox& box, const Pose& pose)
{
    constexpr double pi = std::numbers::pi;
    return pose.tau >= box.tau_min && pose.tau <= box.tau_max && pose.theta >= -pi && pose.theta <= pi &&
           pose.tx >= box.t_min && pose.tx <= box.t_max && pose.ty >= box.t_min && pose.ty <= box.t_max;
}

Eigen::Vector2d pose_center(PoseCenter convention, int width, int height)
{
    if (convention == PoseCenter::origin) {
        return Eigen::Vector2d::Zero();
    }
    return {0.5 * (width - 1), 0.5 * (height - 1)};
}

Eigen::Vector2d apply_pose(const Pose& pose, const Eigen::Vector2d& x, const Eigen::Vector2d& c)
{
    const double cs = std::cos(pose.theta);
    const double sn = std::sin(pose.theta);
    const Eigen::Vector2d r = x - c;
    return {pose.tau * (cs * r.x() - sn * r.y()) + c.x() + pose.tx,
            pose.tau * (sn * r.x() + cs * r.y()) + c.y() + pose.ty};
}

ScalarField warp(const ScalarField& f, const Pose& pose, double outside, const Eigen::Vector2d& center)
{
    if (!(pose.tau > 0) || !std::isfinite(pose.theta) || !std::isfinite(pose.tx) || !std::isfinite(pose.ty)) {
        throw std::invalid_argument("warp: invalid pose");
    }
    ScalarField out(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            const auto p = apply_pose(pose, Eigen::Vector2d(x, y), center);
            out(x, y) = bilinear_sample(f, p.x(), p.y(), outside);
        }
    }
    return out;
}

ScalarField warp(const ScalarField& f, const Pose& pose, double outside, PoseCenter center)
{
    return warp(f, pose, outside, pose_center(center, f.width(), f.height()));
}

void ShapeModel::set_lambda_box(LambdaBoxRule rule, double k)
{
    const Eigen::VectorXd half =
        rule == LambdaBoxRule::std_dev ? (k * variances.array().max(0.0).sqrt()).matrix().eval()
                                       : (k * variances.array().max(0.0)).matrix().eval();
    lambda_lower = -half;
    lambda_upper = half;
}

Eigen::VectorXd ShapeModel::project_lambda(const Eigen::VectorXd& lambda) const
{
    return lambda.cwiseMax(lambda_lower).cwiseMin(lambda_upper);
}

bool ShapeModel::lambda_in_box(const Eigen::VectorXd& lambda) const
{
    return lambda.size() == lambda_lower.size() && (lambda.array() >= lambda_lower.array()).all() &&
           (lambda.array() <= lambda_upper.array()).all();
}

namespace {

// Modified Gram-Schmidt of v against the first `count` columns of basis.
void orthogonalize(Eigen::Ref<Eigen::VectorXd> v, const Eigen::MatrixXd& basis, int count)
{
    for (int j = 0; j < count; ++j) {
        v -= basis.col(j).dot(v) * basis.col(j);
    }
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v)
{
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) {
        v = -v;
    }
}

} // namespace

ShapeModel build_shape_model(const std::vector<ScalarField>& sdfs, int num_modes, PoseCenter convention)
{
    const int n = static_cast<int>(sdfs.size());
    if (n < 2) {
        throw std::invalid_argument("build_shape_model: need at least two training shapes");
    }
    const int w = sdfs.front().width();
    const int h = sdfs.front().height();
    for (const auto& s : sdfs) {
        if (s.width() != w || s.height() != h) {
            throw std::invalid_argument("build_shape_model: training fields differ in size");
        }
    }
    if (num_modes < 1 || num_modes > n - 1) {
        throw std::invalid_argument("build_shape_model: number of modes must lie in [1, N-1]");
    }

    const Eigen::Index pixels = static_cast<Eigen::Index>(w) * h;
    Eigen::MatrixXd data(pixels, n);
    for (int i = 0; i < n; ++i) {
        data.col(i) = sdfs[i].array().reshaped<Eigen::RowMajor>().matrix();
    }
    const Eigen::VectorXd mean = data.rowwise().sum() / double(n);
    data.colwise() -= mean;

    const Eigen::MatrixXd gram = data.transpose() * data;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("build_shape_model: eigen decomposition failed");
    }
    const double trace = gram.trace();

    ShapeModel model;
    model.n_training = n;
    model.variances.resize(num_modes);
    Eigen::MatrixXd basis(pixels, num_modes);
    int valid = 0;
    for (int i = 0; i < num_modes; ++i) {
        // Eigen sorts ascending.
        const double g = std::max(eig.eigenvalues()[n - 1 - i], 0.0);
        const double variance = g / n;
        const bool zero = variance <= 1e-10 || g <= 1e-12 * trace;
        model.variances[i] = zero ? std::max(variance, 0.0) : variance;
        if (zero) {
            model.degenerate = true;
            continue;
        }
        basis.col(valid++) = data * eig.eigenvectors().col(n - 1 - i) / std::sqrt(g);
    }
    // Two Gram-Schmidt passes restore orthonormality lost to round-off in the
    // smallest modes without changing their span.
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < valid; ++j) {
            orthogonalize(basis.col(j), basis, j);
            basis.col(j).normalize();
        }
    }
    // Arbitrary orthonormal completion for the numerically null directions.
    for (Eigen::Index k = 0; valid < num_modes && k < pixels; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(pixels, k);
        orthogonalize(e, basis, valid);
        orthogonalize(e, basis, valid);
        const double norm = e.norm();
        if (norm > 0.5) {
            basis.col(valid++) = e / norm;
        }
    }
    for (int j = 0; j < num_modes; ++j) {
        fix_sign(basis.col(j));
    }

    model.mean = ScalarField(mean.reshaped<Eigen::RowMajor>(h, w).array().eval());
    for (int j = 0; j < num_modes; ++j) {
        model.modes.emplace_back(basis.col(j).reshaped<Eigen::RowMajor>(h, w).array().eval());
    }
    model.center_convention = convention;
    model.center = pose_center(convention, w, h);
    model.set_lambda_box(LambdaBoxRule::std_dev);
    return model;
}

ScalarField synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& lambda)
{
    if (lambda.size() != model.num_modes()) {
        throw std::invalid_argument("synthesize_shape: lambda length differs from the number of modes");
    }
    ScalarField out = model.mean;
    for (int i = 0; i < model.num_modes(); ++i) {
        out.array() += lambda[i] * model.modes[i].array();
    }
    return out;
}

Eigen::VectorXd project_shape(const ShapeModel& model, const ScalarField& sdf)
{
    if (!sdf.same_shape(model.mean)) {
        throw std::invalid_argument("project_shape: field size differs from the model");
    }
    const FieldArray<double> centered = sdf.array() - model.mean.array();
    Eigen::VectorXd lambda(model.num_modes());
    for (int i = 0; i < model.num_modes(); ++i) {
        lambda[i] = (centered * model.modes[i].array()).sum();
    }
    return lambda;
}

Eigen::Vector2d centroid(const BinaryMask& mask)
{
    double sx = 0, sy = 0;
    long n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) {
        throw std::invalid_argument("centroid: empty mask");
    }
    return {sx / n, sy / n};
}

std::vector<BinaryMask> centroid_align(const std::vector<BinaryMask>& masks)
{
    std::vector<BinaryMask> out;
    out.reserve(masks.size());
    for (const auto& m : masks) {
        if (!m.non_degenerate()) {
            throw std::invalid_argument("centroid_align: degenerate mask");
        }
        const Eigen::Vector2d target = pose_center(PoseCenter::domain_center, m.width(), m.height());
        const Eigen::Vector2d delta = target - centroid(m);
        const int dx = static_cast<int>(std::floor(delta.x() + 0.5));
        const int dy = static_cast<int>(std::floor(delta.y() + 0.5));
        BinaryMask shifted(m.width(), m.height());
        for (int y = 0; y < m.height(); ++y) {
            for (int x = 0; x < m.width(); ++x) {
                if (!m(x, y)) {
                    continue;
                }
                const int nx = x + dx;
                const int ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) {
                    throw std::invalid_argument("centroid_align: translation clips the object");
                }
                shifted.set(nx, ny, true);
            }
        }
        out.push_back(std::move(shifted));
    }
    return out;
}

namespace {
constexpr char kSmdlMagic[4] = {'S', 'M', 'D', 'L'};
constexpr std::uint32_t kSmdlVersion = 1;
} // namespace

void write_shape_model(const ShapeModel& model, std::ostream& out)
{
    out.write(kSmdlMagic, 4);
    io::put_u32(out, kSmdlVersion);
    io::put_u32(out, static_cast<std::uint32_t>(model.width()));
    io::put_u32(out, static_cast<std::uint32_t>(model.height()));
    io::put_u32(out, static_cast<std::uint32_t>(model.n_training));
    io::put_u32(out, static_cast<std::uint32_t>(model.num_modes()));
    io::put_field_values(out, model.mean);
    for (const auto& m : model.modes) {
        io::put_field_values(out, m);
    }
    for (int i = 0; i < model.num_modes(); ++i) {
        io::put_f64(out, model.variances[i]);
    }
    io::put_f64(out, model.center_convention == PoseCenter::origin ? 1.0 : 0.0);
    io::put_f64(out, model.center.x());
    io::put_f64(out, model.center.y());
}

ShapeModel read_shape_model(std::istream& in, LambdaBoxRule rule, double k)
{
    char magic[4];
    if (!in.read(magic, 4)) {
        throw FormatError("smdl: truncated header");
    }
    if (!std::equal(magic, magic + 4, kSmdlMagic)) {
        throw FormatError("smdl: bad magic");
    }
    if (io::get_u32(in, "smdl") != kSmdlVersion) {
        throw FormatError("smdl: unsupported version");
    }
    const auto w = io::get_u32(in, "smdl");
    const auto h = io::get_u32(in, "smdl");
    const auto n = io::get_u32(in, "smdl");
    const auto p = io::get_u32(in, "smdl");
    if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15)) {
        throw FormatError("smdl: invalid dimensions");
    }
    if (n < 2 || p < 1 || p > n - 1) {
        throw FormatError("smdl: inconsistent training count / number of modes");
    }
    ShapeModel model;
    model.n_training = static_cast<int>(n);
    model.mean = io::get_field_values(in, static_cast<int>(w), static_cast<int>(h), "smdl");
    for (std::uint32_t i = 0; i < p; ++i) {
        model.modes.push_back(io::get_field_values(in, static_cast<int>(w), static_cast<int>(h), "smdl"));
    }
    model.variances.resize(p);
    for (std::uint32_t i = 0; i < p; ++i) {
        model.variances[i] = io::get_f64(in, "smdl");
        if (!std::isfinite(model.variances[i]) || model.variances[i] < 0) {
            throw FormatError("smdl: invalid variance");
        }
        model.degenerate = model.degenerate || model.variances[i] <= 1e-10;
    }
    const double flag = io::get_f64(in, "smdl");
    if (flag != 0.0 && flag != 1.0) {
        throw FormatError("smdl: invalid center convention flag");
    }
    model.center_convention = flag == 1.0 ? PoseCenter::origin : PoseCenter::domain_center;
    model.center.x() = io::get_f64(in, "smdl");
    model.center.y() = io::get_f64(in, "smdl");
    if (!model.center.allFinite()) {
        throw FormatError("smdl: invalid center");
    }
    model.set_lambda_box(rule, k);
    return model;
}

void write_shape_model(const ShapeModel& model, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    write_shape_model(model, out);
    if (!out) {
        throw FormatError("smdl: write failed for '" + path + "'");
    }
}

ShapeModel read_shape_model(const std::string& path, LambdaBoxRule rule, double k)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "' for reading");
    }
    return read_shape_model(in, rule, k);
}

} // namespace priorseg
