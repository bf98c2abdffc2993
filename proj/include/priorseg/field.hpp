#pragma once

// Dense 2D scalar fields on a unit-spaced grid and the finite-difference
// calculus used by every energy term.
//
// Storage is a row-major Eigen array with rows = height and cols = width, so
// field(x, y) maps to array(y, x). Forward differences (grad) and backward
// differences (divergence) form an exact discrete adjoint pair:
//   <grad f, v> = -<f, div v>   for all f, v.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace priorseg {

template <typename Scalar>
using FieldArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
class Field
{
public:
    using Array = FieldArray<Scalar>;

    Field() = default;

    Field(int width, int height, Scalar value = Scalar(0))
    {
        if (width <= 0 || height <= 0) {
            throw std::invalid_argument("Field: dimensions must be positive");
        }
        data_ = Array::Constant(height, width, value);
    }

    /// Takes ownership of an array laid out as (height x width). Rejects empty
    /// arrays and non-finite values.
    explicit Field(Array data) : data_(std::move(data))
    {
        if (data_.rows() == 0 || data_.cols() == 0) {
            throw std::invalid_argument("Field: dimensions must be positive");
        }
        if (!data_.isFinite().all()) {
            throw std::invalid_argument("Field: non-finite value");
        }
    }

    template <typename Fn>
    static Field generate(int width, int height, Fn&& fn)
    {
        Field f(width, height);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                f(x, y) = static_cast<Scalar>(fn(x, y));
            }
        }
        return f;
    }

    int width() const { return static_cast<int>(data_.cols()); }
    int height() const { return static_cast<int>(data_.rows()); }
    Eigen::Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Scalar& operator()(int x, int y) { return data_(y, x); }
    Scalar operator()(int x, int y) const { return data_(y, x); }

    const Array& array() const { return data_; }
    Array& array() { return data_; }

    bool same_shape(const Field& other) const
    {
        return width() == other.width() && height() == other.height();
    }

    bool all_finite() const { return data_.isFinite().all(); }

private:
    Array data_;
};

using ScalarField = Field<double>;

template <typename Scalar>
struct Gradient2
{
    Field<Scalar> gx;
    Field<Scalar> gy;
};

/// Regularization of |grad f| wherever it is differentiated or divided by.
inline constexpr double kGradientSmoothing = 1e-8;

namespace detail {

template <typename Scalar>
void require_same_shape(const Field<Scalar>& a, const Field<Scalar>& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": field dimensions differ");
    }
}

// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
inline int reflect_index(int i, int n)
{
    const int period = 2 * n;
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - 1 - i;
}

} // namespace detail

template <typename Scalar>
Gradient2<Scalar> grad(const Field<Scalar>& f)
{
    const int w = f.width();
    const int h = f.height();
    if (w < 2 || h < 2) {
        throw std::invalid_argument("grad: field must be at least 2x2");
    }
    Gradient2<Scalar> g{Field<Scalar>(w, h), Field<Scalar>(w, h)};
    const auto& a = f.array();
    g.gx.array().leftCols(w - 1) = a.rightCols(w - 1) - a.leftCols(w - 1);
    g.gy.array().topRows(h - 1) = a.bottomRows(h - 1) - a.topRows(h - 1);
    return g;
}

template <typename Scalar>
Field<Scalar> grad_magnitude(const Field<Scalar>& f)
{
    const auto g = grad(f);
    return Field<Scalar>((g.gx.array().square() + g.gy.array().square()).sqrt().eval());
}

/// sqrt(gx^2 + gy^2 + kappa^2) - kappa: zero for flat fields, differentiable
/// everywhere, and within kappa of the plain magnitude.
template <typename Scalar>
FieldArray<Scalar> smoothed_magnitude(const Gradient2<Scalar>& g, Scalar kappa = Scalar(kGradientSmoothing))
{
    return (g.gx.array().square() + g.gy.array().square() + kappa * kappa).sqrt() - kappa;
}

/// Backward-difference divergence; the negative adjoint of grad.
template <typename Scalar>
Field<Scalar> divergence(const Gradient2<Scalar>& v)
{
    detail::require_same_shape(v.gx, v.gy, "divergence");
    const int w = v.gx.width();
    const int h = v.gx.height();
    Field<Scalar> d(w, h);
    auto& out = d.array();
    const auto& vx = v.gx.array();
    const auto& vy = v.gy.array();
    if (w >= 2) {
        out.leftCols(w - 1) += vx.leftCols(w - 1);
        out.rightCols(w - 1) -= vx.leftCols(w - 1);
    }
    if (h >= 2) {
        out.topRows(h - 1) += vy.topRows(h - 1);
        out.bottomRows(h - 1) -= vy.topRows(h - 1);
    }
    return d;
}

/// Discrete L2 inner product (unit pixel area).
template <typename Scalar>
Scalar inner(const Field<Scalar>& a, const Field<Scalar>& b)
{
    detail::require_same_shape(a, b, "inner");
    return (a.array() * b.array()).sum();
}

template <typename Scalar>
Scalar inner(const Gradient2<Scalar>& a, const Gradient2<Scalar>& b)
{
    return inner(a.gx, b.gx) + inner(a.gy, b.gy);
}

/// Sampled Gaussian with standard deviation sigma, truncated at ceil(3 sigma)
/// and normalized to unit mass.
template <typename Scalar>
std::vector<Scalar> gaussian_kernel(Scalar sigma)
{
    if (!(sigma > 0)) {
        throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    }
    const int radius = static_cast<int>(std::ceil(3 * sigma));
    std::vector<Scalar> k(2 * radius + 1);
    Scalar total = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-Scalar(i * i) / (2 * sigma * sigma));
        total += k[i + radius];
    }
    for (auto& v : k) {
        v /= total;
    }
    return k;
}

/// Separable Gaussian blur. Out-of-domain samples use half-sample symmetric
/// reflection, which agrees with edge replication at the first ghost pixel
/// and keeps the operator symmetric, so the field mean is preserved.
template <typename Scalar>
Field<Scalar> gaussian_convolve(const Field<Scalar>& f, Scalar sigma)
{
    const auto k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    const int w = f.width();
    const int h = f.height();

    Field<Scalar> tmp(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Scalar acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                acc += k[i + radius] * f(detail::reflect_index(x + i, w), y);
            }
            tmp(x, y) = acc;
        }
    }
    Field<Scalar> out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Scalar acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                acc += k[i + radius] * tmp(x, detail::reflect_index(y + i, h));
            }
            out(x, y) = acc;
        }
    }
    return out;
}

/// Bilinear interpolation inside [0, w-1] x [0, h-1]; `outside` elsewhere.
template <typename Scalar>
Scalar bilinear_sample(const Field<Scalar>& f, Scalar x, Scalar y, Scalar outside)
{
    const int w = f.width();
    const int h = f.height();
    if (!(x >= 0 && y >= 0 && x <= w - 1 && y <= h - 1)) {
        return outside;
    }
    const int x0 = std::min(static_cast<int>(std::floor(x)), w - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const Scalar fx = x - x0;
    const Scalar fy = y - y0;
    const Scalar top = (1 - fx) * f(x0, y0) + fx * f(x1, y0);
    const Scalar bottom = (1 - fx) * f(x0, y1) + fx * f(x1, y1);
    return (1 - fy) * top + fy * bottom;
}

/// Isotropic discrete total variation: sum of forward-difference |grad f|.
template <typename Scalar>
Scalar total_variation(const Field<Scalar>& f)
{
    return grad_magnitude(f).array().sum();
}

} // namespace priorseg
