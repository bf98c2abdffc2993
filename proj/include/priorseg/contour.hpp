#pragma once

// Zero level set extraction (marching squares) and contour utilities.

#include "priorseg/field.hpp"
#include "priorseg/shape_prior.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

namespace priorseg {

struct Contour
{
    std::vector<Eigen::Vector2d> points;
    /// Closed contours repeat their first vertex at the end.
    bool closed = false;
};

/// Marching squares at level 0 with linear interpolation along cell edges.
/// A corner is "positive" when phi > 0. Saddle cells are resolved by the sign
/// of the cell-center average. Contours are emitted in scanline discovery
/// order of their first cell.
std::vector<Contour> extract_contours(const ScalarField& phi);

double polyline_length(const Contour& c);

/// Euclidean distance from p to the nearest segment of any contour
/// (infinity if there are none).
double distance_to_contours(const Eigen::Vector2d& p, const std::vector<Contour>& contours);

/// CSV with header `contour_id,x,y`; coordinates at 17 significant digits.
void write_contours_csv(const std::vector<Contour>& contours, std::ostream& out);
std::vector<Contour> read_contours_csv(std::istream& in);

/// Pixels touched by the contour polylines (nearest pixel of dense samples).
BinaryMask rasterize_contours(const std::vector<Contour>& contours, int width, int height);

/// Copy of `image` with contour pixels set to 255.
ScalarField overlay_contours(const ScalarField& image, const std::vector<Contour>& contours);

} // namespace priorseg
