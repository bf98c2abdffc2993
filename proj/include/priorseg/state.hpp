#pragma once

#include "priorseg/field.hpp"
#include "priorseg/shape_prior.hpp"

#include <Eigen/Core>

#include <vector>

namespace priorseg {

/// Unweighted term values; total = alpha/2 f1 + f2 + beta f3 + nu f4.
struct EnergyBreakdown
{
    int iter = 0;
    double f1 = 0;
    double f2 = 0;
    double f3 = 0;
    double f4 = 0;
    double total = 0;
};

/// The five unknowns of the segmentation problem plus bookkeeping.
struct SegmentationState
{
    ScalarField phi;
    Eigen::VectorXd lambda;
    Pose pose;
    ScalarField i_in;
    ScalarField i_out;
    int iter = 0;
    std::vector<EnergyBreakdown> trace;
};

} // namespace priorseg
