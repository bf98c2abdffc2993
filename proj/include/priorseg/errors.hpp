#pragma once

#include <stdexcept>
#include <string>

namespace priorseg {

/// Malformed, truncated or otherwise unreadable input data (files, configs).
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// The optimization produced a non-finite energy or gradient.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace priorseg
