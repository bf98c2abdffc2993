#pragma once

// Field codecs.
//
// SFLD: "SFLD" | u32 LE width | u32 LE height | width*height f64 LE, row-major.
// PGM:  reads P2 and P5 (maxval <= 65535); writes P5 with maxval 255.

#include "priorseg/field.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace priorseg::io {

void write_sfld(const ScalarField& f, std::ostream& out);
ScalarField read_sfld(std::istream& in);
void write_sfld(const ScalarField& f, const std::string& path);
ScalarField read_sfld(const std::string& path);

ScalarField read_pgm(std::istream& in);
ScalarField read_pgm(const std::string& path);
/// Values are rounded and clamped to [0, 255].
void write_pgm(const ScalarField& f, std::ostream& out);
void write_pgm(const ScalarField& f, const std::string& path);

// Little-endian primitives shared by the binary formats.
void put_u32(std::ostream& out, std::uint32_t v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in, const char* what);
double get_f64(std::istream& in, const char* what);
void put_field_values(std::ostream& out, const ScalarField& f);
ScalarField get_field_values(std::istream& in, int width, int height, const char* what);

/// Whole-file helpers; throw FormatError on I/O failure.
std::vector<char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

} // namespace priorseg::io
