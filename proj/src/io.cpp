#include "priorseg/io.hpp"

#include "priorseg/errors.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace priorseg::io {

namespace {

constexpr std::array<char, 4> kSfldMagic{'S', 'F', 'L', 'D'};

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "' for reading");
    }
    return in;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in)
{
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = in.get();
            }
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') {
        in.unget();
    }
    return tok;
}

long pgm_header_int(std::istream& in, const char* what)
{
    const auto tok = pgm_token(in);
    if (tok.empty()) {
        throw FormatError(std::string("pgm: malformed header: missing ") + what);
    }
    for (char ch : tok) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) {
            throw FormatError(std::string("pgm: malformed header: bad ") + what + " '" + tok + "'");
        }
    }
    try {
        return std::stol(tok);
    } catch (const std::exception&) {
        throw FormatError(std::string("pgm: malformed header: bad ") + what + " '" + tok + "'");
    }
}

} // namespace

void put_u32(std::ostream& out, std::uint32_t v)
{
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

void put_f64(std::ostream& out, double v)
{
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    }
    out.write(bytes, 8);
}

std::uint32_t get_u32(std::istream& in, const char* what)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string(what) + ": truncated data");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, const char* what)
{
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw FormatError(std::string(what) + ": truncated data");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return std::bit_cast<double>(bits);
}

void put_field_values(std::ostream& out, const ScalarField& f)
{
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            put_f64(out, f(x, y));
        }
    }
}

ScalarField get_field_values(std::istream& in, int width, int height, const char* what)
{
    FieldArray<double> a(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            a(y, x) = get_f64(in, what);
        }
    }
    if (!a.isFinite().all()) {
        throw FormatError(std::string(what) + ": non-finite value in field");
    }
    return ScalarField(std::move(a));
}

void write_sfld(const ScalarField& f, std::ostream& out)
{
    out.write(kSfldMagic.data(), 4);
    put_u32(out, static_cast<std::uint32_t>(f.width()));
    put_u32(out, static_cast<std::uint32_t>(f.height()));
    put_field_values(out, f);
}

ScalarField read_sfld(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) {
        throw FormatError("sfld: truncated header");
    }
    if (magic != kSfldMagic) {
        throw FormatError("sfld: bad magic");
    }
    const auto w = get_u32(in, "sfld");
    const auto h = get_u32(in, "sfld");
    if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15)) {
        throw FormatError("sfld: invalid dimensions");
    }
    return get_field_values(in, static_cast<int>(w), static_cast<int>(h), "sfld");
}

void write_sfld(const ScalarField& f, const std::string& path)
{
    auto out = open_out(path);
    write_sfld(f, out);
    if (!out) {
        throw FormatError("sfld: write failed for '" + path + "'");
    }
}

ScalarField read_sfld(const std::string& path)
{
    auto in = open_in(path);
    return read_sfld(in);
}

ScalarField read_pgm(std::istream& in)
{
    char magic[2] = {0, 0};
    if (!in.read(magic, 2)) {
        throw FormatError("pgm: malformed header: empty file");
    }
    const bool ascii = magic[0] == 'P' && magic[1] == '2';
    const bool binary = magic[0] == 'P' && magic[1] == '5';
    if (!ascii && !binary) {
        throw FormatError(std::string("pgm: unsupported magic '") + magic[0] + magic[1] + "'");
    }
    const long w = pgm_header_int(in, "width");
    const long h = pgm_header_int(in, "height");
    const long maxval = pgm_header_int(in, "maxval");
    if (w <= 0 || h <= 0 || w > (1 << 15) || h > (1 << 15)) {
        throw FormatError("pgm: malformed header: invalid dimensions");
    }
    if (maxval <= 0 || maxval > 65535) {
        throw FormatError("pgm: malformed header: maxval out of range");
    }

    FieldArray<double> a(h, w);
    if (ascii) {
        for (long i = 0; i < w * h; ++i) {
            const auto tok = pgm_token(in);
            if (tok.empty()) {
                throw FormatError("pgm: truncated data");
            }
            long v = 0;
            try {
                v = std::stol(tok);
            } catch (const std::exception&) {
                throw FormatError("pgm: malformed pixel value '" + tok + "'");
            }
            if (v < 0 || v > maxval) {
                throw FormatError("pgm: pixel value out of range");
            }
            a(i / w, i % w) = static_cast<double>(v);
        }
    } else {
        // pgm_token consumed exactly one whitespace byte after maxval.
        const int bytes_per = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * bytes_per));
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw FormatError("pgm: truncated data");
        }
        for (long i = 0; i < w * h; ++i) {
            long v = bytes_per == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
            if (v > maxval) {
                throw FormatError("pgm: pixel value out of range");
            }
            a(i / w, i % w) = static_cast<double>(v);
        }
    }
    return ScalarField(std::move(a));
}

ScalarField read_pgm(const std::string& path)
{
    auto in = open_in(path);
    return read_pgm(in);
}

void write_pgm(const ScalarField& f, std::ostream& out)
{
    out << "P5\n" << f.width() << ' ' << f.height() << "\n255\n";
    std::string bytes(static_cast<std::size_t>(f.size()), '\0');
    std::size_t i = 0;
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            const double v = std::clamp(std::round(f(x, y)), 0.0, 255.0);
            bytes[i++] = static_cast<char>(static_cast<unsigned char>(v));
        }
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_pgm(const ScalarField& f, const std::string& path)
{
    auto out = open_out(path);
    write_pgm(f, out);
    if (!out) {
        throw FormatError("pgm: write failed for '" + path + "'");
    }
}

std::vector<char> read_file_bytes(const std::string& path)
{
    auto in = open_in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::string& bytes)
{
    auto out = open_out(path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FormatError("write failed for '" + path + "'");
    }
}

} // namespace priorseg::io
