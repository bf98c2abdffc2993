#pragma once

// Flat key=value text files: one pair per line, '#' starts a comment, blank
// lines ignored. Used for run configurations and scene specs.

#include "priorseg/descent.hpp"
#include "priorseg/energy.hpp"
#include "priorseg/shape_prior.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace priorseg {

class KeyValues
{
public:
    static KeyValues parse(std::istream& in);
    static KeyValues parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    /// Throws FormatError listing keys never read by a getter.
    void reject_unused() const;

    void write(std::ostream& out) const;
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

/// Shortest round-trip-safe rendering: 17 significant digits.
std::string format_double(double v);

/// Everything a segmentation run reads from its config file.
struct RunConfig
{
    EnergyWeights weights;
    DescentConfig descent;
    LambdaBoxRule lambda_box_rule = LambdaBoxRule::std_dev;
    double lambda_box_k = 3.0;
    double init_radius_fraction = 0.25;

    static RunConfig from_key_values(const KeyValues& kv);
    /// All fields, defaults materialized.
    KeyValues to_key_values() const;
};

RunConfig load_run_config(const std::string& path);

} // namespace priorseg
