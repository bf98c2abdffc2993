#include "priorseg/config.hpp"

#include "priorseg/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace priorseg {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

KeyValues KeyValues::parse(std::istream& in)
{
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError("config line " + std::to_string(lineno) + ": empty key");
        }
        if (kv.has(key)) {
            throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        kv.values_[key] = value;
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open '" + path + "' for reading");
    }
    return parse(in);
}

void KeyValues::set(const std::string& key, double value)
{
    values_[key] = format_double(value);
}

void KeyValues::set(const std::string& key, int value)
{
    values_[key] = std::to_string(value);
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    used_.insert(key);
    return it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    used_.insert(key);
    const auto& s = it->second;
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw FormatError("config key '" + key + "': expected a finite number, got '" + s + "'");
    }
    return v;
}

int KeyValues::get_int(const std::string& key, int fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    used_.insert(key);
    const auto& s = it->second;
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("config key '" + key + "': expected an integer, got '" + s + "'");
    }
    return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    used_.insert(key);
    const auto& s = it->second;
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("config key '" + key + "': expected an unsigned integer, got '" + s + "'");
    }
    return v;
}

void KeyValues::reject_unused() const
{
    std::string unknown;
    for (const auto& [k, v] : values_) {
        if (used_.count(k) == 0) {
            unknown += (unknown.empty() ? "" : ", ") + k;
        }
    }
    if (!unknown.empty()) {
        throw FormatError("unknown config key(s): " + unknown);
    }
}

void KeyValues::write(std::ostream& out) const
{
    for (const auto& [k, v] : values_) {
        out << k << '=' << v << '\n';
    }
}

std::string KeyValues::to_string() const
{
    std::ostringstream out;
    write(out);
    return out.str();
}

RunConfig RunConfig::from_key_values(const KeyValues& kv)
{
    RunConfig c;
    auto& w = c.weights;
    w.alpha = kv.get_double("alpha", w.alpha);
    w.beta = kv.get_double("beta", w.beta);
    w.nu = kv.get_double("nu", w.nu);
    w.xi = kv.get_double("xi", w.xi);
    w.gamma = kv.get_double("gamma", w.gamma);
    w.mu = kv.get_double("mu", w.mu);
    w.zeta = kv.get_double("zeta", w.zeta);
    w.eta = kv.get_double("eta", w.eta);
    w.sigma = kv.get_double("sigma", w.sigma);
    w.eps = kv.get_double("eps", w.eps);
    try {
        w.heaviside = heaviside_kind_from_string(kv.get_string("heaviside", to_string(w.heaviside)));
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    const auto region = kv.get_string("f4_region", w.f4_literal_sign ? "literal" : "object");
    if (region != "object" && region != "literal") {
        throw FormatError("config key 'f4_region': expected 'object' or 'literal'");
    }
    w.f4_literal_sign = region == "literal";

    auto& d = c.descent;
    d.dt_phi = kv.get_double("dt_phi", d.dt_phi);
    d.step_lambda = kv.get_double("step_lambda", d.step_lambda);
    d.step_pose = kv.get_double("step_pose", d.step_pose);
    d.max_param_move = kv.get_double("max_param_move", d.max_param_move);
    d.fd_h = kv.get_double("fd_h", d.fd_h);
    d.max_iters = kv.get_int("max_iters", d.max_iters);
    d.tol = kv.get_double("tol", d.tol);
    d.stall_window = kv.get_int("stall_window", d.stall_window);
    d.inner_ms_iters = kv.get_int("inner_ms_iters", d.inner_ms_iters);
    d.record_every = kv.get_int("record_every", d.record_every);
    d.max_halvings = kv.get_int("max_halvings", d.max_halvings);
    d.pose_box.tau_min = kv.get_double("tau_min", d.pose_box.tau_min);
    d.pose_box.tau_max = kv.get_double("tau_max", d.pose_box.tau_max);
    d.pose_box.t_min = kv.get_double("t_min", d.pose_box.t_min);
    d.pose_box.t_max = kv.get_double("t_max", d.pose_box.t_max);

    const auto rule = kv.get_string("lambda_box_rule", "std_dev");
    if (rule == "std_dev") {
        c.lambda_box_rule = LambdaBoxRule::std_dev;
    } else if (rule == "eigenvalue") {
        c.lambda_box_rule = LambdaBoxRule::eigenvalue;
    } else {
        throw FormatError("config key 'lambda_box_rule': expected 'std_dev' or 'eigenvalue'");
    }
    c.lambda_box_k = kv.get_double("lambda_box_k", c.lambda_box_k);
    c.init_radius_fraction = kv.get_double("init_radius_fraction", c.init_radius_fraction);
    kv.reject_unused();

    try {
        w.validate();
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    if (!(c.lambda_box_k >= 0) || !(c.init_radius_fraction > 0)) {
        throw FormatError("config: lambda_box_k must be >= 0 and init_radius_fraction > 0");
    }
    return c;
}

KeyValues RunConfig::to_key_values() const
{
    KeyValues kv;
    kv.set("alpha", weights.alpha);
    kv.set("beta", weights.beta);
    kv.set("nu", weights.nu);
    kv.set("xi", weights.xi);
    kv.set("gamma", weights.gamma);
    kv.set("mu", weights.mu);
    kv.set("zeta", weights.zeta);
    kv.set("eta", weights.eta);
    kv.set("sigma", weights.sigma);
    kv.set("eps", weights.eps);
    kv.set("heaviside", to_string(weights.heaviside));
    kv.set("f4_region", std::string(weights.f4_literal_sign ? "literal" : "object"));
    kv.set("dt_phi", descent.dt_phi);
    kv.set("step_lambda", descent.step_lambda);
    kv.set("step_pose", descent.step_pose);
    kv.set("max_param_move", descent.max_param_move);
    kv.set("fd_h", descent.fd_h);
    kv.set("max_iters", descent.max_iters);
    kv.set("tol", descent.tol);
    kv.set("stall_window", descent.stall_window);
    kv.set("inner_ms_iters", descent.inner_ms_iters);
    kv.set("record_every", descent.record_every);
    kv.set("max_halvings", descent.max_halvings);
    kv.set("tau_min", descent.pose_box.tau_min);
    kv.set("tau_max", descent.pose_box.tau_max);
    kv.set("t_min", descent.pose_box.t_min);
    kv.set("t_max", descent.pose_box.t_max);
    kv.set("lambda_box_rule", std::string(lambda_box_rule == LambdaBoxRule::std_dev ? "std_dev" : "eigenvalue"));
    kv.set("lambda_box_k", lambda_box_k);
    kv.set("init_radius_fraction", init_radius_fraction);
    return kv;
}

RunConfig load_run_config(const std::string& path)
{
    return RunConfig::from_key_values(KeyValues::parse_file(path));
}

} // namespace priorseg
