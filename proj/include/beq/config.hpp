// SPDX-License-Identifier: Apache-2.0
//
// beq - bilinear equalizers for massive MIMO uplink
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef BEQ_CONFIG_HPP
#define BEQ_CONFIG_HPP

#include "beq/core.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace beq {

enum class CovarianceMode
{
    toeplitz,  // exact ULA covariance from the angular density
    circulant, // DFT-diagonal approximant sampled from the spectrum
    diagonal,  // DFT-basis diagonal of the Toeplitz covariance
    identity,  // synthetic C = I for every link (no path loss)
};

enum class DropMode
{
    fixed,     // one user drop per sweep, covariances rebuilt per M
    per_point, // independent drop for every (M, SNR) point
};

enum class Metric
{
    min_user_rate,
    per_user_rate,
    mean_rate,
};

inline std::string_view to_string(CovarianceMode m)
{
    switch (m)
    {
    case CovarianceMode::toeplitz: return "toeplitz";
    case CovarianceMode::circulant: return "circulant";
    case CovarianceMode::diagonal: return "diagonal";
    case CovarianceMode::identity: return "identity";
    }
    return "unknown";
}

inline std::string_view to_string(DropMode m) { return m == DropMode::fixed ? "fixed" : "per-point"; }

inline std::string_view to_string(Metric m)
{
    switch (m)
    {
    case Metric::min_user_rate: return "min-user-rate";
    case Metric::per_user_rate: return "per-user-rate";
    case Metric::mean_rate: return "mean-rate";
    }
    return "unknown";
}

struct NetworkConfig
{
    int cells = 3;
    double cell_diameter_m = 500.0;
    std::optional<double> user_disc_radius_m; // default: cell_diameter / 4
    int users_per_cell = 5;
    std::optional<int> pilots;                // default: users_per_cell (full reuse)
    double pathloss_exponent = 3.7;
    double reference_distance_m = 50.0;

    double user_disc_radius() const { return user_disc_radius_m.value_or(cell_diameter_m / 4.0); }
    int pilot_count() const { return pilots.value_or(users_per_cell); }

    bool operator==(const NetworkConfig &) const = default;
};

struct ChannelConfig
{
    int clusters = 3;
    double angular_spread_deg = 10.0;
    double cluster_offset_deg = 15.0; // cluster centers: bearing + U(-offset, offset)
    CovarianceMode covariance_mode = CovarianceMode::toeplitz;
    int quadrature_nodes = 2048;
    int shared_density_pilot = -1;    // >= 0: all users of this pilot share one density

    bool operator==(const ChannelConfig &) const = default;
};

struct SimConfig
{
    std::vector<int> antennas;
    std::vector<double> snr_db{-6.0};
    std::optional<double> rho_tr_db; // empty: training SNR equal to the data SNR
    int trials = 500;
    std::uint64_t seed = 1;
    std::vector<Method> methods{std::begin(all_methods), std::end(all_methods)};
    DropMode drop_mode = DropMode::fixed;
    std::vector<Metric> metrics{Metric::min_user_rate, Metric::per_user_rate, Metric::mean_rate};

    bool operator==(const SimConfig &) const = default;
};

struct CheckConfig
{
    double oracle_tolerance = 1e-9;
    int oracle_antennas = 6;

    bool operator==(const CheckConfig &) const = default;
};

struct ScenarioConfig
{
    NetworkConfig network;
    ChannelConfig channel;
    SimConfig sim;
    CheckConfig check;

    bool operator==(const ScenarioConfig &) const = default;
};

namespace detail {

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string &key, const std::string &v)
{
    try
    {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return x;
    }
    catch (const std::exception &)
    {
        throw Error(ErrorKind::config, key + ": expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string &key, const std::string &v)
{
    try
    {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return x;
    }
    catch (const std::exception &)
    {
        throw Error(ErrorKind::config, key + ": expected an integer, got '" + v + "'");
    }
}

inline std::string format_double(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T> &items, F &&fmt)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
    {
        if (i)
            out += ", ";
        out += fmt(items[i]);
    }
    return out;
}

} // namespace detail

/// Checks every cross-field invariant; throws config errors naming the key.
inline void validate(const ScenarioConfig &cfg)
{
    auto fail = [](const std::string &key, const std::string &msg) { throw Error(ErrorKind::config, key + ": " + msg); };
    const auto &n = cfg.network;
    if (n.cells != 1 && n.cells != 3)
        fail("network.cells", "must be 3 (hexagonal corner layout) or 1");
    if (!(n.cell_diameter_m > 0))
        fail("network.cell_diameter_m", "must be positive");
    if (!(n.user_disc_radius() > 0))
        fail("network.user_disc_radius_m", "must be positive");
    if (n.user_disc_radius() >= n.cell_diameter_m)
        fail("network.user_disc_radius_m", "must be smaller than the cell diameter");
    if (n.users_per_cell < 1)
        fail("network.users_per_cell", "must be >= 1");
    if (n.pilot_count() < 1)
        fail("network.pilots", "must be >= 1");
    if (n.users_per_cell > n.pilot_count())
        fail("network.users_per_cell", "users_per_cell (" + std::to_string(n.users_per_cell) +
                                           ") exceeds the pilot count network.pilots (" +
                                           std::to_string(n.pilot_count()) + ")");
    if (!(n.pathloss_exponent > 0))
        fail("network.pathloss_exponent", "must be positive");
    if (!(n.reference_distance_m > 0))
        fail("network.reference_distance_m", "must be positive");

    const auto &c = cfg.channel;
    if (c.clusters < 1)
        fail("channel.clusters", "must be >= 1");
    if (!(c.angular_spread_deg > 0))
        fail("channel.angular_spread_deg", "must be positive");
    if (!(c.cluster_offset_deg >= 0) || c.cluster_offset_deg >= 90)
        fail("channel.cluster_offset_deg", "must lie in [0, 90)");
    if (c.quadrature_nodes < 64)
        fail("channel.quadrature_nodes", "must be >= 64");
    if (c.shared_density_pilot >= n.pilot_count())
        fail("channel.shared_density_pilot", "exceeds the pilot count");

    const auto &s = cfg.sim;
    if (s.antennas.empty())
        fail("sim.antennas", "must be a nonempty list");
    for (int m : s.antennas)
        if (m < 1)
            fail("sim.antennas", "entries must be >= 1");
    if (s.snr_db.empty())
        fail("sim.snr_db", "must be a nonempty list");
    if (s.trials < 1)
        fail("sim.trials", "must be >= 1");
    if (s.methods.empty())
        fail("sim.methods", "must be a nonempty list");
    if (s.metrics.empty())
        fail("sim.metrics", "must be a nonempty list");

    if (!(cfg.check.oracle_tolerance > 0))
        fail("check.oracle_tolerance", "must be positive");
    if (cfg.check.oracle_antennas < 1 || cfg.check.oracle_antennas > 8)
        fail("check.oracle_antennas", "must lie in [1, 8]");
}

/// Parses the sectioned key-value format:
///
///     [network]
///     users_per_cell = 5
///     [sim]
///     antennas = 16, 32, 64
///
/// Lines starting with '#' or ';' are comments. Unknown sections or keys are
/// rejected; sim.antennas is the only required key.
inline ScenarioConfig parse_config_text(const std::string &text)
{
    using detail::parse_double;
    using detail::parse_int;
    using Setter = std::function<void(ScenarioConfig &, const std::string &, const std::string &)>;

    const std::map<std::string, Setter> setters{
        {"network.cells", [](auto &c, auto &k, auto &v) { c.network.cells = static_cast<int>(parse_int(k, v)); }},
        {"network.cell_diameter_m", [](auto &c, auto &k, auto &v) { c.network.cell_diameter_m = parse_double(k, v); }},
        {"network.user_disc_radius_m",
         [](auto &c, auto &k, auto &v) { c.network.user_disc_radius_m = parse_double(k, v); }},
        {"network.users_per_cell",
         [](auto &c, auto &k, auto &v) { c.network.users_per_cell = static_cast<int>(parse_int(k, v)); }},
        {"network.pilots", [](auto &c, auto &k, auto &v) { c.network.pilots = static_cast<int>(parse_int(k, v)); }},
        {"network.pathloss_exponent",
         [](auto &c, auto &k, auto &v) { c.network.pathloss_exponent = parse_double(k, v); }},
        {"network.reference_distance_m",
         [](auto &c, auto &k, auto &v) { c.network.reference_distance_m = parse_double(k, v); }},
        {"channel.clusters", [](auto &c, auto &k, auto &v) { c.channel.clusters = static_cast<int>(parse_int(k, v)); }},
        {"channel.angular_spread_deg",
         [](auto &c, auto &k, auto &v) { c.channel.angular_spread_deg = parse_double(k, v); }},
        {"channel.cluster_offset_deg",
         [](auto &c, auto &k, auto &v) { c.channel.cluster_offset_deg = parse_double(k, v); }},
        {"channel.covariance_mode",
         [](auto &c, auto &k, auto &v) {
             if (v == "toeplitz")
                 c.channel.covariance_mode = CovarianceMode::toeplitz;
             else if (v == "circulant")
                 c.channel.covariance_mode = CovarianceMode::circulant;
             else if (v == "diagonal")
                 c.channel.covariance_mode = CovarianceMode::diagonal;
             else if (v == "identity")
                 c.channel.covariance_mode = CovarianceMode::identity;
             else
                 throw Error(ErrorKind::config, k + ": unknown covariance mode '" + v + "'");
         }},
        {"channel.quadrature_nodes",
         [](auto &c, auto &k, auto &v) { c.channel.quadrature_nodes = static_cast<int>(parse_int(k, v)); }},
        {"channel.shared_density_pilot",
         [](auto &c, auto &k, auto &v) { c.channel.shared_density_pilot = static_cast<int>(parse_int(k, v)); }},
        {"sim.antennas",
         [](auto &c, auto &k, auto &v) {
             c.sim.antennas.clear();
             for (const auto &item : detail::split_list(v))
                 c.sim.antennas.push_back(static_cast<int>(parse_int(k, item)));
         }},
        {"sim.snr_db",
         [](auto &c, auto &k, auto &v) {
             c.sim.snr_db.clear();
             for (const auto &item : detail::split_list(v))
                 c.sim.snr_db.push_back(parse_double(k, item));
         }},
        {"sim.rho_tr",
         [](auto &c, auto &k, auto &v) {
             if (v == "equal-to-data")
                 c.sim.rho_tr_db.reset();
             else if (v.rfind("fixed:", 0) == 0)
                 c.sim.rho_tr_db = parse_double(k, detail::trim(v.substr(6)));
             else
                 throw Error(ErrorKind::config, k + ": expected 'equal-to-data' or 'fixed:<dB>'");
         }},
        {"sim.trials", [](auto &c, auto &k, auto &v) { c.sim.trials = static_cast<int>(parse_int(k, v)); }},
        {"sim.seed",
         [](auto &c, auto &k, auto &v) {
             const long long s = parse_int(k, v);
             if (s < 0)
                 throw Error(ErrorKind::config, k + ": must be nonnegative");
             c.sim.seed = static_cast<std::uint64_t>(s);
         }},
        {"sim.methods",
         [](auto &c, auto &k, auto &v) {
             c.sim.methods.clear();
             for (const auto &item : detail::split_list(v))
             {
                 try
                 {
                     c.sim.methods.push_back(parse_method(item));
                 }
                 catch (const Error &)
                 {
                     throw Error(ErrorKind::config, k + ": unknown method '" + item + "'");
                 }
             }
         }},
        {"sim.drop_mode",
         [](auto &c, auto &k, auto &v) {
             if (v == "fixed")
                 c.sim.drop_mode = DropMode::fixed;
             else if (v == "per-point")
                 c.sim.drop_mode = DropMode::per_point;
             else
                 throw Error(ErrorKind::config, k + ": expected 'fixed' or 'per-point'");
         }},
        {"sim.metrics",
         [](auto &c, auto &k, auto &v) {
             c.sim.metrics.clear();
             for (const auto &item : detail::split_list(v))
             {
                 if (item == "min-user-rate")
                     c.sim.metrics.push_back(Metric::min_user_rate);
                 else if (item == "per-user-rate")
                     c.sim.metrics.push_back(Metric::per_user_rate);
                 else if (item == "mean-rate")
                     c.sim.metrics.push_back(Metric::mean_rate);
                 else
                     throw Error(ErrorKind::config, k + ": unknown metric '" + item + "'");
             }
         }},
        {"check.oracle_tolerance",
         [](auto &c, auto &k, auto &v) { c.check.oracle_tolerance = parse_double(k, v); }},
        {"check.oracle_antennas",
         [](auto &c, auto &k, auto &v) { c.check.oracle_antennas = static_cast<int>(parse_int(k, v)); }},
    };

    ScenarioConfig cfg;
    cfg.sim.antennas.clear();
    bool have_antennas = false;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';')
            continue;
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "network" && section != "channel" && section != "sim" && section != "check")
                throw Error(ErrorKind::config, section + ": unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": expected 'key = value'");
        if (section.empty())
            throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": key outside of a section");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw Error(ErrorKind::config, key + ": unknown key");
        it->second(cfg, key, value);
        if (key == "sim.antennas")
            have_antennas = true;
    }
    if (!have_antennas)
        throw Error(ErrorKind::config, "sim.antennas: missing required key");
    validate(cfg);
    return cfg;
}

inline ScenarioConfig parse_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::config, path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Writes every key explicitly; parse_config_text(serialize_config(c)) == c.
inline std::string serialize_config(const ScenarioConfig &cfg)
{
    using detail::format_double;
    std::ostringstream out;
    const auto &n = cfg.network;
    out << "[network]\n";
    out << "cells = " << n.cells << "\n";
    out << "cell_diameter_m = " << format_double(n.cell_diameter_m) << "\n";
    if (n.user_disc_radius_m)
        out << "user_disc_radius_m = " << format_double(*n.user_disc_radius_m) << "\n";
    out << "users_per_cell = " << n.users_per_cell << "\n";
    if (n.pilots)
        out << "pilots = " << *n.pilots << "\n";
    out << "pathloss_exponent = " << format_double(n.pathloss_exponent) << "\n";
    out << "reference_distance_m = " << format_double(n.reference_distance_m) << "\n";

    const auto &c = cfg.channel;
    out << "\n[channel]\n";
    out << "clusters = " << c.clusters << "\n";
    out << "angular_spread_deg = " << format_double(c.angular_spread_deg) << "\n";
    out << "cluster_offset_deg = " << format_double(c.cluster_offset_deg) << "\n";
    out << "covariance_mode = " << to_string(c.covariance_mode) << "\n";
    out << "quadrature_nodes = " << c.quadrature_nodes << "\n";
    out << "shared_density_pilot = " << c.shared_density_pilot << "\n";

    const auto &s = cfg.sim;
    out << "\n[sim]\n";
    out << "antennas = " << detail::join(s.antennas, [](int m) { return std::to_string(m); }) << "\n";
    out << "snr_db = " << detail::join(s.snr_db, format_double) << "\n";
    out << "rho_tr = " << (s.rho_tr_db ? "fixed:" + format_double(*s.rho_tr_db) : std::string("equal-to-data"))
        << "\n";
    out << "trials = " << s.trials << "\n";
    out << "seed = " << s.seed << "\n";
    out << "methods = " << detail::join(s.methods, [](Method m) { return std::string(to_string(m)); }) << "\n";
    out << "drop_mode = " << to_string(s.drop_mode) << "\n";
    out << "metrics = " << detail::join(s.metrics, [](Metric m) { return std::string(to_string(m)); }) << "\n";

    out << "\n[check]\n";
    out << "oracle_tolerance = " << format_double(cfg.check.oracle_tolerance) << "\n";
    out << "oracle_antennas = " << cfg.check.oracle_antennas << "\n";
    return out.str();
}

} // namespace beq

#endif // BEQ_CONFIG_HPP
