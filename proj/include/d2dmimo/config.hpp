// SPDX-License-Identifier: Apache-2.0
//
// d2dmimo: device-to-device distributed MIMO system-level simulator
// Copyright (C) 2026 The d2dmimo Authors
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

#pragma once

#include "d2dmimo/channel.hpp"
#include "d2dmimo/sim.hpp"
#include "d2dmimo/types.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace d2dmimo::io {

/// Shortest round-trip decimal; integers keep a trailing ".0".
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace detail {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed is stored through a size_t field");
using Field = std::variant<std::size_t*, double*, int*, bool*>;

inline std::vector<std::pair<std::string_view, Field>> fields(sim::SystemConfig& c) {
    return {
        {"N", &c.N},
        {"K", &c.K},
        {"S", &c.S},
        {"L", &c.L},
        {"M", &c.M},
        {"P_B_dbm", &c.P_B_dbm},
        {"P_D_dbm", &c.P_D_dbm},
        {"B_c", &c.B_c},
        {"B_d", &c.B_d},
        {"t_c", &c.t_c},
        {"t_d_ratio", &c.t_d_ratio},
        {"inter_cell_distance", &c.inter_cell_distance},
        {"cell_radius", &c.cell_radius},
        {"min_bs_distance", &c.min_bs_distance},
        {"d_max", &c.d_max},
        {"relay_pool_per_cell", &c.relay_pool_per_cell},
        {"cellular_pl_intercept", &c.budget.cellular_pl_intercept},
        {"cellular_pl_slope", &c.budget.cellular_pl_slope},
        {"d2d_pl_intercept", &c.budget.d2d_pl_intercept},
        {"d2d_pl_slope", &c.budget.d2d_pl_slope},
        {"shadowing_sigma", &c.budget.shadowing_sigma},
        {"bs_antenna_gain", &c.budget.bs_antenna_gain},
        {"d2d_antenna_gain", &c.budget.d2d_antenna_gain},
        {"nakagami_shape", &c.budget.nakagami_shape},
        {"noise_psd", &c.budget.noise_psd},
        {"T", &c.T},
        {"seed", &c.seed},
        {"tolerance", &c.tolerance},
        {"max_iterations", &c.max_iterations},
        {"max_redraws", &c.max_redraws},
        {"reuse_geometry_factor", &c.reuse_geometry_factor},
        {"reuse_gain_fraction", &c.reuse_gain_fraction},
        {"freeze_topology", &c.freeze_topology},
    };
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(std::string(key) + ": cannot parse '" + std::string(text) + "'");
    return value;
}

}  // namespace detail

/// Sets one key; unknown keys are an error.
inline void apply_setting(sim::SystemConfig& cfg, std::string_view key, std::string_view value) {
    key = detail::trim(key);
    value = detail::trim(value);
    for (auto& [name, field] : detail::fields(cfg)) {
        if (name != key) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1")
                        *p = true;
                    else if (value == "false" || value == "0")
                        *p = false;
                    else
                        throw ConfigError(std::string(key) + ": expected true or false");
                } else if constexpr (std::is_same_v<T, std::size_t>) {
                    if (!value.empty() && value.front() == '-') throw ConfigError(std::string(key) + ": must be non-negative");
                    *p = detail::parse_number<T>(key, value);
                } else {
                    *p = detail::parse_number<T>(key, value);
                }
            },
            field);
        return;
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// "key = value" per line, '#' starts a comment. Missing keys keep defaults.
inline sim::SystemConfig parse_config(std::string_view text, bool validate = true) {
    sim::SystemConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    if (validate) cfg.validate();
    return cfg;
}

inline sim::SystemConfig load_config(const std::filesystem::path& path, bool validate = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), validate);
}

/// Canonical text form: every key, fixed order. parse_config(dump_config(c)) == c.
inline std::string dump_config(sim::SystemConfig cfg) {
    std::string out;
    for (auto& [name, field] : detail::fields(cfg)) {
        out += name;
        out += " = ";
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, bool>)
                    out += *p ? "true" : "false";
                else if constexpr (std::is_same_v<T, double>)
                    out += format_double(*p);
                else
                    out += std::to_string(*p);
            },
            field);
        out += '\n';
    }
    return out;
}

inline void emit_cdf_csv(const std::vector<double>& sorted_bps, const std::filesystem::path& path) {
    if (sorted_bps.empty()) throw InputError("emit_cdf_csv: empty sample");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "rate_mbps,cdf\n";
    const double n = static_cast<double>(sorted_bps.size());
    for (std::size_t i = 0; i < sorted_bps.size(); ++i)
        out << format_double(sorted_bps[i] / 1e6) << ',' << format_double(static_cast<double>(i + 1) / n) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline void emit_cdf_csv(const sim::MonteCarloReport& report, const std::filesystem::path& path) {
    emit_cdf_csv(report.samples_bps, path);
}

/// Reads back the rate column (Mbps) of a CDF file.
inline std::vector<double> read_cdf_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != "rate_mbps,cdf") throw InputError("unexpected CDF header");
    std::vector<double> mbps;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto comma = t.find(',');
        mbps.push_back(detail::parse_number<double>("rate_mbps", t.substr(0, comma)));
    }
    return mbps;
}

struct PercentileRow {
    std::string scheme;
    double percentile = 0.0;
    double rate_mbps = 0.0;
    double gain_vs_bench1_pct = std::nan("");
};

struct NamedSample {
    std::string scheme;
    std::vector<double> sorted_bps;
};

/// Nearest-rank percentiles per scheme with the gain over the "bench1" row,
/// when one is present.
inline std::vector<PercentileRow> percentile_report(const std::vector<NamedSample>& samples,
                                                    const std::vector<double>& percentiles) {
    const NamedSample* baseline = nullptr;
    for (const auto& s : samples)
        if (s.scheme == sim::scheme_name(sim::Scheme::bench1)) baseline = &s;
    std::vector<PercentileRow> rows;
    for (const auto& s : samples)
        for (double p : percentiles) {
            PercentileRow row;
            row.scheme = s.scheme;
            row.percentile = p;
            row.rate_mbps = sim::nearest_rank(s.sorted_bps, p) / 1e6;
            if (baseline) {
                const double base = sim::nearest_rank(baseline->sorted_bps, p) / 1e6;
                row.gain_vs_bench1_pct = 100.0 * (row.rate_mbps - base) / base;
            }
            rows.push_back(row);
        }
    return rows;
}

inline void write_percentiles_csv(const std::vector<PercentileRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "scheme,percentile,rate_mbps,gain_vs_bench1_pct\n";
    for (const auto& r : rows)
        out << r.scheme << ',' << format_double(r.percentile) << ',' << format_double(r.rate_mbps) << ','
            << format_double(r.gain_vs_bench1_pct) << '\n';
}

struct ExperimentSpec {
    std::optional<std::filesystem::path> config_path;
    std::vector<std::string> schemes;
    std::filesystem::path out_dir = ".";
    std::vector<std::pair<std::string, std::string>> overrides;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    bool freeze_topology = false;
    int verbosity = 0;
};

inline sim::SystemConfig resolve_config(const ExperimentSpec& spec) {
    auto cfg = spec.config_path ? load_config(*spec.config_path, false) : sim::SystemConfig{};
    for (const auto& [k, v] : spec.overrides) apply_setting(cfg, k, v);
    if (spec.trials) cfg.T = *spec.trials;
    if (spec.seed) cfg.seed = *spec.seed;
    if (spec.freeze_topology) cfg.freeze_topology = true;
    cfg.validate();
    return cfg;
}

/// Runs every scheme on one shared seed and writes <scheme>_cdf.csv,
/// percentiles.csv and run.log into spec.out_dir.
inline int compare_schemes(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
    if (spec.schemes.empty()) throw ConfigError("scheme list must not be empty");
    std::vector<sim::Scheme> schemes;
    for (const auto& s : spec.schemes) schemes.push_back(sim::parse_scheme(s));
    const auto cfg = resolve_config(spec);

    std::filesystem::create_directories(spec.out_dir);
    std::ofstream log(spec.out_dir / "run.log", std::ios::binary);
    if (!log) throw std::runtime_error("cannot write run.log in " + spec.out_dir.string());

    log << "# config\n" << dump_config(cfg);
    const auto margin = channel::check_reuse_margin(cfg.cell_radius, cfg.P_D_dbm, cfg.budget, cfg.B_d,
                                                    cfg.reuse_geometry_factor, cfg.reuse_gain_fraction);
    log << "# reuse margin: d_min=" << format_double(margin.d_min)
        << " m interference_to_noise=" << format_double(margin.interference_to_noise)
        << " feasible=" << (margin.feasible ? "true" : "false") << '\n';

    std::vector<NamedSample> samples;
    for (auto scheme : schemes) {
        const auto name = std::string(sim::scheme_name(scheme));
        if (progress) *progress << "running " << name << " (" << cfg.T << " trials)\n";
        const auto rep = sim::monte_carlo(cfg, scheme, spec.workers);
        for (const auto& l : rep.logs) {
            log << "scheme=" << name << " trial=" << l.trial << " attempts=" << l.attempts
                << " iterations=" << l.iterations << " converged=" << (l.converged ? "true" : "false")
                << " direct_checksum=" << std::hex << l.direct_checksum << " channel_checksum=" << l.channel_checksum
                << std::dec;
            if (l.failed) log << " failed=\"" << l.error << '"';
            log << '\n';
        }
        log << "scheme=" << name << " failures=" << rep.failures << " p10_mbps=" << format_double(rep.p10_bps / 1e6)
            << " p50_mbps=" << format_double(rep.p50_bps / 1e6) << '\n';
        emit_cdf_csv(rep, spec.out_dir / (name + "_cdf.csv"));
        samples.push_back({name, rep.samples_bps});
    }
    write_percentiles_csv(percentile_report(samples, {10.0, 50.0}), spec.out_dir / "percentiles.csv");
    return 0;
}

}  // namespace d2dmimo::io
