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

#include "d2dmimo/topology.hpp"
#include "d2dmimo/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace d2dmimo::channel {

/// Large-scale link parameters. Antenna gains are applied once per link.
struct LinkBudget {
    double cellular_pl_intercept = 128.1;  // dB, distance in km
    double cellular_pl_slope = 37.6;       // dB/decade
    double d2d_pl_intercept = 69.7;        // dB, distance in m
    double d2d_pl_slope = 24.0;            // dB/decade
    double shadowing_sigma = 8.0;          // dB, cellular links only
    double bs_antenna_gain = 15.0;         // dBi
    double d2d_antenna_gain = 27.0;        // dBi
    double nakagami_shape = 4.0;
    double noise_psd = -169.0;  // dBm/Hz

    void validate() const {
        if (!(cellular_pl_slope > 0.0) || !(d2d_pl_slope > 0.0))
            throw ConfigError("path-loss slopes must be positive");
        if (!(shadowing_sigma >= 0.0)) throw ConfigError("shadowing_sigma must be non-negative");
        if (!(nakagami_shape >= 0.5)) throw ConfigError("nakagami_shape must be >= 0.5");
    }
};

inline double cellular_pathloss_db(double d_km, const LinkBudget& b = {}) {
    if (!(d_km > 0.0)) throw std::domain_error("cellular path loss needs a positive distance");
    return b.cellular_pl_intercept + b.cellular_pl_slope * std::log10(d_km);
}

/// Distances below 1 m are clamped to 1 m.
inline double d2d_pathloss_db(double d_m, const LinkBudget& b = {}) {
    return b.d2d_pl_intercept + b.d2d_pl_slope * std::log10(std::max(d_m, 1.0));
}

/// Unit-average-power i.i.d. circularly symmetric complex Gaussian entries.
inline CVector draw_rayleigh_vector(std::size_t length, Rng& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    CVector h(static_cast<Eigen::Index>(length));
    for (Eigen::Index l = 0; l < h.size(); ++l) {
        const double re = n(rng);
        const double im = n(rng);
        h[l] = {re, im};
    }
    return h;
}

inline double draw_shadowing_db(double sigma_db, Rng& rng) {
    if (sigma_db <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma_db)(rng);
}

/// Rayleigh vector scaled by sqrt(10^((-pl + gains + X)/10)) with one
/// shadowing draw X ~ N(0, sigma^2) per link.
inline CVector draw_cellular_channel(double pl_db, double gains_db, double shadowing_sigma,
                                     std::size_t L, Rng& rng) {
    if (L < 1) throw ConfigError("L must be at least 1");
    const double x = draw_shadowing_db(shadowing_sigma, rng);
    return draw_rayleigh_vector(L, rng) * std::sqrt(db_to_linear(-pl_db + gains_db + x));
}

/// Nakagami-m power gain: Omega * G with G ~ Gamma(shape, 1/shape).
inline double draw_d2d_gain(double pl_db, double gain_db, double shape, Rng& rng) {
    if (!(shape >= 0.5)) throw InputError("Nakagami shape must be >= 0.5");
    const double omega = db_to_linear(-pl_db + gain_db);
    return omega * std::gamma_distribution<double>(shape, 1.0 / shape)(rng);
}

/// Spectral efficiency of a D2D link, bits/s/Hz.
inline double d2d_capacity(double p_d_dbm, double gain, double b_d_hz, double noise_psd_dbm_hz) {
    if (!(b_d_hz > 0.0)) throw InputError("D2D bandwidth must be positive");
    const double noise = dbm_to_watt(noise_psd_dbm_hz) * b_d_hz;
    return std::log2(1.0 + dbm_to_watt(p_d_dbm) * gain / noise);
}

/// Stacks relay rows (in cluster order) above the direct row.
inline CMatrix assemble_equivalent_channel(const CVector& direct, std::span<const CVector> relays) {
    const auto L = direct.size();
    CMatrix h(static_cast<Eigen::Index>(relays.size()) + 1, L);
    for (std::size_t m = 0; m < relays.size(); ++m) {
        if (relays[m].size() != L) throw ShapeError("relay channel length differs from direct channel length");
        h.row(static_cast<Eigen::Index>(m)) = relays[m].transpose();
    }
    h.row(h.rows() - 1) = direct.transpose();
    return h;
}

struct ReuseMargin {
    double d_min = 0.0;                     // m
    double interference_to_noise = 0.0;     // linear
    bool feasible = false;                  // INR <= 5%
};

/// Worst-case co-channel D2D interference at the reuse distance
/// d_min = geometry_factor * cell_radius. The interfering link is boresight
/// at one end only, so it sees `gain_fraction` of the link antenna gain (dB).
inline ReuseMargin check_reuse_margin(double cell_radius, double p_d_dbm, const LinkBudget& budget, double b_d_hz,
                                      double geometry_factor = 4.0, double gain_fraction = 0.5) {
    if (!(cell_radius > 0.0)) throw InputError("cell radius must be positive");
    ReuseMargin out;
    out.d_min = geometry_factor * cell_radius;
    const double rx_dbm = p_d_dbm + gain_fraction * budget.d2d_antenna_gain - d2d_pathloss_db(out.d_min, budget);
    const double noise_w = dbm_to_watt(budget.noise_psd) * b_d_hz;
    out.interference_to_noise = dbm_to_watt(rx_dbm) / noise_w;
    out.feasible = out.interference_to_noise <= 0.05;
    return out;
}

/// Per-trial channel state for every cluster.
///
/// Cluster c (global active-user id, c = b*K + k) holds `cellular[c][i]`, the
/// M x L matrix from BS i whose rows 0..M-2 are relay channels and row M-1 the
/// direct channel. The received signal of row m for beam v is `H.row(m) * v`.
struct ChannelSet {
    std::size_t num_cells = 0;
    std::size_t users_per_cell = 0;
    std::size_t L = 0;
    std::size_t M = 1;
    double sigma2 = 0.0;  // cellular noise power, W

    std::vector<std::vector<CMatrix>> cellular;     // [cluster][bs]
    std::vector<std::vector<double>> d2d_capacity;  // [cluster][relay], bits/s/Hz
    std::vector<std::vector<double>> d2d_gain;      // [cluster][relay], linear |l|^2

    std::size_t num_clusters() const { return cellular.size(); }
    std::size_t serving_cell(std::size_t cluster) const { return cluster / users_per_cell; }
    const CMatrix& serving(std::size_t cluster) const { return cellular[cluster][serving_cell(cluster)]; }
};

struct ChannelParams {
    std::size_t L = 4;
    double p_d_dbm = 20.0;
    double b_c_hz = 20e6;
    double b_d_hz = 200e6;
    double min_bs_distance_m = 35.0;
};

/// Draws all channels for one trial.
///
/// Large-scale state (shadowing) comes from `large_scale_seed`, small-scale
/// fading from `fading_seed`. Each device owns its own sub-stream, so a
/// device's channels do not depend on how many other devices exist, which is
/// what makes runs with different M share identical direct channels.
inline ChannelSet generate_channels(const topology::HexLayout& layout, const topology::UserDrop& drop,
                                    const std::vector<topology::Cluster>& clusters, const LinkBudget& budget,
                                    const ChannelParams& p, std::uint64_t large_scale_seed,
                                    std::uint64_t fading_seed) {
    budget.validate();
    ChannelSet set;
    set.num_cells = layout.num_cells;
    set.users_per_cell = drop.users_per_cell();
    set.L = p.L;
    set.M = clusters.empty() ? 1 : clusters.front().relays.size() + 1;
    set.sigma2 = dbm_to_watt(budget.noise_psd) * p.b_c_hz;

    auto device_rows = [&](Point2 pos, Rng& shadow, Rng& fade) {
        std::vector<CVector> rows(layout.num_cells);
        for (std::size_t i = 0; i < layout.num_cells; ++i) {
            const double d = std::max(topology::wrap_distance(pos, layout.cell_centers[i], layout), p.min_bs_distance_m);
            const double x = draw_shadowing_db(budget.shadowing_sigma, shadow);
            const double scale = std::sqrt(db_to_linear(-cellular_pathloss_db(d / 1000.0, budget) +
                                                        budget.bs_antenna_gain + x));
            rows[i] = draw_rayleigh_vector(p.L, fade) * scale;
        }
        return rows;
    };

    set.cellular.resize(clusters.size());
    set.d2d_capacity.resize(clusters.size());
    set.d2d_gain.resize(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto& cl = clusters[c];
        if (cl.relays.size() + 1 != set.M) throw ShapeError("clusters must all have the same size");

        Rng shadow = make_stream(large_scale_seed, {tag(StreamTag::shadowing), 0, cl.owner});
        Rng fade = make_stream(fading_seed, {tag(StreamTag::direct_fading), cl.owner});
        const auto direct = device_rows(cl.owner_position, shadow, fade);

        std::vector<std::vector<CVector>> relay_rows;
        for (std::size_t m = 0; m < cl.relays.size(); ++m) {
            Rng rs = make_stream(large_scale_seed, {tag(StreamTag::shadowing), 1, cl.relays[m]});
            Rng rf = make_stream(fading_seed, {tag(StreamTag::relay_fading), cl.relays[m]});
            relay_rows.push_back(device_rows(cl.relay_positions[m], rs, rf));

            Rng df = make_stream(fading_seed, {tag(StreamTag::d2d_fading), cl.relays[m]});
            const double d = topology::wrap_distance(cl.owner_position, cl.relay_positions[m], layout);
            const double g = draw_d2d_gain(d2d_pathloss_db(d, budget), budget.d2d_antenna_gain,
                                           budget.nakagami_shape, df);
            set.d2d_gain[c].push_back(g);
            set.d2d_capacity[c].push_back(d2d_capacity(p.p_d_dbm, g, p.b_d_hz, budget.noise_psd));
        }

        set.cellular[c].resize(layout.num_cells);
        std::vector<CVector> rel(cl.relays.size());
        for (std::size_t i = 0; i < layout.num_cells; ++i) {
            for (std::size_t m = 0; m < cl.relays.size(); ++m) rel[m] = relay_rows[m][i];
            set.cellular[c][i] = assemble_equivalent_channel(direct[i], rel);
        }
    }
    return set;
}

/// FNV-1a over raw bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Checksum over the direct rows of every cluster (independent of M).
inline std::uint64_t direct_channel_checksum(const ChannelSet& set) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& per_bs : set.cellular)
        for (const auto& H : per_bs) {
            const CVector row = H.row(H.rows() - 1).transpose();
            h = fnv1a(row.data(), sizeof(Complex) * static_cast<std::size_t>(row.size()), h);
        }
    return h;
}

/// Checksum over every cellular matrix and D2D capacity.
inline std::uint64_t channel_checksum(const ChannelSet& set) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& per_bs : set.cellular)
        for (const auto& H : per_bs) {
            const CMatrix m = H;
            h = fnv1a(m.data(), sizeof(Complex) * static_cast<std::size_t>(m.size()), h);
        }
    for (const auto& caps : set.d2d_capacity) h = fnv1a(caps.data(), sizeof(double) * caps.size(), h);
    return h;
}

}  // namespace d2dmimo::channel
