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

#include "d2dmimo/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace d2dmimo::topology {

/// Hexagonal cell grid with wrap-around by the mirror method.
///
/// Cells are indexed in spiral order: the center cell first, then ring 1
/// counter-clockwise from the +x axis, then ring 2. Each cell is a regular
/// hexagon whose flat sides face the neighbouring sites; `cell_radius` is the
/// inner radius (center to side), so `cell_radius == inter_cell_distance / 2`
/// tiles the plane exactly.
struct HexLayout {
    std::vector<Point2> cell_centers;
    double cell_radius = 0.0;
    double inter_cell_distance = 0.0;
    std::vector<Point2> wrap_offsets;  // wrap_offsets[0] is the zero vector
    std::size_t num_cells = 0;
};

namespace detail {

struct Axial {
    int q;
    int r;
};

inline Point2 axial_to_point(Axial a, double spacing) {
    return {spacing * (a.q + 0.5 * a.r), spacing * (std::numbers::sqrt3 / 2.0) * a.r};
}

inline int ring_of(Axial a) { return std::max({std::abs(a.q), std::abs(a.r), std::abs(a.q + a.r)}); }

// 60 degree counter-clockwise rotation on the axial lattice.
inline Axial rotate60(Axial a) { return {-a.r, a.q + a.r}; }

}  // namespace detail

inline HexLayout build_wraparound_layout(std::size_t num_cells, double cell_radius,
                                         double inter_cell_distance) {
    int rings = 0;
    switch (num_cells) {
        case 1: rings = 0; break;
        case 7: rings = 1; break;
        case 19: rings = 2; break;
        default:
            throw ConfigError("num_cells must be 1, 7 or 19 (got " + std::to_string(num_cells) + ")");
    }
    if (!(cell_radius > 0.0)) throw ConfigError("cell_radius must be positive");
    if (!(inter_cell_distance > 0.0)) throw ConfigError("inter_cell_distance must be positive");
    if (cell_radius > inter_cell_distance / 2.0 * (1.0 + 1e-12))
        throw ConfigError("cell_radius must not exceed inter_cell_distance / 2 (hexagons would overlap)");

    std::vector<detail::Axial> sites;
    for (int q = -rings; q <= rings; ++q)
        for (int r = -rings; r <= rings; ++r)
            if (detail::ring_of({q, r}) <= rings) sites.push_back({q, r});

    auto angle = [&](detail::Axial a) {
        const Point2 p = detail::axial_to_point(a, 1.0);
        double t = std::atan2(p.y, p.x);
        if (t < -1e-12) t += 2.0 * std::numbers::pi;
        return t;
    };
    std::sort(sites.begin(), sites.end(), [&](detail::Axial a, detail::Axial b) {
        const int ra = detail::ring_of(a), rb = detail::ring_of(b);
        if (ra != rb) return ra < rb;
        return angle(a) < angle(b);
    });

    HexLayout layout;
    layout.num_cells = num_cells;
    layout.cell_radius = cell_radius;
    layout.inter_cell_distance = inter_cell_distance;
    for (auto s : sites) layout.cell_centers.push_back(detail::axial_to_point(s, inter_cell_distance));

    // Super-cell translation: axial (n+1, n) has squared length n^2+n(n+1)+(n+1)^2 = num_cells.
    layout.wrap_offsets.push_back({0.0, 0.0});
    detail::Axial shift{rings + 1, rings};
    for (int k = 0; k < 6; ++k) {
        layout.wrap_offsets.push_back(detail::axial_to_point(shift, inter_cell_distance));
        shift = detail::rotate60(shift);
    }
    return layout;
}

/// Minimum over all mirror images of b.
inline double wrap_distance(Point2 a, Point2 b, const HexLayout& layout) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : layout.wrap_offsets) best = std::min(best, norm(a - (b + o)));
    return best;
}

/// True when p (relative to the owning cell center) lies inside the hexagon.
inline bool inside_hexagon(Point2 rel, double inner_radius) {
    const double tol = inner_radius * 1e-12;
    for (int k = 0; k < 3; ++k) {
        const double t = k * std::numbers::pi / 3.0;
        if (std::abs(rel.x * std::cos(t) + rel.y * std::sin(t)) > inner_radius + tol) return false;
    }
    return true;
}

/// Uniform point in a hexagon of the given inner radius, centered at origin.
inline Point2 sample_in_hexagon(double inner_radius, Rng& rng) {
    const double half_height = 2.0 * inner_radius / std::numbers::sqrt3;
    std::uniform_real_distribution<double> ux(-inner_radius, inner_radius);
    std::uniform_real_distribution<double> uy(-half_height, half_height);
    for (;;) {
        Point2 p{ux(rng), uy(rng)};
        if (inside_hexagon(p, inner_radius)) return p;
    }
}

struct UserDrop {
    std::vector<std::vector<Point2>> active_users;      // [cell][k]
    std::vector<std::vector<Point2>> relay_candidates;  // [cell][j]

    std::size_t users_per_cell() const { return active_users.empty() ? 0 : active_users.front().size(); }
    std::size_t pool_per_cell() const { return relay_candidates.empty() ? 0 : relay_candidates.front().size(); }

    Point2 active(std::size_t id) const {
        const auto k = users_per_cell();
        return active_users[id / k][id % k];
    }
    Point2 candidate(std::size_t id) const {
        const auto p = pool_per_cell();
        return relay_candidates[id / p][id % p];
    }
    std::size_t num_active() const { return active_users.size() * users_per_cell(); }
    std::size_t num_candidates() const { return relay_candidates.size() * pool_per_cell(); }
};

inline UserDrop drop_users(const HexLayout& layout, std::size_t users_per_cell,
                           std::size_t relay_pool_per_cell, std::size_t relays_per_user, Rng& rng) {
    if (users_per_cell < 1) throw ConfigError("K must be at least 1");
    if (relay_pool_per_cell < users_per_cell * relays_per_user)
        throw ConfigError("relay pool per cell (" + std::to_string(relay_pool_per_cell) +
                          ") must be at least K*(M-1) = " + std::to_string(users_per_cell * relays_per_user));
    UserDrop drop;
    drop.active_users.resize(layout.num_cells);
    drop.relay_candidates.resize(layout.num_cells);
    for (std::size_t b = 0; b < layout.num_cells; ++b) {
        const Point2 c = layout.cell_centers[b];
        for (std::size_t k = 0; k < users_per_cell; ++k)
            drop.active_users[b].push_back(c + sample_in_hexagon(layout.cell_radius, rng));
    }
    for (std::size_t b = 0; b < layout.num_cells; ++b) {
        const Point2 c = layout.cell_centers[b];
        for (std::size_t j = 0; j < relay_pool_per_cell; ++j)
            drop.relay_candidates[b].push_back(c + sample_in_hexagon(layout.cell_radius, rng));
    }
    return drop;
}

struct Cluster {
    std::size_t owner = 0;  // global active-user id: cell * K + k
    Point2 owner_position;
    std::vector<std::size_t> relays;  // global candidate ids, nearest first
    std::vector<Point2> relay_positions;
    double d_max = 0.0;
};

/// Greedy nearest-first relay selection. Owners are visited in a random order
/// drawn from `rng`; each takes the closest still-unassigned candidates within
/// `d_max` (wrap distance). Returned clusters are indexed by owner id.
inline std::vector<Cluster> form_clusters(const UserDrop& drop, const HexLayout& layout, double d_max,
                                          std::size_t relays_per_user, Rng& rng) {
    const std::size_t n_owners = drop.num_active();
    const std::size_t n_cand = drop.num_candidates();

    std::vector<Cluster> clusters(n_owners);
    for (std::size_t u = 0; u < n_owners; ++u) {
        clusters[u].owner = u;
        clusters[u].owner_position = drop.active(u);
        clusters[u].d_max = d_max;
    }
    if (relays_per_user == 0) return clusters;

    std::vector<std::size_t> order(n_owners);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> taken(n_cand, false);
    std::vector<std::pair<double, std::size_t>> eligible;
    for (auto u : order) {
        const Point2 p = clusters[u].owner_position;
        eligible.clear();
        for (std::size_t c = 0; c < n_cand; ++c) {
            if (taken[c]) continue;
            const double d = wrap_distance(p, drop.candidate(c), layout);
            if (d <= d_max) eligible.emplace_back(d, c);
        }
        if (eligible.size() < relays_per_user)
            throw ClusteringError("user " + std::to_string(u) + " has only " + std::to_string(eligible.size()) +
                                      " eligible relay candidates within d_max, needs " +
                                      std::to_string(relays_per_user),
                                  u);
        std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(relays_per_user),
                          eligible.end());
        for (std::size_t m = 0; m < relays_per_user; ++m) {
            const auto c = eligible[m].second;
            taken[c] = true;
            clusters[u].relays.push_back(c);
            clusters[u].relay_positions.push_back(drop.candidate(c));
        }
    }
    return clusters;
}

}  // namespace d2dmimo::topology
