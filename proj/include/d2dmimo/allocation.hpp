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
#include <span>
#include <vector>

namespace d2dmimo::allocation {

/// What one relay contributes to its cluster's D2D allocation problem.
struct RelayObservation {
    double beta = 0.0;    // signal + interference + noise power at the relay
    double weight = 0.0;  // |u_m|^2, the receiver's combining weight on this relay
    double w = 0.0;       // D2D time cost per bit/s/Hz of compression rate
};

struct AllocationResult {
    std::vector<double> r;  // compression rate, bits/s/Hz
    std::vector<double> q;  // quantization noise variance; +inf when excluded
    std::vector<double> t;  // D2D time, s
    std::vector<bool> excluded;
    double mu = 0.0;
    int iterations = 0;
};

/// beta = sum_i sum_j |h_i^T v_ij|^2 + sigma2, where `relay_channel[i]` is this
/// relay's channel from BS i and `beamformers[i]` is BS i's L x S matrix.
inline double compute_beta(std::span<const CVector> relay_channel, std::span<const CMatrix> beamformers,
                           double sigma2) {
    if (relay_channel.size() != beamformers.size())
        throw ShapeError("compute_beta: one channel per BS required");
    double beta = sigma2;
    for (std::size_t i = 0; i < relay_channel.size(); ++i) {
        if (beamformers[i].rows() != relay_channel[i].size())
            throw ShapeError("compute_beta: beamformer rows must equal channel length");
        beta += (beamformers[i].transpose() * relay_channel[i]).squaredNorm();
    }
    return beta;
}

/// w = t_c B_c / (t_d B_d C). A relay with no capacity (or no D2D time) is
/// unusable and gets +inf.
inline double compute_link_weight(double t_c, double b_c, double t_d, double b_d, double capacity) {
    if (!(capacity > 0.0) || !(t_d > 0.0)) return std::numeric_limits<double>::infinity();
    return t_c * b_c / (t_d * b_d * capacity);
}

/// q = beta / (2^r - 1); +inf at r = 0 (relay carries nothing).
inline double rates_to_quantization(double r, double beta) {
    if (r <= 0.0) return std::numeric_limits<double>::infinity();
    return beta / std::expm1(r * std::numbers::ln2);
}

inline double rates_to_time(double r, double w, double t_d) {
    if (r <= 0.0) return 0.0;
    return t_d * w * r;
}

/// Sum_m beta_m weight_m / (2^r_m - 1): the part of the MSE that depends on
/// the allocation.
inline double allocation_objective(std::span<const RelayObservation> obs, std::span<const double> r) {
    double f = 0.0;
    for (std::size_t m = 0; m < obs.size(); ++m) {
        const double c = obs[m].beta * obs[m].weight;
        if (c == 0.0) continue;
        if (r[m] <= 0.0) return std::numeric_limits<double>::infinity();
        f += c / std::expm1(r[m] * std::numbers::ln2);
    }
    return f;
}

namespace detail {

// Root of the stationarity condition for water level a:
// 2^r = (a + 2 + sqrt(a^2 + 4a)) / 2, written as log1p to stay accurate for small a.
inline double rate_for_level(double a) {
    if (a <= 0.0) return 0.0;
    const double excess = a > 1e150 ? a + 1.0 : 0.5 * (a + std::sqrt(a * a + 4.0 * a));
    return std::log1p(excess) / std::numbers::ln2;
}

inline void validate(std::span<const RelayObservation> obs) {
    for (const auto& o : obs) {
        if (!std::isfinite(o.beta) || o.beta < 0.0) throw InputError("relay beta must be finite and non-negative");
        if (!std::isfinite(o.weight) || o.weight < 0.0)
            throw InputError("relay weight must be finite and non-negative");
        if (std::isnan(o.w) || o.w <= 0.0) throw InputError("relay link weight w must be positive");
    }
}

inline bool usable(const RelayObservation& o) { return o.weight > 0.0 && o.beta > 0.0 && std::isfinite(o.w); }

inline void finish(std::span<const RelayObservation> obs, double t_d, AllocationResult& out) {
    out.q.resize(obs.size());
    out.t.resize(obs.size());
    out.excluded.resize(obs.size());
    for (std::size_t m = 0; m < obs.size(); ++m) {
        out.excluded[m] = !(out.r[m] > 0.0);
        out.q[m] = rates_to_quantization(out.r[m], obs[m].beta);
        out.t[m] = rates_to_time(out.r[m], obs[m].w, t_d);
    }
}

}  // namespace detail

/// Closed-form KKT allocation for one cluster with bisection on the dual
/// multiplier mu. Included relays get
///   a_m = weight_m ln2 beta_m / (mu w_m),  r_m = log2((a_m + 2 + sqrt(a_m^2 + 4 a_m)) / 2),
/// with mu set so that sum_m w_m r_m = 1. Relays with zero weight or infinite
/// w get r = 0 and are flagged excluded.
inline AllocationResult solve_allocation(std::span<const RelayObservation> obs, double t_d = 1.0) {
    detail::validate(obs);
    AllocationResult out;
    out.r.assign(obs.size(), 0.0);

    std::vector<std::size_t> inc;
    double c_max = 0.0;
    for (std::size_t m = 0; m < obs.size(); ++m)
        if (detail::usable(obs[m])) {
            inc.push_back(m);
            c_max = std::max(c_max, obs[m].beta * obs[m].weight);
        }

    if (inc.empty()) {
        detail::finish(obs, t_d, out);
        return out;
    }

    if (inc.size() == 1) {
        // One variable: the constraint alone fixes r.
        const auto m = inc.front();
        out.r[m] = 1.0 / obs[m].w;
        const double x = std::exp2(out.r[m]);
        const double em1 = std::expm1(out.r[m] * std::numbers::ln2);
        out.mu = obs[m].beta * obs[m].weight * x * std::numbers::ln2 / (em1 * em1 * obs[m].w);
        detail::finish(obs, t_d, out);
        return out;
    }

    // Work with weights normalised by the largest beta*weight so the bracket
    // search from mu = 1 is scale free; mu is rescaled at the end.
    std::vector<double> level(inc.size());
    for (std::size_t j = 0; j < inc.size(); ++j) {
        const auto& o = obs[inc[j]];
        level[j] = (o.beta * o.weight / c_max) * std::numbers::ln2 / o.w;
    }
    auto load = [&](double mu) {
        double s = 0.0;
        for (std::size_t j = 0; j < inc.size(); ++j) s += obs[inc[j]].w * detail::rate_for_level(level[j] / mu);
        return s;
    };

    constexpr int kMaxSteps = 200;
    double lo = 1.0, hi = 1.0;
    int steps = 0;
    while (load(lo) <= 1.0) {
        lo *= 0.5;
        if (++steps > kMaxSteps) throw NumericalError("solve_allocation: lower mu bracket not found");
    }
    steps = 0;
    while (load(hi) >= 1.0) {
        hi *= 2.0;
        if (++steps > kMaxSteps) throw NumericalError("solve_allocation: upper mu bracket not found");
    }

    double mu = std::sqrt(lo * hi);
    for (out.iterations = 0; out.iterations < kMaxSteps; ++out.iterations) {
        mu = std::sqrt(lo * hi);
        const double g = load(mu);
        if (std::abs(g - 1.0) <= 1e-13) break;
        (g > 1.0 ? lo : hi) = mu;
        if (hi <= lo * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) break;
    }

    for (std::size_t j = 0; j < inc.size(); ++j) out.r[inc[j]] = detail::rate_for_level(level[j] / mu);
    out.mu = mu * c_max;
    detail::finish(obs, t_d, out);
    return out;
}

/// Every relay gets t_d / (M-1) of the D2D window, hence r_m = 1 / ((M-1) w_m).
inline AllocationResult equal_time_allocation(std::span<const RelayObservation> obs, double t_d = 1.0) {
    detail::validate(obs);
    AllocationResult out;
    out.r.assign(obs.size(), 0.0);
    const double n = static_cast<double>(obs.size());
    for (std::size_t m = 0; m < obs.size(); ++m)
        if (std::isfinite(obs[m].w) && obs[m].beta > 0.0) out.r[m] = 1.0 / (n * obs[m].w);
    detail::finish(obs, t_d, out);
    return out;
}

/// Residual of the stationarity condition beta weight 2^r ln2 / (2^r - 1)^2 = mu w,
/// relative to mu w, maximised over included relays.
inline double stationarity_residual(std::span<const RelayObservation> obs, const AllocationResult& a) {
    double worst = 0.0;
    for (std::size_t m = 0; m < obs.size(); ++m) {
        if (a.excluded[m]) continue;
        const double em1 = std::expm1(a.r[m] * std::numbers::ln2);
        const double lhs = obs[m].beta * obs[m].weight * std::exp2(a.r[m]) * std::numbers::ln2 / (em1 * em1);
        const double rhs = a.mu * obs[m].w;
        worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    return worst;
}

inline double constraint_load(std::span<const RelayObservation> obs, const AllocationResult& a) {
    double s = 0.0;
    for (std::size_t m = 0; m < obs.size(); ++m)
        if (a.r[m] > 0.0) s += obs[m].w * a.r[m];
    return s;
}

}  // namespace d2dmimo::allocation
