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

#include "d2dmimo/beamforming.hpp"
#include "d2dmimo/channel.hpp"
#include "d2dmimo/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace d2dmimo::rate {

struct RateBreakdown {
    double achievable = 0.0;   // bits/s/Hz over the cellular frame
    double time_shared = 0.0;  // after the D2D phase overhead
    double scheduled = 0.0;    // after sharing the BS with K/S slots
    double absolute = 0.0;     // bits/s
};

/// log2(1 + v^* H^* J^-1 H v): the rate with an MMSE-optimal linear receiver.
inline double achievable_rate(const CVector& v, const CMatrix& H, const CMatrix& J) {
    const CVector g = H * v;
    if (g.squaredNorm() == 0.0) return 0.0;
    Eigen::LLT<CMatrix> llt(J);
    if (llt.info() != Eigen::Success) throw NumericalError("achievable_rate: J is not positive definite");
    const double sinr = g.dot(llt.solve(g)).real();
    return std::log2(1.0 + std::max(sinr, 0.0));
}

/// Post-combining SINR of an arbitrary receive beamformer u.
inline double combining_sinr(const CVector& u, const CMatrix& H, const CVector& v, const CMatrix& J) {
    const Complex s = u.dot(H * v);
    const double denom = u.dot(J * u).real();
    return std::norm(s) / denom;
}

/// Rate of a fixed (not re-optimised) linear receiver u.
inline double combining_rate(const CVector& u, const CMatrix& H, const CVector& v, const CMatrix& J) {
    return std::log2(1.0 + combining_sinr(u, H, v, J));
}

inline double time_shared_rate(double r_tilde, double t_c, double t_d) { return r_tilde * t_c / (t_d + t_c); }

inline double scheduled_rate(double r, std::size_t S, std::size_t K) {
    return r * static_cast<double>(S) / static_cast<double>(K);
}

inline RateBreakdown breakdown(double r_tilde, double t_c, double t_d, std::size_t S, std::size_t K, double b_c) {
    RateBreakdown out;
    out.achievable = r_tilde;
    out.time_shared = time_shared_rate(r_tilde, t_c, t_d);
    out.scheduled = scheduled_rate(out.time_shared, S, K);
    out.absolute = out.scheduled * b_c;
    return out;
}

/// Single-antenna SINR rate on row `row` of the cluster's equivalent channel,
/// treating every other scheduled beam (intra- and inter-cell) as noise.
inline double row_sinr_rate(Eigen::Index row, std::size_t user, const channel::ChannelSet& ch,
                            const beamforming::TransmitBeamformers& tx) {
    const std::size_t own_bs = ch.serving_cell(user);
    const Eigen::Index own = beamforming::column_of(tx, own_bs, user);
    double signal = 0.0;
    double interference = ch.sigma2;
    for (std::size_t i = 0; i < ch.num_cells; ++i) {
        if (tx.V[i].cols() == 0) continue;
        const auto g = (ch.cellular[user][i].row(row) * tx.V[i]).eval();
        for (Eigen::Index s = 0; s < g.cols(); ++s) {
            if (i == own_bs && s == own)
                signal = std::norm(g(0, s));
            else
                interference += std::norm(g(0, s));
        }
    }
    return std::log2(1.0 + signal / interference);
}

inline double direct_sinr_rate(std::size_t user, const channel::ChannelSet& ch,
                               const beamforming::TransmitBeamformers& tx) {
    return row_sinr_rate(static_cast<Eigen::Index>(ch.M) - 1, user, ch, tx);
}

inline double relay_sinr_rate(std::size_t relay, std::size_t user, const channel::ChannelSet& ch,
                              const beamforming::TransmitBeamformers& tx) {
    if (relay + 1 >= ch.M) throw ShapeError("relay_sinr_rate: relay index out of range");
    return row_sinr_rate(static_cast<Eigen::Index>(relay), user, ch, tx);
}

/// Decode-and-forward through the best node of the cluster.
inline double multihop_rate(double c_direct, std::span<const double> c_relays) {
    double best = c_direct;
    for (double c : c_relays) best = std::max(best, c);
    return best;
}

}  // namespace d2dmimo::rate
