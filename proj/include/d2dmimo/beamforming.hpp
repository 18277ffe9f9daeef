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
#include "d2dmimo/types.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace d2dmimo::beamforming {

/// Transmit beamformers for one scheduling slot.
///
/// `V[b]` is BS b's L x S matrix; column s serves cluster `scheduled[b][s]`.
/// Users not listed in `scheduled[b]` have an implicit zero beamformer.
struct TransmitBeamformers {
    std::vector<CMatrix> V;
    std::vector<std::vector<std::size_t>> scheduled;

    double power(std::size_t b) const { return V[b].squaredNorm(); }
};

/// Quantization noise of one cluster: q[m] for relay m, +inf when the relay
/// is excluded. The direct observation never carries quantization noise.
struct NoiseCovariance {
    std::vector<double> q;
    double sigma2 = 0.0;

    static NoiseCovariance lossless(std::size_t relays, double sigma2) {
        return {std::vector<double>(relays, 0.0), sigma2};
    }
};

/// Rows of the equivalent model that survive exclusion, in original order;
/// the direct row is always last.
inline std::vector<Eigen::Index> active_rows(const NoiseCovariance& Q) {
    std::vector<Eigen::Index> rows;
    for (std::size_t m = 0; m < Q.q.size(); ++m)
        if (std::isfinite(Q.q[m])) rows.push_back(static_cast<Eigen::Index>(m));
    rows.push_back(static_cast<Eigen::Index>(Q.q.size()));
    return rows;
}

inline CMatrix select_rows(const CMatrix& H, const std::vector<Eigen::Index>& rows) {
    if (static_cast<Eigen::Index>(rows.size()) == H.rows()) return H;
    CMatrix out(static_cast<Eigen::Index>(rows.size()), H.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = H.row(rows[r]);
    return out;
}

/// Locates the column that serves `user`, or -1.
inline Eigen::Index column_of(const TransmitBeamformers& tx, std::size_t bs, std::size_t user) {
    const auto& s = tx.scheduled[bs];
    for (std::size_t j = 0; j < s.size(); ++j)
        if (s[j] == user) return static_cast<Eigen::Index>(j);
    return -1;
}

/// J = sum of every other scheduled beam through this cluster's channels
///   + sigma2 I + blockdiag(Q, 0),
/// over the rows that survive exclusion. Inter-cell terms include all beams.
inline CMatrix interference_covariance(std::size_t user, const channel::ChannelSet& ch,
                                       const TransmitBeamformers& tx, const NoiseCovariance& Q) {
    if (Q.q.size() + 1 != ch.M) throw ShapeError("interference_covariance: Q must have M-1 entries");
    const auto rows = active_rows(Q);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const std::size_t own_bs = ch.serving_cell(user);

    CMatrix J = CMatrix::Zero(n, n);
    for (std::size_t i = 0; i < ch.num_cells; ++i) {
        if (tx.V[i].cols() == 0) continue;
        const CMatrix G = select_rows(ch.cellular[user][i], rows) * tx.V[i];
        const Eigen::Index own = (i == own_bs) ? column_of(tx, i, user) : -1;
        for (Eigen::Index s = 0; s < G.cols(); ++s) {
            if (s == own) continue;
            J.noalias() += G.col(s) * G.col(s).adjoint();
        }
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto m = static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]);
        J(r, r) += Q.sigma2 + (m < Q.q.size() ? Q.q[m] : 0.0);
    }
    return J;
}

/// u = J^-1 H v.
inline CVector mmse_receiver(const CMatrix& H_serving, const CVector& v_own, const CMatrix& J) {
    if (J.rows() != H_serving.rows() || J.cols() != J.rows() || H_serving.cols() != v_own.size())
        throw ShapeError("mmse_receiver: shape mismatch");
    Eigen::LLT<CMatrix> llt(J);
    if (llt.info() != Eigen::Success) throw NumericalError("mmse_receiver: J is not positive definite");
    return llt.solve(H_serving * v_own);
}

/// Equivalent single-antenna channel seen through receiver u: (u^* H)^T.
inline CVector effective_channel(const CVector& u, const CMatrix& H) {
    if (u.size() != H.rows()) throw ShapeError("effective_channel: u length must equal H rows");
    return (u.adjoint() * H).transpose();
}

/// Zero-forcing via the pseudo-inverse H^*(H H^*)^-1 with every column
/// rescaled to squared norm P_B / S.
///
/// Rows are normalised before inversion; row scaling only rescales columns of
/// the pseudo-inverse, which the power normalisation removes anyway.
inline CMatrix zf_transmit(const CMatrix& H_eff, double p_b, std::size_t S) {
    if (static_cast<std::size_t>(H_eff.rows()) != S) throw ShapeError("zf_transmit: H_eff must have S rows");
    if (S > static_cast<std::size_t>(H_eff.cols())) throw ConfigError("zf_transmit: S must not exceed L");
    if (S == 0) return CMatrix(H_eff.cols(), 0);

    CMatrix Hn = H_eff;
    for (Eigen::Index s = 0; s < Hn.rows(); ++s) {
        const double nrm = Hn.row(s).norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw BeamformingError("zf_transmit: zero effective channel");
        Hn.row(s) /= nrm;
    }
    const CMatrix gram = Hn * Hn.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 1e-13 * ev.maxCoeff())) throw BeamformingError("zf_transmit: effective channels are rank deficient");

    CMatrix V = Hn.adjoint() * gram.llt().solve(CMatrix::Identity(gram.rows(), gram.cols()));
    const double col_amp = std::sqrt(p_b / static_cast<double>(S));
    for (Eigen::Index s = 0; s < V.cols(); ++s) V.col(s) *= col_amp / V.col(s).norm();
    return V;
}

/// Random orthogonal columns, each with squared norm P_B / S.
inline CMatrix init_transmit_beamformers(std::size_t L, std::size_t S, double p_b, Rng& rng) {
    if (S > L) throw ConfigError("init_transmit_beamformers: S must not exceed L");
    const auto l = static_cast<Eigen::Index>(L), s = static_cast<Eigen::Index>(S);
    CMatrix G(l, s);
    for (Eigen::Index c = 0; c < s; ++c) G.col(c) = channel::draw_rayleigh_vector(L, rng);
    Eigen::HouseholderQR<CMatrix> qr(G);
    CMatrix Qm = qr.householderQ() * CMatrix::Identity(l, s);
    return Qm * std::sqrt(p_b / static_cast<double>(S));
}

}  // namespace d2dmimo::beamforming
