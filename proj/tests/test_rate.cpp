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

#include "catch_amalgamated.hpp"
#include "d2dmimo/beamforming.hpp"
#include "d2dmimo/rate.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <vector>

using namespace d2dmimo;
using namespace d2dmimo::rate;
using Catch::Approx;

namespace {

beamforming::TransmitBeamformers full_tx(oracle::Gen& g, const channel::ChannelSet& ch) {
    beamforming::TransmitBeamformers tx;
    for (std::size_t b = 0; b < ch.num_cells; ++b) {
        tx.V.push_back(g.matrix(static_cast<Eigen::Index>(ch.L), static_cast<Eigen::Index>(ch.users_per_cell)));
        std::vector<std::size_t> ids;
        for (std::size_t k = 0; k < ch.users_per_cell; ++k) ids.push_back(b * ch.users_per_cell + k);
        tx.scheduled.push_back(ids);
    }
    return tx;
}

// SINR of one row written out as explicit sums.
double naive_row_rate(Eigen::Index row, std::size_t user, const channel::ChannelSet& ch,
                      const beamforming::TransmitBeamformers& tx) {
    double sig = 0, intf = ch.sigma2;
    for (std::size_t i = 0; i < ch.num_cells; ++i)
        for (std::size_t s = 0; s < tx.scheduled[i].size(); ++s) {
            Complex acc = 0.0;
            for (Eigen::Index l = 0; l < tx.V[i].rows(); ++l)
                acc += ch.cellular[user][i](row, l) * tx.V[i](l, static_cast<Eigen::Index>(s));
            (tx.scheduled[i][s] == user ? sig : intf) += std::norm(acc);
        }
    return std::log2(1 + sig / intf);
}

}  // namespace

TEST_CASE("achievable rate: scalar reduction and zero beam") {
    CMatrix H(1, 2);
    H << Complex(1, 1), Complex(0, 2);
    CVector v(2);
    v << Complex(0.5, 0), Complex(0, -1);
    const Complex hv = H(0, 0) * v[0] + H(0, 1) * v[1];
    const CMatrix J = 0.3 * CMatrix::Identity(1, 1);
    CHECK(achievable_rate(v, H, J) == Approx(std::log2(1 + std::norm(hv) / 0.3)).epsilon(1e-14));
    CHECK(achievable_rate(CVector::Zero(2), H, J) == 0.0);
    CHECK_THROWS_AS(achievable_rate(v, H, -J), NumericalError);
}

TEST_CASE("achievable rate: 2x2 closed-form inverse") {
    oracle::Gen g(1);
    for (int it = 0; it < 50; ++it) {
        const CMatrix H = g.matrix(2, 3);
        const CVector v = g.vector(3);
        const CMatrix J = g.hpd(2, 0.2, 2.0);
        const Complex a = J(0, 0), b = J(0, 1), c = J(1, 0), d = J(1, 1);
        const Complex det = a * d - b * c;
        CMatrix Ji(2, 2);
        Ji << d / det, -b / det, -c / det, a / det;
        const CVector x = H * v;
        const double sinr = (x.adjoint() * Ji * x)(0, 0).real();
        CHECK(achievable_rate(v, H, J) == Approx(std::log2(1 + sinr)).epsilon(1e-12));
    }
}

TEST_CASE("achievable rate equals MMSE combining rate") {
    oracle::Gen g(2);
    for (int it = 0; it < 100; ++it) {
        const auto M = static_cast<Eigen::Index>(g.index(1, 8));
        const CMatrix H = g.matrix(M, 4);
        const CVector v = g.vector(4);
        const CMatrix J = g.hpd(M, 0.05, 5.0);
        const CVector u = oracle::lu_mmse(H, v, J);
        CHECK(achievable_rate(v, H, J) == Approx(combining_rate(u, H, v, J)).epsilon(1e-9));
        CHECK(combining_rate(g.vector(M), H, v, J) <= achievable_rate(v, H, J) * (1 + 1e-12));
    }
}

TEST_CASE("achievable rate: deleting a row never helps") {
    oracle::Gen g(3);
    for (int it = 0; it < 200; ++it) {
        const auto M = static_cast<Eigen::Index>(g.index(2, 8));
        const CMatrix H = g.matrix(M, 4);
        const CVector v = g.vector(4);
        const CMatrix J = g.hpd(M, 0.05, 5.0);
        const auto drop = static_cast<Eigen::Index>(g.index(0, static_cast<std::size_t>(M - 1)));
        std::vector<Eigen::Index> keep;
        for (Eigen::Index r = 0; r < M; ++r)
            if (r != drop) keep.push_back(r);
        const CMatrix Hs = beamforming::select_rows(H, keep);
        CMatrix Js(M - 1, M - 1);
        for (Eigen::Index a = 0; a < M - 1; ++a)
            for (Eigen::Index b = 0; b < M - 1; ++b)
                Js(a, b) = J(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
        CHECK(achievable_rate(v, Hs, Js) <= achievable_rate(v, H, J) * (1 + 1e-12));
    }
}

TEST_CASE("achievable rate: lossless relays dominate any quantization noise") {
    oracle::Gen g(4);
    for (int it = 0; it < 200; ++it) {
        const auto M = static_cast<Eigen::Index>(g.index(2, 8));
        const CMatrix H = g.matrix(M, 4);
        const CVector v = g.vector(4);
        const CMatrix J = g.hpd(M, 0.05, 5.0);
        CMatrix Jq = J;
        for (Eigen::Index m = 0; m + 1 < M; ++m) Jq(m, m) += g.log_uniform(1e-3, 1e3);
        CHECK(achievable_rate(v, H, Jq) <= achievable_rate(v, H, J));
    }
}

TEST_CASE("time sharing and scheduling factors") {
    CHECK(time_shared_rate(3.0, 1.25e-3, 0.0) == 3.0);
    CHECK(time_shared_rate(3.0, 1.25e-3, 0.25 * 1.25e-3) == Approx(2.4));
    CHECK(time_shared_rate(3.0, 1.25e-3, 1.25e-3) == Approx(1.5));
    CHECK(scheduled_rate(7.0, 20, 20) == 7.0);
    CHECK(scheduled_rate(7.0, 10, 20) == 3.5);
    CHECK(scheduled_rate(10.0, 4, 20) == Approx(2.0));

    oracle::Gen g(5);
    for (int it = 0; it < 200; ++it) {
        const double r = g.uniform(0, 20), td = g.uniform(0, 1e-3);
        const auto b = breakdown(r, 1.25e-3, td, 4, 20, 20e6);
        CHECK(b.achievable == r);
        CHECK(0.0 <= b.scheduled);
        CHECK(b.scheduled <= b.time_shared);
        CHECK(b.time_shared <= b.achievable);
        CHECK(b.time_shared == Approx(r * 1.25e-3 / (1.25e-3 + td)));
        CHECK(b.scheduled == Approx(b.time_shared * 4.0 / 20.0));
        CHECK(b.absolute == Approx(b.scheduled * 20e6));
        // Order preserving.
        const double r2 = g.uniform(0, 20);
        CHECK((breakdown(r2, 1.25e-3, td, 4, 20, 20e6).absolute < b.absolute) == (r2 < r));
    }
}

TEST_CASE("direct and relay SINR rates") {
    oracle::Gen g(6);
    for (int it = 0; it < 50; ++it) {
        auto ch = oracle::random_channels(g, 2, 2, 4, 3, 1.0, 0.1);
        auto tx = full_tx(g, ch);
        const auto user = g.index(0, 3);
        CHECK(direct_sinr_rate(user, ch, tx) == Approx(naive_row_rate(2, user, ch, tx)).epsilon(1e-12));
        CHECK(relay_sinr_rate(0, user, ch, tx) == Approx(naive_row_rate(0, user, ch, tx)).epsilon(1e-12));
        CHECK(relay_sinr_rate(1, user, ch, tx) == Approx(naive_row_rate(1, user, ch, tx)).epsilon(1e-12));
    }
    const auto small = oracle::random_channels(g, 1, 1, 4, 3, 1, 1);
    CHECK_THROWS_AS(relay_sinr_rate(2, 0, small, full_tx(g, small)), ShapeError);
}

TEST_CASE("SINR rates: isolated user, relay substitution, vanishing relay") {
    oracle::Gen g(7);
    auto ch = oracle::random_channels(g, 1, 1, 4, 3, 1.0, 0.2);
    auto tx = full_tx(g, ch);
    const Complex hv = (ch.cellular[0][0].row(2) * tx.V[0].col(0))(0, 0);
    CHECK(direct_sinr_rate(0, ch, tx) == Approx(std::log2(1 + std::norm(hv) / 0.2)).epsilon(1e-14));

    ch.cellular[0][0].row(0) = ch.cellular[0][0].row(2);
    CHECK(relay_sinr_rate(0, 0, ch, tx) == direct_sinr_rate(0, ch, tx));
    ch.cellular[0][0].row(1).setZero();
    CHECK(relay_sinr_rate(1, 0, ch, tx) == 0.0);

    // Growing interference drives the rate to zero.
    auto ch2 = oracle::random_channels(g, 2, 1, 4, 1, 1.0, 0.2);
    auto tx2 = full_tx(g, ch2);
    double prev = direct_sinr_rate(0, ch2, tx2);
    for (double s = 10; s < 1e12; s *= 100) {
        auto t = tx2;
        t.V[1] *= s;
        const double r = direct_sinr_rate(0, ch2, t);
        CHECK(r <= prev);
        prev = r;
    }
    CHECK(prev < 1e-9);
}

TEST_CASE("multihop rate") {
    CHECK(multihop_rate(2.0, {}) == 2.0);
    const std::vector<double> relays{3.5, 1.2};
    CHECK(multihop_rate(2.0, relays) == 3.5);
    const std::vector<double> same{2.0, 2.0};
    CHECK(multihop_rate(2.0, same) == 2.0);
    oracle::Gen g(8);
    for (int it = 0; it < 100; ++it) {
        std::vector<double> c(g.index(0, 9));
        for (auto& x : c) x = g.uniform(0, 10);
        const double d = g.uniform(0, 10);
        CHECK(multihop_rate(d, c) >= d);
    }
}
