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

#include "d2dmimo/allocation.hpp"
#include "d2dmimo/beamforming.hpp"
#include "d2dmimo/channel.hpp"
#include "d2dmimo/rate.hpp"
#include "d2dmimo/topology.hpp"
#include "d2dmimo/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace d2dmimo::sim {

/// Every knob of one experiment. Defaults reproduce the reference network.
struct SystemConfig {
    std::size_t N = 19;  // cells
    std::size_t K = 20;  // active users per cell
    std::size_t S = 4;   // users scheduled per slot
    std::size_t L = 4;   // BS antennas
    std::size_t M = 10;  // equivalent receive antennas (M-1 relays)

    double P_B_dbm = 43.0;
    double P_D_dbm = 20.0;
    double B_c = 20e6;
    double B_d = 200e6;
    double t_c = 1.25e-3;
    double t_d_ratio = 0.15;

    double inter_cell_distance = 800.0;
    double cell_radius = 400.0;
    double min_bs_distance = 35.0;
    double d_max = 100.0;
    std::size_t relay_pool_per_cell = 800;

    channel::LinkBudget budget;

    std::size_t T = 100;
    std::uint64_t seed = 1;
    double tolerance = 1e-4;
    int max_iterations = 50;
    int max_redraws = 3;
    double reuse_geometry_factor = 4.0;
    double reuse_gain_fraction = 0.5;
    bool freeze_topology = false;

    double t_d() const { return t_d_ratio * t_c; }
    double P_B() const { return dbm_to_watt(P_B_dbm); }

    void validate() const {
        if (N != 1 && N != 7 && N != 19) throw ConfigError("N: must be 1, 7 or 19");
        if (K < 1) throw ConfigError("K: must be at least 1");
        if (S < 1) throw ConfigError("S: must be at least 1");
        if (K % S != 0) throw ConfigError("S: K mod S must be 0");
        if (S > L) throw ConfigError("S: S must not exceed L");
        if (M < 1) throw ConfigError("M: must be at least 1");
        if (T < 1) throw ConfigError("T: must be at least 1");
        if (!(t_c > 0.0)) throw ConfigError("t_c: must be positive");
        if (!(t_d_ratio >= 0.0)) throw ConfigError("t_d_ratio: must be non-negative");
        if (!(B_c > 0.0) || !(B_d > 0.0)) throw ConfigError("B_c/B_d: bandwidths must be positive");
        if (!(d_max > 0.0)) throw ConfigError("d_max: must be positive");
        if (relay_pool_per_cell < K * (M - 1)) throw ConfigError("relay_pool_per_cell: must be at least K*(M-1)");
        if (!(tolerance > 0.0)) throw ConfigError("tolerance: must be positive");
        if (max_iterations < 1) throw ConfigError("max_iterations: must be at least 1");
        if (max_redraws < 0) throw ConfigError("max_redraws: must be non-negative");
        budget.validate();
    }
};

enum class Scheme { proposed, bench1, bench2, adjusted_bench2, bench3, bench4 };

inline std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::proposed: return "proposed";
        case Scheme::bench1: return "bench1";
        case Scheme::bench2: return "bench2";
        case Scheme::adjusted_bench2: return "adjusted-bench2";
        case Scheme::bench3: return "bench3";
        case Scheme::bench4: return "bench4";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name) {
    for (auto s : {Scheme::proposed, Scheme::bench1, Scheme::bench2, Scheme::adjusted_bench2, Scheme::bench3,
                   Scheme::bench4})
        if (scheme_name(s) == name) return s;
    throw ConfigError("unknown scheme '" + std::string(name) +
                      "' (expected proposed, bench1, bench2, adjusted-bench2, bench3, bench4)");
}

/// sets[b][t] lists the local user indices BS b serves in slot t.
using ScheduleSets = std::vector<std::vector<std::vector<std::size_t>>>;

/// Uniformly random partition of {0..K-1} into K/S sets of size S.
inline std::vector<std::vector<std::size_t>> generate_schedule_sets(std::size_t K, std::size_t S, Rng& rng) {
    if (S == 0 || K % S != 0) throw ConfigError("K mod S must be 0");
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> sets(K / S);
    for (std::size_t t = 0; t < sets.size(); ++t)
        sets[t].assign(perm.begin() + static_cast<std::ptrdiff_t>(t * S),
                       perm.begin() + static_cast<std::ptrdiff_t>((t + 1) * S));
    return sets;
}

/// Everything random about one trial.
struct TrialInputs {
    std::uint64_t trial_seed = 0;
    topology::UserDrop drop;
    std::vector<topology::Cluster> clusters;
    channel::ChannelSet channels;
    ScheduleSets sets;
    std::uint64_t direct_checksum = 0;
    std::uint64_t channel_checksum = 0;
};

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial, int attempt) {
    return make_stream(master, {0x7472u, trial, static_cast<std::uint64_t>(attempt)})();
}

inline TrialInputs make_trial(const SystemConfig& cfg, const topology::HexLayout& layout, std::size_t trial,
                              int attempt) {
    TrialInputs in;
    in.trial_seed = trial_seed(cfg.seed, trial, attempt);
    const std::uint64_t topo_seed = cfg.freeze_topology ? make_stream(cfg.seed, {0x66726fu})() : in.trial_seed;

    Rng topo = make_stream(topo_seed, {tag(StreamTag::topology)});
    in.drop = topology::drop_users(layout, cfg.K, cfg.relay_pool_per_cell, cfg.M - 1, topo);
    Rng clus = make_stream(topo_seed, {tag(StreamTag::clustering)});
    in.clusters = topology::form_clusters(in.drop, layout, cfg.d_max, cfg.M - 1, clus);

    channel::ChannelParams p;
    p.L = cfg.L;
    p.p_d_dbm = cfg.P_D_dbm;
    p.b_c_hz = cfg.B_c;
    p.b_d_hz = cfg.B_d;
    p.min_bs_distance_m = cfg.min_bs_distance;
    in.channels = channel::generate_channels(layout, in.drop, in.clusters, cfg.budget, p, topo_seed, in.trial_seed);

    Rng sched = make_stream(in.trial_seed, {tag(StreamTag::schedule)});
    in.sets.resize(cfg.N);
    for (std::size_t b = 0; b < cfg.N; ++b) in.sets[b] = generate_schedule_sets(cfg.K, cfg.S, sched);

    in.direct_checksum = channel::direct_channel_checksum(in.channels);
    in.channel_checksum = channel::channel_checksum(in.channels);
    return in;
}

/// Copy of the channel set keeping only the direct row (the M = 1 model).
inline channel::ChannelSet direct_only(const channel::ChannelSet& ch) {
    channel::ChannelSet out;
    out.num_cells = ch.num_cells;
    out.users_per_cell = ch.users_per_cell;
    out.L = ch.L;
    out.M = 1;
    out.sigma2 = ch.sigma2;
    out.cellular.resize(ch.cellular.size());
    out.d2d_capacity.resize(ch.cellular.size());
    out.d2d_gain.resize(ch.cellular.size());
    for (std::size_t c = 0; c < ch.cellular.size(); ++c)
        for (const auto& H : ch.cellular[c]) out.cellular[c].push_back(H.bottomRows(1));
    return out;
}

enum class Quantization { optimized, equal, lossless };

/// Final (or best) state of one scheduling slot. Per-user vectors follow `users`.
struct SlotOutcome {
    std::vector<std::size_t> users;
    std::vector<double> achievable;  // R-tilde, bits/s/Hz
    beamforming::TransmitBeamformers tx;
    std::vector<CVector> u;  // over the active rows of each user
    std::vector<beamforming::NoiseCovariance> Q;
    std::vector<std::vector<double>> r;  // compression rates per relay
    std::vector<double> sum_rate_history;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline std::vector<double> relay_betas(std::size_t user, const channel::ChannelSet& ch,
                                       const beamforming::TransmitBeamformers& tx) {
    std::vector<double> betas(ch.M - 1);
    std::vector<CVector> rows(ch.num_cells);
    for (std::size_t m = 0; m + 1 < ch.M; ++m) {
        for (std::size_t i = 0; i < ch.num_cells; ++i)
            rows[i] = ch.cellular[user][i].row(static_cast<Eigen::Index>(m)).transpose();
        betas[m] = allocation::compute_beta(rows, tx.V, ch.sigma2);
    }
    return betas;
}

// |u_m|^2 for every relay, zero for excluded rows.
inline std::vector<double> relay_weights(const CVector& u, const beamforming::NoiseCovariance& Q) {
    std::vector<double> weight(Q.q.size(), 0.0);
    Eigen::Index j = 0;
    for (std::size_t m = 0; m < Q.q.size(); ++m)
        if (std::isfinite(Q.q[m])) weight[m] = std::norm(u[j++]);
    return weight;
}

inline CVector own_beam(const beamforming::TransmitBeamformers& tx, std::size_t bs, std::size_t user) {
    return tx.V[bs].col(beamforming::column_of(tx, bs, user));
}

}  // namespace detail

struct RelayLinks {
    std::vector<std::vector<double>> w;  // [cluster][relay]
};

inline RelayLinks link_weights(const SystemConfig& cfg, const channel::ChannelSet& ch) {
    RelayLinks out;
    out.w.resize(ch.num_clusters());
    for (std::size_t c = 0; c < ch.num_clusters(); ++c)
        for (double cap : ch.d2d_capacity[c])
            out.w[c].push_back(allocation::compute_link_weight(cfg.t_c, cfg.B_c, cfg.t_d(), cfg.B_d, cap));
    return out;
}

inline std::vector<allocation::RelayObservation> observations(std::span<const double> beta,
                                                              std::span<const double> weight,
                                                              std::span<const double> w) {
    std::vector<allocation::RelayObservation> obs(beta.size());
    for (std::size_t m = 0; m < beta.size(); ++m) obs[m] = {beta[m], weight[m], w[m]};
    return obs;
}

/// Alternating optimisation for one slot: per-user allocation and MMSE
/// receivers against a frozen snapshot of all transmit beamformers, then
/// per-BS zero forcing on the resulting effective channels.
inline SlotOutcome run_slot(const SystemConfig& cfg, const channel::ChannelSet& ch, const RelayLinks& links,
                            const ScheduleSets& sets, std::size_t slot, Quantization mode, std::uint64_t init_seed) {
    const std::size_t relays = ch.M - 1;
    const double p_b = cfg.P_B();

    SlotOutcome st;
    st.tx.V.resize(ch.num_cells);
    st.tx.scheduled.resize(ch.num_cells);
    for (std::size_t b = 0; b < ch.num_cells; ++b) {
        Rng init = make_stream(init_seed, {tag(StreamTag::beam_init), slot, b});
        st.tx.V[b] = beamforming::init_transmit_beamformers(cfg.L, cfg.S, p_b, init);
        for (auto k : sets[b][slot]) {
            st.tx.scheduled[b].push_back(b * ch.users_per_cell + k);
            st.users.push_back(b * ch.users_per_cell + k);
        }
    }
    const std::size_t n = st.users.size();
    st.Q.assign(n, beamforming::NoiseCovariance::lossless(relays, ch.sigma2));
    st.r.assign(n, std::vector<double>(relays, 0.0));
    st.u.resize(n);
    st.achievable.assign(n, 0.0);

    auto serving_bs = [&](std::size_t j) { return ch.serving_cell(st.users[j]); };
    auto reduced_serving = [&](std::size_t j) {
        return beamforming::select_rows(ch.serving(st.users[j]), beamforming::active_rows(st.Q[j]));
    };

    for (std::size_t j = 0; j < n; ++j) {
        const CMatrix J = beamforming::interference_covariance(st.users[j], ch, st.tx, st.Q[j]);
        st.u[j] = beamforming::mmse_receiver(reduced_serving(j), detail::own_beam(st.tx, serving_bs(j), st.users[j]), J);
    }

    const bool allocate = relays > 0 && mode != Quantization::lossless;
    SlotOutcome best;
    double best_sum = -1.0;
    double prev_sum = 0.0;

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        if (allocate) {
            for (std::size_t j = 0; j < n; ++j) {
                const auto beta = detail::relay_betas(st.users[j], ch, st.tx);
                const auto weight = detail::relay_weights(st.u[j], st.Q[j]);
                const auto obs = observations(beta, weight, links.w[st.users[j]]);
                const auto alloc = mode == Quantization::optimized ? allocation::solve_allocation(obs, cfg.t_d())
                                                                    : allocation::equal_time_allocation(obs, cfg.t_d());
                st.r[j] = alloc.r;
                st.Q[j].q = alloc.q;
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            const CMatrix J = beamforming::interference_covariance(st.users[j], ch, st.tx, st.Q[j]);
            st.u[j] = beamforming::mmse_receiver(reduced_serving(j), detail::own_beam(st.tx, serving_bs(j), st.users[j]), J);
        }
        std::vector<CMatrix> next(ch.num_cells);
        for (std::size_t b = 0, j = 0; b < ch.num_cells; ++b) {
            CMatrix H_eff(static_cast<Eigen::Index>(cfg.S), static_cast<Eigen::Index>(cfg.L));
            for (std::size_t s = 0; s < cfg.S; ++s, ++j)
                H_eff.row(static_cast<Eigen::Index>(s)) = beamforming::effective_channel(st.u[j], reduced_serving(j)).transpose();
            next[b] = beamforming::zf_transmit(H_eff, p_b, cfg.S);
        }
        st.tx.V = std::move(next);

        // The relays keep their compression rates; the quantization noise
        // follows the new received power.
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (allocate) {
                const auto beta = detail::relay_betas(st.users[j], ch, st.tx);
                for (std::size_t m = 0; m < relays; ++m) st.Q[j].q[m] = allocation::rates_to_quantization(st.r[j][m], beta[m]);
            }
            const CMatrix J = beamforming::interference_covariance(st.users[j], ch, st.tx, st.Q[j]);
            st.achievable[j] = rate::achievable_rate(detail::own_beam(st.tx, serving_bs(j), st.users[j]), reduced_serving(j), J);
            sum += st.achievable[j];
        }
        st.sum_rate_history.push_back(sum);
        st.iterations = it;
        if (!std::isfinite(sum)) throw NumericalError("run_slot: non-finite sum rate");

        if (sum > best_sum) {
            best_sum = sum;
            best = st;
        }
        if (it > 1 && std::abs(sum - prev_sum) <= cfg.tolerance * std::abs(prev_sum)) {
            st.converged = true;
            return st;
        }
        prev_sum = sum;
    }
    best.sum_rate_history = st.sum_rate_history;
    best.iterations = st.iterations;
    best.converged = false;
    return best;
}

struct TrialResult {
    Scheme scheme = Scheme::proposed;
    std::vector<double> achievable;  // R-tilde in the user's slot, [cluster]
    std::vector<double> spectral;    // after time sharing and scheduling, bits/s/Hz
    std::vector<double> rate_bps;    // spectral * B_c
    std::vector<SlotOutcome> slots;
    int iterations = 0;  // max over slots
    bool converged = true;
};

namespace detail {

inline TrialResult assemble(const SystemConfig& cfg, Scheme scheme, std::vector<SlotOutcome> slots,
                            std::size_t clusters, double t_d, const std::vector<double>* override_rate = nullptr) {
    TrialResult out;
    out.scheme = scheme;
    out.achievable.assign(clusters, 0.0);
    out.spectral.assign(clusters, 0.0);
    out.rate_bps.assign(clusters, 0.0);
    for (const auto& s : slots) {
        for (std::size_t j = 0; j < s.users.size(); ++j) out.achievable[s.users[j]] = s.achievable[j];
        out.iterations = std::max(out.iterations, s.iterations);
        out.converged = out.converged && s.converged;
    }
    if (override_rate) out.achievable = *override_rate;
    for (std::size_t c = 0; c < clusters; ++c) {
        const auto b = rate::breakdown(out.achievable[c], cfg.t_c, t_d, cfg.S, cfg.K, cfg.B_c);
        out.spectral[c] = b.scheduled;
        out.rate_bps[c] = b.absolute;
    }
    out.slots = std::move(slots);
    return out;
}

inline std::vector<SlotOutcome> run_slots(const SystemConfig& cfg, const channel::ChannelSet& ch,
                                          const ScheduleSets& sets, Quantization mode, std::uint64_t init_seed) {
    const auto links = link_weights(cfg, ch);
    std::vector<SlotOutcome> slots;
    for (std::size_t t = 0; t < cfg.K / cfg.S; ++t) slots.push_back(run_slot(cfg, ch, links, sets, t, mode, init_seed));
    return slots;
}

}  // namespace detail

/// Joint allocation / MMSE / ZF iteration with optimised D2D time shares.
inline TrialResult run_algorithm1(const SystemConfig& cfg, const channel::ChannelSet& ch, const ScheduleSets& sets,
                                  std::uint64_t init_seed) {
    return detail::assemble(cfg, Scheme::proposed, detail::run_slots(cfg, ch, sets, Quantization::optimized, init_seed),
                            ch.num_clusters(), cfg.t_d());
}

inline TrialResult run_benchmark(Scheme scheme, const SystemConfig& cfg, const channel::ChannelSet& ch,
                                 const ScheduleSets& sets, std::uint64_t init_seed) {
    switch (scheme) {
        case Scheme::proposed: return run_algorithm1(cfg, ch, sets, init_seed);
        case Scheme::bench1: {
            const auto direct = direct_only(ch);
            return detail::assemble(cfg, scheme, detail::run_slots(cfg, direct, sets, Quantization::lossless, init_seed),
                                    ch.num_clusters(), 0.0);
        }
        case Scheme::bench2:
        case Scheme::adjusted_bench2:
            return detail::assemble(cfg, scheme, detail::run_slots(cfg, ch, sets, Quantization::lossless, init_seed),
                                    ch.num_clusters(), scheme == Scheme::bench2 ? 0.0 : cfg.t_d());
        case Scheme::bench3:
            return detail::assemble(cfg, scheme, detail::run_slots(cfg, ch, sets, Quantization::equal, init_seed),
                                    ch.num_clusters(), cfg.t_d());
        case Scheme::bench4: {
            auto slots = detail::run_slots(cfg, direct_only(ch), sets, Quantization::lossless, init_seed);
            std::vector<double> best(ch.num_clusters(), 0.0);
            std::vector<double> c_relays(ch.M - 1);
            for (const auto& s : slots)
                for (auto user : s.users) {
                    for (std::size_t m = 0; m + 1 < ch.M; ++m) c_relays[m] = rate::relay_sinr_rate(m, user, ch, s.tx);
                    best[user] = rate::multihop_rate(rate::direct_sinr_rate(user, ch, s.tx), c_relays);
                }
            return detail::assemble(cfg, scheme, std::move(slots), ch.num_clusters(), 0.0, &best);
        }
    }
    throw ConfigError("unknown scheme");
}

/// Re-solves one user's D2D allocation at fixed transmit beamformers and a
/// fixed receive beamformer u, and returns the resulting rate of receiver u.
/// With u held fixed, the optimised allocation maximises this rate over every
/// feasible allocation, the equal split included.
inline double rate_at_fixed_beams(const SystemConfig& cfg, const channel::ChannelSet& ch,
                                  const beamforming::TransmitBeamformers& tx, std::size_t user, const CVector& u_full,
                                  Quantization mode) {
    const auto links = link_weights(cfg, ch);
    const auto beta = detail::relay_betas(user, ch, tx);
    std::vector<double> weight(ch.M - 1);
    for (std::size_t m = 0; m + 1 < ch.M; ++m) weight[m] = std::norm(u_full[static_cast<Eigen::Index>(m)]);
    auto Q = beamforming::NoiseCovariance::lossless(ch.M - 1, ch.sigma2);
    if (mode != Quantization::lossless) {
        const auto obs = observations(beta, weight, links.w[user]);
        Q.q = (mode == Quantization::optimized ? allocation::solve_allocation(obs) : allocation::equal_time_allocation(obs)).q;
    }
    const auto rows = beamforming::active_rows(Q);
    CVector u(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) u[static_cast<Eigen::Index>(r)] = u_full[rows[r]];
    const CMatrix H = beamforming::select_rows(ch.serving(user), rows);
    const CMatrix J = beamforming::interference_covariance(user, ch, tx, Q);
    return rate::combining_rate(u, H, detail::own_beam(tx, ch.serving_cell(user), user), J);
}

struct TrialLog {
    std::size_t trial = 0;
    int attempts = 0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::uint64_t direct_checksum = 0;
    std::uint64_t channel_checksum = 0;
    std::string error;
};

struct MonteCarloReport {
    Scheme scheme = Scheme::proposed;
    std::size_t users = 0;
    std::vector<double> user_mean_bps;  // per user index, over successful trials
    std::vector<double> samples_bps;    // sorted ascending; CDF sample
    double p10_bps = 0.0;
    double p50_bps = 0.0;
    std::size_t failures = 0;
    std::vector<TrialLog> logs;
    std::vector<std::optional<TrialResult>> trials;
};

/// Nearest-rank percentile of an ascending sample.
inline double nearest_rank(const std::vector<double>& sorted, double percentile) {
    if (sorted.empty()) throw InputError("percentile of an empty sample");
    if (!(percentile > 0.0 && percentile < 100.0)) throw InputError("percentile must lie in (0, 100)");
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(sorted.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

/// T trials of one scheme. Trial i always draws from the same sub-streams,
/// so the report does not depend on `workers`; schemes run with the same
/// config see the same users, channels and schedules.
inline MonteCarloReport monte_carlo(const SystemConfig& cfg, Scheme scheme, unsigned workers = 1,
                                    bool keep_trials = false) {
    cfg.validate();
    const auto layout = topology::build_wraparound_layout(cfg.N, cfg.cell_radius, cfg.inter_cell_distance);

    MonteCarloReport rep;
    rep.scheme = scheme;
    rep.users = cfg.N * cfg.K;
    rep.logs.resize(cfg.T);
    rep.trials.resize(cfg.T);

    auto run_one = [&](std::size_t trial) {
        TrialLog log;
        log.trial = trial;
        for (int attempt = 0; attempt <= cfg.max_redraws; ++attempt) {
            log.attempts = attempt + 1;
            try {
                const auto in = make_trial(cfg, layout, trial, attempt);
                log.direct_checksum = in.direct_checksum;
                log.channel_checksum = in.channel_checksum;
                auto res = run_benchmark(scheme, cfg, in.channels, in.sets, in.trial_seed);
                log.iterations = res.iterations;
                log.converged = res.converged;
                log.error.clear();
                if (!keep_trials) res.slots.clear();
                rep.trials[trial] = std::move(res);
                break;
            } catch (const ClusteringError& e) {
                log.error = e.what();
            } catch (const BeamformingError& e) {
                log.error = e.what();
            } catch (const NumericalError& e) {
                log.error = e.what();
            }
        }
        log.failed = !rep.trials[trial].has_value();
        rep.logs[trial] = std::move(log);
    };

    workers = std::max(1u, workers);
    if (workers == 1) {
        for (std::size_t t = 0; t < cfg.T; ++t) run_one(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t t; (t = next.fetch_add(1)) < cfg.T;) {
                    try {
                        run_one(t);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    rep.user_mean_bps.assign(rep.users, 0.0);
    std::size_t ok = 0;
    for (std::size_t t = 0; t < cfg.T; ++t) {
        if (!rep.trials[t]) {
            ++rep.failures;
            continue;
        }
        ++ok;
        const auto& r = rep.trials[t]->rate_bps;
        for (std::size_t c = 0; c < rep.users; ++c) rep.user_mean_bps[c] += r[c];
        if (!cfg.freeze_topology) rep.samples_bps.insert(rep.samples_bps.end(), r.begin(), r.end());
    }
    if (ok == 0) throw NumericalError("monte_carlo: every trial failed (last error: " + rep.logs.back().error + ")");
    for (auto& v : rep.user_mean_bps) v /= static_cast<double>(ok);
    // With a frozen topology a user index names the same device in every
    // trial, so its long-term mean is the sample; otherwise every
    // (trial, user) rate is an independent draw from the user population.
    if (cfg.freeze_topology) rep.samples_bps = rep.user_mean_bps;
    std::sort(rep.samples_bps.begin(), rep.samples_bps.end());
    rep.p10_bps = nearest_rank(rep.samples_bps, 10.0);
    rep.p50_bps = nearest_rank(rep.samples_bps, 50.0);
    return rep;
}

}  // namespace d2dmimo::sim
