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
#include "d2dmimo/config.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace d2dmimo;
using namespace d2dmimo::io;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("d2dmimo_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Tiny network so end-to-end runs take well under a second.
std::vector<std::pair<std::string, std::string>> tiny() {
    return {{"N", "1"}, {"K", "2"}, {"S", "1"}, {"L", "2"}, {"M", "3"}, {"relay_pool_per_cell", "400"}};
}

}  // namespace

TEST_CASE("config: empty text gives the reference defaults") {
    const auto c = parse_config("");
    CHECK(c.N == 19);
    CHECK(c.K == 20);
    CHECK(c.S == 4);
    CHECK(c.L == 4);
    CHECK(c.M == 10);
    CHECK(c.P_B_dbm == 43.0);
    CHECK(c.P_D_dbm == 20.0);
    CHECK(c.B_c == 20e6);
    CHECK(c.B_d == 200e6);
    CHECK(c.t_c == 1.25e-3);
    CHECK(c.inter_cell_distance == 800.0);
    CHECK(c.d_max == 100.0);
    CHECK(c.budget.cellular_pl_intercept == 128.1);
    CHECK(c.budget.d2d_pl_slope == 24.0);
    CHECK(c.budget.shadowing_sigma == 8.0);
    CHECK(c.budget.noise_psd == -169.0);
    CHECK(c.T == 100);
    CHECK(dump_config(c) == dump_config(sim::SystemConfig{}));
}

TEST_CASE("config: invariant violations name the key and constraint") {
    CHECK_THROWS_WITH(parse_config("S = 3\nK = 20\n"), Catch::Matchers::ContainsSubstring("K mod S must be 0"));
    CHECK_THROWS_WITH(parse_config("S = 8\nK = 16\n"), Catch::Matchers::ContainsSubstring("S must not exceed L"));
    CHECK_THROWS_WITH(parse_config("bogus = 1\n"), Catch::Matchers::ContainsSubstring("unknown config key 'bogus'"));
    CHECK_THROWS_WITH(parse_config("K = twenty\n"), Catch::Matchers::ContainsSubstring("K: cannot parse"));
    CHECK_THROWS_WITH(parse_config("K = -4\n"), Catch::Matchers::ContainsSubstring("K: must be non-negative"));
    CHECK_THROWS_WITH(parse_config("K 20\n"), Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_AS(parse_config("freeze_topology = maybe\n"), ConfigError);
}

TEST_CASE("config: comments, whitespace, overrides") {
    const auto c = parse_config("# desk run\n  N = 7   # seven cells\n\nt_d_ratio=0.25\nfreeze_topology = true\n");
    CHECK(c.N == 7);
    CHECK(c.freeze_topology);
    CHECK(c.t_d() == Approx(0.3125e-3).epsilon(1e-15));
    auto d = sim::SystemConfig{};
    apply_setting(d, "t_d_ratio", "0.25");
    CHECK(d.t_d() == Approx(0.3125e-3).epsilon(1e-15));
    CHECK_THROWS_AS(apply_setting(d, "nope", "1"), ConfigError);
}

TEST_CASE("config: dump and parse round-trip") {
    oracle::Gen g(5);
    for (int it = 0; it < 200; ++it) {
        sim::SystemConfig c;
        c.N = std::vector<std::size_t>{1, 7, 19}[g.index(0, 2)];
        c.L = g.index(1, 10);
        c.S = g.index(1, c.L);
        c.K = c.S * g.index(1, 5);
        c.M = g.index(1, 12);
        c.relay_pool_per_cell = c.K * (c.M - 1) + g.index(0, 100);
        c.P_B_dbm = g.uniform(-10, 60);
        c.B_d = g.log_uniform(1e3, 1e10);
        c.t_d_ratio = g.uniform(0, 1);
        c.budget.noise_psd = g.uniform(-180, -150);
        c.seed = g.eng();
        c.freeze_topology = g.index(0, 1) == 1;
        c.max_iterations = static_cast<int>(g.index(1, 500));
        const auto text = dump_config(c);
        const auto back = parse_config(text);
        CHECK(dump_config(back) == text);
        CHECK(back.P_B_dbm == c.P_B_dbm);
        CHECK(back.B_d == c.B_d);
        CHECK(back.seed == c.seed);
        CHECK(back.freeze_topology == c.freeze_topology);
    }
    // Normalisation: comments and spacing vanish, missing keys filled in.
    CHECK(dump_config(parse_config("  M=5 # x\n")) == dump_config(parse_config("M = 5")));
}

TEST_CASE("config: files") {
    const auto dir = scratch("cfg");
    {
        std::ofstream(dir / "a.cfg") << "N = 7\nK = 8\n";
        std::ofstream(dir / "empty.cfg");
    }
    CHECK(load_config(dir / "a.cfg").K == 8);
    CHECK(load_config(dir / "empty.cfg").N == 19);
    CHECK_THROWS_AS(load_config(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("number formatting") {
    CHECK(format_double(10.0) == "10.0");
    CHECK(format_double(1.0) == "1.0");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e21) == "1e+21");
    CHECK(format_double(std::nan("")) == "NA");
    oracle::Gen g(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = g.log_uniform(1e-9, 1e9);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("cdf csv") {
    const auto dir = scratch("cdf");
    emit_cdf_csv(std::vector<double>{10e6}, dir / "one.csv");
    CHECK(slurp(dir / "one.csv") == "rate_mbps,cdf\n10.0,1.0\n");
    emit_cdf_csv(std::vector<double>{10e6, 20e6}, dir / "two.csv");
    CHECK(slurp(dir / "two.csv") == "rate_mbps,cdf\n10.0,0.5\n20.0,1.0\n");

    oracle::Gen g(2);
    std::vector<double> s(500);
    for (auto& v : s) v = g.log_uniform(1e3, 1e9);
    std::sort(s.begin(), s.end());
    emit_cdf_csv(s, dir / "many.csv");
    const auto back = read_cdf_csv(dir / "many.csv");
    REQUIRE(back.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i] / 1e6);
    emit_cdf_csv(s, dir / "again.csv");
    CHECK(slurp(dir / "many.csv") == slurp(dir / "again.csv"));

    CHECK_THROWS_AS(emit_cdf_csv(std::vector<double>{}, dir / "e.csv"), InputError);
    CHECK_THROWS(emit_cdf_csv(s, dir / "no_such_dir" / "x.csv"));
}

TEST_CASE("percentile table") {
    const std::vector<double> flat(40, 7e6);
    const auto rows = percentile_report({{"bench1", flat}, {"proposed", flat}}, {10, 50, 90});
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CHECK(r.rate_mbps == 7.0);
        CHECK(r.gain_vs_bench1_pct == 0.0);
    }

    std::vector<double> ramp(100);
    std::iota(ramp.begin(), ramp.end(), 1.0);
    for (auto& v : ramp) v *= 1e6;
    std::vector<double> doubled = ramp;
    for (auto& v : doubled) v *= 2;
    const auto t = percentile_report({{"bench1", ramp}, {"bench2", doubled}}, {10, 50});
    CHECK(t[0].rate_mbps == 10.0);
    CHECK(t[1].rate_mbps == 50.0);
    CHECK(t[2].rate_mbps == 20.0);
    CHECK(t[2].gain_vs_bench1_pct == Approx(100.0));

    const auto no_base = percentile_report({{"bench2", ramp}}, {10});
    CHECK(std::isnan(no_base[0].gain_vs_bench1_pct));

    const auto dir = scratch("pct");
    write_percentiles_csv(t, dir / "p.csv");
    CHECK(slurp(dir / "p.csv") ==
          "scheme,percentile,rate_mbps,gain_vs_bench1_pct\n"
          "bench1,10.0,10.0,0.0\nbench1,50.0,50.0,0.0\nbench2,10.0,20.0,100.0\nbench2,50.0,100.0,100.0\n");
}

TEST_CASE("compare schemes: outputs and common random numbers") {
    const auto dir = scratch("cmp");
    ExperimentSpec spec;
    spec.schemes = {"bench1", "bench2", "proposed"};
    spec.out_dir = dir;
    spec.overrides = tiny();
    spec.trials = 3;
    spec.seed = 9;
    CHECK(compare_schemes(spec) == 0);
    for (auto s : {"bench1", "bench2", "proposed"}) {
        const auto csv = slurp(dir / (std::string(s) + "_cdf.csv"));
        CHECK(csv.rfind("rate_mbps,cdf\n", 0) == 0);
        CHECK(read_cdf_csv(dir / (std::string(s) + "_cdf.csv")).size() == 6);
    }
    const auto pct = slurp(dir / "percentiles.csv");
    CHECK(pct.rfind("scheme,percentile,rate_mbps,gain_vs_bench1_pct\n", 0) == 0);
    CHECK(std::count(pct.begin(), pct.end(), '\n') == 7);

    // Every scheme logs the same channel checksum per trial.
    std::ifstream log(dir / "run.log");
    std::map<std::string, std::set<std::string>> by_trial;
    std::string line;
    bool has_config = false;
    while (std::getline(log, line)) {
        has_config = has_config || line == "# config";
        const auto t = line.find(" trial=");
        const auto c = line.find("channel_checksum=");
        if (t == std::string::npos || c == std::string::npos) continue;
        by_trial[line.substr(t, line.find(' ', t + 1) - t)].insert(line.substr(c, 33));
    }
    CHECK(has_config);
    REQUIRE(by_trial.size() == 3);
    for (const auto& [trial, sums] : by_trial) CHECK(sums.size() == 1);
}

TEST_CASE("compare schemes: single scheme and errors") {
    const auto dir = scratch("one");
    ExperimentSpec spec;
    spec.schemes = {"bench1"};
    spec.out_dir = dir;
    spec.overrides = tiny();
    spec.trials = 1;
    CHECK(compare_schemes(spec) == 0);
    CHECK(fs::exists(dir / "bench1_cdf.csv"));
    CHECK(fs::exists(dir / "percentiles.csv"));
    const auto pct = slurp(dir / "percentiles.csv");
    CHECK(std::count(pct.begin(), pct.end(), '\n') == 3);

    spec.schemes = {};
    CHECK_THROWS_AS(compare_schemes(spec), ConfigError);
    spec.schemes = {"bench9"};
    CHECK_THROWS_AS(compare_schemes(spec), ConfigError);
    spec.schemes = {"bench1"};
    spec.overrides.push_back({"S", "2"});
    spec.overrides.push_back({"K", "3"});
    CHECK_THROWS_AS(compare_schemes(spec), ConfigError);
}
