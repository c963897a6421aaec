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

#ifndef BEQ_COMMANDS_HPP
#define BEQ_COMMANDS_HPP

#include "beq/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace beq {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

/// The user drop shared by `run` (fixed mode), `check` and `asymptotic`.
inline UserDrop configured_drop(const ScenarioConfig &cfg)
{
    Rng rng = derive_rng(cfg.sim.seed, 0, 0, detail::purpose_drop);
    return drop_users(cfg, rng);
}

namespace detail {

inline std::string sci(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

inline std::vector<int> sorted_grid(std::vector<int> grid)
{
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// served users of `bs` inside a pilot group
inline std::vector<int> served_in(const Scenario &s, int bs, const std::vector<int> &group)
{
    std::vector<int> out;
    for (int k : group)
        if (s.users[k].serving_bs == bs)
            out.push_back(k);
    return out;
}

} // namespace detail

/// Monte-Carlo sweep to CSV.
inline int cmd_run(const ScenarioConfig &cfg, const std::string &out_path, int workers, std::ostream &log)
{
    const SweepResult result = run_sweep(cfg, workers);
    for (const auto &d : result.diagnostics)
        log << "note: " << d << '\n';
    write_csv_file(out_path, to_result_rows(result));
    log << "wrote " << result.rows.size() << " rows to " << out_path << '\n';
    return exit_ok;
}

/// Oracle equivalence at small M, condition diagnostics over the M grid, and the
/// Toeplitz-circulant gap trend. Warnings do not fail the check.
inline int cmd_check(const ScenarioConfig &cfg, std::ostream &out)
{
    validate(cfg);
    const UserDrop drop = configured_drop(cfg);
    const double snr = cfg.sim.snr_db.front();
    bool ok = true;

    // 1. direct M^2-dimensional optimum vs. the Gamma closed form and the efficient transformation
    {
        const int m = cfg.check.oracle_antennas;
        const Scenario s = realize_scenario(cfg, drop, m, snr);
        double worst = 0.0;
        int count = 0;
        for (int b = 0; b < s.bs_count(); ++b)
        {
            const BsStatistics st = bs_statistics(s, b);
            for (int p : s.used_pilots())
            {
                const std::vector<int> group = s.pilot_group(p);
                const ObeGroup og = obe_transformations(s, st, group);
                const RVector powers = group_powers(s, group);
                for (std::size_t i = 0; i < group.size(); ++i)
                {
                    const int k = group[i];
                    if (s.users[k].serving_bs != b)
                        continue;
                    const double oracle = obe_oracle_vectorized(s, b, k).gamma;
                    const double closed = obe_sinr_closed_form(og.gamma, powers, m, k);
                    const double efficient = bilinear_sinr(og.transformations[i], s, st, k);
                    worst = std::max({worst, std::abs(closed - oracle) / oracle,
                                      std::abs(efficient - oracle) / oracle});
                    ++count;
                }
            }
        }
        const bool pass = worst <= cfg.check.oracle_tolerance;
        ok = ok && pass;
        out << (pass ? "PASS" : "FAIL") << " oracle: max rel. difference " << detail::sci(worst) << " over "
            << count << " users at M = " << m << " (tolerance " << detail::sci(cfg.check.oracle_tolerance)
            << ")\n";
    }

    const std::vector<int> grid = detail::sorted_grid(cfg.sim.antennas);

    // 2. conditions on the covariance sequence (diagnostic only)
    if (grid.size() < 2)
        out << "SKIP conditions: need at least two antenna counts\n";
    else
    {
        std::vector<Scenario> scenarios;
        for (int m : grid)
            scenarios.push_back(realize_scenario(cfg, drop, m, snr));
        const Scenario &s0 = scenarios.front();
        int warnings = 0;
        std::vector<double> min_energy(grid.size(), std::numeric_limits<double>::infinity());
        std::vector<double> min_gram(grid.size(), std::numeric_limits<double>::infinity());
        std::vector<double> max_norm(grid.size(), 0.0);
        std::vector<double> max_gamma_inv(grid.size(), 0.0);
        for (int b = 0; b < s0.bs_count(); ++b)
            for (int p : s0.used_pilots())
            {
                const ConditionReport r = condition_diagnostics(scenarios, b, s0.pilot_group(p));
                for (std::size_t i = 0; i < r.points.size(); ++i)
                {
                    const auto &pt = r.points[i];
                    min_energy[i] = std::min(min_energy[i], *std::min_element(pt.mean_trace.begin(),
                                                                              pt.mean_trace.end()));
                    min_gram[i] = std::min(min_gram[i], pt.gram_min_eigenvalue);
                    max_norm[i] = std::max(max_norm[i], pt.max_spectral_norm);
                    max_gamma_inv[i] = std::max(max_gamma_inv[i], pt.gamma_inverse_norm);
                }
                const std::string where = "bs " + std::to_string(b) + ", pilot " + std::to_string(p);
                if (r.energy_vanishing)
                {
                    ++warnings;
                    out << "WARN condition-1: " << where << ": captured energy tr(C)/M is vanishing\n";
                }
                if (r.gram_degenerate)
                {
                    ++warnings;
                    out << "WARN condition-2: " << where
                        << ": covariances of the pilot group are not linearly independent\n";
                }
                if (r.norm_growing)
                    out << "INFO condition-3: " << where << ": spectral norm of C grows with M\n";
            }
        for (std::size_t i = 0; i < grid.size(); ++i)
            out << "  M = " << grid[i] << ": min tr(C)/M " << detail::sci(min_energy[i]) << ", min sigma_min(Gram) "
                << detail::sci(min_gram[i]) << ", max ||C||_2 " << detail::sci(max_norm[i])
                << ", max ||Gamma^-1||_2 " << detail::sci(max_gamma_inv[i]) << '\n';
        out << "PASS conditions: " << warnings << " warning(s)\n";
    }

    // 3. Toeplitz-circulant gap
    if (cfg.channel.covariance_mode == CovarianceMode::identity)
        out << "SKIP circulant-gap: identity covariance mode\n";
    else if (grid.size() < 2)
        out << "SKIP circulant-gap: need at least two antenna counts\n";
    else
    {
        const AngularDensity &d = drop.densities[drop.users.front().serving_bs].front();
        std::vector<double> gaps;
        for (int m : grid)
            gaps.push_back(toeplitz_circulant_gap(d, m, cfg.channel.quadrature_nodes) / d.gain);
        bool decreasing = true;
        for (std::size_t i = 1; i < gaps.size(); ++i)
            decreasing = decreasing && gaps[i] < gaps[i - 1];
        ok = ok && decreasing;
        out << (decreasing ? "PASS" : "FAIL") << " circulant-gap: ||T - C||_F / (sqrt(M) beta) =";
        for (double g : gaps)
            out << ' ' << detail::sci(g);
        out << (decreasing ? " (strictly decreasing)\n" : " (not strictly decreasing)\n");
    }
    return ok ? exit_ok : exit_failure;
}

/// Per-user closed-form and asymptotic quantities over the (M, SNR) grid.
inline std::vector<ResultRow> asymptotic_rows(const ScenarioConfig &cfg, std::ostream &log)
{
    validate(cfg);
    const UserDrop drop = configured_drop(cfg);
    const bool synthetic = cfg.channel.covariance_mode == CovarianceMode::identity;
    std::vector<ResultRow> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (int m : cfg.sim.antennas)
    {
        for (double snr : cfg.sim.snr_db)
        {
            Scenario s = realize_scenario(cfg, drop, m, snr);
            if (synthetic)
                for (auto &per_bs : s.densities)
                    for (auto &d : per_bs)
                        d = AngularDensity::flat(1.0);
            auto emit = [&](const char *method, const char *metric, int user, double v) {
                rows.push_back({method, m, snr, metric, std::to_string(user), v, 0.0});
            };
            for (int b = 0; b < s.bs_count(); ++b)
            {
                const BsStatistics st = bs_statistics(s, b);
                for (int p : s.used_pilots())
                {
                    const std::vector<int> group = s.pilot_group(p);
                    const std::vector<int> served = detail::served_in(s, b, group);
                    if (served.empty())
                        continue;
                    const RVector powers = group_powers(s, group);
                    const GammaMatrix gamma = gamma_matrix(s, st, group);
                    const GammaMatrix gamma_tilde = gamma_matrix(s, st, group, GammaFlavor::lmmse);
                    const double cond = hermitian_condition(gamma.value);
                    GammaMatrix limit = gamma_ula_limit(ula_limit_input(s, b, group), group);
                    const double limit_cond = hermitian_condition(limit.value);
                    for (int k : served)
                    {
                        const double star = obe_sinr_closed_form(gamma, powers, m, k);
                        double asy = nan;
                        try
                        {
                            asy = asymptotic_sinr(gamma, powers, m, k);
                        }
                        catch (const Error &e)
                        {
                            log << "note: M=" << m << " snr_db=" << detail::format_double(snr) << " user " << k
                                << ": " << e.message() << '\n';
                        }
                        double asy_lim = nan;
                        if (limit_cond < 1e12)
                            asy_lim = asymptotic_sinr(limit, powers, m, k);
                        const Eigen::Index idx = detail::group_index(gamma, k);
                        emit("obe", "gamma_star", k, star);
                        emit("obe", "gamma_asy", k, asy);
                        emit("obe", "ratio", k, star / asy);
                        emit("obe", "gamma_condition", k, cond);
                        emit("obe", "gamma_lim_kk", k, limit.value(idx, idx).real());
                        emit("obe", "gamma_asy_lim", k, asy_lim);
                        emit("lmmse", "gamma_det", k, lmmse_deterministic_sinr(gamma_tilde, powers, m, k));
                    }
                }
            }
        }
    }
    sort_rows(rows);
    return rows;
}

inline int cmd_asymptotic(const ScenarioConfig &cfg, const std::string &out_path, std::ostream &log)
{
    const std::vector<ResultRow> rows = asymptotic_rows(cfg, log);
    write_csv_file(out_path, rows);
    log << "wrote " << rows.size() << " rows to " << out_path << '\n';
    return exit_ok;
}

} // namespace beq

#endif // BEQ_COMMANDS_HPP
