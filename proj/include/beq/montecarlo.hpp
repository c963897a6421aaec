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

#ifndef BEQ_MONTECARLO_HPP
#define BEQ_MONTECARLO_HPP

#include "beq/config.hpp"
#include "beq/sinr_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace beq {

struct SweepSpec
{
    std::vector<int> antennas;
    std::vector<double> snr_db;
    int trials = 500;
    std::uint64_t seed = 1;
    std::vector<Method> methods;
    std::vector<Metric> metrics;
    DropMode drop_mode = DropMode::fixed;

    static SweepSpec from_config(const SimConfig &sim)
    {
        return {sim.antennas, sim.snr_db, sim.trials, sim.seed, sim.methods, sim.metrics, sim.drop_mode};
    }
};

inline void validate(const SweepSpec &spec)
{
    if (spec.antennas.empty() || spec.snr_db.empty())
        throw Error(ErrorKind::config, "sweep: antenna and SNR grids must be nonempty");
    if (spec.trials < 1)
        throw Error(ErrorKind::config, "sweep: trials must be >= 1");
    if (spec.methods.empty() || spec.metrics.empty())
        throw Error(ErrorKind::config, "sweep: method and metric lists must be nonempty");
}

/// Aggregated user: a user id, or the worst / average user.
enum class UserAggregate
{
    single,
    min,
    mean,
};

struct SweepRow
{
    Method method = Method::ls_mf;
    int m = 0;
    double snr_db = 0.0;
    Metric metric = Metric::min_user_rate;
    UserAggregate aggregate = UserAggregate::single;
    int user = -1;
    double value = 0.0;
    double stderr_ = 0.0;

    std::string user_label() const
    {
        switch (aggregate)
        {
        case UserAggregate::min: return "min";
        case UserAggregate::mean: return "mean";
        case UserAggregate::single: break;
        }
        return std::to_string(user);
    }
};

/// (method name, M, SNR, user) with user ids before "mean" before "min".
inline bool row_less(const SweepRow &a, const SweepRow &b)
{
    const auto key = [](const SweepRow &r) {
        const int rank = r.aggregate == UserAggregate::single ? 0 : r.aggregate == UserAggregate::mean ? 1 : 2;
        return std::make_tuple(std::string(to_string(r.method)), r.m, r.snr_db, rank, r.user);
    };
    return key(a) < key(b);
}

struct SweepResult
{
    std::vector<SweepRow> rows;
    int setups = 0;             // statistical preparations (one per (M, SNR) point)
    std::vector<std::string> diagnostics;
};

// ---------- Per-point preparation ---------------------------------------------------

/// Everything that depends only on channel statistics for one (M, SNR) point.
struct PreparedPoint
{
    Scenario scenario;
    ColoringTable colorings;
    std::vector<BsStatistics> stats;
    // [bs][user] transformations for served users (empty for other users)
    std::vector<std::vector<Transformation>> obe;
    std::vector<std::vector<Transformation>> obe_d;
    std::vector<std::string> diagnostics;
};

inline bool uses(const std::vector<Method> &methods, Method m)
{
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

inline PreparedPoint prepare_point(Scenario scenario, const std::vector<Method> &methods)
{
    PreparedPoint pt;
    pt.scenario = std::move(scenario);
    const Scenario &s = pt.scenario;
    pt.colorings = make_colorings(s);
    pt.obe.resize(s.bs_count());
    pt.obe_d.resize(s.bs_count());
    for (int b = 0; b < s.bs_count(); ++b)
    {
        pt.stats.push_back(bs_statistics(s, b));
        pt.obe[b].resize(s.user_count());
        pt.obe_d[b].resize(s.user_count());
        const Basis basis = default_diagonal_basis(s, b);
        RMatrix diagonals;
        if (uses(methods, Method::obe_d))
            diagonals = covariance_diagonals(s, b, basis);
        for (int p : s.used_pilots())
        {
            const std::vector<int> group = s.pilot_group(p);
            if (uses(methods, Method::obe))
            {
                ObeGroup og = obe_transformations(s, pt.stats[b], group);
                if (og.diagnostic)
                    pt.diagnostics.push_back("bs " + std::to_string(b) + ", pilot " + std::to_string(p) + ": " +
                                             *og.diagnostic);
                for (auto &t : og.transformations)
                    if (s.users[t.user].serving_bs == b)
                        pt.obe[b][t.user] = std::move(t);
            }
            if (uses(methods, Method::obe_d))
                for (auto &t : obe_d_transformations(s, diagonals, group, basis))
                    if (s.users[t.user].serving_bs == b)
                        pt.obe_d[b][t.user] = std::move(t);
        }
    }
    return pt;
}

// ---------- One trial ----------------------------------------------------------------

/// Conditional SINR per (method, user) for one draw of channels and training noise.
struct TrialOutcome
{
    std::vector<Method> methods;
    std::vector<std::vector<double>> sinr; // [method index][user]
};

inline TrialOutcome run_trial(const PreparedPoint &pt, const std::vector<Method> &methods, Rng &rng)
{
    const Scenario &s = pt.scenario;
    const ChannelRealization channels = sample_channels(s, pt.colorings, rng);
    const TrainingObservation obs = ls_observations(channels, s, rng);

    TrialOutcome out;
    out.methods = methods;
    out.sinr.assign(methods.size(), std::vector<double>(s.user_count(), 0.0));
    for (int b = 0; b < s.bs_count(); ++b)
    {
        const BsStatistics &st = pt.stats[b];
        std::vector<CVector> h(s.user_count());
        for (int k = 0; k < s.user_count(); ++k)
            h[k] = st.estimator[k] * obs.of_user(s, b, k);
        const std::vector<int> served = s.served_users(b);

        for (std::size_t mi = 0; mi < methods.size(); ++mi)
        {
            std::vector<CVector> filters;
            switch (methods[mi])
            {
            case Method::ls_mf:
                for (int k : served)
                    filters.push_back(obs.of_user(s, b, k));
                break;
            case Method::mmse_mf:
                for (int k : served)
                    filters.push_back(h[k]);
                break;
            case Method::obe:
                for (int k : served)
                    filters.push_back(bilinear_filter(pt.obe[b][k], obs.of_user(s, b, k)));
                break;
            case Method::obe_d:
                for (int k : served)
                    filters.push_back(bilinear_filter(pt.obe_d[b][k], obs.of_user(s, b, k)));
                break;
            case Method::lmmse: filters = lmmse_filter(h, st.z_tilde, s, b).filters; break;
            case Method::mmse_zf: filters = mmse_zero_forcing(h, s, b).filters; break;
            }
            for (std::size_t i = 0; i < served.size(); ++i)
                out.sinr[mi][served[i]] = conditional_sinr(filters[i], h, st.z_tilde, s, served[i]);
        }
    }
    return out;
}

// ---------- Sweep --------------------------------------------------------------------

namespace detail {

constexpr std::uint64_t purpose_drop = 1;
constexpr std::uint64_t purpose_trial = 2;

struct MeanStderr
{
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MeanStderr summarize(const std::vector<double> &x)
{
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x)
        sum += v;
    const double mean = sum / n;
    if (x.size() < 2)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Runs trials [0, count) on `workers` threads; outcomes land at their trial index.
inline std::vector<TrialOutcome> run_trials(const PreparedPoint &pt, const SweepSpec &spec, std::uint64_t point,
                                            int workers)
{
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;)
        {
            const int t = next.fetch_add(1);
            if (t >= spec.trials)
                return;
            try
            {
                Rng rng = derive_rng(spec.seed, point, static_cast<std::uint64_t>(t), purpose_trial);
                outcomes[static_cast<std::size_t>(t)] = run_trial(pt, spec.methods, rng);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(spec.trials);
                return;
            }
        }
    };
    const int n = std::max(1, std::min(workers, spec.trials));
    if (n == 1)
        work();
    else
    {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i)
            pool.emplace_back(work);
        for (auto &th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return outcomes;
}

inline void aggregate(const std::vector<TrialOutcome> &outcomes, const SweepSpec &spec, const Scenario &s,
                      int m, double snr_db, std::vector<SweepRow> &rows)
{
    const std::size_t trials = outcomes.size();
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
    {
        std::vector<MeanStderr> per_user;
        std::vector<double> rates(trials);
        for (int k = 0; k < s.user_count(); ++k)
        {
            for (std::size_t t = 0; t < trials; ++t)
                rates[t] = rate_of(outcomes[t].sinr[mi][k]);
            per_user.push_back(summarize(rates));
        }
        std::vector<double> mean_rates(trials, 0.0);
        for (std::size_t t = 0; t < trials; ++t)
        {
            for (int k = 0; k < s.user_count(); ++k)
                mean_rates[t] += rate_of(outcomes[t].sinr[mi][k]);
            mean_rates[t] /= static_cast<double>(s.user_count());
        }

        SweepRow base;
        base.method = spec.methods[mi];
        base.m = m;
        base.snr_db = snr_db;
        for (Metric metric : spec.metrics)
        {
            SweepRow row = base;
            row.metric = metric;
            switch (metric)
            {
            case Metric::min_user_rate: {
                std::size_t worst = 0;
                for (std::size_t k = 1; k < per_user.size(); ++k)
                    if (per_user[k].mean < per_user[worst].mean)
                        worst = k;
                row.aggregate = UserAggregate::min;
                row.value = per_user[worst].mean;
                row.stderr_ = per_user[worst].stderr_;
                rows.push_back(row);
                break;
            }
            case Metric::per_user_rate:
                for (std::size_t k = 0; k < per_user.size(); ++k)
                {
                    row.user = static_cast<int>(k);
                    row.value = per_user[k].mean;
                    row.stderr_ = per_user[k].stderr_;
                    rows.push_back(row);
                }
                break;
            case Metric::mean_rate: {
                const MeanStderr ms = summarize(mean_rates);
                row.aggregate = UserAggregate::mean;
                row.value = ms.mean;
                row.stderr_ = ms.stderr_;
                rows.push_back(row);
                break;
            }
            }
        }
    }
}

} // namespace detail

/// Monte-Carlo sweep over the (M, SNR) grid of the configuration. Statistical
/// quantities are prepared once per point; trials run on `workers` threads with
/// per-trial random streams, so the result does not depend on the worker count.
inline SweepResult run_sweep(const SweepSpec &spec, const ScenarioConfig &cfg, int workers = 1)
{
    validate(spec);
    validate(cfg);
    SweepResult result;
    std::optional<UserDrop> fixed_drop;
    if (spec.drop_mode == DropMode::fixed)
    {
        Rng rng = derive_rng(spec.seed, 0, 0, detail::purpose_drop);
        fixed_drop = drop_users(cfg, rng);
    }

    std::uint64_t point = 0;
    for (int m : spec.antennas)
    {
        std::optional<Scenario> base;
        for (double snr : spec.snr_db)
        {
            const std::uint64_t index = point++;
            try
            {
                Scenario s;
                if (fixed_drop)
                {
                    // covariances depend on M only; powers are reset per SNR
                    if (!base)
                        base = realize_scenario(cfg, *fixed_drop, m, snr);
                    s = *base;
                    set_snr(s, probe_power(cfg, *fixed_drop, m), snr, cfg.sim.rho_tr_db);
                }
                else
                {
                    Rng rng = derive_rng(spec.seed, index + 1, 0, detail::purpose_drop);
                    s = realize_scenario(cfg, drop_users(cfg, rng), m, snr);
                }
                const PreparedPoint pt = prepare_point(std::move(s), spec.methods);
                ++result.setups;
                for (const auto &d : pt.diagnostics)
                    result.diagnostics.push_back("M=" + std::to_string(m) + " snr_db=" + detail::format_double(snr) + ": " + d);
                const auto outcomes = detail::run_trials(pt, spec, index, workers);
                detail::aggregate(outcomes, spec, pt.scenario, m, snr, result.rows);
            }
            catch (const Error &e)
            {
                throw Error(e.kind(), "sweep point M=" + std::to_string(m) + " snr_db=" + detail::format_double(snr) + ": " +
                                          e.message());
            }
        }
    }
    std::stable_sort(result.rows.begin(), result.rows.end(), row_less);
    return result;
}

inline SweepResult run_sweep(const ScenarioConfig &cfg, int workers = 1)
{
    return run_sweep(SweepSpec::from_config(cfg.sim), cfg, workers);
}

} // namespace beq

#endif // BEQ_MONTECARLO_HPP
