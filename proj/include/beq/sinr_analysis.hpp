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

#ifndef BEQ_SINR_ANALYSIS_HPP
#define BEQ_SINR_ANALYSIS_HPP

#include "beq/equalizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace beq {

enum class Bound
{
    statistical,
    optimal,
    asymptotic,
    conditional,
    deterministic_lmmse,
    low_snr,
};

/// Linear SINR values keyed by (method, bound, user).
struct SinrReport
{
    std::map<std::tuple<Method, Bound, int>, double> values;

    void set(Method m, Bound b, int user, double v) { values[{m, b, user}] = v; }
    double get(Method m, Bound b, int user) const { return values.at({m, b, user}); }
    double rate(Method m, Bound b, int user) const { return std::log2(1.0 + get(m, b, user)); }
};

inline double rate_of(double sinr) { return std::log2(1.0 + sinr); }

// ---------- Statistical SINR of a bilinear equalizer -----------------------------

namespace detail {

inline void require_nonzero(const Transformation &t)
{
    if (t.size() == 0 || t.is_zero())
        throw Error(ErrorKind::domain, "bilinear_sinr: zero transformation");
}

// diagonal of U^H X U for the covariance of `user` (native when structured)
inline RVector basis_diagonal(const CovarianceModel &c, Basis basis)
{
    const bool native = basis == Basis::dft ? c.dft_diagonal()
                                            : (c.structure == Structure::diagonal && c.basis == Basis::identity);
    if (native)
        return c.spectrum;
    return basis == Basis::dft ? dft_diagonal(c.matrix) : RVector(c.matrix.diagonal().real());
}

inline CMatrix in_basis(const CMatrix &x, Basis basis) { return basis == Basis::dft ? dft_conjugate(x) : x; }

} // namespace detail

/// p_k |tr(C_k A)|^2 / (tr(Z A Q A^H) + sum_{n in I_k} p_n |tr(C_n A)|^2).
inline double bilinear_sinr(const Transformation &t, const Scenario &s, const CMatrix &z, const CMatrix &q, int bs,
                            int user)
{
    detail::require_nonzero(t);
    if (t.size() != s.antennas)
        throw Error(ErrorKind::dimension, "bilinear_sinr: transformation size differs from M");
    const std::vector<int> interferers = s.co_pilot_users(user);

    if (!t.is_diagonal)
    {
        const CMatrix &a = t.dense;
        // tr(C A) = sum_ij C_ij A_ji
        auto trace_with = [&](const CMatrix &c) { return (c.transpose().cwiseProduct(a)).sum(); };
        const double signal = s.power(user) * std::norm(trace_with(s.cov(bs, user)));
        double interference = 0.0;
        for (int n : interferers)
            interference += s.power(n) * std::norm(trace_with(s.cov(bs, n)));
        const CMatrix za = z * a;
        const CMatrix qa = q * a.adjoint();
        const double noise = (za.transpose().cwiseProduct(qa)).sum().real();
        return signal / (noise + interference);
    }

    const CVector &a = t.diagonal;
    auto trace_with = [&](int n) {
        return (detail::basis_diagonal(s.covariances[bs][n], t.basis).cast<Complex>().cwiseProduct(a)).sum();
    };
    const double signal = s.power(user) * std::norm(trace_with(user));
    double interference = 0.0;
    for (int n : interferers)
        interference += s.power(n) * std::norm(trace_with(n));

    bool structured = true;
    for (const auto &c : s.covariances[bs])
        structured = structured && (t.basis == Basis::dft ? c.dft_diagonal()
                                                          : (c.structure == Structure::diagonal &&
                                                             c.basis == Basis::identity));
    double noise = 0.0;
    if (structured)
    {
        // Z and Q are diagonal in the basis: a^H (Z' .* Q'^T) a reduces to sum z_i q_i |a_i|^2
        RVector zd = RVector::Ones(s.antennas);
        for (int k = 0; k < s.user_count(); ++k)
            zd += s.power(k) * s.covariances[bs][k].spectrum;
        RVector qd = RVector::Constant(s.antennas, 1.0 / s.rho_tr);
        for (int k : s.pilot_group(s.users[user].pilot))
            qd += s.covariances[bs][k].spectrum;
        noise = (zd.cwiseProduct(qd).array() * a.cwiseAbs2().array()).sum();
    }
    else
    {
        const CMatrix zb = detail::in_basis(z, t.basis);
        const CMatrix qb = detail::in_basis(q, t.basis);
        noise = (a.adjoint() * zb.cwiseProduct(qb.transpose()) * a)(0).real();
    }
    return signal / (noise + interference);
}

inline double bilinear_sinr(const Transformation &t, const Scenario &s, int bs, int user)
{
    const CMatrix z = received_covariance(s, bs);
    const CMatrix q = observation_covariance(s, bs, s.pilot_group(s.users[user].pilot));
    return bilinear_sinr(t, s, z, q, bs, user);
}

inline double bilinear_sinr(const Transformation &t, const Scenario &s, const BsStatistics &st, int user)
{
    return bilinear_sinr(t, s, st.z, st.q[s.users[user].pilot], st.bs, user);
}

// ---------- Closed forms in Gamma -----------------------------------------------

namespace detail {

inline Eigen::Index group_index(const GammaMatrix &g, int user)
{
    for (std::size_t i = 0; i < g.group.size(); ++i)
        if (g.group[i] == user)
            return static_cast<Eigen::Index>(i);
    throw Error(ErrorKind::domain, "user " + std::to_string(user) + " is not in the pilot group");
}

// M p_k [Gamma S^{-1}]_kk / [S^{-1}]_kk with S = P^{-1}/M + Gamma
inline double rational_form(const CMatrix &gamma, const RVector &powers, double m, Eigen::Index k)
{
    if (!(powers(k) > 0))
        throw Error(ErrorKind::domain, "closed-form SINR: p_k must be positive");
    CMatrix s = gamma;
    s.diagonal() += (powers.cwiseInverse() / m).cast<Complex>();
    if (hermitian_condition(gamma) > 1e12)
        s.diagonal().array() += 1e-12 / m;
    Eigen::LLT<CMatrix> llt(hermitize(s));
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "closed-form SINR: (P^-1/M + Gamma) is singular");
    CVector e = CVector::Zero(gamma.rows());
    e(k) = 1.0;
    const CVector x = llt.solve(e);
    return m * powers(k) * (gamma.row(k) * x)(0).real() / x(k).real();
}

} // namespace detail

/// Optimal statistical SINR of user `user` from its group's Gamma.
inline double obe_sinr_closed_form(const GammaMatrix &gamma, const RVector &powers, Eigen::Index m, int user)
{
    return detail::rational_form(gamma.value, powers, static_cast<double>(m), detail::group_index(gamma, user));
}

/// M p_k / [Gamma^{-1}]_kk; throws with the condition number when Gamma is
/// numerically singular.
inline double asymptotic_sinr(const GammaMatrix &gamma, const RVector &powers, Eigen::Index m, int user)
{
    const Eigen::Index k = detail::group_index(gamma, user);
    const double cond = hermitian_condition(gamma.value);
    if (!(cond < 1e12))
        throw Error(ErrorKind::numerical,
                    "asymptotic_sinr: Gamma is ill-conditioned (condition number " + std::to_string(cond) + ")");
    CVector e = CVector::Zero(gamma.size());
    e(k) = 1.0;
    const CVector x = hermitian_factor(gamma.value, "asymptotic_sinr").solve(e);
    return static_cast<double>(m) * powers(k) / x(k).real();
}

/// Deterministic equivalent of the LMMSE conditional SINR (same rational form
/// with the error-covariance Gamma).
inline double lmmse_deterministic_sinr(const GammaMatrix &gamma_tilde, const RVector &powers, Eigen::Index m,
                                       int user)
{
    if (gamma_tilde.flavor != GammaFlavor::lmmse)
        throw Error(ErrorKind::domain, "lmmse_deterministic_sinr: expected an lmmse-flavored Gamma");
    return obe_sinr_closed_form(gamma_tilde, powers, m, user);
}

inline double lmmse_asymptotic_sinr(const GammaMatrix &gamma_tilde, const RVector &powers, Eigen::Index m, int user)
{
    if (gamma_tilde.flavor != GammaFlavor::lmmse)
        throw Error(ErrorKind::domain, "lmmse_asymptotic_sinr: expected an lmmse-flavored Gamma");
    return asymptotic_sinr(gamma_tilde, powers, m, user);
}

/// Xi^H Xi / M with Xi = [vec(C_1) .. vec(C_Kp)].
inline CMatrix gram_matrix(const Scenario &s, int bs, const std::vector<int> &group)
{
    const Eigen::Index kp = static_cast<Eigen::Index>(group.size());
    CMatrix g(kp, kp);
    for (Eigen::Index n = 0; n < kp; ++n)
        for (Eigen::Index k = 0; k < kp; ++k)
            g(n, k) = (s.cov(bs, group[n]).conjugate().cwiseProduct(s.cov(bs, group[k]))).sum() /
                      static_cast<double>(s.antennas);
    return hermitize(g);
}

/// [e^T L G (I + L G)^{-1} e] / [e^T (I + L G)^{-1} e] for user index k of the group.
inline double low_snr_sinr(const CMatrix &gram, const RVector &lambdas, Eigen::Index k)
{
    if (!(lambdas.array() > 0).all())
        throw Error(ErrorKind::domain, "low_snr_sinr: lambdas must be positive");
    if (gram.rows() != lambdas.size() || k < 0 || k >= lambdas.size())
        throw Error(ErrorKind::dimension, "low_snr_sinr: inconsistent dimensions");
    const CMatrix lg = lambdas.cast<Complex>().asDiagonal() * gram;
    CMatrix s = lg;
    s.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<CMatrix> lu(s);
    CVector e = CVector::Zero(gram.rows());
    e(k) = 1.0;
    const CVector x = lu.solve(e);
    return (lg.row(k) * x)(0).real() / x(k).real();
}

// ---------- Conditions on the covariance sequence --------------------------------

struct ConditionPoint
{
    Eigen::Index m = 0;
    std::vector<double> mean_trace; // tr(C_k) / M per group user
    double gram_min_eigenvalue = 0; // sigma_min(Xi^H Xi / M)
    double max_spectral_norm = 0;   // max_k ||C_k||_2
    double gamma_inverse_norm = 0;  // ||Gamma^{-1}||_2 (inf when singular)
};

/// Trends over the M grid. Thresholds:
///   energy_vanishing  min_k tr(C_k)/M at the largest M below 10% of its value at the smallest M
///   gram_degenerate   sigma_min / sigma_max of the Gram matrix below 1e-10 at some M, or
///                     sigma_min still halving over the last M step
///   norm_growing      max ||C_k||_2 at the largest M above 1.5x its value at the smallest M
/// These are reported, never turned into asymptotic verdicts.
struct ConditionReport
{
    std::vector<ConditionPoint> points;
    bool energy_vanishing = false;
    bool gram_degenerate = false;
    bool norm_growing = false;
};

inline double spectral_norm(const CovarianceModel &c)
{
    if (c.structure != Structure::dense)
        return c.spectrum.cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitize(c.matrix), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// One scenario per M (same users and densities), one pilot group at one base station.
inline ConditionReport condition_diagnostics(std::span<const Scenario> scenarios, int bs,
                                             const std::vector<int> &group)
{
    if (scenarios.size() < 2)
        throw Error(ErrorKind::domain, "condition_diagnostics: need at least two values of M");
    ConditionReport report;
    for (const Scenario &s : scenarios)
    {
        ConditionPoint pt;
        pt.m = s.antennas;
        for (int k : group)
        {
            pt.mean_trace.push_back(s.cov(bs, k).trace().real() / static_cast<double>(s.antennas));
            pt.max_spectral_norm = std::max(pt.max_spectral_norm, spectral_norm(s.covariances[bs][k]));
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> gram(gram_matrix(s, bs, group), Eigen::EigenvaluesOnly);
        pt.gram_min_eigenvalue = std::max(gram.eigenvalues().minCoeff(), 0.0);
        if (pt.gram_min_eigenvalue < 1e-10 * gram.eigenvalues().maxCoeff())
            report.gram_degenerate = true;
        Eigen::SelfAdjointEigenSolver<CMatrix> gam(gamma_matrix(s, bs, group).value, Eigen::EigenvaluesOnly);
        const double lo = gam.eigenvalues().minCoeff();
        pt.gamma_inverse_norm = lo > 1e-12 * gam.eigenvalues().maxCoeff() ? 1.0 / lo
                                                                          : std::numeric_limits<double>::infinity();
        report.points.push_back(std::move(pt));
    }
    const auto &first = report.points.front();
    const auto &last = report.points.back();
    const auto &prev = report.points[report.points.size() - 2];
    const double first_energy = *std::min_element(first.mean_trace.begin(), first.mean_trace.end());
    const double last_energy = *std::min_element(last.mean_trace.begin(), last.mean_trace.end());
    report.energy_vanishing = last_energy < 0.1 * first_energy;
    if (last.gram_min_eigenvalue < 0.5 * prev.gram_min_eigenvalue)
        report.gram_degenerate = true;
    report.norm_growing = last.max_spectral_norm > 1.5 * first.max_spectral_norm;
    return report;
}

// ---------- Large-M limit of Gamma for ULA densities ------------------------------

struct UlaLimitInput
{
    std::vector<AngularDensity> group;   // densities of the pilot group at the base station
    RVector group_powers;
    std::vector<AngularDensity> all;     // densities of every user at the base station
    RVector all_powers;
    double rho_tr = 1.0;
};

namespace detail {

inline CMatrix gamma_ula_limit_at(const UlaLimitInput &in, int total_nodes)
{
    std::vector<double> kinks;
    for (const auto &d : in.all)
        for (double c : d.kinks())
            kinks.push_back(c);
    for (const auto &d : in.group)
        for (double c : d.kinks())
            kinks.push_back(c);
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
    const int per_piece = std::max(total_nodes / static_cast<int>(kinks.size() + 1), 32);
    const QuadratureRule rule = composite_gauss_legendre(-pi / 2, pi / 2, kinks, per_piece);
    const Eigen::Index kp = static_cast<Eigen::Index>(in.group.size());
    RMatrix out = RMatrix::Zero(kp, kp);
    RVector h(kp);
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
    {
        const double theta = rule.nodes(i);
        const double cosine = std::cos(theta);
        // h = 2 beta eta; the spectrum in theta is h / cos(theta)
        double received = cosine;
        for (std::size_t n = 0; n < in.all.size(); ++n)
            received += in.all_powers(static_cast<Eigen::Index>(n)) * 2.0 * in.all[n].gain *
                        detail::density_value(in.all[n], theta);
        double observed = cosine / in.rho_tr;
        for (Eigen::Index n = 0; n < kp; ++n)
        {
            h(n) = 2.0 * in.group[n].gain * detail::density_value(in.group[n], theta);
            observed += h(n);
        }
        out += (rule.weights(i) * 0.5 * cosine / (received * observed)) * (h * h.transpose());
    }
    return out.cast<Complex>();
}

} // namespace detail

/// Limit of Gamma as M grows for ULA densities, by quadrature with node doubling
/// until the relative change is at most 1e-6.
inline GammaMatrix gamma_ula_limit(const UlaLimitInput &in, const std::vector<int> &group_ids = {})
{
    if (in.group.empty() || in.group_powers.size() != static_cast<Eigen::Index>(in.group.size()) ||
        in.all_powers.size() != static_cast<Eigen::Index>(in.all.size()))
        throw Error(ErrorKind::dimension, "gamma_ula_limit: inconsistent inputs");
    if (!(in.rho_tr > 0))
        throw Error(ErrorKind::domain, "gamma_ula_limit: rho_tr must be positive");
    for (const auto &d : in.group)
        validate(d);
    for (const auto &d : in.all)
        validate(d);

    int nodes = 2048;
    CMatrix current = detail::gamma_ula_limit_at(in, nodes);
    for (int round = 0; round < 8; ++round)
    {
        nodes *= 2;
        CMatrix refined = detail::gamma_ula_limit_at(in, nodes);
        const double change = (refined - current).norm() / std::max(refined.norm(), 1e-300);
        current = std::move(refined);
        if (change <= 1e-6)
        {
            GammaMatrix g;
            g.group = group_ids;
            if (g.group.empty())
                for (Eigen::Index i = 0; i < current.rows(); ++i)
                    g.group.push_back(static_cast<int>(i));
            g.value = current;
            g.flavor = GammaFlavor::circulant_limit;
            return g;
        }
    }
    throw Error(ErrorKind::numerical, "gamma_ula_limit: quadrature did not converge");
}

/// Limit input for the pilot group of `user` at base station `bs`.
inline UlaLimitInput ula_limit_input(const Scenario &s, int bs, const std::vector<int> &group)
{
    if (s.densities.empty())
        throw Error(ErrorKind::domain, "gamma_ula_limit: scenario carries no angular densities");
    UlaLimitInput in;
    in.rho_tr = s.rho_tr;
    for (int k : group)
        in.group.push_back(s.densities[bs][k]);
    in.group_powers = group_powers(s, group);
    in.all = s.densities[bs];
    in.all_powers.resize(s.user_count());
    for (int k = 0; k < s.user_count(); ++k)
        in.all_powers(k) = s.power(k);
    return in;
}

// ---------- Conditional (per-realization) SINR -------------------------------------

/// p_k |g^H h_k|^2 / (g^H Z~ g + sum_{n != k} p_n |g^H h_n|^2) with MMSE estimates h_n.
inline double conditional_sinr(const CVector &g, std::span<const CVector> estimates, const CMatrix &z_tilde,
                               const Scenario &s, int user)
{
    if (g.isZero(0.0))
        throw Error(ErrorKind::domain, "conditional_sinr: zero filter");
    double interference = (g.adjoint() * z_tilde * g)(0).real();
    double signal = 0.0;
    for (int n = 0; n < s.user_count(); ++n)
    {
        const double v = s.power(n) * std::norm(g.dot(estimates[n]));
        if (n == user)
            signal = v;
        else
            interference += v;
    }
    return signal / interference;
}

inline double conditional_sinr(const EqualizerBank &bank, const std::vector<ChannelEstimate> &estimates,
                               const Scenario &s, int bs, int user)
{
    (void)bs;
    CMatrix z_tilde = CMatrix::Identity(s.antennas, s.antennas);
    std::vector<CVector> h;
    for (int n = 0; n < s.user_count(); ++n)
    {
        z_tilde += s.power(n) * estimates[n].error_covariance;
        h.push_back(estimates[n].estimate);
    }
    return conditional_sinr(bank.filter_of(user), h, z_tilde, s, user);
}

} // namespace beq

#endif // BEQ_SINR_ANALYSIS_HPP
