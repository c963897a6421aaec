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

#ifndef BEQ_EQUALIZERS_HPP
#define BEQ_EQUALIZERS_HPP

#include "beq/gamma.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beq {

/// Statistical transformation A_k of a bilinear equalizer g_k = A_k psi_k.
///
/// Either a dense M x M matrix or the diagonal of A in a declared basis
/// (A = U diag(a) U^H with U = I or the DFT basis).
struct Transformation
{
    int user = -1;
    bool is_diagonal = false;
    CMatrix dense;
    CVector diagonal;
    Basis basis = Basis::identity;

    Eigen::Index size() const { return is_diagonal ? diagonal.size() : dense.rows(); }

    static Transformation make_dense(int user, CMatrix a)
    {
        Transformation t;
        t.user = user;
        t.dense = std::move(a);
        return t;
    }

    static Transformation make_diagonal(int user, CVector a, Basis basis)
    {
        Transformation t;
        t.user = user;
        t.is_diagonal = true;
        t.diagonal = std::move(a);
        t.basis = basis;
        return t;
    }

    /// Dense matrix in the antenna basis.
    CMatrix expand() const
    {
        if (!is_diagonal)
            return dense;
        if (basis == Basis::identity)
            return diagonal.asDiagonal();
        const CMatrix v = dft_matrix(diagonal.size());
        return v * diagonal.asDiagonal() * v.adjoint();
    }

    bool is_zero() const { return is_diagonal ? diagonal.isZero(0.0) : dense.isZero(0.0); }
};

/// Filters of one method for a set of users at one base station.
struct EqualizerBank
{
    Method method = Method::ls_mf;
    std::vector<int> users;
    std::vector<CVector> filters;
    std::vector<Transformation> transformations; // bilinear methods only

    const CVector &filter_of(int user) const
    {
        for (std::size_t i = 0; i < users.size(); ++i)
            if (users[i] == user)
                return filters[i];
        throw Error(ErrorKind::domain, "equalizer bank has no filter for user " + std::to_string(user));
    }
};

/// Multiply-add counter for the filter application paths.
struct OpCounter
{
    std::size_t multiply_adds = 0;
};

// ---------- OBE -------------------------------------------------------------------

struct OracleResult
{
    Transformation transformation;
    double gamma = 0.0; // p_k c_k^H a_k
};

/// Direct M^2-dimensional optimizer a = (Q^T (x) Z + sum_{I_k} p_n c_n c_n^H)^{-1} c_k.
/// O(M^6); restricted to M <= 16.
inline OracleResult obe_oracle_vectorized(const Scenario &s, int bs, int user)
{
    const Eigen::Index m = s.antennas;
    if (m > 16)
        throw Error(ErrorKind::dimension, "obe_oracle_vectorized: M must be <= 16");
    const CMatrix z = received_covariance(s, bs);
    const CMatrix q = observation_covariance(s, bs, s.pilot_group(s.users[user].pilot));
    const Eigen::Index n2 = m * m;

    // (Q^T (x) Z)_{(a,b),(c,d)} = Q^T_{ac} Z_{bd}, with vec index = column * M + row
    CMatrix system(n2, n2);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index c = 0; c < m; ++c)
            system.block(a * m, c * m, m, m) = q(c, a) * z;

    auto vec = [&](const CMatrix &x) { return CVector(Eigen::Map<const CVector>(x.data(), n2)); };
    for (int n : s.co_pilot_users(user))
    {
        const CVector cn = vec(s.cov(bs, n));
        system += s.power(n) * cn * cn.adjoint();
    }
    const CVector ck = vec(s.cov(bs, user));
    const CVector a = system.partialPivLu().solve(ck);

    OracleResult out;
    out.transformation = Transformation::make_dense(user, Eigen::Map<const CMatrix>(a.data(), m, m));
    out.gamma = s.power(user) * (ck.adjoint() * a)(0).real();
    return out;
}

/// Result of the per-pilot-group OBE computation.
struct ObeGroup
{
    GammaMatrix gamma;
    std::vector<Transformation> transformations; // in group order
    std::optional<std::string> diagnostic;       // set when Gamma had to be regularized
};

namespace detail {

// (P^{-1} + M Gamma)^{-1} P^{-1}: column k holds sigma_{. k} of the scaled transformation.
inline CMatrix obe_coefficients(const CMatrix &gamma, const RVector &powers, double m,
                                std::optional<std::string> &diagnostic)
{
    CMatrix system = m * gamma;
    system.diagonal() += powers.cwiseInverse().cast<Complex>();
    if (hermitian_condition(gamma) > 1e12)
    {
        system.diagonal().array() += 1e-12;
        diagnostic = "Gamma is singular at M = " + std::to_string(static_cast<long long>(m)) +
                     "; regularized (P^-1 + M Gamma) by 1e-12 I";
    }
    Eigen::LLT<CMatrix> llt(hermitize(system));
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "obe_transformations: (P^-1 + M Gamma) is singular");
    CMatrix rhs = powers.cwiseInverse().cast<Complex>().asDiagonal();
    return llt.solve(rhs);
}

inline bool all_diagonal_in(const Scenario &s, int bs, Basis basis)
{
    for (const auto &c : s.covariances[bs])
    {
        const bool ok = basis == Basis::dft ? c.dft_diagonal()
                                            : (c.structure == Structure::diagonal && c.basis == Basis::identity);
        if (!ok)
            return false;
    }
    return true;
}

} // namespace detail

/// Scaled OBE transformations of one pilot group:
/// A_k = Z^{-1} (sum_l sigma_{kl} C_l) Q^{-1} with sigma from (P^{-1} + M Gamma)^{-1}.
/// Never forms M^2 x M^2 objects. When every covariance at the base station is
/// diagonal in a common basis the transformations come out diagonal too.
inline ObeGroup obe_transformations(const Scenario &s, const BsStatistics &st, const std::vector<int> &group)
{
    for (int k : group)
        if (!(s.power(k) > 0))
            throw Error(ErrorKind::domain, "obe_transformations: powers must be positive");
    const double m = static_cast<double>(s.antennas);
    const RVector powers = group_powers(s, group);
    const Eigen::Index kp = static_cast<Eigen::Index>(group.size());
    ObeGroup out;

    for (Basis basis : {Basis::identity, Basis::dft})
    {
        if (!detail::all_diagonal_in(s, st.bs, basis))
            continue;
        // structured path: everything is element-wise in the common basis
        RVector z = RVector::Ones(s.antennas);
        for (int k = 0; k < s.user_count(); ++k)
            z += s.power(k) * s.covariances[st.bs][k].spectrum;
        RVector q = RVector::Constant(s.antennas, 1.0 / s.rho_tr);
        for (int k : s.pilot_group(s.users[group.front()].pilot))
            q += s.covariances[st.bs][k].spectrum;
        RMatrix weighted(s.antennas, kp);
        for (Eigen::Index i = 0; i < kp; ++i)
            weighted.col(i) = s.covariances[st.bs][group[i]].spectrum.cwiseQuotient(z.cwiseProduct(q));
        CMatrix gamma = CMatrix::Zero(kp, kp);
        for (Eigen::Index n = 0; n < kp; ++n)
            for (Eigen::Index k = 0; k < kp; ++k)
                gamma(n, k) = s.covariances[st.bs][group[n]].spectrum.dot(weighted.col(k)) / m;
        out.gamma = {group, gamma, GammaFlavor::finite};
        const CMatrix sigma = detail::obe_coefficients(gamma, powers, m, out.diagnostic);
        for (Eigen::Index k = 0; k < kp; ++k)
            out.transformations.push_back(
                Transformation::make_diagonal(group[k], weighted.cast<Complex>() * sigma.col(k), basis));
        return out;
    }

    const auto z_factor = hermitian_factor(st.z, "obe_transformations");
    GroupKernel kernel = group_kernel(s, st.bs, group, z_factor, st.q_factor[s.users[group.front()].pilot],
                                      GammaFlavor::finite);
    out.gamma = kernel.gamma;
    const CMatrix sigma = detail::obe_coefficients(kernel.gamma.value, powers, m, out.diagnostic);
    for (Eigen::Index k = 0; k < kp; ++k)
    {
        CMatrix a = CMatrix::Zero(s.antennas, s.antennas);
        for (Eigen::Index l = 0; l < kp; ++l)
            a += sigma(l, k) * kernel.kernels[l];
        out.transformations.push_back(Transformation::make_dense(group[k], std::move(a)));
    }
    return out;
}

inline ObeGroup obe_transformations(const Scenario &s, int bs, const std::vector<int> &group)
{
    return obe_transformations(s, bs_statistics(s, bs), group);
}

// ---------- Diagonal (partial-information) OBE --------------------------------------

/// Diagonal transformations a_k = D Xi (R + Xi^T D Xi)^{-1} e_k from the
/// covariance diagonals Xi = [c_1 .. c_Kp] (one column per user).
inline std::vector<Transformation> diagonal_obe(const RMatrix &diagonals, const std::vector<int> &users,
                                                const RVector &d, const RMatrix &r, Basis basis)
{
    if (diagonals.cols() != static_cast<Eigen::Index>(users.size()) || r.rows() != diagonals.cols() ||
        r.cols() != diagonals.cols() || d.size() != diagonals.rows())
        throw Error(ErrorKind::dimension, "diagonal_obe: inconsistent dimensions");
    if (!(d.array() > 0).all())
        throw Error(ErrorKind::domain, "diagonal_obe: D must be strictly positive");
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(0.5 * (r + r.transpose()), Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().array() > 0).all())
        throw Error(ErrorKind::domain, "diagonal_obe: R must be positive definite");

    const RMatrix dxi = d.asDiagonal() * diagonals;
    const RMatrix system = r + diagonals.transpose() * dxi;
    const RMatrix coeff = system.partialPivLu().solve(RMatrix::Identity(r.rows(), r.cols()));
    std::vector<Transformation> out;
    for (std::size_t k = 0; k < users.size(); ++k)
        out.push_back(Transformation::make_diagonal(
            users[k], (dxi * coeff.col(static_cast<Eigen::Index>(k))).cast<Complex>(), basis));
    return out;
}

/// Covariance diagonals of every user at one base station in a basis.
inline RMatrix covariance_diagonals(const Scenario &s, int bs, Basis basis)
{
    RMatrix out(s.antennas, s.user_count());
    for (int k = 0; k < s.user_count(); ++k)
    {
        const auto &c = s.covariances[bs][k];
        const bool native = basis == Basis::dft ? c.dft_diagonal()
                                                : (c.structure == Structure::diagonal && c.basis == Basis::identity);
        if (native)
            out.col(k) = c.spectrum;
        else
            out.col(k) = basis == Basis::dft ? dft_diagonal(c.matrix) : RVector(c.matrix.diagonal().real());
    }
    return out;
}

/// OBE-D of one pilot group with the default design D = (Z^ Q^)^{-1}, R = P^{-1},
/// built only from covariance diagonals.
inline std::vector<Transformation> obe_d_transformations(const Scenario &s, const RMatrix &diagonals,
                                                         const std::vector<int> &group, Basis basis)
{
    RVector z = RVector::Ones(s.antennas);
    for (int k = 0; k < s.user_count(); ++k)
        z += s.power(k) * diagonals.col(k);
    RVector q = RVector::Constant(s.antennas, 1.0 / s.rho_tr);
    for (int k : s.pilot_group(s.users[group.front()].pilot))
        q += diagonals.col(k);
    RMatrix xi(s.antennas, static_cast<Eigen::Index>(group.size()));
    for (std::size_t i = 0; i < group.size(); ++i)
        xi.col(static_cast<Eigen::Index>(i)) = diagonals.col(group[i]);
    const RVector d = z.cwiseProduct(q).cwiseInverse();
    const RMatrix r = group_powers(s, group).cwiseInverse().asDiagonal();
    return diagonal_obe(xi, group, d, r, basis);
}

/// Default basis for the partial-information design.
inline Basis default_diagonal_basis(const Scenario &s, int bs)
{
    return detail::all_diagonal_in(s, bs, Basis::identity) ? Basis::identity : Basis::dft;
}

// ---------- Filter application ------------------------------------------------------

/// g = A psi. Dense: O(M^2). Diagonal: element-wise O(M), wrapped in a DFT pair
/// for the DFT basis.
inline CVector bilinear_filter(const Transformation &t, const CVector &psi, OpCounter *counter = nullptr)
{
    if (t.size() != psi.size())
        throw Error(ErrorKind::dimension, "bilinear_filter: transformation and observation sizes differ");
    const auto m = static_cast<std::size_t>(psi.size());
    if (!t.is_diagonal)
    {
        if (counter)
            counter->multiply_adds += m * m;
        return t.dense * psi;
    }
    if (counter)
        counter->multiply_adds += m;
    if (t.basis == Basis::identity)
        return t.diagonal.cwiseProduct(psi);
    return dft_synthesis(t.diagonal.cwiseProduct(dft_analysis(psi)));
}

// ---------- Baselines ---------------------------------------------------------------

struct MatchedFilterBanks
{
    EqualizerBank ls_mf;
    EqualizerBank mmse_mf;
};

/// LS-MF (A = I) and MMSE-MF (A = C Q^{-1}) for the users served by the base station.
inline MatchedFilterBanks baseline_matched_filters(const Scenario &s, const BsStatistics &st,
                                                   const TrainingObservation &obs)
{
    MatchedFilterBanks out;
    out.ls_mf.method = Method::ls_mf;
    out.mmse_mf.method = Method::mmse_mf;
    for (int k : s.served_users(st.bs))
    {
        const CVector &psi = obs.of_user(s, st.bs, k);
        out.ls_mf.users.push_back(k);
        out.ls_mf.transformations.push_back(
            Transformation::make_diagonal(k, CVector::Ones(s.antennas), Basis::identity));
        out.ls_mf.filters.push_back(psi);
        out.mmse_mf.users.push_back(k);
        out.mmse_mf.transformations.push_back(Transformation::make_dense(k, st.estimator[k]));
        out.mmse_mf.filters.push_back(st.estimator[k] * psi);
    }
    return out;
}

inline MatchedFilterBanks baseline_matched_filters(const Scenario &s, int bs, const TrainingObservation &obs)
{
    return baseline_matched_filters(s, bs_statistics(s, bs), obs);
}

/// g_k = (Z~ + sum_n p_n h_n h_n^H)^{-1} h_k over every user visible at the base
/// station; one shared factorization.
inline EqualizerBank lmmse_filter(std::span<const CVector> estimates, const CMatrix &z_tilde, const Scenario &s,
                                  int bs)
{
    CMatrix system = z_tilde;
    for (int n = 0; n < s.user_count(); ++n)
        system.selfadjointView<Eigen::Lower>().rankUpdate(estimates[n], s.power(n));
    Eigen::LLT<CMatrix, Eigen::Lower> llt(system);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "lmmse_filter: system matrix is not positive definite");
    EqualizerBank bank;
    bank.method = Method::lmmse;
    for (int k : s.served_users(bs))
    {
        bank.users.push_back(k);
        bank.filters.push_back(llt.solve(estimates[k]));
    }
    return bank;
}

inline EqualizerBank lmmse_filter(const std::vector<ChannelEstimate> &estimates, const Scenario &s, int bs)
{
    CMatrix z_tilde = CMatrix::Identity(s.antennas, s.antennas);
    std::vector<CVector> h;
    for (int n = 0; n < s.user_count(); ++n)
    {
        z_tilde += s.power(n) * estimates[n].error_covariance;
        h.push_back(estimates[n].estimate);
    }
    return lmmse_filter(h, z_tilde, s, bs);
}

/// Per-cell zero forcing on the MMSE estimates of the served users:
/// G = H (H^H H)^{-1}. Other-cell users are not nulled (their estimates are
/// linear images of the same observations).
inline EqualizerBank mmse_zero_forcing(std::span<const CVector> estimates, const Scenario &s, int bs)
{
    const std::vector<int> served = s.served_users(bs);
    const Eigen::Index kc = static_cast<Eigen::Index>(served.size());
    if (kc > s.antennas)
        throw Error(ErrorKind::dimension, "mmse_zero_forcing: more served users than antennas");
    CMatrix h(s.antennas, kc);
    for (Eigen::Index i = 0; i < kc; ++i)
        h.col(i) = estimates[served[i]];
    const CMatrix gram = h.adjoint() * h;
    const double cond = hermitian_condition(gram);
    if (!(cond <= 1e12))
        throw Error(ErrorKind::numerical,
                    "mmse_zero_forcing: rank-deficient estimates (condition number " + std::to_string(cond) + ")");
    const CMatrix g = h * hermitian_factor(gram, "mmse_zero_forcing").solve(CMatrix::Identity(kc, kc));
    EqualizerBank bank;
    bank.method = Method::mmse_zf;
    bank.users = served;
    for (Eigen::Index i = 0; i < kc; ++i)
        bank.filters.push_back(g.col(i));
    return bank;
}

inline EqualizerBank mmse_zero_forcing(const std::vector<ChannelEstimate> &estimates, const Scenario &s, int bs)
{
    std::vector<CVector> h;
    for (const auto &e : estimates)
        h.push_back(e.estimate);
    return mmse_zero_forcing(h, s, bs);
}

} // namespace beq

#endif // BEQ_EQUALIZERS_HPP
