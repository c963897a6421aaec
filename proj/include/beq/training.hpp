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

#ifndef BEQ_TRAINING_HPP
#define BEQ_TRAINING_HPP

#include "beq/channel_model.hpp"

#include <vector>

namespace beq {

/// h[bs][user] ~ CN(0, C_{bs,user}).
struct ChannelRealization
{
    std::vector<std::vector<CVector>> h;
};

/// psi[bs][pilot]: the LS observation shared by every user of the pilot group.
struct TrainingObservation
{
    std::vector<std::vector<CVector>> psi;

    const CVector &of_user(const Scenario &s, int bs, int user) const { return psi[bs][s.users[user].pilot]; }
};

struct ChannelEstimate
{
    CVector estimate;
    CMatrix error_covariance;
};

// ---------- Coloring ------------------------------------------------------------

/// Square-root factor of a covariance: h = factor * z, z ~ CN(0, I).
struct Coloring
{
    bool dft = false;
    bool diagonal = false;
    CMatrix factor;      // dense: V diag(sqrt(lambda))
    RVector sqrt_values; // diagonal / DFT-diagonal
};

inline Coloring make_coloring(const CovarianceModel &c)
{
    Coloring out;
    if (c.structure != Structure::dense)
    {
        if ((c.spectrum.array() < 0).any())
            throw Error(ErrorKind::numerical, "coloring: negative eigenvalue in structured covariance");
        out.diagonal = true;
        out.dft = c.basis == Basis::dft;
        out.sqrt_values = c.spectrum.cwiseSqrt();
        return out;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitize(c.matrix));
    if (eig.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "coloring: eigendecomposition failed");
    const RVector &lambda = eig.eigenvalues();
    const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    if (lambda.minCoeff() < -1e-8 * scale)
        throw Error(ErrorKind::numerical, "coloring: covariance is not PSD");
    out.factor = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().cast<Complex>().asDiagonal();
    return out;
}

inline CVector apply_coloring(const Coloring &c, const CVector &z)
{
    if (!c.diagonal)
        return c.factor * z;
    CVector scaled = c.sqrt_values.cast<Complex>().cwiseProduct(z);
    return c.dft ? dft_synthesis(scaled) : scaled;
}

using ColoringTable = std::vector<std::vector<Coloring>>;

inline ColoringTable make_colorings(const Scenario &s)
{
    ColoringTable table(s.bs_count());
    for (int b = 0; b < s.bs_count(); ++b)
        for (int k = 0; k < s.user_count(); ++k)
            table[b].push_back(make_coloring(s.covariances[b][k]));
    return table;
}

// ---------- Sampling and training -------------------------------------------------

inline ChannelRealization sample_channels(const Scenario &s, const ColoringTable &colorings, Rng &rng)
{
    ChannelRealization out;
    out.h.resize(s.bs_count());
    for (int b = 0; b < s.bs_count(); ++b)
        for (int k = 0; k < s.user_count(); ++k)
            out.h[b].push_back(apply_coloring(colorings[b][k], standard_complex_normal(s.antennas, rng)));
    return out;
}

inline ChannelRealization sample_channels(const Scenario &s, Rng &rng)
{
    return sample_channels(s, make_colorings(s), rng);
}

/// psi = sum_{k in group} h_k + w / sqrt(rho_tr), one per (bs, pilot).
inline TrainingObservation ls_observations(const ChannelRealization &channels, const Scenario &s, Rng &rng)
{
    TrainingObservation obs;
    obs.psi.resize(s.bs_count());
    const double noise_scale = 1.0 / std::sqrt(s.rho_tr);
    for (int b = 0; b < s.bs_count(); ++b)
    {
        obs.psi[b].assign(s.pilot_count, CVector::Zero(s.antennas));
        for (int p = 0; p < s.pilot_count; ++p)
        {
            CVector psi = noise_scale * standard_complex_normal(s.antennas, rng);
            for (int k : s.pilot_group(p))
                psi += channels.h[b][k];
            obs.psi[b][p] = std::move(psi);
        }
    }
    return obs;
}

/// Q = sum_{k in group} C_k + I / rho_tr.
inline CMatrix observation_covariance(const Scenario &s, int bs, const std::vector<int> &group)
{
    if (group.empty())
        throw Error(ErrorKind::domain, "observation_covariance: empty pilot group");
    CMatrix q = CMatrix::Identity(s.antennas, s.antennas) / s.rho_tr;
    for (int k : group)
        q += s.cov(bs, k);
    return q;
}

/// Z = I + sum_n p_n C_n over every user visible at the base station.
inline CMatrix received_covariance(const Scenario &s, int bs)
{
    CMatrix z = CMatrix::Identity(s.antennas, s.antennas);
    for (int k = 0; k < s.user_count(); ++k)
        z += s.power(k) * s.cov(bs, k);
    return z;
}

/// Second-order statistics of one base station: everything that stays fixed
/// while the covariances do.
struct BsStatistics
{
    int bs = 0;
    CMatrix z;
    std::vector<CMatrix> q;             // per pilot (empty when unused)
    std::vector<Eigen::LLT<CMatrix>> q_factor;
    std::vector<CMatrix> estimator;     // C_k Q^{-1}
    std::vector<CMatrix> error_cov;     // C_k - C_k Q^{-1} C_k
    CMatrix z_tilde;                    // I + sum_n p_n error_cov_n
};

inline BsStatistics bs_statistics(const Scenario &s, int bs)
{
    BsStatistics st;
    st.bs = bs;
    st.z = received_covariance(s, bs);
    st.q.resize(s.pilot_count);
    st.q_factor.resize(s.pilot_count);
    for (int p : s.used_pilots())
    {
        st.q[p] = observation_covariance(s, bs, s.pilot_group(p));
        st.q_factor[p] = hermitian_factor(st.q[p], "observation covariance");
    }
    st.z_tilde = CMatrix::Identity(s.antennas, s.antennas);
    for (int k = 0; k < s.user_count(); ++k)
    {
        const CMatrix &c = s.cov(bs, k);
        // (C Q^{-1}) = (Q^{-1} C)^H for Hermitian C, Q
        CMatrix w = st.q_factor[s.users[k].pilot].solve(c).adjoint();
        CMatrix e = hermitize(c - w * c);
        st.z_tilde += s.power(k) * e;
        st.estimator.push_back(std::move(w));
        st.error_cov.push_back(std::move(e));
    }
    return st;
}

/// h_hat = C Q^{-1} psi and its error covariance, from precomputed statistics.
inline ChannelEstimate mmse_channel_estimate(const TrainingObservation &obs, const Scenario &s,
                                             const BsStatistics &st, int user)
{
    return {st.estimator[user] * obs.of_user(s, st.bs, user), st.error_cov[user]};
}

inline ChannelEstimate mmse_channel_estimate(const TrainingObservation &obs, const Scenario &s, int bs, int user)
{
    const CMatrix q = observation_covariance(s, bs, s.pilot_group(s.users[user].pilot));
    Eigen::LLT<CMatrix> factor(q);
    if (factor.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "mmse_channel_estimate: singular observation covariance");
    const CMatrix &c = s.cov(bs, user);
    const CMatrix w = factor.solve(c).adjoint();
    return {w * obs.of_user(s, bs, user), hermitize(c - w * c)};
}

/// Estimates of every user at one base station.
inline std::vector<ChannelEstimate> mmse_channel_estimates(const TrainingObservation &obs, const Scenario &s,
                                                           const BsStatistics &st)
{
    std::vector<ChannelEstimate> out;
    out.reserve(s.user_count());
    for (int k = 0; k < s.user_count(); ++k)
        out.push_back(mmse_channel_estimate(obs, s, st, k));
    return out;
}

} // namespace beq

#endif // BEQ_TRAINING_HPP
