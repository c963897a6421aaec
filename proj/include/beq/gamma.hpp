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

#ifndef BEQ_GAMMA_HPP
#define BEQ_GAMMA_HPP

#include "beq/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace beq {

enum class GammaFlavor
{
    finite,          // tr(C_n Z^{-1} C_k Q^{-1}) / M
    circulant_limit, // M -> infinity limit for ULA densities
    lmmse,           // Z replaced by the error-covariance version Z~
};

/// K_p x K_p coupling matrix of one pilot group.
struct GammaMatrix
{
    std::vector<int> group;
    CMatrix value;
    GammaFlavor flavor = GammaFlavor::finite;

    Eigen::Index size() const { return value.rows(); }
};

/// Gamma together with the per-user kernels B_k = Z^{-1} C_k Q^{-1}; the
/// optimal transformations are linear combinations of the kernels.
struct GroupKernel
{
    GammaMatrix gamma;
    std::vector<CMatrix> kernels;
};

/// O(M^3 K_p): first Z^{-1} C_k Q^{-1} per user, then inner products with C_n.
inline GroupKernel group_kernel(const Scenario &s, int bs, const std::vector<int> &group,
                                const Eigen::LLT<CMatrix> &z_factor, const Eigen::LLT<CMatrix> &q_factor,
                                GammaFlavor flavor)
{
    const Eigen::Index kp = static_cast<Eigen::Index>(group.size());
    const double m = static_cast<double>(s.antennas);
    GroupKernel out;
    out.gamma.group = group;
    out.gamma.flavor = flavor;
    out.gamma.value = CMatrix::Zero(kp, kp);
    for (int k : group)
    {
        const CMatrix left = z_factor.solve(s.cov(bs, k));   // Z^{-1} C_k
        out.kernels.push_back(q_factor.solve(left.adjoint()).adjoint()); // (Z^{-1} C_k) Q^{-1}
    }
    for (Eigen::Index n = 0; n < kp; ++n)
    {
        // tr(C_n B) = sum_ij conj(C_n)_ij B_ij for Hermitian C_n
        const CMatrix &cn = s.cov(bs, group[n]);
        for (Eigen::Index k = 0; k < kp; ++k)
            out.gamma.value(n, k) = (cn.conjugate().cwiseProduct(out.kernels[k])).sum() / m;
    }
    out.gamma.value = hermitize(out.gamma.value);
    return out;
}

/// Finite-M Gamma (or its LMMSE counterpart with Z~) from scratch.
inline GammaMatrix gamma_matrix(const Scenario &s, int bs, const std::vector<int> &group,
                                GammaFlavor flavor = GammaFlavor::finite)
{
    if (group.empty())
        throw Error(ErrorKind::domain, "gamma_matrix: empty pilot group");
    const int pilot = s.users[group.front()].pilot;
    for (int k : group)
        if (s.users[k].pilot != pilot)
            throw Error(ErrorKind::domain, "gamma_matrix: users do not share a pilot");
    CMatrix z;
    if (flavor == GammaFlavor::lmmse)
        z = bs_statistics(s, bs).z_tilde;
    else
        z = received_covariance(s, bs);
    const auto z_factor = hermitian_factor(z, "gamma_matrix");
    const auto q_factor = hermitian_factor(observation_covariance(s, bs, s.pilot_group(pilot)), "gamma_matrix");
    return group_kernel(s, bs, group, z_factor, q_factor, flavor).gamma;
}

inline GammaMatrix gamma_matrix(const Scenario &s, const BsStatistics &st, const std::vector<int> &group,
                                GammaFlavor flavor = GammaFlavor::finite)
{
    const auto z_factor = hermitian_factor(flavor == GammaFlavor::lmmse ? st.z_tilde : st.z, "gamma_matrix");
    return group_kernel(s, st.bs, group, z_factor, st.q_factor[s.users[group.front()].pilot], flavor).gamma;
}

/// Group powers P = diag(p_k), k in group.
inline RVector group_powers(const Scenario &s, const std::vector<int> &group)
{
    RVector p(static_cast<Eigen::Index>(group.size()));
    for (std::size_t i = 0; i < group.size(); ++i)
        p(static_cast<Eigen::Index>(i)) = s.power(group[i]);
    return p;
}

} // namespace beq

#endif // BEQ_GAMMA_HPP
