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

// Synthetic scenarios shared by the unit and acceptance tests.

#ifndef BEQ_TESTS_SUPPORT_HPP
#define BEQ_TESTS_SUPPORT_HPP

#include "beq/channel_model.hpp"

#include <vector>

namespace beq::test {

/// One base station (bs 0); user i has pilot pilots[i] and power powers[i].
inline Scenario single_bs(const std::vector<CovarianceModel> &covs, const std::vector<int> &pilots,
                          const std::vector<double> &powers, double rho_tr)
{
    Scenario s;
    s.antennas = covs.front().size();
    s.rho_tr = rho_tr;
    s.covariances.resize(1);
    int pilot_count = 0;
    for (std::size_t i = 0; i < covs.size(); ++i)
    {
        UserState u;
        u.serving_bs = 0;
        u.pilot = pilots[i];
        u.power = powers[i];
        s.users.push_back(u);
        s.covariances[0].push_back(covs[i]);
        pilot_count = std::max(pilot_count, pilots[i] + 1);
    }
    s.pilot_count = pilot_count;
    return s;
}

/// C = W W^H / r with W an M x r standard complex Gaussian matrix, scaled by `gain`.
inline CovarianceModel random_covariance(Eigen::Index m, Eigen::Index rank, double gain, Rng &rng)
{
    CMatrix w(m, rank);
    for (Eigen::Index c = 0; c < rank; ++c)
        w.col(c) = standard_complex_normal(m, rng);
    return dense_covariance(hermitize(gain * w * w.adjoint() / static_cast<double>(rank)));
}

/// Group of kp users on pilot 0 plus `extra` users on pilot 1, random powers in [0.5, 2].
inline Scenario random_instance(Eigen::Index m, int kp, int extra, Rng &rng)
{
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<CovarianceModel> covs;
    std::vector<int> pilots;
    std::vector<double> powers;
    for (int k = 0; k < kp + extra; ++k)
    {
        covs.push_back(random_covariance(m, 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m)),
                                         u(rng), rng));
        pilots.push_back(k < kp ? 0 : 1);
        powers.push_back(u(rng));
    }
    return single_bs(covs, pilots, powers, u(rng));
}

inline CovarianceModel identity_covariance(Eigen::Index m)
{
    return diagonal_covariance(RVector::Ones(m), Basis::identity);
}

/// Circulant covariance with eigenvalue f(w) at each DFT frequency w in (-pi, pi].
template <class F>
inline CovarianceModel circulant_of(Eigen::Index m, F f)
{
    RVector spectrum(m);
    for (Eigen::Index k = 0; k < m; ++k)
        spectrum(k) = f(dft_frequency(k, m));
    return circulant_covariance_from_spectrum(spectrum);
}

/// Relative difference |a - b| / |b|.
inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace beq::test

#endif // BEQ_TESTS_SUPPORT_HPP
