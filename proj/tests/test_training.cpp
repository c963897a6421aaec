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

#include "beq/training.hpp"
#include "support.hpp"

#include "catch_amalgamated.hpp"

using namespace beq;
using namespace beq::test;
using Catch::Matchers::WithinRel;

TEST_CASE("channel sampling")
{
    Rng rng(1);
    const Scenario zero = single_bs({dense_covariance(CMatrix::Zero(4, 4))}, {0}, {1.0}, 1.0);
    CHECK(sample_channels(zero, rng).h[0][0].norm() == 0.0);

    Rng a(9), b(9);
    const Scenario s = random_instance(6, 2, 1, rng);
    const auto ha = sample_channels(s, a);
    const auto hb = sample_channels(s, b);
    for (int k = 0; k < 3; ++k)
        CHECK(ha.h[0][k] == hb.h[0][k]);
}

TEST_CASE("sample covariance of colored draws converges")
{
    Rng rng(2);
    const int n = 10000;
    SECTION("identity")
    {
        const Scenario s = single_bs({identity_covariance(8)}, {0}, {1.0}, 1.0);
        const ColoringTable t = make_colorings(s);
        CMatrix acc = CMatrix::Zero(8, 8);
        for (int i = 0; i < n; ++i)
        {
            const CVector h = sample_channels(s, t, rng).h[0][0];
            acc += h * h.adjoint();
        }
        CHECK((acc / n - CMatrix::Identity(8, 8)).norm() / std::sqrt(8.0) < 0.1);
    }
    SECTION("dense and circulant")
    {
        RVector f(8);
        f << 3.0, 2.0, 1.0, 0.2, 0.0, 0.1, 0.5, 1.2;
        const CovarianceModel circ = circulant_covariance_from_spectrum(f);
        const CovarianceModel dense = random_covariance(8, 3, 1.0, rng);
        const Scenario s = single_bs({circ, dense}, {0, 1}, {1.0, 1.0}, 1.0);
        const ColoringTable t = make_colorings(s);
        CHECK(t[0][0].dft);
        CHECK_FALSE(t[0][1].diagonal);
        CMatrix acc0 = CMatrix::Zero(8, 8), acc1 = CMatrix::Zero(8, 8);
        for (int i = 0; i < n; ++i)
        {
            const auto h = sample_channels(s, t, rng).h[0];
            acc0 += h[0] * h[0].adjoint();
            acc1 += h[1] * h[1].adjoint();
        }
        CHECK((acc0 / n - circ.matrix).norm() / circ.matrix.norm() < 0.1);
        CHECK((acc1 / n - dense.matrix).norm() / dense.matrix.norm() < 0.1);
    }
}

TEST_CASE("least-squares observations")
{
    Rng rng(3);
    SECTION("noiseless single user")
    {
        const Scenario s = single_bs({identity_covariance(4)}, {0}, {1.0}, 1e12);
        const auto h = sample_channels(s, rng);
        const auto obs = ls_observations(h, s, rng);
        CHECK((obs.psi[0][0] - h.h[0][0]).norm() / h.h[0][0].norm() < 1e-5);
    }
    SECTION("two users share one observation")
    {
        const Scenario s = single_bs({identity_covariance(4), identity_covariance(4)}, {0, 0}, {1.0, 1.0}, 1e30);
        const auto h = sample_channels(s, rng);
        const auto obs = ls_observations(h, s, rng);
        CHECK((obs.psi[0][0] - h.h[0][0] - h.h[0][1]).norm() < 1e-12);
        CHECK(&obs.of_user(s, 0, 0) == &obs.of_user(s, 0, 1));
    }
    SECTION("second moment matches the observation covariance")
    {
        const Scenario s = random_instance(6, 2, 1, rng);
        const ColoringTable t = make_colorings(s);
        const CMatrix q = observation_covariance(s, 0, s.pilot_group(0));
        CMatrix acc = CMatrix::Zero(6, 6);
        const int n = 10000;
        for (int i = 0; i < n; ++i)
        {
            const auto obs = ls_observations(sample_channels(s, t, rng), s, rng);
            acc += obs.psi[0][0] * obs.psi[0][0].adjoint();
        }
        CHECK((acc / n - q).norm() / q.norm() < 0.1);
    }
}

TEST_CASE("observation covariance")
{
    const Scenario one = single_bs({identity_covariance(3)}, {0}, {1.0}, 1.0);
    CHECK((observation_covariance(one, 0, {0}) - 2.0 * CMatrix::Identity(3, 3)).norm() == 0.0);
    const Scenario two = single_bs({identity_covariance(3), identity_covariance(3)}, {0, 0}, {1.0, 1.0}, 1.0);
    CHECK((observation_covariance(two, 0, {0, 1}) - 3.0 * CMatrix::Identity(3, 3)).norm() == 0.0);

    Rng rng(4);
    const Scenario s = random_instance(5, 3, 0, rng);
    CMatrix direct = CMatrix::Identity(5, 5) / s.rho_tr;
    for (int k = 0; k < 3; ++k)
        direct += s.cov(0, k);
    CHECK((observation_covariance(s, 0, {0, 1, 2}) - direct).norm() == 0.0);
    CHECK_THROWS_AS(observation_covariance(s, 0, {}), Error);
}

TEST_CASE("MMSE estimates")
{
    Rng rng(5);
    SECTION("perfect training")
    {
        const Scenario s = single_bs({identity_covariance(4)}, {0}, {1.0}, 1e12);
        const auto obs = ls_observations(sample_channels(s, rng), s, rng);
        const ChannelEstimate e = mmse_channel_estimate(obs, s, 0, 0);
        CHECK((e.estimate - obs.psi[0][0]).norm() < 1e-10 * obs.psi[0][0].norm());
        CHECK(e.error_covariance.norm() < 1e-10);
    }
    SECTION("scalar algebra at unit training SNR")
    {
        const Scenario s = single_bs({identity_covariance(4)}, {0}, {1.0}, 1.0);
        const auto obs = ls_observations(sample_channels(s, rng), s, rng);
        const ChannelEstimate e = mmse_channel_estimate(obs, s, 0, 0);
        CHECK((e.estimate - obs.psi[0][0] / 2.0).norm() < 1e-14);
        CHECK((e.error_covariance - CMatrix::Identity(4, 4) / 2.0).norm() < 1e-14);
    }
    SECTION("statistics agree with the direct formula and are consistent")
    {
        const Scenario s = random_instance(8, 2, 1, rng);
        const BsStatistics st = bs_statistics(s, 0);
        const ColoringTable t = make_colorings(s);
        double err = 0.0;
        CMatrix cross = CMatrix::Zero(8, 8);
        const int n = 10000;
        for (int i = 0; i < n; ++i)
        {
            const auto h = sample_channels(s, t, rng);
            const auto obs = ls_observations(h, s, rng);
            const ChannelEstimate a = mmse_channel_estimate(obs, s, st, 0);
            if (i == 0)
            {
                const ChannelEstimate b = mmse_channel_estimate(obs, s, 0, 0);
                CHECK((a.estimate - b.estimate).norm() < 1e-10 * b.estimate.norm());
                CHECK((a.error_covariance - b.error_covariance).norm() < 1e-10 * b.error_covariance.norm());
            }
            err += (a.estimate - h.h[0][0]).squaredNorm();
            cross += (a.estimate - h.h[0][0]) * a.estimate.adjoint();
        }
        const double tr_err = st.error_cov[0].trace().real();
        CHECK_THAT(err / n, WithinRel(tr_err, 0.1));
        CHECK((cross / n).norm() <= 0.1 * s.cov(0, 0).trace().real());

        for (int k = 0; k < 3; ++k)
        {
            CHECK(min_eigenvalue(s.cov(0, k) - st.error_cov[k]) >= -1e-9);
            CHECK(st.error_cov[k].trace().real() <= s.cov(0, k).trace().real());
            CHECK(min_eigenvalue(st.error_cov[k]) >= -1e-9);
        }
        CMatrix zt = CMatrix::Identity(8, 8);
        for (int k = 0; k < 3; ++k)
            zt += s.power(k) * st.error_cov[k];
        CHECK((zt - st.z_tilde).norm() < 1e-12 * zt.norm());
    }
}
