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

#include "beq/channel_model.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>
#include <functional>

using namespace beq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// composite Simpson on [a, b] with n (even) intervals
template <typename F>
auto simpson(F f, double a, double b, int n)
{
    const double h = (b - a) / n;
    auto sum = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return sum * (h / 3.0);
}

AngularDensity laplacian(std::vector<Cluster> clusters, double gain = 1.0)
{
    AngularDensity d;
    d.clusters = std::move(clusters);
    d.gain = gain;
    return d;
}

AngularDensity sample_mixture()
{
    return laplacian({{0.3, 0.15, 0.5}, {-0.2, 0.1, 0.3}, {0.9, 0.2, 0.2}}, 2.5);
}

} // namespace

TEST_CASE("steering vectors")
{
    CHECK((steering_vector(2, 0.0) - CVector::Ones(2)).norm() < 1e-15);
    CVector e(2);
    e << 1.0, -1.0;
    CHECK((steering_vector(2, pi / 2) - e).norm() < 1e-15);
    CVector q(4);
    q << Complex(1, 0), Complex(0, 1), Complex(-1, 0), Complex(0, -1);
    CHECK((steering_vector(4, pi / 6) - q).norm() < 1e-14);
    CHECK_THROWS_AS(steering_vector(0, 0.1), Error);
}

TEST_CASE("density evaluation")
{
    const double c = 0.4, s = 0.2;
    const AngularDensity d = laplacian({{c, s, 1.0}});
    // truncation mass of the Laplacian by independent integration
    const double mass = simpson([&](double t) { return std::exp(-std::abs(t - c) / s) / (2 * s); }, -pi / 2, c, 20000) +
                        simpson([&](double t) { return std::exp(-std::abs(t - c) / s) / (2 * s); }, c, pi / 2, 20000);
    CHECK_THAT(density_eval(d, c), WithinRel(1.0 / (2 * s * mass), 1e-10));

    const AngularDensity with_zero = laplacian({{c, s, 1.0}, {-0.7, 0.05, 0.0}});
    CHECK(density_eval(with_zero, -0.7) == density_eval(d, -0.7));

    const AngularDensity mirrored = laplacian({{0.5, 0.1, 0.5}, {-0.5, 0.1, 0.5}});
    for (double t : {0.1, 0.33, 1.2})
        CHECK_THAT(density_eval(mirrored, t), WithinRel(density_eval(mirrored, -t), 1e-14));

    CHECK_THROWS_AS(density_eval(d, pi / 2), Error);
    CHECK_THROWS_AS(density_eval(d, -2.0), Error);
}

TEST_CASE("densities integrate to one")
{
    const AngularDensity d = sample_mixture();
    std::vector<double> breaks{-pi / 2, -0.2, 0.3, 0.9, pi / 2};
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        total += simpson([&](double t) { return density_eval(d, t); }, breaks[i] + 1e-15, breaks[i + 1] - 1e-15,
                         20000);
    CHECK_THAT(total, WithinRel(1.0, 1e-6));
    CHECK_THROWS_AS(validate(laplacian({{0.1, 0.1, 0.6}})), Error);
    CHECK_THROWS_AS(validate(laplacian({{0.1, -0.1, 1.0}})), Error);
    CHECK_THROWS_AS(validate(laplacian({{1.7, 0.1, 1.0}})), Error);
}

TEST_CASE("toeplitz covariance entries")
{
    const AngularDensity d = sample_mixture();
    const CovarianceModel c = toeplitz_covariance(d, 24);
    REQUIRE(c.structure == Structure::dense);
    for (Eigen::Index i = 0; i < 24; ++i)
        CHECK_THAT(c.matrix(i, i).real(), WithinRel(d.gain, 1e-10));
    CHECK(max_hermitian_defect(c.matrix) <= 1e-12);
    CHECK(min_eigenvalue(c.matrix) >= -1e-10 * d.gain);
    CHECK_THAT(c.matrix.trace().real(), WithinRel(24 * d.gain, 1e-10));

    // every entry against an independent Simpson evaluation of beta * int a a^H eta
    for (int lag : {1, 5, 23})
    {
        auto integrand = [&](double t) {
            return d.gain * std::polar(1.0, pi * lag * std::sin(t)) * density_eval(d, t);
        };
        std::vector<double> breaks{-pi / 2, -0.2, 0.3, 0.9, pi / 2};
        Complex oracle = 0.0;
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
            oracle += simpson(integrand, breaks[i] + 1e-15, breaks[i + 1] - 1e-15, 40000);
        CHECK(std::abs(c.matrix(lag, 0) - oracle) < 1e-9 * d.gain);
        CHECK(std::abs(c.matrix(0, lag) - std::conj(oracle)) < 1e-9 * d.gain);
    }
}

TEST_CASE("near-uniform density gives the Bessel lag")
{
    // a very wide Laplacian is uniform on (-pi/2, pi/2) to O(1/sigma)
    const AngularDensity d = laplacian({{0.0, 1e5, 1.0}});
    const CVector t = toeplitz_generator(d, 2);
    const double oracle =
        simpson([](double th) { return std::cos(pi * std::sin(th)) / pi; }, -pi / 2, pi / 2, 200000);
    CHECK_THAT(t(1).real(), WithinAbs(oracle, 1e-4));
    CHECK(std::abs(t(1).imag()) < 1e-12);
}

TEST_CASE("narrow cluster approaches the rank-one steering covariance")
{
    const double center = 0.35, beta = 1.7;
    const AngularDensity d = laplacian({{center, 1e-4, 1.0}}, beta);
    const CMatrix c = toeplitz_covariance(d, 16).matrix;
    const CVector a = steering_vector(16, center);
    const CMatrix rank_one = beta * a * a.adjoint();
    CHECK((c - rank_one).cwiseAbs().maxCoeff() < 0.01 * beta);
}

TEST_CASE("mirroring the density conjugates the generator")
{
    AngularDensity d = sample_mixture();
    AngularDensity m = d;
    for (auto &c : m.clusters)
        c.center = -c.center;
    const CVector t = toeplitz_generator(d, 40);
    const CVector tm = toeplitz_generator(m, 40);
    CHECK((t.conjugate() - tm).norm() < 1e-12 * t.norm());
}

TEST_CASE("circulant approximant")
{
    // flat spectrum: white covariance (odd M avoids the forced zero at pi)
    const CovarianceModel white = circulant_covariance(AngularDensity::flat(2.0), 9);
    CHECK((white.matrix - 2.0 * CMatrix::Identity(9, 9)).norm() < 1e-13);
    CHECK(white.structure == Structure::circulant);
    CHECK(white.basis == Basis::dft);

    const CovarianceModel even = circulant_covariance(AngularDensity::flat(2.0), 8);
    CHECK(even.spectrum(4) == 0.0);
    CHECK(dft_frequency(4, 8) == pi);
    CHECK(dft_frequency(5, 8) < 0.0);

    // stored spectrum reproduces the matrix
    const AngularDensity d = sample_mixture();
    const CovarianceModel c = circulant_covariance(d, 32);
    CHECK((c.spectrum.array() >= 0).all());
    const CMatrix v = dft_matrix(32);
    const CMatrix rebuilt = v * c.spectrum.cast<Complex>().asDiagonal() * v.adjoint();
    CHECK((rebuilt - c.matrix).norm() < 1e-10 * c.matrix.norm());

    // Riemann sums of the spectrum converge to beta
    double prev = 1e300;
    for (Eigen::Index m : {64, 256, 1024})
    {
        const double err = std::abs(circulant_covariance(d, m).spectrum.mean() - d.gain);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.01 * d.gain);
}

TEST_CASE("toeplitz-circulant gap")
{
    CHECK(toeplitz_circulant_gap(AngularDensity::flat(1.0), 33) < 1e-10);
    const AngularDensity d = sample_mixture();
    const double g64 = toeplitz_circulant_gap(d, 64);
    const double g256 = toeplitz_circulant_gap(d, 256);
    const double g1024 = toeplitz_circulant_gap(d, 1024);
    CHECK(g256 < g64);
    CHECK(g1024 / g64 < 0.5);
}

TEST_CASE("covariance modes")
{
    const AngularDensity d = sample_mixture();
    const CovarianceModel diag = make_covariance(d, 16, CovarianceMode::diagonal);
    CHECK(diag.structure == Structure::diagonal);
    CHECK(diag.basis == Basis::dft);
    CHECK((diag.spectrum - dft_diagonal(toeplitz_covariance(d, 16).matrix)).norm() < 1e-12);
    const CovarianceModel id = make_covariance(d, 5, CovarianceMode::identity);
    CHECK((id.matrix - CMatrix::Identity(5, 5)).norm() == 0.0);
    CHECK_THAT(mean_channel_power(d, 16, CovarianceMode::toeplitz), WithinRel(d.gain, 1e-9));
    CHECK_THAT(mean_channel_power(d, 16, CovarianceMode::circulant),
               WithinRel(circulant_covariance(d, 16).matrix.trace().real() / 16, 1e-12));
}

TEST_CASE("network geometry")
{
    NetworkConfig cfg;
    const NetworkGeometry g = NetworkGeometry::hexagonal(cfg);
    REQUIRE(g.bs_positions.size() == 3);
    for (int b = 0; b < 3; ++b)
    {
        CHECK_THAT(g.bs_positions[b].norm(), WithinRel(500.0, 1e-12));
        // boresight points at the network center
        CHECK(std::abs(g.bearing(b, Eigen::Vector2d::Zero())) < 1e-12);
    }
    CHECK_THAT(g.gain(25.0), WithinRel(1.0, 1e-15));
    CHECK_THAT(g.gain(100.0), WithinRel(std::pow(2.0, -3.7), 1e-14));
}

TEST_CASE("scenario construction")
{
    ScenarioConfig cfg;
    cfg.sim.antennas = {16};
    Rng r1(5), r2(5);
    const Scenario a = build_scenario(cfg, r1, 16, -6.0);
    const Scenario b = build_scenario(cfg, r2, 16, -6.0);
    REQUIRE(a.user_count() == 15);
    for (int bs = 0; bs < 3; ++bs)
        for (int k = 0; k < 15; ++k)
            CHECK(a.cov(bs, k) == b.cov(bs, k));

    CHECK(a.used_pilots().size() == 5);
    for (int p = 0; p < 5; ++p)
    {
        const auto group = a.pilot_group(p);
        REQUIRE(group.size() == 3);
        std::vector<int> cells;
        for (int k : group)
            cells.push_back(a.users[k].serving_bs);
        std::sort(cells.begin(), cells.end());
        CHECK(cells == std::vector<int>{0, 1, 2});
    }
    for (const auto &u : a.users)
        CHECK(u.position.norm() <= 125.0);

    // center probe normalization: p tr(C_probe)/M = rho_ul
    Rng r3(5);
    const UserDrop drop = drop_users(cfg, r3);
    const CovarianceModel probe = toeplitz_covariance(drop.probes[0], 16);
    CHECK_THAT(a.power(0) * probe.matrix.trace().real() / 16, WithinRel(db_to_linear(-6.0), 1e-9));
    CHECK(a.rho_tr == a.power(0));

    // path loss follows the distance law
    const NetworkGeometry &g = drop.geometry;
    for (int k = 0; k < 15; ++k)
        CHECK_THAT(drop.densities[1][k].gain, WithinRel(g.gain(g.distance(1, drop.users[k].position)), 1e-14));

    cfg.sim.rho_tr_db = 10.0;
    const Scenario fixed = realize_scenario(cfg, drop, 16, -6.0);
    CHECK_THAT(fixed.rho_tr * probe.matrix.trace().real() / 16, WithinRel(10.0, 1e-9));
}

TEST_CASE("shared density option duplicates covariances within a pilot group")
{
    ScenarioConfig cfg;
    cfg.sim.antennas = {8};
    cfg.channel.shared_density_pilot = 2;
    Rng rng(3);
    const Scenario s = build_scenario(cfg, rng, 8, 0.0);
    const auto group = s.pilot_group(2);
    CHECK(s.cov(0, group[0]) == s.cov(0, group[1]));
    CHECK(s.cov(0, group[0]) == s.cov(0, group[2]));
    const auto other = s.pilot_group(1);
    CHECK(s.cov(0, other[0]) != s.cov(0, other[1]));
}
