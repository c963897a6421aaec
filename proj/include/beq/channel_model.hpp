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

#ifndef BEQ_CHANNEL_MODEL_HPP
#define BEQ_CHANNEL_MODEL_HPP

#include "beq/config.hpp"
#include "beq/numerics.hpp"

#include <vector>

namespace beq {

// ---------- Angular densities -------------------------------------------------

struct Cluster
{
    double center; // radians, |center| < pi/2
    double spread; // Laplacian scale, radians
    double weight;
};

/// Folded angular power density on (-pi/2, pi/2) and the large-scale gain.
///
/// The Laplacian mixture is the default model. `flat_spectrum` is a synthetic
/// density (cos(theta)/2) whose ULA spectrum is the constant `gain`; it is the
/// analytic reference case for the circulant machinery.
struct AngularDensity
{
    enum class Shape
    {
        laplacian_mixture,
        flat_spectrum,
    };

    Shape shape = Shape::laplacian_mixture;
    std::vector<Cluster> clusters;
    double gain = 1.0;

    static AngularDensity flat(double gain)
    {
        AngularDensity d;
        d.shape = Shape::flat_spectrum;
        d.gain = gain;
        return d;
    }

    /// Non-smooth points of the density (quadrature breakpoints).
    std::vector<double> kinks() const
    {
        std::vector<double> out;
        for (const auto &c : clusters)
            out.push_back(c.center);
        return out;
    }

    bool operator==(const AngularDensity &other) const
    {
        if (shape != other.shape || gain != other.gain || clusters.size() != other.clusters.size())
            return false;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            if (clusters[i].center != other.clusters[i].center || clusters[i].spread != other.clusters[i].spread ||
                clusters[i].weight != other.clusters[i].weight)
                return false;
        return true;
    }
};

inline void validate(const AngularDensity &d)
{
    if (!(d.gain > 0))
        throw Error(ErrorKind::domain, "angular density: gain must be positive");
    if (d.shape == AngularDensity::Shape::flat_spectrum)
        return;
    if (d.clusters.empty())
        throw Error(ErrorKind::domain, "angular density: no clusters");
    double total = 0.0;
    for (const auto &c : d.clusters)
    {
        if (!(std::abs(c.center) < pi / 2))
            throw Error(ErrorKind::domain, "angular density: cluster center outside (-pi/2, pi/2)");
        if (!(c.spread > 0))
            throw Error(ErrorKind::domain, "angular density: cluster spread must be positive");
        if (!(c.weight >= 0))
            throw Error(ErrorKind::domain, "angular density: negative cluster weight");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorKind::domain, "angular density: cluster weights must sum to 1");
}

namespace detail {

// mass of the Laplacian (scale b, center c) inside (-pi/2, pi/2)
inline double truncated_laplacian_mass(double c, double b)
{
    return 1.0 - 0.5 * std::exp(-(pi / 2 - c) / b) - 0.5 * std::exp(-(pi / 2 + c) / b);
}

inline double density_value(const AngularDensity &d, double theta)
{
    if (d.shape == AngularDensity::Shape::flat_spectrum)
        return 0.5 * std::cos(theta);
    double value = 0.0;
    for (const auto &c : d.clusters)
    {
        if (c.weight == 0.0)
            continue;
        value += c.weight * std::exp(-std::abs(theta - c.center) / c.spread) /
                 (2.0 * c.spread * truncated_laplacian_mass(c.center, c.spread));
    }
    return value;
}

} // namespace detail

/// Folded density value (without the gain) at theta in (-pi/2, pi/2).
inline double density_eval(const AngularDensity &d, double theta)
{
    if (!(std::abs(theta) < pi / 2))
        throw Error(ErrorKind::domain, "density_eval: theta outside (-pi/2, pi/2)");
    return detail::density_value(d, theta);
}

/// Quadrature rule on (-pi/2, pi/2) split at the density kinks.
inline QuadratureRule angular_rule(const AngularDensity &d, int nodes_per_piece)
{
    return composite_gauss_legendre(-pi / 2, pi / 2, d.kinks(), nodes_per_piece);
}

// ---------- Steering vectors and covariance models -----------------------------

/// ULA with half-wavelength spacing: [a]_m = exp(j pi m sin(theta)).
inline CVector steering_vector(Eigen::Index m, double theta)
{
    if (m < 1)
        throw Error(ErrorKind::dimension, "steering_vector: M must be >= 1");
    const double phase = pi * std::sin(theta);
    CVector a(m);
    for (Eigen::Index i = 0; i < m; ++i)
        a(i) = std::polar(1.0, phase * static_cast<double>(i));
    return a;
}

enum class Structure
{
    dense,
    diagonal,  // diagonal in `basis`, diagonal values in `spectrum`
    circulant, // V diag(spectrum) V^H with spectrum sampled at 2 pi m / M
};

enum class Basis
{
    identity,
    dft,
};

struct CovarianceModel
{
    CMatrix matrix;
    Structure structure = Structure::dense;
    Basis basis = Basis::identity;
    RVector spectrum; // eigenvalues in `basis` for diagonal / circulant

    Eigen::Index size() const { return matrix.rows(); }

    /// True when the model is diagonal in the DFT basis.
    bool dft_diagonal() const
    {
        return structure == Structure::circulant || (structure == Structure::diagonal && basis == Basis::dft);
    }
};

inline CovarianceModel dense_covariance(CMatrix matrix)
{
    return CovarianceModel{std::move(matrix), Structure::dense, Basis::identity, {}};
}

inline CovarianceModel diagonal_covariance(const RVector &diagonal, Basis basis)
{
    CovarianceModel c;
    c.structure = Structure::diagonal;
    c.basis = basis;
    c.spectrum = diagonal;
    c.matrix = basis == Basis::identity ? CMatrix(diagonal.cast<Complex>().asDiagonal())
                                        : circulant_from_spectrum(diagonal);
    return c;
}

/// Covariance whose eigenvalues in the DFT basis are `spectrum` (synthetic override).
inline CovarianceModel circulant_covariance_from_spectrum(const RVector &spectrum)
{
    if ((spectrum.array() < 0).any())
        throw Error(ErrorKind::domain, "circulant covariance: negative spectrum value");
    CovarianceModel c;
    c.structure = Structure::circulant;
    c.basis = Basis::dft;
    c.spectrum = spectrum;
    c.matrix = circulant_from_spectrum(spectrum);
    return c;
}

/// Generator t[m] = beta * int exp(j pi m sin(theta)) eta(theta) dtheta, m = 0..M-1,
/// so that [C]_{mn} = t[m - n] = beta * int a(theta) a(theta)^H eta(theta) dtheta.
inline CVector toeplitz_generator(const AngularDensity &d, Eigen::Index m, int quadrature_nodes = 2048)
{
    validate(d);
    if (m < 1)
        throw Error(ErrorKind::dimension, "toeplitz_covariance: M must be >= 1");
    if (quadrature_nodes < 64)
        throw Error(ErrorKind::domain, "toeplitz_covariance: quadrature_nodes must be >= 64");

    const int pieces = static_cast<int>(d.kinks().size()) + 1;
    // enough nodes per piece to resolve exp(j pi (M-1) sin(theta))
    const int per_piece = std::max({(quadrature_nodes + pieces - 1) / pieces, 64, static_cast<int>(3 * m + 64)});
    const QuadratureRule rule = angular_rule(d, per_piece);

    const Eigen::Index n = rule.nodes.size();
    CVector weight(n), step(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        weight(i) = d.gain * rule.weights(i) * detail::density_value(d, rule.nodes(i));
        step(i) = std::polar(1.0, pi * std::sin(rule.nodes(i)));
    }

    CVector t(m);
    CVector phasor = CVector::Ones(n);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        if (k > 0 && k % 32 == 0)
        {
            // resynchronize the running phasors to bound round-off drift
            for (Eigen::Index i = 0; i < n; ++i)
                phasor(i) = std::polar(1.0, pi * static_cast<double>(k) * std::sin(rule.nodes(i)));
        }
        t(k) = (weight.array() * phasor.array()).sum();
        phasor.array() *= step.array();
    }
    return t;
}

/// Exact ULA covariance (Hermitian Toeplitz) of the density.
inline CovarianceModel toeplitz_covariance(const AngularDensity &d, Eigen::Index m, int quadrature_nodes = 2048)
{
    const CVector t = toeplitz_generator(d, m, quadrature_nodes);
    CMatrix c(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index k = 0; k < m; ++k)
            c(r, k) = r >= k ? t(r - k) : std::conj(t(k - r));

    // PSD check: accept eigenvalues >= -1e-10 beta, clip down to -1e-8 beta, fail below.
    const CMatrix identity = CMatrix::Identity(m, m);
    Eigen::LLT<CMatrix> strict(c + 1e-10 * d.gain * identity);
    if (strict.info() != Eigen::Success)
    {
        Eigen::LLT<CMatrix> loose(c + 1e-8 * d.gain * identity);
        if (loose.info() != Eigen::Success)
            throw Error(ErrorKind::numerical,
                        "toeplitz_covariance: covariance is not PSD (quadrature too coarse?)");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(c);
        c = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cast<Complex>().asDiagonal() *
            eig.eigenvectors().adjoint();
        c = hermitize(c);
    }
    return dense_covariance(std::move(c));
}

/// Wraps 2 pi k / M into (-pi, pi].
inline double dft_frequency(Eigen::Index k, Eigen::Index m)
{
    double w = 2.0 * pi * static_cast<double>(k) / static_cast<double>(m);
    if (w > pi)
        w -= 2.0 * pi;
    return w;
}

/// Spectrum f(w) = 2 pi beta eta(asin(w / pi)) / sqrt(pi^2 - w^2), with f(pi) = 0.
inline double ula_spectrum(const AngularDensity &d, double w)
{
    if (!(std::abs(w) < pi))
        return 0.0;
    const double theta = std::asin(w / pi);
    if (d.shape == AngularDensity::Shape::flat_spectrum)
        return d.gain;
    return 2.0 * pi * d.gain * detail::density_value(d, theta) / std::sqrt(pi * pi - w * w);
}

/// Circulant approximant with eigenvalues f(2 pi m / M) in the DFT basis.
inline CovarianceModel circulant_covariance(const AngularDensity &d, Eigen::Index m)
{
    validate(d);
    if (m < 1)
        throw Error(ErrorKind::dimension, "circulant_covariance: M must be >= 1");
    RVector spectrum(m);
    for (Eigen::Index k = 0; k < m; ++k)
        spectrum(k) = ula_spectrum(d, dft_frequency(k, m));
    return circulant_covariance_from_spectrum(spectrum);
}

/// (1/sqrt(M)) ||C_toeplitz - C_circulant||_F; its square is the normalized
/// Frobenius distance of the weak-equivalence criterion.
inline double toeplitz_circulant_gap(const AngularDensity &d, Eigen::Index m, int quadrature_nodes = 2048)
{
    const CovarianceModel t = toeplitz_covariance(d, m, quadrature_nodes);
    const CovarianceModel c = circulant_covariance(d, m);
    return (t.matrix - c.matrix).norm() / std::sqrt(static_cast<double>(m));
}

/// Covariance of the density under the requested construction.
inline CovarianceModel make_covariance(const AngularDensity &d, Eigen::Index m, CovarianceMode mode,
                                       int quadrature_nodes = 2048)
{
    switch (mode)
    {
    case CovarianceMode::toeplitz: return toeplitz_covariance(d, m, quadrature_nodes);
    case CovarianceMode::circulant: return circulant_covariance(d, m);
    case CovarianceMode::diagonal:
        return diagonal_covariance(dft_diagonal(toeplitz_covariance(d, m, quadrature_nodes).matrix).cwiseMax(0.0),
                                   Basis::dft);
    case CovarianceMode::identity: return diagonal_covariance(RVector::Ones(m), Basis::identity);
    }
    throw Error(ErrorKind::config, "unknown covariance mode");
}

/// tr(C) / M without building C.
inline double mean_channel_power(const AngularDensity &d, Eigen::Index m, CovarianceMode mode,
                                 int quadrature_nodes = 2048)
{
    switch (mode)
    {
    case CovarianceMode::toeplitz:
    case CovarianceMode::diagonal: {
        const QuadratureRule rule = angular_rule(d, std::max(quadrature_nodes / 4, 64));
        double mass = 0.0;
        for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
            mass += rule.weights(i) * detail::density_value(d, rule.nodes(i));
        return d.gain * mass;
    }
    case CovarianceMode::circulant: {
        double sum = 0.0;
        for (Eigen::Index k = 0; k < m; ++k)
            sum += ula_spectrum(d, dft_frequency(k, m));
        return sum / static_cast<double>(m);
    }
    case CovarianceMode::identity: return 1.0;
    }
    return 0.0;
}

// ---------- Network geometry and scenarios -------------------------------------

/// Three hexagonal cells sharing a vertex at the origin; each base station sits
/// at the far corner of its cell (distance = cell diameter from the origin) and
/// points at the origin. Users are dropped in a disc around the origin, each in
/// the 120-degree wedge that belongs to its cell.
struct NetworkGeometry
{
    int cells = 3;
    double cell_diameter = 500.0;
    std::vector<Eigen::Vector2d> bs_positions;
    std::vector<double> bs_boresights;
    double user_disc_radius = 125.0;
    double pathloss_exponent = 3.7;
    double reference_distance = 50.0;

    static NetworkGeometry hexagonal(const NetworkConfig &cfg)
    {
        NetworkGeometry g;
        g.cells = cfg.cells;
        g.cell_diameter = cfg.cell_diameter_m;
        g.user_disc_radius = cfg.user_disc_radius();
        g.pathloss_exponent = cfg.pathloss_exponent;
        g.reference_distance = cfg.reference_distance_m;
        for (int l = 0; l < cfg.cells; ++l)
        {
            const double dir = cell_direction(l);
            g.bs_positions.emplace_back(cfg.cell_diameter_m * std::cos(dir), cfg.cell_diameter_m * std::sin(dir));
            g.bs_boresights.push_back(wrap_angle(dir + pi));
        }
        return g;
    }

    static double cell_direction(int cell) { return 2.0 * pi * cell / 3.0; }

    static double wrap_angle(double a)
    {
        a = std::remainder(a, 2.0 * pi);
        return a <= -pi ? a + 2.0 * pi : a;
    }

    double distance(int bs, const Eigen::Vector2d &p) const { return (p - bs_positions[bs]).norm(); }

    /// Arrival angle relative to the array broadside.
    double bearing(int bs, const Eigen::Vector2d &p) const
    {
        const Eigen::Vector2d d = p - bs_positions[bs];
        return wrap_angle(std::atan2(d.y(), d.x()) - bs_boresights[bs]);
    }

    double gain(double dist) const
    {
        return std::pow(std::max(dist, reference_distance) / reference_distance, -pathloss_exponent);
    }
};

struct UserState
{
    int serving_bs = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    int pilot = 0;
    double power = 1.0;
};

/// M-independent part of a scenario: geometry, users and their densities.
struct UserDrop
{
    NetworkGeometry geometry;
    std::vector<UserState> users;
    std::vector<std::vector<AngularDensity>> densities; // [bs][user]
    std::vector<AngularDensity> probes;                 // center probe per bs
    int pilot_count = 1;
};

struct Scenario
{
    Eigen::Index antennas = 0;
    int pilot_count = 1;
    double rho_tr = 1.0;
    double rho_ul_db = 0.0;
    std::vector<UserState> users;
    std::vector<std::vector<CovarianceModel>> covariances; // [bs][user]
    std::vector<std::vector<AngularDensity>> densities;    // [bs][user]; empty for synthetic scenarios

    int bs_count() const { return static_cast<int>(covariances.size()); }
    int user_count() const { return static_cast<int>(users.size()); }
    const CMatrix &cov(int bs, int user) const { return covariances[bs][user].matrix; }
    double power(int user) const { return users[user].power; }

    std::vector<int> pilot_group(int pilot) const
    {
        std::vector<int> out;
        for (int k = 0; k < user_count(); ++k)
            if (users[k].pilot == pilot)
                out.push_back(k);
        return out;
    }

    /// Users sharing the pilot of `user`, excluding `user`.
    std::vector<int> co_pilot_users(int user) const
    {
        std::vector<int> out;
        for (int k : pilot_group(users[user].pilot))
            if (k != user)
                out.push_back(k);
        return out;
    }

    std::vector<int> served_users(int bs) const
    {
        std::vector<int> out;
        for (int k = 0; k < user_count(); ++k)
            if (users[k].serving_bs == bs)
                out.push_back(k);
        return out;
    }

    std::vector<int> used_pilots() const
    {
        std::vector<int> out;
        for (const auto &u : users)
            if (std::find(out.begin(), out.end(), u.pilot) == out.end())
                out.push_back(u.pilot);
        std::sort(out.begin(), out.end());
        return out;
    }
};

namespace detail {

inline AngularDensity sample_density(double bearing, double gain, const ChannelConfig &cfg, Rng &rng)
{
    constexpr double edge = pi / 2 - 1e-3;
    const double spread = cfg.angular_spread_deg * pi / 180.0;
    const double offset = cfg.cluster_offset_deg * pi / 180.0;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    AngularDensity d;
    d.gain = gain;
    double total = 0.0;
    for (int c = 0; c < cfg.clusters; ++c)
    {
        // first cluster on the geometric bearing, the others scattered around it
        const double shift = c == 0 ? 0.0 : offset * (2.0 * uniform(rng) - 1.0);
        const double weight = -std::log(1.0 - uniform(rng)); // Dirichlet(1, ..., 1) after normalization
        d.clusters.push_back({std::clamp(bearing + shift, -edge, edge), spread, weight});
        total += weight;
    }
    for (auto &c : d.clusters)
        c.weight /= total;
    return d;
}

} // namespace detail

/// Samples user positions and per-link angular densities.
inline UserDrop drop_users(const ScenarioConfig &cfg, Rng &rng)
{
    validate(cfg);
    UserDrop drop;
    drop.geometry = NetworkGeometry::hexagonal(cfg.network);
    drop.pilot_count = cfg.network.pilot_count();
    const auto &g = drop.geometry;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    for (int l = 0; l < g.cells; ++l)
    {
        for (int i = 0; i < cfg.network.users_per_cell; ++i)
        {
            const double r = g.user_disc_radius * std::sqrt(uniform(rng));
            const double phi = NetworkGeometry::cell_direction(l) + (uniform(rng) - 0.5) * 2.0 * pi / 3.0;
            UserState u;
            u.serving_bs = l;
            u.position = Eigen::Vector2d(r * std::cos(phi), r * std::sin(phi));
            u.pilot = i;
            drop.users.push_back(u);
        }
    }

    drop.densities.resize(g.cells);
    for (int b = 0; b < g.cells; ++b)
    {
        for (const auto &u : drop.users)
        {
            const double bearing = g.bearing(b, u.position);
            drop.densities[b].push_back(
                detail::sample_density(bearing, g.gain(g.distance(b, u.position)), cfg.channel, rng));
        }
        AngularDensity probe;
        probe.gain = g.gain(g.distance(b, Eigen::Vector2d::Zero()));
        probe.clusters.push_back({0.0, cfg.channel.angular_spread_deg * pi / 180.0, 1.0});
        drop.probes.push_back(probe);
    }

    if (cfg.channel.shared_density_pilot >= 0)
    {
        // engineered degeneracy: one density per base station for the whole pilot group
        int first = -1;
        for (int k = 0; k < static_cast<int>(drop.users.size()); ++k)
        {
            if (drop.users[k].pilot != cfg.channel.shared_density_pilot)
                continue;
            if (first < 0)
                first = k;
            else
                for (int b = 0; b < g.cells; ++b)
                    drop.densities[b][k] = drop.densities[b][first];
        }
    }
    return drop;
}

/// Sets powers and the training SNR so that a probe user at the network
/// center sees per-antenna SNR rho_ul: p tr(C_probe) / M = rho_ul.
inline void set_snr(Scenario &s, double probe_power_per_antenna, double snr_db, std::optional<double> rho_tr_db)
{
    const double power = db_to_linear(snr_db) / probe_power_per_antenna;
    for (auto &u : s.users)
        u.power = power;
    s.rho_ul_db = snr_db;
    s.rho_tr = rho_tr_db ? db_to_linear(*rho_tr_db) / probe_power_per_antenna : power;
}

/// Probe normalizer tr(C_probe)/M of the drop at M under the configured mode.
inline double probe_power(const ScenarioConfig &cfg, const UserDrop &drop, Eigen::Index m)
{
    return mean_channel_power(drop.probes.front(), m, cfg.channel.covariance_mode, cfg.channel.quadrature_nodes);
}

/// Covariances at M antennas and powers at the given SNR for a user drop.
inline Scenario realize_scenario(const ScenarioConfig &cfg, const UserDrop &drop, Eigen::Index m, double snr_db)
{
    if (m < 1)
        throw Error(ErrorKind::dimension, "realize_scenario: M must be >= 1");
    Scenario s;
    s.antennas = m;
    s.pilot_count = drop.pilot_count;
    s.users = drop.users;
    s.densities = drop.densities;
    s.covariances.resize(drop.densities.size());
    for (std::size_t b = 0; b < drop.densities.size(); ++b)
    {
        s.covariances[b].reserve(drop.densities[b].size());
        for (const auto &d : drop.densities[b])
            s.covariances[b].push_back(
                make_covariance(d, m, cfg.channel.covariance_mode, cfg.channel.quadrature_nodes));
    }
    set_snr(s, probe_power(cfg, drop, m), snr_db, cfg.sim.rho_tr_db);
    return s;
}

/// Full scenario for one (M, SNR) point from a seed.
inline Scenario build_scenario(const ScenarioConfig &cfg, Rng &rng, Eigen::Index m, double snr_db)
{
    const UserDrop drop = drop_users(cfg, rng);
    return realize_scenario(cfg, drop, m, snr_db);
}

} // namespace beq

#endif // BEQ_CHANNEL_MODEL_HPP
