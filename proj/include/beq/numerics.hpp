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

#ifndef BEQ_NUMERICS_HPP
#define BEQ_NUMERICS_HPP

#include "beq/core.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace beq {

// ---------- Quadrature ------------------------------------------------------

struct QuadratureRule
{
    RVector nodes;
    RVector weights;
};

namespace detail {

inline QuadratureRule compute_gauss_legendre(int n)
{
    // Legendre P_n(x) and P_n'(x) by the three-term recurrence
    auto legendre = [n](double x, double &derivative) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k)
        {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        derivative = n * (x * p1 - p0) / (x * x - 1.0);
        return p1;
    };

    QuadratureRule rule{RVector(n), RVector(n)};
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i)
    {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter)
        {
            const double dx = legendre(x, dp) / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        legendre(x, dp);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes(i) = -x;
        rule.nodes(n - 1 - i) = x;
        rule.weights(i) = w;
        rule.weights(n - 1 - i) = w;
    }
    if (n % 2 == 1)
        rule.nodes(n / 2) = 0.0;
    return rule;
}

} // namespace detail

/// Gauss-Legendre rule on [-1, 1]. Rules are cached per node count.
inline std::shared_ptr<const QuadratureRule> gauss_legendre(int n)
{
    if (n < 1)
        throw Error(ErrorKind::domain, "gauss_legendre: node count must be >= 1");
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<const QuadratureRule>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;
    auto rule = std::make_shared<const QuadratureRule>(detail::compute_gauss_legendre(n));
    cache.emplace(n, rule);
    return rule;
}

/// Composite Gauss-Legendre on [a, b], split at the given interior breakpoints,
/// n nodes per piece.
inline QuadratureRule composite_gauss_legendre(double a, double b, std::vector<double> breakpoints, int n)
{
    breakpoints.erase(std::remove_if(breakpoints.begin(), breakpoints.end(),
                                     [&](double x) { return !(x > a && x < b); }),
                      breakpoints.end());
    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end(),
                                  [](double x, double y) { return std::abs(x - y) < 1e-12; }),
                      breakpoints.end());

    const auto base = gauss_legendre(n);
    const Eigen::Index pieces = static_cast<Eigen::Index>(breakpoints.size()) - 1;
    QuadratureRule rule{RVector(pieces * n), RVector(pieces * n)};
    for (Eigen::Index s = 0; s < pieces; ++s)
    {
        const double lo = breakpoints[s], hi = breakpoints[s + 1];
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        rule.nodes.segment(s * n, n) = (mid + half * base->nodes.array()).matrix();
        rule.weights.segment(s * n, n) = half * base->weights;
    }
    return rule;
}

// ---------- Hermitian helpers -----------------------------------------------

inline CMatrix hermitize(const CMatrix &a) { return 0.5 * (a + a.adjoint()); }

inline double max_hermitian_defect(const CMatrix &a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const CMatrix &a)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitize(a), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

/// Cholesky factor of a Hermitian positive definite matrix; throws on failure.
inline Eigen::LLT<CMatrix> hermitian_factor(const CMatrix &a, const char *what)
{
    Eigen::LLT<CMatrix> llt(hermitize(a));
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, std::string(what) + ": matrix is not positive definite");
    return llt;
}

inline Eigen::LLT<RMatrix> hermitian_factor(const RMatrix &a, const char *what)
{
    Eigen::LLT<RMatrix> llt(0.5 * (a + a.transpose()));
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, std::string(what) + ": matrix is not positive definite");
    return llt;
}

/// 2-norm condition number of a Hermitian matrix (inf when singular).
template <typename Matrix>
double hermitian_condition(const Matrix &a)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    const auto ev = eig.eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    return lo > 0.0 ? ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

// ---------- DFT basis -------------------------------------------------------
//
// Unitary basis V with [V]_{m,l} = exp(j m w_l) / sqrt(M), w_l = 2 pi l / M.
// The columns are normalized ULA steering vectors; V diagonalizes circulant
// matrices built from a sampled spectrum.

namespace detail {
inline Eigen::FFT<double> &thread_fft()
{
    thread_local Eigen::FFT<double> fft;
    return fft;
}
} // namespace detail

/// V^H x
inline CVector dft_analysis(const CVector &x)
{
    if (x.size() < 2)
        return x;
    CVector out;
    detail::thread_fft().fwd(out, x);
    return out / std::sqrt(static_cast<double>(x.size()));
}

/// V y
inline CVector dft_synthesis(const CVector &y)
{
    if (y.size() < 2)
        return y;
    CVector out;
    detail::thread_fft().inv(out, y);
    return out * std::sqrt(static_cast<double>(y.size()));
}

/// V^H X V
inline CMatrix dft_conjugate(const CMatrix &x)
{
    const Eigen::Index m = x.rows();
    CMatrix left(m, m);
    for (Eigen::Index c = 0; c < m; ++c)
        left.col(c) = dft_analysis(x.col(c));
    CMatrix lh = left.adjoint();
    CMatrix out(m, m);
    for (Eigen::Index c = 0; c < m; ++c)
        out.col(c) = dft_analysis(lh.col(c));
    return out.adjoint();
}

/// Real diagonal of V^H X V for Hermitian X.
inline RVector dft_diagonal(const CMatrix &x) { return dft_conjugate(x).diagonal().real(); }

/// Explicit V (tests and small dense paths).
inline CMatrix dft_matrix(Eigen::Index m)
{
    CMatrix v(m, m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index l = 0; l < m; ++l)
            v(r, l) = std::polar(scale, 2.0 * pi * static_cast<double>((r * l) % m) / static_cast<double>(m));
    return v;
}

/// Circulant matrix V diag(spectrum) V^H.
inline CMatrix circulant_from_spectrum(const RVector &spectrum)
{
    const Eigen::Index m = spectrum.size();
    // first column c[d] = (1/M) sum_l f_l exp(j d w_l)
    CVector col;
    detail::thread_fft().inv(col, CVector(spectrum.cast<Complex>()));
    CMatrix out(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c)
            out(r, c) = col((r - c + m) % m);
    return out;
}

} // namespace beq

#endif // BEQ_NUMERICS_HPP
