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

#ifndef BEQ_CORE_HPP
#define BEQ_CORE_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beq {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

enum class ErrorKind
{
    config,      // invalid or inconsistent configuration
    domain,      // argument outside the mathematical domain
    dimension,   // size mismatch or size guard
    numerical,   // singular / non-PSD / ill-conditioned
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::config: return "config";
    case ErrorKind::domain: return "domain";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

/// Library error. what() is a single line, "<kind>: <message>".
class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    const std::string &message() const noexcept { return message_; }

  private:
    ErrorKind kind_;
    std::string message_;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream for (master seed, point, trial, purpose). Independent of scheduling.
inline Rng derive_rng(std::uint64_t master, std::uint64_t point, std::uint64_t trial, std::uint64_t purpose)
{
    std::uint64_t s = mix_seed(master);
    s = mix_seed(s ^ point);
    s = mix_seed(s ^ (trial * 0x632be59bd9b4e019ULL));
    s = mix_seed(s ^ (purpose + 0x1234567ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Rng(seq);
}

/// Standard circularly-symmetric complex Gaussian vector, E[zz^H] = I.
inline CVector standard_complex_normal(Eigen::Index n, Rng &rng)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    CVector z(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double re = normal(rng);
        const double im = normal(rng);
        z(i) = Complex(re, im);
    }
    return z;
}

/// Receive-filter families.
enum class Method
{
    ls_mf,
    mmse_mf,
    obe,
    obe_d,
    lmmse,
    mmse_zf,
};

inline constexpr Method all_methods[] = {Method::ls_mf, Method::mmse_mf, Method::obe,
                                         Method::obe_d, Method::lmmse,   Method::mmse_zf};

inline std::string_view to_string(Method m)
{
    switch (m)
    {
    case Method::ls_mf: return "ls-mf";
    case Method::mmse_mf: return "mmse-mf";
    case Method::obe: return "obe";
    case Method::obe_d: return "obe-d";
    case Method::lmmse: return "lmmse";
    case Method::mmse_zf: return "mmse-zf";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name)
{
    for (Method m : all_methods)
        if (to_string(m) == name)
            return m;
    throw Error(ErrorKind::config, "unknown method '" + std::string(name) + "'");
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace beq

#endif // BEQ_CORE_HPP
