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

#ifndef BEQ_CSV_HPP
#define BEQ_CSV_HPP

#include "beq/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace beq {

/// One output line: method,M,snr_db,metric,user,value,stderr
struct ResultRow
{
    std::string method;
    int m = 0;
    double snr_db = 0.0;
    std::string metric;
    std::string user;
    double value = 0.0;
    double stderr_ = 0.0;
};

inline constexpr const char *csv_header = "method,M,snr_db,metric,user,value,stderr";

/// %.17g, with "nan", "inf" and "-inf" spelled the same on every platform.
inline std::string format_value(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

// numeric user ids first, then labels
inline std::tuple<int, long long, std::string> user_key(const std::string &u)
{
    if (!u.empty() && std::all_of(u.begin(), u.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return {0, std::stoll(u), ""};
    return {1, 0, u};
}

} // namespace detail

/// Sort by (method, M, snr_db, user), then metric.
inline void sort_rows(std::vector<ResultRow> &rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow &a, const ResultRow &b) {
        return std::forward_as_tuple(a.method, a.m, a.snr_db) < std::forward_as_tuple(b.method, b.m, b.snr_db) ||
               (std::forward_as_tuple(a.method, a.m, a.snr_db) == std::forward_as_tuple(b.method, b.m, b.snr_db) &&
                std::make_tuple(detail::user_key(a.user), a.metric) <
                    std::make_tuple(detail::user_key(b.user), b.metric));
    });
}

inline std::vector<ResultRow> to_result_rows(const SweepResult &r)
{
    std::vector<ResultRow> out;
    out.reserve(r.rows.size());
    for (const auto &row : r.rows)
        out.push_back({std::string(to_string(row.method)), row.m, row.snr_db, std::string(to_string(row.metric)),
                       row.user_label(), row.value, row.stderr_});
    sort_rows(out);
    return out;
}

inline void write_csv(std::ostream &os, const std::vector<ResultRow> &rows)
{
    os << csv_header << '\n';
    for (const auto &r : rows)
        os << r.method << ',' << r.m << ',' << format_value(r.snr_db) << ',' << r.metric << ',' << r.user << ','
           << format_value(r.value) << ',' << format_value(r.stderr_) << '\n';
}

inline void write_csv_file(const std::string &path, const std::vector<ResultRow> &rows)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw Error(ErrorKind::config, "cannot open '" + path + "' for writing");
    write_csv(os, rows);
    os.flush();
    if (!os)
        throw Error(ErrorKind::config, "failed writing '" + path + "'");
}

} // namespace beq

#endif // BEQ_CSV_HPP
