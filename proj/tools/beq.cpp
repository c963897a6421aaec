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

// Command-line front end:
//
//   beq run <config> --out <path>         Monte-Carlo sweep to CSV
//   beq check <config>                    oracle / condition / gap checks
//   beq asymptotic <config> --out <path>  closed-form and limit SINRs to CSV
//
// BEQ_WORKERS sets the number of trial threads (default: hardware threads).
// Exit codes: 0 ok, 1 failed check or computation, 2 usage or configuration error.

#include "beq/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

namespace {

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

int worker_count()
{
    const char *env = std::getenv("BEQ_WORKERS");
    if (env == nullptr || *env == '\0')
        return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    char *end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096)
        throw UsageError(std::string("BEQ_WORKERS must be a positive integer, got '") + env + "'");
    return static_cast<int>(n);
}

int fail(int code, const std::string &message)
{
    std::cerr << "beq: error: " << message << '\n';
    return code;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Bilinear equalizers for the massive MIMO uplink"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    auto *run = app.add_subcommand("run", "Monte-Carlo sweep over the (M, SNR) grid, written as CSV");
    run->add_option("config", config_path, "scenario configuration")->required();
    run->add_option("--out", out_path, "output CSV path")->required();
    auto *check = app.add_subcommand("check", "oracle equivalence, condition diagnostics and circulant-gap trend");
    check->add_option("config", config_path, "scenario configuration")->required();
    auto *asym = app.add_subcommand("asymptotic", "closed-form, asymptotic and limit SINRs, written as CSV");
    asym->add_option("config", config_path, "scenario configuration")->required();
    asym->add_option("--out", out_path, "output CSV path")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        std::string what = e.what();
        for (char &c : what)
            if (c == '\n')
                c = ' ';
        return fail(beq::exit_usage, "usage: " + what);
    }

    beq::ScenarioConfig cfg;
    try
    {
        cfg = beq::parse_config(config_path);
    }
    catch (const beq::Error &e)
    {
        return fail(beq::exit_usage, e.what());
    }

    try
    {
        if (run->parsed())
            return beq::cmd_run(cfg, out_path, worker_count(), std::cerr);
        if (check->parsed())
            return beq::cmd_check(cfg, std::cout);
        return beq::cmd_asymptotic(cfg, out_path, std::cerr);
    }
    catch (const UsageError &e)
    {
        return fail(beq::exit_usage, std::string("usage: ") + e.what());
    }
    catch (const beq::Error &e)
    {
        return fail(beq::exit_failure, e.what());
    }
    catch (const std::exception &e)
    {
        return fail(beq::exit_failure, e.what());
    }
}
