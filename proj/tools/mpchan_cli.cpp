// SPDX-License-Identifier: Apache-2.0
//
// mpchan: multipath MIMO channel synthesis, estimation, and characterization
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

#include "mpchan/campaign.hpp"
#include "mpchan/errors.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumerical = 4;

fs::path resolve_out(const std::string &cli_out, const mpchan::CampaignConfig &config,
                     const char *fallback) {
    if (!cli_out.empty())
        return cli_out;
    if (!config.out_dir.empty())
        return config.out_dir;
    if (const char *root = std::getenv("MPCHAN_OUT_ROOT"))
        return fs::path(root) / fallback;
    return fallback;
}

void apply_overrides(mpchan::CampaignConfig &config, std::uint64_t seed_override, int jobs,
                     int k_max, double stop_db) {
    if (seed_override != 0)
        config.seed = seed_override;
    if (jobs > 0)
        config.jobs = jobs;
    if (k_max > 0)
        config.dmc_k_max = k_max;
    if (stop_db < 0.0)
        config.sage_stop_db = stop_db;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"multipath MIMO channel synthesis, estimation, and characterization"};
    app.require_subcommand(1);

    std::string config_path, out, manifest, estimates;
    std::vector<std::string> containers;
    std::uint64_t seed_override = 0;
    int jobs = 0, k_max = 0;
    double stop_db = 0.0;

    auto add_common = [&](CLI::App *cmd, bool needs_config = true) {
        auto *opt = cmd->add_option("--config", config_path, "campaign configuration file");
        if (needs_config)
            opt->required();
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed-override", seed_override, "override the campaign seed");
        cmd->add_option("--jobs", jobs, "worker threads");
        cmd->add_option("--k-max", k_max, "cap on detected DMC processes");
        cmd->add_option("--stop-db", stop_db, "SMC stop threshold relative to the first path");
    };

    CLI::App *synth = app.add_subcommand("synth", "synthesize channel containers");
    add_common(synth);

    CLI::App *estimate = app.add_subcommand("estimate", "estimate SMC and DMC parameters");
    add_common(estimate);
    estimate->add_option("containers", containers, "container files")->required();

    CLI::App *characterize = app.add_subcommand("characterize", "compute the statistics report");
    add_common(characterize);
    characterize->add_option("--manifest", manifest, "campaign manifest")->required();
    characterize->add_option("--estimates", estimates, "estimation output directory")->required();

    CLI::App *pipeline = app.add_subcommand("pipeline", "synth, estimate, characterize");
    add_common(pipeline);

    CLI11_PARSE(app, argc, argv);

    try {
        mpchan::CampaignConfig config = mpchan::load_campaign_config(config_path);
        apply_overrides(config, seed_override, jobs, k_max, stop_db);

        if (synth->parsed()) {
            const fs::path dir = resolve_out(out, config, "containers");
            const mpchan::Manifest m = mpchan::synth_campaign(config, dir);
            std::cout << "wrote " << m.entries.size() << " containers to " << dir.string()
                      << "\n";
        } else if (estimate->parsed()) {
            const fs::path dir = resolve_out(out, config, "estimates");
            std::vector<fs::path> paths(containers.begin(), containers.end());
            mpchan::estimate_containers(paths, config, dir);
            std::cout << "estimated " << paths.size() << " containers into " << dir.string()
                      << "\n";
        } else if (characterize->parsed()) {
            const fs::path dir = resolve_out(out, config, "report");
            mpchan::characterize_campaign(config, manifest, estimates, dir);
            std::cout << "report written to " << dir.string() << "\n";
        } else if (pipeline->parsed()) {
            const fs::path root = resolve_out(out, config, "campaign");
            const fs::path containers_dir = root / "containers";
            const fs::path estimates_dir = root / "estimates";
            const fs::path report_dir = root / "report";
            const mpchan::Manifest m = mpchan::synth_campaign(config, containers_dir);
            std::vector<fs::path> paths;
            for (const auto &entry : m.entries)
                paths.push_back(containers_dir / entry.file);
            mpchan::estimate_containers(paths, config, estimates_dir);
            mpchan::characterize_campaign(config, containers_dir / "manifest.txt", estimates_dir,
                                          report_dir);
            std::cout << "pipeline complete under " << root.string() << "\n";
        }
    } catch (const mpchan::config_error &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mpchan::format_error &e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const mpchan::numerical_error &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
