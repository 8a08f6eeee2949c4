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

#pragma once

#include "mpchan/channel_tensor.hpp"
#include "mpchan/dmc_estimator.hpp"
#include "mpchan/smc_estimator.hpp"
#include "mpchan/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mpchan {

struct Position {
    int id = 0;
    Eigen::Vector3d coordinates = Eigen::Vector3d::Zero(); // meters
    bool los = false;
};

struct ArraySpec {
    std::string kind = "single"; // upa | uca | single
    int dim1 = 1;
    int dim2 = 1;
    double spacing_m = 0.0; // 0 -> half wavelength at fc
    ElementPattern pattern;

    ArrayModel build(double fc_hz) const;
};

/// Scenario-generation knobs for synthetic campaigns.
struct ScenarioSpec {
    int smc_count = 6;
    double smc_min_delay_ns = 0.0;   // offset past the LOS delay
    double smc_max_delay_ns = 400.0;
    double smc_power_decay_db = 15.0; // dynamic range of NLOS path powers
    double smc_xpr_mean_db = 8.0;
    double smc_xpr_std_db = 3.0;
    double los_k_db = 6.0;            // LOS boost over the NLOS sum
    int dmc_processes = 3;
    double dmc_fraction = 0.5;        // share of signal power in the DMC
    double dmc_min_beta = 0.02;       // per-bin decay range (B_d * dtau)
    double dmc_max_beta = 0.12;
    double snr_db = 20.0;
    double sf_sigma_db = 2.0;         // lognormal shadowing of the total power
    int vmf_components = 2;
};

struct CampaignConfig {
    double fc_hz = 5.5e9;
    double bandwidth_hz = 320e6;
    int m_f = 256;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir;

    ArraySpec tx_array;
    ArraySpec rx_array;
    Eigen::Vector3d tx_position = Eigen::Vector3d::Zero();

    ScenarioSpec scenario;

    // estimation settings
    int sage_max_paths = 12;
    double sage_stop_db = -20.0;
    int dmc_k_max = 5;
    bool fit_angular = true;

    // characterization settings
    double rho_db = 5.0;
    double min_fit_distance_m = 5.1;
    int plot_positions = 4;

    std::vector<Position> positions;

    FrequencyGrid grid() const { return {fc_hz, bandwidth_hz, m_f}; }
    void validate() const;
};

/// Line-oriented key-value campaign configuration; '#' starts a comment.
/// Grammar documented in the README.
CampaignConfig parse_campaign_config(const std::string &text);
CampaignConfig load_campaign_config(const std::filesystem::path &path);

/// Ground truth recorded per synthesized position, for oracle testing.
struct PositionTruth {
    Position position;
    std::string file; // container file name, relative to the manifest
    std::uint64_t seed = 0;
    double distance_m = 0.0;
    std::vector<SmcPath> paths;
    DmcModel dmc;
};

struct Manifest {
    std::vector<PositionTruth> entries;
};

std::string manifest_to_text(const Manifest &manifest);
Manifest manifest_from_text(const std::string &text);
void write_manifest(const std::filesystem::path &path, const Manifest &manifest);
Manifest read_manifest(const std::filesystem::path &path);

/// Draws a deterministic synthetic scene for one position.
PositionTruth generate_scenario(const CampaignConfig &config, const Position &position,
                                std::uint64_t seed);

/// Synthesizes every position into `out_dir` and writes the manifest last.
/// Returns the manifest. Containers are written atomically.
Manifest synth_campaign(const CampaignConfig &config, const std::filesystem::path &out_dir);

/// Per-container estimation products.
struct EstimateResult {
    std::string container;             // source path
    std::vector<SmcPath> paths;
    double residual_power = 0.0;
    double total_power = 0.0;
    DmcFitReport dmc_report;
    VmfMixture vmf_rx_init, vmf_tx_init;
};

/// Runs SMC extraction, residual statistics and the DMC fits on one tensor.
EstimateResult estimate_tensor(const ChannelTensor &tensor, const CampaignConfig &config);

/// Estimates a list of containers, writing per-position path CSVs and fit
/// reports plus an index file into `out_dir`.
void estimate_containers(const std::vector<std::filesystem::path> &containers,
                         const CampaignConfig &config, const std::filesystem::path &out_dir);

/// Builds the report bundle (CSV tables and plot data) from synthesized
/// containers and estimation outputs.
void characterize_campaign(const CampaignConfig &config, const std::filesystem::path &manifest,
                           const std::filesystem::path &estimates_dir,
                           const std::filesystem::path &out_dir);

} // namespace mpchan
