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
#include "mpchan/synthesis.hpp"

#include <Eigen/Dense>
#include <vector>

namespace mpchan {

struct SageConfig {
    int max_paths = 50;
    double coarse_azimuth_step_deg = 2.0;
    double coarse_elevation_step_deg = 2.0;
    int refine_cycles = 8;
    double angle_tolerance_deg = 0.1;
    double stop_threshold_db = -20.0; // relative to the strongest path
    double epsilon = 1e-5;            // relative objective change per cycle

    void validate() const;
};

/// Successive interference cancellation with coordinate-wise ML refinement.
/// Per path: coarse beamformer initialization on the strongest delay bin of
/// the running residual, polarimetric amplitudes by least squares, cyclic
/// golden-section refinement of delay and angles, then subtraction. Paths
/// are returned sorted by descending ||amp||_F^2; extraction stops at
/// max_paths or when a candidate falls below the stop threshold.
std::vector<SmcPath> estimate_smc(const ChannelTensor &tensor, const SageConfig &config = {});

/// H - H_S(paths); exact elementwise arithmetic.
ChannelTensor smc_residual(const ChannelTensor &tensor, const std::vector<SmcPath> &paths);

/// Covariance views of a diffuse residual tensor. vec ordering for the full
/// outer product is frequency-major over space with s = rx * M_T + tx,
/// matching the Kronecker factorization R_F kron R_A^Rx kron R_A^Tx.
struct DmcCovariance {
    Eigen::MatrixXcd frequency_marginal; // M_f x M_f, averaged over links
    Eigen::MatrixXcd rx_marginal;        // M_R x M_R, averaged over Tx and freq
    Eigen::MatrixXcd tx_marginal;        // M_T x M_T, averaged over Rx and freq
    Eigen::MatrixXcd data_matrix;        // M_f x links, frequency_marginal = G G^H

    /// Rank-1 outer product vec(H) vec(H)^H. Guarded against huge tensors.
    Eigen::MatrixXcd full_outer_product() const;
};

DmcCovariance measured_dmc_covariance(const ChannelTensor &residual);

/// Path-list CSV (one row per path) used by the CLI and reports.
std::string paths_to_csv(const std::vector<SmcPath> &paths);
std::vector<SmcPath> paths_from_csv(const std::string &csv);

} // namespace mpchan
