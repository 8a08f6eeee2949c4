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

enum class LinkSide { Tx, Rx };

enum class BartlettMode {
    WeightedInverse, // spectrum weighted by (F F^H)^{-1}
    Classical        // plain matched-beamformer power
};

struct AngularSpectrum {
    Eigen::VectorXd elevation_deg; // rows
    Eigen::VectorXd azimuth_deg;   // cols
    Eigen::MatrixXd power;         // linear, elevation x azimuth
    bool regularized = false;      // a grid point needed ridge loading

    Eigen::MatrixXd power_db() const;
    /// Location of the spectrum maximum (elevation, azimuth) in degrees.
    std::pair<double, double> peak() const;
};

/// Beamformer scan of one link end over an angle grid, averaged over
/// frequency points.
AngularSpectrum bartlett_spectrum(const ChannelTensor &tensor, LinkSide side,
                                  const Eigen::VectorXd &elevation_grid_deg,
                                  const Eigen::VectorXd &azimuth_grid_deg,
                                  BartlettMode mode = BartlettMode::WeightedInverse);

/// Default scan grids (2-degree elevation, 2-degree azimuth steps).
Eigen::VectorXd default_elevation_grid(double step_deg = 2.0);
Eigen::VectorXd default_azimuth_grid(double step_deg = 2.0);

struct NormalizedChannel {
    ChannelTensor tensor;
    double gamma = 1.0;
};

/// Scales the tensor so the frequency-averaged squared Frobenius norm equals
/// M_T * M_R. Throws invalid_argument for an all-zero tensor.
NormalizedChannel normalize_channel(const ChannelTensor &tensor);

struct SvResult {
    Eigen::MatrixXd per_frequency;   // k x M_f, descending in each column
    Eigen::VectorXd averaged_profile; // length k
    double power_fraction_topk = 0.0; // sum sigma_i^2 (i<=k) over total power
};

/// Top-k singular values of each frequency slice.
SvResult singular_values(const ChannelTensor &tensor, int k);

struct CapacityResult {
    double snr_db = 0.0;
    double capacity_bps_hz = 0.0;      // bits/s/Hz
    Eigen::VectorXd sv_profile;        // first-k frequency-averaged SVs
    double gamma = 1.0;
};

/// Ergodic capacity of a normalized tensor at the given SNR:
/// mean over frequency of log2 det(I + rho/M_T * H H^H).
double capacity_bits(const ChannelTensor &normalized, double snr_db);

/// normalize + SVD + capacity in one pass over a raw tensor.
CapacityResult analyze_capacity(const ChannelTensor &raw, double snr_db, int top_k = 3);

/// Residual power fraction ||H - H_S||^2 / ||H||^2 with the white-noise
/// power (alpha0 * M_f * links) removed from the numerator; clamped to [0,1].
double dmc_power_fraction(const ChannelTensor &tensor, const std::vector<SmcPath> &paths,
                          double noise_floor_alpha0 = 0.0);

} // namespace mpchan
