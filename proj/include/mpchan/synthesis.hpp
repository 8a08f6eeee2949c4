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
#include "mpchan/vmf.hpp"

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace mpchan {

/// One specular path: four angles in degrees, delay in seconds and the 2x2
/// polarimetric amplitude matrix [[VV, VH], [HV, HH]] (row: Rx polarization,
/// column: Tx polarization).
struct SmcPath {
    double eoa_deg = 0.0;
    double aoa_deg = 0.0;
    double eod_deg = 0.0;
    double aod_deg = 0.0;
    double delay_s = 0.0;
    Eigen::Matrix2cd amp = Eigen::Matrix2cd::Zero();

    double power() const { return amp.squaredNorm(); }
};

/// One exponential-decay delay process: alpha1 is the onset power, decay the
/// reverberation rate B_d in 1/s, base_delay the onset delay tau_d.
struct DmcDelayProcess {
    double alpha1 = 0.0;
    double decay = 0.0;
    double base_delay = 0.0;

    void validate() const;
};

/// Diffuse channel model: K delay processes, a shared white-noise floor and
/// VMF angular spectra at both link ends.
struct DmcModel {
    std::vector<DmcDelayProcess> processes;
    double noise_floor = 0.0; // alpha0, linear power per frequency bin
    VmfMixture vmf_rx = uniform_mixture();
    VmfMixture vmf_tx = uniform_mixture();

    void validate() const;
};

/// Superposition of specular paths, evaluated per frequency point:
/// H(f) = sum_l F_R(angles_l) amp_l F_T(angles_l)^T e^{+j 2 pi f tau_l}.
ChannelTensor synth_smc(const std::vector<SmcPath> &paths,
                        const std::shared_ptr<const ArrayModel> &tx,
                        const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid);

/// Model delay PSD on the given delay samples: per process, alpha1/2 at the
/// grid sample nearest tau_d, exponential decay beyond, plus one shared
/// noise floor alpha0.
Eigen::VectorXd dmc_delay_psd(const DmcModel &model, const Eigen::VectorXd &delays_s);

/// One-sided exponential correlation kernel kappa[m], m = 0..M_f-1:
/// kappa[m] = sum_k (alpha1_k / M_f) e^{-j 2 pi m ntau_k} / (beta_k + j 2 pi m / M_f)
/// with normalized base delay ntau = tau_d / (M_f dtau) and normalized decay
/// beta = B_d dtau.
Eigen::VectorXcd dmc_frequency_kernel(const std::vector<DmcDelayProcess> &processes,
                                      const FrequencyGrid &grid);

/// Frequency-domain covariance alpha0 I + toeplitz(kappa); Hermitian PSD.
/// Throws numerical_error if indefinite beyond roundoff.
Eigen::MatrixXcd dmc_frequency_covariance(const std::vector<DmcDelayProcess> &processes,
                                          double noise_floor, const FrequencyGrid &grid);

/// Spatial covariance of a VMF angular spectrum seen by an array:
/// R = integral f(omega) a(omega) a(omega)^H dOmega by deterministic sphere
/// quadrature, with a(omega) the summed-polarization port response at the
/// carrier. Trace is normalized to the port count.
Eigen::MatrixXcd dmc_spatial_covariance(const VmfMixture &mixture, const ArrayModel &array,
                                        const FrequencyGrid &grid, int quad_elevation = 64,
                                        int quad_azimuth = 128);

/// Draws one diffuse realization: H_D = L_F Z L_A^T with R_F = L_F L_F^H,
/// R_A = R_A^Rx kron R_A^Tx and Z iid complex normal seeded by `seed`.
/// Deterministic per seed. On a Cholesky failure the factor falls back to an
/// eigenvalue-clipped square root and metadata["cholesky_fallback"] = "1".
ChannelTensor synth_dmc(const DmcModel &model, const std::shared_ptr<const ArrayModel> &tx,
                        const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid,
                        std::uint64_t seed);

/// synth_smc + synth_dmc.
ChannelTensor synth_full(const std::vector<SmcPath> &paths, const DmcModel &model,
                         const std::shared_ptr<const ArrayModel> &tx,
                         const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid,
                         std::uint64_t seed);

/// Matrix square root used by synth_dmc: Cholesky factor, or an
/// eigenvalue-clipped factor when the matrix is numerically indefinite.
/// Sets `used_fallback` accordingly.
Eigen::MatrixXcd covariance_factor(const Eigen::MatrixXcd &r, bool &used_fallback);

} // namespace mpchan
