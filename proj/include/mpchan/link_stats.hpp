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
#include <optional>
#include <vector>

namespace mpchan {

/// One thresholded multipath component of a delay PSD.
struct Mpc {
    double delay_s = 0.0;
    double power = 0.0; // linear
};

enum class PathLossModel { CI, FI };

struct PathLossFit {
    PathLossModel model = PathLossModel::CI;
    double exponent = 0.0;  // n
    double intercept_db = 0.0; // beta
    double sigma_db = 0.0;  // shadow-fading std
    double fc_ghz = 0.0;

    double evaluate(double distance_m) const;
};

/// Per-position scalar statistics row.
struct StatRecord {
    int position_id = 0;
    double distance_3d_m = 0.0;
    double pl_db = 0.0;
    double ds_s = 0.0;
    double ed_s = 0.0;
    double kf_db = 0.0;
    double asd_deg = 0.0;
    double asa_deg = 0.0;
    double esd_deg = 0.0;
    double esa_deg = 0.0;
    double xpr_h_db = 0.0;
    double xpr_v_db = 0.0;
    double cpr_db = 0.0;
    bool los = false;
};

/// Delay PSD of one link response (squared magnitude of the delay transform).
Eigen::VectorXd delay_psd(const Eigen::VectorXcd &link_response);

/// Delay PSD averaged over all ports of a tensor.
Eigen::VectorXd delay_psd(const ChannelTensor &tensor);

/// Delay PSD averaged over the ports of one Rx/Tx polarization pair.
Eigen::VectorXd delay_psd_polarized(const ChannelTensor &tensor, Polarization rx_pol,
                                    Polarization tx_pol);

/// Median power of the last 10% of delay bins plus a 3 dB margin, in dB.
double estimate_noise_floor_db(const Eigen::VectorXd &psd_linear);

/// Local maxima above max(noise floor + 10 dB, peak - 20 dB); comparisons
/// use >= so ties at the threshold are kept.
std::vector<Mpc> extract_mpcs(const Eigen::VectorXd &psd_linear, double noise_floor_db,
                              double delta_tau_s);

/// Close-in intercept: free-space path loss at 1 m, 20 log10(4 pi f / c).
double ci_intercept_db(double fc_ghz);

/// Least-squares path-loss fit of (distance, PL) samples. CI fixes the
/// intercept at ci_intercept_db(fc); FI fits (n, beta) jointly. Residual std
/// is reported as the shadow-fading sigma.
PathLossFit fit_pathloss(const std::vector<std::pair<double, double>> &records,
                         PathLossModel model, double fc_ghz);

/// Delay difference between last and first MPC.
double excess_delay(const std::vector<Mpc> &mpcs);

/// Power-weighted RMS delay spread.
double delay_spread(const std::vector<Mpc> &mpcs);

struct KFactorEstimate {
    double k_db = 0.0;
    bool clamped_low = false;  // gamma_v >= 1, reported as -40 dB
    bool clamped_high = false; // no fading detected, reported as +40 dB
};

/// Moment-based Rician K estimate from |H(f)|^2 over frequency.
KFactorEstimate kfactor_moment(const Eigen::VectorXcd &link_response);

/// Power-weighted RMS angular spread with circular normalization; degrees.
double angular_spread(const std::vector<double> &angles_deg, const std::vector<double> &powers);

enum class SsfDistribution { Rayleigh, Rician };

struct SsfFit {
    SsfDistribution selected = SsfDistribution::Rayleigh;
    double k_db = 0.0;       // Rician K (meaningful for the Rician fit)
    double rayleigh_sigma = 0.0;
    double rician_nu = 0.0;
    double rician_sigma = 0.0;
    double ks_rayleigh = 0.0;
    double ks_rician = 0.0;
};

/// Fits Rayleigh and Rician amplitude distributions by ML and selects the
/// smaller Kolmogorov-Smirnov statistic.
SsfFit fit_ssf_amplitude(const std::vector<double> &amplitudes);

struct XprCpr {
    double xpr_h_db = 0.0;
    double xpr_v_db = 0.0;
    double cpr_db = 0.0;
};

/// Polarization ratios from the four per-polarization delay PSDs.
XprCpr xpr_cpr_from_psd(const Eigen::VectorXd &psd_hh, const Eigen::VectorXd &psd_hv,
                        const Eigen::VectorXd &psd_vh, const Eigen::VectorXd &psd_vv);

/// Per-path polarization ratios from the 2x2 amplitude matrix. A zero
/// cross-polar amplitude yields +infinity.
XprCpr xpr_cpr_per_path(const SmcPath &path);

enum class LspTransform { Identity, Log10 };

/// Sample mean/std of (optionally log10-transformed) large-scale parameters.
std::pair<double, double> fit_lsp_distribution(const std::vector<double> &values,
                                               LspTransform transform);

} // namespace mpchan
