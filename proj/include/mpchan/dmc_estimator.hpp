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
#include "mpchan/lm.hpp"
#include "mpchan/mimo_analysis.hpp"
#include "mpchan/smc_estimator.hpp"
#include "mpchan/synthesis.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mpchan {

/// One detected delay-PSD process: [start_bin, end_bin) on the delay grid.
struct ProcessSegment {
    int start_bin = 0;
    int end_bin = 0; // exclusive
    int onset_bin = 0;
    double slope_db_per_bin = 0.0;
};

struct DetectConfig {
    int smoothing_window = 5;              // moving-average width, bins
    double onset_threshold_db_per_bin = 6.0;
    int max_processes = 5;                 // K_max
    double floor_margin_db = 3.0;          // segment-end crossing margin
    int min_bins_above_floor = 8;

    void validate() const;
};

/// Transition-point detection on a dB delay PSD: smooth, first-order
/// difference, onsets where the rise rate exceeds the threshold after a
/// decaying stretch. Returns at most max_processes ordered segments; an
/// all-floor PSD yields an empty list.
std::vector<ProcessSegment> detect_processes(const Eigen::VectorXd &psd_db,
                                             double noise_floor_db,
                                             const DetectConfig &config = {});

struct DelayInit {
    std::vector<DmcDelayProcess> processes;
    double noise_floor = 0.0; // alpha0
    std::vector<std::string> warnings;
};

/// Per-segment initialization: alpha1 from the onset sample (inverting the
/// half-power onset), decay from the log-PSD slope, base delay from the
/// onset bin; alpha0 from the median of below-threshold bins.
DelayInit init_dmc_delay(const std::vector<ProcessSegment> &segments,
                         const Eigen::VectorXd &psd_linear, const FrequencyGrid &grid);

/// Base delay in units of the unambiguous span: tau_d / (M_f dtau), in [0,1).
double normalized_base_delay(const DmcDelayProcess &process, const FrequencyGrid &grid);

/// Gaussian covariance-fit likelihood over the delay-domain parameters
/// {alpha1_k, beta_k = B_d dtau, ntau_k}_k and alpha0:
///   L = -ln det R(theta) - tr(R(theta)^{-1} S).
/// Natural-parameter layout: [alpha1_1, beta_1, ntau_1, ..., alpha0].
/// Gradient and Fisher information use analytic derivatives of the Toeplitz
/// kernel; products with Toeplitz factors run through FFTs.
class DelayMlProblem {
  public:
    DelayMlProblem(Eigen::MatrixXcd freq_marginal, const FrequencyGrid &grid);
    /// Uses the factored form S = G G^H for cheap trace evaluations.
    DelayMlProblem(const DmcCovariance &covariance, const FrequencyGrid &grid);

    double value(const Eigen::VectorXd &natural) const;
    double value_gradient_fisher(const Eigen::VectorXd &natural, Eigen::VectorXd &gradient,
                                 Eigen::MatrixXd &fisher) const;

    Eigen::VectorXd pack(const std::vector<DmcDelayProcess> &processes, double alpha0) const;
    void unpack(const Eigen::VectorXd &natural, std::vector<DmcDelayProcess> &processes,
                double &alpha0) const;

    const FrequencyGrid &grid() const { return grid_; }

  private:
    Eigen::MatrixXcd build_covariance(const Eigen::VectorXd &natural) const;
    double evaluate(const Eigen::MatrixXcd &r, Eigen::LLT<Eigen::MatrixXcd> &llt) const;

    FrequencyGrid grid_;
    Eigen::MatrixXcd s_;       // frequency marginal
    Eigen::MatrixXcd g_;       // optional data matrix, S = G G^H
    bool has_data_matrix_ = false;
};

struct DmcFitReport {
    DmcModel fitted;               // delay processes + noise floor
    std::vector<double> ll_trace;  // non-decreasing over accepted iterations
    double power_capture_ratio = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Maximum-likelihood refinement of the multi-process delay model by
/// Fisher-scoring Levenberg-Marquardt, starting from init_dmc_delay output.
DmcFitReport fit_dmc_delay(const Eigen::MatrixXcd &freq_marginal, const DelayInit &init,
                           const FrequencyGrid &grid, const LmOptions &options = {});
DmcFitReport fit_dmc_delay(const DmcCovariance &covariance, const DelayInit &init,
                           const FrequencyGrid &grid, const LmOptions &options = {});

struct BartlettInitConfig {
    int q_max = 3;
    double elevation_step_deg = 4.0;
    double azimuth_step_deg = 4.0;
    double dynamic_range_db = 15.0; // peaks below max - range are ignored
    double nms_radius_deg = 25.0;
    double flat_range_db = 1.0;     // spectrum flatter than this -> uniform

    void validate() const;
};

/// Initial VMF mixture from the Bartlett spectrum of a residual tensor:
/// peak directions by non-maximum suppression, weights from peak powers,
/// concentrations from peak half-widths.
VmfMixture bartlett_init_angular(const ChannelTensor &residual, LinkSide side,
                                 const BartlettInitConfig &config = {});

/// Covariance-fit likelihood over VMF mixture parameters at one link end.
/// Natural layout per component: [elevation_deg, azimuth_deg, kappa, eps],
/// then a diagonal-loading term delta. Component scales eps are free; the
/// reported mixture is renormalized to sum 1.
class AngularMlProblem {
  public:
    AngularMlProblem(Eigen::MatrixXcd spatial_marginal, const ArrayModel &array,
                     const FrequencyGrid &grid, int components, int quad_elevation = 48,
                     int quad_azimuth = 96);

    double value(const Eigen::VectorXd &natural) const;
    double value_gradient_fisher(const Eigen::VectorXd &natural, Eigen::VectorXd &gradient,
                                 Eigen::MatrixXd &fisher) const;

    Eigen::VectorXd pack(const VmfMixture &mixture, double delta) const;
    VmfMixture unpack(const Eigen::VectorXd &natural, double *delta = nullptr) const;

    int components() const { return q_; }

  private:
    Eigen::MatrixXcd component_matrix(double el_deg, double az_deg, double kappa) const;
    void component_derivatives(const Eigen::VectorXd &natural, int q,
                               std::vector<Eigen::MatrixXcd> &out) const;

    Eigen::MatrixXcd s_;
    int ports_ = 0;
    int q_ = 0;
    Eigen::MatrixXcd steering_;  // ports x nodes
    Eigen::VectorXd weights_;    // quadrature weights
    Eigen::MatrixXd directions_; // 3 x nodes
};

struct AngularFitReport {
    VmfMixture fitted;
    std::vector<double> ll_trace;
    int iterations = 0;
    bool converged = false;
    double noise_delta = 0.0;
};

/// ML refinement of the VMF mixture against a measured spatial marginal.
AngularFitReport fit_dmc_angular(const Eigen::MatrixXcd &spatial_marginal,
                                 const VmfMixture &init, const ArrayModel &array,
                                 const FrequencyGrid &grid, const LmOptions &options = {},
                                 int quad_elevation = 48, int quad_azimuth = 96);

/// Model delay PSD reconstructed from the Toeplitz kernel (one-sided lag sum
/// 2 Re{sum_m kappa[m] e^{+j2pi mn/M}} - kappa[0] + alpha0). Used by the
/// Fourier-pair oracle tests.
Eigen::VectorXd kernel_delay_psd(const std::vector<DmcDelayProcess> &processes, double alpha0,
                                 const FrequencyGrid &grid);

/// Mean per-link delay PSD implied by a measured frequency marginal.
Eigen::VectorXd marginal_delay_psd(const Eigen::MatrixXcd &freq_marginal);

/// Structured-text serialization of a fit report (parameters, trace,
/// capture ratio) and its parser.
std::string fit_report_to_text(const DmcFitReport &report);
DmcFitReport fit_report_from_text(const std::string &text);

} // namespace mpchan
