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

#include "mpchan/dmc_estimator.hpp"

#include "mpchan/errors.hpp"
#include "mpchan/fft_utils.hpp"
#include "mpchan/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mpchan {

void DetectConfig::validate() const {
    if (smoothing_window < 1 || smoothing_window % 2 == 0)
        throw std::invalid_argument("DetectConfig: smoothing window must be odd and >= 1");
    if (onset_threshold_db_per_bin <= 0.0)
        throw std::invalid_argument("DetectConfig: onset threshold must be positive");
    if (max_processes < 1)
        throw std::invalid_argument("DetectConfig: max_processes must be >= 1");
}

namespace {

Eigen::VectorXd moving_average(const Eigen::VectorXd &x, int window) {
    const Eigen::Index n = x.size();
    const int half = window / 2;
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half);
        s(i) = x.segment(lo, hi - lo + 1).mean();
    }
    return s;
}

} // namespace

std::vector<ProcessSegment> detect_processes(const Eigen::VectorXd &psd_db,
                                             double noise_floor_db, const DetectConfig &config) {
    config.validate();
    std::vector<ProcessSegment> segments;
    const Eigen::Index n = psd_db.size();
    if (n < 4)
        return segments;

    const Eigen::Index above = (psd_db.array() > noise_floor_db).count();
    if (above < config.min_bins_above_floor)
        return segments; // all floor: no DMC

    const Eigen::VectorXd smoothed = moving_average(psd_db, config.smoothing_window);
    const int w = config.smoothing_window;

    // rising clusters of the first-order difference
    std::vector<int> onsets;
    Eigen::Index i = 1;
    while (i < n && int(onsets.size()) < config.max_processes) {
        if (smoothed(i) - smoothed(i - 1) >= config.onset_threshold_db_per_bin) {
            Eigen::Index cluster_end = i;
            while (cluster_end + 1 < n &&
                   smoothed(cluster_end + 1) - smoothed(cluster_end) >=
                       config.onset_threshold_db_per_bin)
                ++cluster_end;
            // refine on the raw PSD: the jump bin has the largest single-bin rise
            const Eigen::Index lo = std::max<Eigen::Index>(1, i - w);
            const Eigen::Index hi = std::min<Eigen::Index>(n - 1, cluster_end + w);
            Eigen::Index best = lo;
            double best_diff = -1e300;
            for (Eigen::Index j = lo; j <= hi; ++j) {
                const double d = psd_db(j) - psd_db(j - 1);
                if (d > best_diff) {
                    best_diff = d;
                    best = j;
                }
            }
            if (onsets.empty() || int(best) > onsets.back() + w)
                onsets.push_back(int(best));
            i = cluster_end + 1;
        } else {
            ++i;
        }
    }

    // fallback: content above the floor but no sharp transition
    if (onsets.empty()) {
        Eigen::Index peak = 0;
        psd_db.maxCoeff(&peak);
        onsets.push_back(int(peak));
    }

    for (std::size_t k = 0; k < onsets.size(); ++k) {
        ProcessSegment seg;
        seg.onset_bin = onsets[k];
        seg.start_bin = onsets[k];
        int end = (k + 1 < onsets.size()) ? onsets[k + 1] : int(n);
        // stop early at the noise-floor crossing
        for (int j = seg.start_bin + 1; j < end; ++j) {
            if (smoothed(j) <= noise_floor_db + config.floor_margin_db) {
                end = j;
                break;
            }
        }
        seg.end_bin = std::max(end, seg.start_bin + 1);

        // least-squares slope of the raw dB PSD across the segment
        const int len = seg.end_bin - seg.start_bin;
        if (len >= 2) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (int j = seg.start_bin; j < seg.end_bin; ++j) {
                const double x = j - seg.start_bin;
                sx += x;
                sy += psd_db(j);
                sxx += x * x;
                sxy += x * psd_db(j);
            }
            const double denom = len * sxx - sx * sx;
            seg.slope_db_per_bin = denom != 0.0 ? (len * sxy - sx * sy) / denom : 0.0;
        }
        segments.push_back(seg);
    }
    return segments;
}

DelayInit init_dmc_delay(const std::vector<ProcessSegment> &segments,
                         const Eigen::VectorXd &psd_linear, const FrequencyGrid &grid) {
    if (segments.empty())
        throw std::invalid_argument("init_dmc_delay: no segments");
    const Eigen::Index n = psd_linear.size();
    if (n != grid.size())
        throw std::invalid_argument("init_dmc_delay: PSD length does not match the grid");
    const double dtau = grid.delay_resolution();

    DelayInit init;

    // noise floor from bins outside every segment
    std::vector<bool> in_segment(std::size_t(n), false);
    for (const auto &seg : segments)
        for (int j = seg.start_bin; j < std::min<int>(seg.end_bin, int(n)); ++j)
            in_segment[std::size_t(j)] = true;
    std::vector<double> floor_bins;
    for (Eigen::Index j = 0; j < n; ++j)
        if (!in_segment[std::size_t(j)])
            floor_bins.push_back(psd_linear(j));
    if (floor_bins.empty())
        for (Eigen::Index j = n - std::max<Eigen::Index>(1, n / 10); j < n; ++j)
            floor_bins.push_back(psd_linear(j));
    std::nth_element(floor_bins.begin(), floor_bins.begin() + floor_bins.size() / 2,
                     floor_bins.end());
    init.noise_floor = floor_bins[floor_bins.size() / 2];

    for (const auto &seg : segments) {
        if (seg.end_bin - seg.start_bin < 3) {
            init.warnings.push_back("segment at bin " + std::to_string(seg.onset_bin) +
                                    " shorter than 3 bins; skipped");
            continue;
        }
        DmcDelayProcess p;
        p.base_delay = seg.onset_bin * dtau;
        // Eq. (5)-style onset carries half the process power
        p.alpha1 = 2.0 * std::max(psd_linear(seg.onset_bin) - init.noise_floor,
                                  1e-12 * psd_linear.maxCoeff());
        // decay from the log-PSD slope over floor-dominant-free bins
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int count = 0;
        for (int j = seg.onset_bin + 1; j < seg.end_bin && j < int(n); ++j) {
            const double above = psd_linear(j) - init.noise_floor;
            if (above <= 3.0 * init.noise_floor && count >= 3)
                break;
            const double y = std::log(std::max(above, 1e-12 * psd_linear.maxCoeff()));
            const double x = (j - seg.onset_bin) * dtau;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++count;
        }
        if (count >= 2) {
            const double denom = count * sxx - sx * sx;
            const double slope = denom != 0.0 ? (count * sxy - sx * sy) / denom : 0.0;
            p.decay = std::max(-slope, 1e-3 / (grid.delay_span()));
        } else {
            p.decay = 1.0 / (10.0 * dtau);
            init.warnings.push_back("segment at bin " + std::to_string(seg.onset_bin) +
                                    " has too few usable bins for a slope fit");
        }
        init.processes.push_back(p);
    }
    if (init.processes.empty())
        throw std::invalid_argument("init_dmc_delay: all segments were too short");
    return init;
}

double normalized_base_delay(const DmcDelayProcess &process, const FrequencyGrid &grid) {
    return process.base_delay / (grid.size() * grid.delay_resolution());
}

// ---------------------------------------------------------------------------
// delay-domain ML problem
// ---------------------------------------------------------------------------

namespace {

// first-column Toeplitz generator from normalized parameters. The first row
// of the covariance carries the conjugate (alpha1/M) e^{-j 2 pi m ntau} /
// (beta + j 2 pi m / M), which pairs with the e^{+j 2 pi f tau} path phase
// used in synthesis.
Eigen::VectorXcd kernel_from_normalized(double alpha1, double beta, double ntau, int m_f) {
    Eigen::VectorXcd kappa(m_f);
    for (int m = 0; m < m_f; ++m) {
        const std::complex<double> den(beta, -2.0 * M_PI * m / m_f);
        kappa(m) = alpha1 / double(m_f) * std::polar(1.0, 2.0 * M_PI * m * ntau) / den;
    }
    return kappa;
}

} // namespace

DelayMlProblem::DelayMlProblem(Eigen::MatrixXcd freq_marginal, const FrequencyGrid &grid)
    : grid_(grid), s_(std::move(freq_marginal)) {
    if (s_.rows() != grid.size() || s_.cols() != grid.size())
        throw std::invalid_argument("DelayMlProblem: covariance does not match the grid");
}

DelayMlProblem::DelayMlProblem(const DmcCovariance &covariance, const FrequencyGrid &grid)
    : grid_(grid), s_(covariance.frequency_marginal), g_(covariance.data_matrix),
      has_data_matrix_(true) {
    if (s_.rows() != grid.size())
        throw std::invalid_argument("DelayMlProblem: covariance does not match the grid");
}

Eigen::VectorXd DelayMlProblem::pack(const std::vector<DmcDelayProcess> &processes,
                                     double alpha0) const {
    Eigen::VectorXd theta(3 * Eigen::Index(processes.size()) + 1);
    const double dtau = grid_.delay_resolution();
    for (std::size_t k = 0; k < processes.size(); ++k) {
        theta(3 * Eigen::Index(k)) = processes[k].alpha1;
        theta(3 * Eigen::Index(k) + 1) = processes[k].decay * dtau;
        theta(3 * Eigen::Index(k) + 2) = normalized_base_delay(processes[k], grid_);
    }
    theta(theta.size() - 1) = alpha0;
    return theta;
}

void DelayMlProblem::unpack(const Eigen::VectorXd &natural,
                            std::vector<DmcDelayProcess> &processes, double &alpha0) const {
    const int k = int((natural.size() - 1) / 3);
    const double dtau = grid_.delay_resolution();
    processes.resize(std::size_t(k));
    for (int i = 0; i < k; ++i) {
        processes[std::size_t(i)].alpha1 = natural(3 * i);
        processes[std::size_t(i)].decay = natural(3 * i + 1) / dtau;
        processes[std::size_t(i)].base_delay = natural(3 * i + 2) * grid_.size() * dtau;
    }
    alpha0 = natural(natural.size() - 1);
}

Eigen::MatrixXcd DelayMlProblem::build_covariance(const Eigen::VectorXd &natural) const {
    const int n = grid_.size();
    const int k = int((natural.size() - 1) / 3);
    Eigen::VectorXcd kappa = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < k; ++i)
        kappa += kernel_from_normalized(natural(3 * i), natural(3 * i + 1), natural(3 * i + 2), n);
    Eigen::MatrixXcd r(n, n);
    for (int i = 0; i < n; ++i) {
        r(i, i) = kappa(0).real() + natural(natural.size() - 1);
        for (int j = 0; j < i; ++j) {
            r(i, j) = kappa(i - j);
            r(j, i) = std::conj(kappa(i - j));
        }
    }
    return r;
}

double DelayMlProblem::evaluate(const Eigen::MatrixXcd &r,
                                Eigen::LLT<Eigen::MatrixXcd> &llt) const {
    llt.compute(r);
    if (llt.info() != Eigen::Success) {
        // one jitter attempt, then give up with diagnostics
        const double jitter = 1e-6 * std::max(r.diagonal().real().mean(), 1e-30);
        Eigen::MatrixXcd rj = r;
        rj.diagonal().array() += jitter;
        llt.compute(rj);
        if (llt.info() != Eigen::Success)
            throw numerical_error("DelayMlProblem: covariance singular even after jitter (dim " +
                                  std::to_string(r.rows()) + ")");
    }
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        logdet += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    double trace;
    if (has_data_matrix_) {
        const Eigen::MatrixXcd x =
            llt.matrixL().solve(g_); // tr(R^-1 G G^H) = ||L^-1 G||_F^2
        trace = x.squaredNorm();
    } else {
        trace = llt.solve(s_).trace().real();
    }
    return -logdet - trace;
}

double DelayMlProblem::value(const Eigen::VectorXd &natural) const {
    Eigen::LLT<Eigen::MatrixXcd> llt;
    return evaluate(build_covariance(natural), llt);
}

double DelayMlProblem::value_gradient_fisher(const Eigen::VectorXd &natural,
                                             Eigen::VectorXd &gradient,
                                             Eigen::MatrixXd &fisher) const {
    const int n = grid_.size();
    const int k = int((natural.size() - 1) / 3);
    const Eigen::Index np = natural.size();

    Eigen::LLT<Eigen::MatrixXcd> llt;
    const double value = evaluate(build_covariance(natural), llt);

    const Eigen::MatrixXcd p = llt.solve(Eigen::MatrixXcd::Identity(n, n));
    Eigen::MatrixXcd q; // R^{-1} S
    if (has_data_matrix_) {
        const Eigen::MatrixXcd x = llt.solve(g_);
        q.noalias() = x * g_.adjoint();
    } else {
        q = llt.solve(s_);
    }

    // A_i = R^{-1} dR/dtheta_i; Toeplitz derivatives go through FFT products
    std::vector<Eigen::MatrixXcd> a; a.resize(std::size_t(np));
    for (int i = 0; i < k; ++i) {
        const double alpha1 = natural(3 * i);
        const double beta = natural(3 * i + 1);
        const double ntau = natural(3 * i + 2);
        const Eigen::VectorXcd kappa = kernel_from_normalized(alpha1, beta, ntau, n);
        Eigen::VectorXcd d_alpha = kappa / alpha1;
        Eigen::VectorXcd d_beta(n), d_ntau(n);
        for (int m = 0; m < n; ++m) {
            const std::complex<double> den(beta, -2.0 * M_PI * m / n);
            d_beta(m) = -kappa(m) / den;
            d_ntau(m) = std::complex<double>(0.0, 2.0 * M_PI * m) * kappa(m);
        }
        a[std::size_t(3 * i)] = multiply_hermitian_toeplitz(p, d_alpha);
        a[std::size_t(3 * i + 1)] = multiply_hermitian_toeplitz(p, d_beta);
        a[std::size_t(3 * i + 2)] = multiply_hermitian_toeplitz(p, d_ntau);
    }
    a[std::size_t(np - 1)] = p; // d/d alpha0 of R is the identity

    gradient.resize(np);
    fisher.resize(np, np);
    for (Eigen::Index i = 0; i < np; ++i) {
        gradient(i) = -a[std::size_t(i)].trace().real() +
                      a[std::size_t(i)].cwiseProduct(q.transpose()).sum().real();
        for (Eigen::Index j = i; j < np; ++j) {
            fisher(i, j) =
                a[std::size_t(i)].cwiseProduct(a[std::size_t(j)].transpose()).sum().real();
            fisher(j, i) = fisher(i, j);
        }
    }
    return value;
}

namespace {

// log-domain wrapper: every delay parameter is positive
class DelayLogObjective : public LmObjective {
  public:
    explicit DelayLogObjective(const DelayMlProblem &problem) : problem_(problem) {}

    double value(const Eigen::VectorXd &phi) const override {
        return problem_.value(phi.array().exp());
    }

    double value_gradient_fisher(const Eigen::VectorXd &phi, Eigen::VectorXd &gradient,
                                 Eigen::MatrixXd &fisher) const override {
        const Eigen::VectorXd theta = phi.array().exp();
        const double v = problem_.value_gradient_fisher(theta, gradient, fisher);
        gradient.array() *= theta.array();
        fisher = theta.asDiagonal() * fisher * theta.asDiagonal();
        return v;
    }

    Eigen::VectorXd project(Eigen::VectorXd phi) const override {
        const Eigen::Index np = phi.size();
        const int k = int((np - 1) / 3);
        for (int i = 0; i < k; ++i) {
            phi(3 * i) = std::clamp(phi(3 * i), std::log(1e-30), std::log(1e30));
            phi(3 * i + 1) = std::clamp(phi(3 * i + 1), std::log(1e-9), std::log(50.0));
            phi(3 * i + 2) = std::clamp(phi(3 * i + 2), std::log(1e-9), std::log(0.9999));
        }
        phi(np - 1) = std::clamp(phi(np - 1), std::log(1e-30), std::log(1e30));
        return phi;
    }

  private:
    const DelayMlProblem &problem_;
};

DmcFitReport run_delay_fit(const DelayMlProblem &problem, const Eigen::MatrixXcd &s,
                           const DelayInit &init, const FrequencyGrid &grid,
                           const LmOptions &options) {
    if (init.processes.empty())
        throw std::invalid_argument("fit_dmc_delay: empty initialization");

    const double scale = s.diagonal().real().mean();
    const double alpha0 = std::max(init.noise_floor, 1e-10 * std::max(scale, 1e-300));
    Eigen::VectorXd theta0 = problem.pack(init.processes, alpha0);

    DelayLogObjective objective(problem);
    const LmResult lm =
        maximize_likelihood_lm(objective, theta0.array().log(), options);

    DmcFitReport report;
    std::vector<DmcDelayProcess> processes;
    double fitted_alpha0 = 0.0;
    problem.unpack(lm.params.array().exp(), processes, fitted_alpha0);
    report.fitted.processes = processes;
    report.fitted.noise_floor = fitted_alpha0;
    report.ll_trace = lm.ll_trace;
    report.iterations = lm.iterations;
    report.converged = lm.converged;

    // captured power: fitted process PSD vs measured PSD, both above alpha0
    DmcModel process_only;
    process_only.processes = processes;
    process_only.noise_floor = 0.0;
    const Eigen::VectorXd fitted_psd = dmc_delay_psd(process_only, grid.delays());
    const Eigen::VectorXd measured_psd = marginal_delay_psd(s);
    const double fitted_above = fitted_psd.sum();
    const double measured_above = (measured_psd.array() - fitted_alpha0).max(0.0).sum();
    report.power_capture_ratio =
        measured_above > 0.0 ? std::clamp(fitted_above / measured_above, 0.0, 1.0) : 0.0;
    return report;
}

} // namespace

DmcFitReport fit_dmc_delay(const Eigen::MatrixXcd &freq_marginal, const DelayInit &init,
                           const FrequencyGrid &grid, const LmOptions &options) {
    DelayMlProblem problem(freq_marginal, grid);
    return run_delay_fit(problem, freq_marginal, init, grid, options);
}

DmcFitReport fit_dmc_delay(const DmcCovariance &covariance, const DelayInit &init,
                           const FrequencyGrid &grid, const LmOptions &options) {
    DelayMlProblem problem(covariance, grid);
    return run_delay_fit(problem, covariance.frequency_marginal, init, grid, options);
}

Eigen::VectorXd kernel_delay_psd(const std::vector<DmcDelayProcess> &processes, double alpha0,
                                 const FrequencyGrid &grid) {
    const int n = grid.size();
    const double dtau = grid.delay_resolution();
    Eigen::VectorXcd kappa = Eigen::VectorXcd::Zero(n);
    for (const auto &p : processes)
        kappa += kernel_from_normalized(p.alpha1, p.decay * dtau, normalized_base_delay(p, grid), n);
    Eigen::VectorXcd spectrum = kappa;
    fft_forward(spectrum); // e^{-j 2 pi m n / M} lag kernel
    return (2.0 * spectrum.real().array() - kappa(0).real() + alpha0).matrix();
}

Eigen::VectorXd marginal_delay_psd(const Eigen::MatrixXcd &freq_marginal) {
    const Eigen::Index n = freq_marginal.rows();
    Eigen::VectorXcd lag_sums(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        std::complex<double> sum = 0.0;
        for (Eigen::Index a = 0; a + m < n; ++a)
            sum += freq_marginal(a + m, a);
        lag_sums(m) = sum;
    }
    Eigen::VectorXcd spectrum = lag_sums;
    fft_forward(spectrum);
    return ((2.0 * spectrum.real().array() - lag_sums(0).real()) / double(n * n)).matrix();
}

// ---------------------------------------------------------------------------
// angular initialization and fit
// ---------------------------------------------------------------------------

void BartlettInitConfig::validate() const {
    if (q_max < 1)
        throw std::invalid_argument("BartlettInitConfig: q_max must be >= 1");
    if (elevation_step_deg <= 0.0 || azimuth_step_deg <= 0.0)
        throw std::invalid_argument("BartlettInitConfig: grid steps must be positive");
}

VmfMixture bartlett_init_angular(const ChannelTensor &residual, LinkSide side,
                                 const BartlettInitConfig &config) {
    config.validate();
    const AngularSpectrum spec =
        bartlett_spectrum(residual, side, default_elevation_grid(config.elevation_step_deg),
                          default_azimuth_grid(config.azimuth_step_deg));
    const Eigen::MatrixXd db = spec.power_db();
    const double max_db = db.maxCoeff();
    if (max_db - db.minCoeff() < config.flat_range_db)
        return uniform_mixture();

    const Eigen::Index ne = db.rows(), na = db.cols();
    auto at = [&](Eigen::Index e, Eigen::Index a) {
        // azimuth wraps, elevation clamps
        const Eigen::Index aw = (a % na + na) % na;
        const Eigen::Index ec = std::clamp<Eigen::Index>(e, 0, ne - 1);
        return db(ec, aw);
    };

    struct Peak {
        double el, az, power_db;
        Eigen::Index ei, ai;
    };
    std::vector<Peak> peaks;
    for (Eigen::Index e = 0; e < ne; ++e)
        for (Eigen::Index a = 0; a < na; ++a) {
            const double v = db(e, a);
            if (v < max_db - config.dynamic_range_db)
                continue;
            if (v >= at(e - 1, a) && v >= at(e + 1, a) && v >= at(e, a - 1) && v >= at(e, a + 1) &&
                (v > at(e - 1, a) || v > at(e + 1, a) || v > at(e, a - 1) || v > at(e, a + 1)))
                peaks.push_back({spec.elevation_deg(e), spec.azimuth_deg(a), v, e, a});
        }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak &x, const Peak &y) { return x.power_db > y.power_db; });

    std::vector<Peak> kept;
    for (const auto &p : peaks) {
        bool suppressed = false;
        for (const auto &kp : kept)
            if (angular_distance_deg(p.el, p.az, kp.el, kp.az) < config.nms_radius_deg) {
                suppressed = true;
                break;
            }
        if (!suppressed)
            kept.push_back(p);
        if (int(kept.size()) >= config.q_max)
            break;
    }
    if (kept.empty())
        return uniform_mixture();

    VmfMixture mixture;
    double weight_sum = 0.0;
    for (const auto &p : kept) {
        // half-power width along the four grid directions
        const double target = p.power_db - 3.0103;
        auto walk = [&](Eigen::Index de, Eigen::Index da, double step_deg) {
            int steps = 0;
            while (steps < int(std::max(ne, na)) &&
                   at(p.ei + de * (steps + 1), p.ai + da * (steps + 1)) > target)
                ++steps;
            return (steps + 0.5) * step_deg;
        };
        const double cos_el = std::max(std::cos(deg2rad(p.el)), 0.05);
        const double w_half =
            0.25 * (walk(1, 0, config.elevation_step_deg) + walk(-1, 0, config.elevation_step_deg) +
                    walk(0, 1, config.azimuth_step_deg * cos_el) +
                    walk(0, -1, config.azimuth_step_deg * cos_el));
        VmfComponent c;
        c.mean_elevation_deg = p.el;
        c.mean_azimuth_deg = p.az;
        c.kappa = std::min(std::log(2.0) / (1.0 - std::cos(deg2rad(w_half))), 1e4);
        c.weight = std::pow(10.0, p.power_db / 10.0);
        weight_sum += c.weight;
        mixture.push_back(c);
    }
    for (auto &c : mixture)
        c.weight /= weight_sum;
    return mixture;
}

AngularMlProblem::AngularMlProblem(Eigen::MatrixXcd spatial_marginal, const ArrayModel &array,
                                   const FrequencyGrid &grid, int components, int quad_elevation,
                                   int quad_azimuth)
    : s_(std::move(spatial_marginal)), ports_(array.port_count()), q_(components) {
    if (s_.rows() != ports_ || s_.cols() != ports_)
        throw std::invalid_argument("AngularMlProblem: covariance does not match the array");
    if (q_ < 1)
        throw std::invalid_argument("AngularMlProblem: need at least one component");
    const SphereQuadrature quad = sphere_quadrature(quad_elevation, quad_azimuth);
    const Eigen::Index nodes = Eigen::Index(quad.size());
    steering_.resize(ports_, nodes);
    weights_.resize(nodes);
    directions_.resize(3, nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const Eigen::MatrixXcd resp = array.response_matrix(
            quad.elevation_deg[std::size_t(i)], quad.azimuth_deg[std::size_t(i)], grid.fc());
        steering_.col(i) = resp.col(0) + resp.col(1);
        weights_(i) = quad.weight[std::size_t(i)];
        directions_.col(i) =
            unit_direction(quad.elevation_deg[std::size_t(i)], quad.azimuth_deg[std::size_t(i)]);
    }
}

Eigen::MatrixXcd AngularMlProblem::component_matrix(double el_deg, double az_deg,
                                                    double kappa) const {
    const Eigen::Vector3d mu = unit_direction(el_deg, az_deg);
    Eigen::VectorXd f(weights_.size());
    for (Eigen::Index i = 0; i < weights_.size(); ++i)
        f(i) = vmf_unit_density(kappa, std::clamp(mu.dot(directions_.col(i)), -1.0, 1.0));
    return steering_ * (weights_.cwiseProduct(f)).asDiagonal() * steering_.adjoint();
}

void AngularMlProblem::component_derivatives(const Eigen::VectorXd &natural, int q,
                                             std::vector<Eigen::MatrixXcd> &out) const {
    const double el = natural(4 * q), az = natural(4 * q + 1);
    const double kappa = natural(4 * q + 2), eps = natural(4 * q + 3);
    const Eigen::Vector3d mu = unit_direction(el, az);
    const double elr = deg2rad(el), azr = deg2rad(az);
    const Eigen::Vector3d dmu_del = M_PI / 180.0 *
        Eigen::Vector3d(-std::sin(elr) * std::cos(azr), -std::sin(elr) * std::sin(azr),
                        std::cos(elr));
    const Eigen::Vector3d dmu_daz = M_PI / 180.0 *
        Eigen::Vector3d(-std::cos(elr) * std::sin(azr), std::cos(elr) * std::cos(azr), 0.0);

    const Eigen::Index nodes = weights_.size();
    Eigen::VectorXd f(nodes), df_del(nodes), df_daz(nodes), df_dk(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const Eigen::Vector3d omega = directions_.col(i);
        const double t = std::clamp(mu.dot(omega), -1.0, 1.0);
        f(i) = vmf_unit_density(kappa, t);
        const double dfdt = kappa * f(i);
        df_del(i) = dfdt * dmu_del.dot(omega);
        df_daz(i) = dfdt * dmu_daz.dot(omega);
        df_dk(i) = vmf_unit_density_dkappa(kappa, t);
    }
    auto assemble = [&](const Eigen::VectorXd &density) {
        return Eigen::MatrixXcd(steering_ * (weights_.cwiseProduct(density)).asDiagonal() *
                                steering_.adjoint());
    };
    out[std::size_t(4 * q)] = eps * assemble(df_del);
    out[std::size_t(4 * q + 1)] = eps * assemble(df_daz);
    out[std::size_t(4 * q + 2)] = eps * assemble(df_dk);
    out[std::size_t(4 * q + 3)] = assemble(f);
}

Eigen::VectorXd AngularMlProblem::pack(const VmfMixture &mixture, double delta) const {
    if (int(mixture.size()) != q_)
        throw std::invalid_argument("AngularMlProblem: mixture size mismatch");
    Eigen::VectorXd natural(4 * q_ + 1);
    for (int q = 0; q < q_; ++q) {
        natural(4 * q) = mixture[std::size_t(q)].mean_elevation_deg;
        natural(4 * q + 1) = mixture[std::size_t(q)].mean_azimuth_deg;
        natural(4 * q + 2) = mixture[std::size_t(q)].kappa;
        natural(4 * q + 3) = mixture[std::size_t(q)].weight;
    }
    natural(4 * q_) = delta;
    return natural;
}

VmfMixture AngularMlProblem::unpack(const Eigen::VectorXd &natural, double *delta) const {
    VmfMixture mixture; mixture.resize(std::size_t(q_));
    for (int q = 0; q < q_; ++q) {
        mixture[std::size_t(q)].mean_elevation_deg = natural(4 * q);
        mixture[std::size_t(q)].mean_azimuth_deg = natural(4 * q + 1);
        mixture[std::size_t(q)].kappa = natural(4 * q + 2);
        mixture[std::size_t(q)].weight = natural(4 * q + 3);
    }
    if (delta)
        *delta = natural(4 * q_);
    return mixture;
}

double AngularMlProblem::value(const Eigen::VectorXd &natural) const {
    Eigen::MatrixXcd r = natural(4 * q_) * Eigen::MatrixXcd::Identity(ports_, ports_);
    for (int q = 0; q < q_; ++q)
        r += natural(4 * q + 3) *
             component_matrix(natural(4 * q), natural(4 * q + 1), natural(4 * q + 2));
    Eigen::LLT<Eigen::MatrixXcd> llt(r);
    if (llt.info() != Eigen::Success) {
        r.diagonal().array() += 1e-6 * std::max(r.diagonal().real().mean(), 1e-30);
        llt.compute(r);
        if (llt.info() != Eigen::Success)
            throw numerical_error("AngularMlProblem: covariance singular even after jitter");
    }
    double logdet = 0.0;
    for (int i = 0; i < ports_; ++i)
        logdet += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    return -logdet - llt.solve(s_).trace().real();
}

double AngularMlProblem::value_gradient_fisher(const Eigen::VectorXd &natural,
                                               Eigen::VectorXd &gradient,
                                               Eigen::MatrixXd &fisher) const {
    const Eigen::Index np = natural.size();
    std::vector<Eigen::MatrixXcd> d; d.resize(std::size_t(np));
    for (int q = 0; q < q_; ++q)
        component_derivatives(natural, q, d);
    d[std::size_t(4 * q_)] = Eigen::MatrixXcd::Identity(ports_, ports_);

    Eigen::MatrixXcd r = natural(4 * q_) * Eigen::MatrixXcd::Identity(ports_, ports_);
    for (int q = 0; q < q_; ++q)
        r += natural(4 * q + 3) * d[std::size_t(4 * q + 3)]; // eps * M_q with M_q stored

    Eigen::LLT<Eigen::MatrixXcd> llt(r);
    if (llt.info() != Eigen::Success) {
        r.diagonal().array() += 1e-6 * std::max(r.diagonal().real().mean(), 1e-30);
        llt.compute(r);
        if (llt.info() != Eigen::Success)
            throw numerical_error("AngularMlProblem: covariance singular even after jitter");
    }
    double logdet = 0.0;
    for (int i = 0; i < ports_; ++i)
        logdet += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    const Eigen::MatrixXcd q_mat = llt.solve(s_);
    const double value = -logdet - q_mat.trace().real();

    std::vector<Eigen::MatrixXcd> a; a.resize(std::size_t(np));
    for (Eigen::Index i = 0; i < np; ++i)
        a[std::size_t(i)] = llt.solve(d[std::size_t(i)]);

    gradient.resize(np);
    fisher.resize(np, np);
    for (Eigen::Index i = 0; i < np; ++i) {
        gradient(i) = -a[std::size_t(i)].trace().real() +
                      a[std::size_t(i)].cwiseProduct(q_mat.transpose()).sum().real();
        for (Eigen::Index j = i; j < np; ++j) {
            fisher(i, j) =
                a[std::size_t(i)].cwiseProduct(a[std::size_t(j)].transpose()).sum().real();
            fisher(j, i) = fisher(i, j);
        }
    }
    return value;
}

namespace {

// angles stay linear, kappa/eps/delta live in log space
class AngularLogObjective : public LmObjective {
  public:
    explicit AngularLogObjective(const AngularMlProblem &problem, int q)
        : problem_(problem), q_(q) {}

    Eigen::VectorXd to_natural(const Eigen::VectorXd &phi) const {
        Eigen::VectorXd natural = phi;
        for (int q = 0; q < q_; ++q) {
            natural(4 * q + 2) = std::exp(phi(4 * q + 2));
            natural(4 * q + 3) = std::exp(phi(4 * q + 3));
        }
        natural(4 * q_) = std::exp(phi(4 * q_));
        return natural;
    }

    Eigen::VectorXd to_phi(const Eigen::VectorXd &natural) const {
        Eigen::VectorXd phi = natural;
        for (int q = 0; q < q_; ++q) {
            phi(4 * q + 2) = std::log(natural(4 * q + 2));
            phi(4 * q + 3) = std::log(natural(4 * q + 3));
        }
        phi(4 * q_) = std::log(natural(4 * q_));
        return phi;
    }

    double value(const Eigen::VectorXd &phi) const override {
        return problem_.value(to_natural(phi));
    }

    double value_gradient_fisher(const Eigen::VectorXd &phi, Eigen::VectorXd &gradient,
                                 Eigen::MatrixXd &fisher) const override {
        const Eigen::VectorXd natural = to_natural(phi);
        const double v = problem_.value_gradient_fisher(natural, gradient, fisher);
        Eigen::VectorXd jac = Eigen::VectorXd::Ones(phi.size());
        for (int q = 0; q < q_; ++q) {
            jac(4 * q + 2) = natural(4 * q + 2);
            jac(4 * q + 3) = natural(4 * q + 3);
        }
        jac(4 * q_) = natural(4 * q_);
        gradient.array() *= jac.array();
        fisher = jac.asDiagonal() * fisher * jac.asDiagonal();
        return v;
    }

    Eigen::VectorXd project(Eigen::VectorXd phi) const override {
        for (int q = 0; q < q_; ++q) {
            phi(4 * q) = std::clamp(phi(4 * q), -90.0, 90.0);
            phi(4 * q + 1) = wrap_degrees(phi(4 * q + 1));
            phi(4 * q + 2) = std::clamp(phi(4 * q + 2), std::log(1e-4), std::log(1e4));
            phi(4 * q + 3) = std::clamp(phi(4 * q + 3), std::log(1e-30), std::log(1e30));
        }
        phi(4 * q_) = std::clamp(phi(4 * q_), std::log(1e-30), std::log(1e30));
        return phi;
    }

  private:
    const AngularMlProblem &problem_;
    int q_;
};

} // namespace

AngularFitReport fit_dmc_angular(const Eigen::MatrixXcd &spatial_marginal, const VmfMixture &init,
                                 const ArrayModel &array, const FrequencyGrid &grid,
                                 const LmOptions &options, int quad_elevation, int quad_azimuth) {
    validate_mixture(init);
    const int q = int(init.size());
    AngularMlProblem problem(spatial_marginal, array, grid, q, quad_elevation, quad_azimuth);

    const double trace = spatial_marginal.trace().real();
    if (trace <= 0.0)
        throw std::invalid_argument("fit_dmc_angular: covariance has nonpositive trace");
    const double delta0 = 1e-3 * trace / array.port_count();

    // scale the free component weights so the model trace matches the data
    VmfMixture scaled = init;
    double model_trace = 0.0;
    for (auto &c : scaled) {
        c.kappa = std::max(c.kappa, 1e-3);
        model_trace +=
            c.weight *
            problem.component_matrix(c.mean_elevation_deg, c.mean_azimuth_deg, c.kappa)
                .trace()
                .real();
    }
    const double gain = (trace - array.port_count() * delta0) / std::max(model_trace, 1e-300);
    for (auto &c : scaled)
        c.weight = std::max(c.weight * gain, 1e-12 * trace);

    AngularLogObjective objective(problem, q);
    const LmResult lm = maximize_likelihood_lm(
        objective, objective.to_phi(problem.pack(scaled, delta0)), options);

    AngularFitReport report;
    double delta = 0.0;
    report.fitted = problem.unpack(objective.to_natural(lm.params), &delta);
    double weight_sum = 0.0;
    for (const auto &c : report.fitted)
        weight_sum += c.weight;
    for (auto &c : report.fitted)
        c.weight /= weight_sum;
    report.noise_delta = delta;
    report.ll_trace = lm.ll_trace;
    report.iterations = lm.iterations;
    report.converged = lm.converged;
    return report;
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

std::string fit_report_to_text(const DmcFitReport &report) {
    std::ostringstream out;
    out.precision(17);
    out << "DMCFIT1\n";
    out << "converged=" << (report.converged ? 1 : 0) << "\n";
    out << "iterations=" << report.iterations << "\n";
    out << "power_capture_ratio=" << report.power_capture_ratio << "\n";
    out << "noise_floor=" << report.fitted.noise_floor << "\n";
    out << "processes=" << report.fitted.processes.size() << "\n";
    for (std::size_t k = 0; k < report.fitted.processes.size(); ++k) {
        const auto &p = report.fitted.processes[k];
        out << "process." << k << "=" << p.alpha1 << " " << p.decay << " " << p.base_delay << "\n";
    }
    auto write_mixture = [&out](const char *name, const VmfMixture &m) {
        out << name << ".components=" << m.size() << "\n";
        for (std::size_t i = 0; i < m.size(); ++i)
            out << name << "." << i << "=" << m[i].mean_elevation_deg << " "
                << m[i].mean_azimuth_deg << " " << m[i].kappa << " " << m[i].weight << "\n";
    };
    write_mixture("vmf_rx", report.fitted.vmf_rx);
    write_mixture("vmf_tx", report.fitted.vmf_tx);
    out << "ll_trace=";
    for (std::size_t i = 0; i < report.ll_trace.size(); ++i)
        out << (i ? " " : "") << report.ll_trace[i];
    out << "\n";
    return out.str();
}

DmcFitReport fit_report_from_text(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "DMCFIT1")
        throw format_error("fit report: bad magic");
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&kv](const std::string &key) -> const std::string & {
        auto it = kv.find(key);
        if (it == kv.end())
            throw format_error("fit report: missing key '" + key + "'");
        return it->second;
    };
    DmcFitReport report;
    report.converged = get("converged") == "1";
    report.iterations = std::stoi(get("iterations"));
    report.power_capture_ratio = std::stod(get("power_capture_ratio"));
    report.fitted.noise_floor = std::stod(get("noise_floor"));
    const int k = std::stoi(get("processes"));
    for (int i = 0; i < k; ++i) {
        std::istringstream ps(get("process." + std::to_string(i)));
        DmcDelayProcess p;
        ps >> p.alpha1 >> p.decay >> p.base_delay;
        report.fitted.processes.push_back(p);
    }
    auto read_mixture = [&](const char *name) {
        VmfMixture m;
        const int q = std::stoi(get(std::string(name) + ".components"));
        for (int i = 0; i < q; ++i) {
            std::istringstream ms(get(std::string(name) + "." + std::to_string(i)));
            VmfComponent c;
            ms >> c.mean_elevation_deg >> c.mean_azimuth_deg >> c.kappa >> c.weight;
            m.push_back(c);
        }
        return m;
    };
    report.fitted.vmf_rx = read_mixture("vmf_rx");
    report.fitted.vmf_tx = read_mixture("vmf_tx");
    std::istringstream ts(get("ll_trace"));
    double v;
    while (ts >> v)
        report.ll_trace.push_back(v);
    return report;
}

} // namespace mpchan
