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

#include "mpchan/smc_estimator.hpp"

#include "mpchan/errors.hpp"
#include "mpchan/fft_utils.hpp"
#include "mpchan/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mpchan {

void SageConfig::validate() const {
    if (max_paths < 1)
        throw std::invalid_argument("SageConfig: max_paths must be >= 1");
    if (stop_threshold_db > 0.0)
        throw std::invalid_argument("SageConfig: stop threshold must be <= 0 dB");
    if (coarse_azimuth_step_deg <= 0.0 || coarse_elevation_step_deg <= 0.0)
        throw std::invalid_argument("SageConfig: coarse steps must be positive");
}

namespace {

// Per-port amplitudes and projections for one scan direction; phases are
// reassembled per frequency so wideband refinement stays exact.
struct Steering {
    Eigen::MatrixXd amps;      // ports x 2 (V, H incidence)
    Eigen::VectorXd k_dot_pos; // <k, p> per port, meters

    Eigen::MatrixXcd response(double frequency_hz) const {
        const double wavenumber = 2.0 * M_PI * frequency_hz / kSpeedOfLight;
        Eigen::MatrixXcd f(amps.rows(), 2);
        for (Eigen::Index i = 0; i < amps.rows(); ++i) {
            const std::complex<double> phase = std::polar(1.0, wavenumber * k_dot_pos(i));
            f(i, 0) = amps(i, 0) * phase;
            f(i, 1) = amps(i, 1) * phase;
        }
        return f;
    }
};

Steering make_steering(const ArrayModel &array, double el_deg, double az_deg) {
    const Eigen::Vector3d k = unit_direction(el_deg, az_deg);
    Steering s;
    s.amps.resize(array.port_count(), 2);
    s.k_dot_pos.resize(array.port_count());
    for (int i = 0; i < array.port_count(); ++i) {
        const auto &e = array.elements()[std::size_t(i)];
        const double cospsi = std::clamp(k.dot(e.orientation), -1.0, 1.0);
        const double psi = rad2deg(std::acos(cospsi));
        const double co = array.pattern().co_amplitude(psi);
        const double cross = array.pattern().cross_amplitude(psi);
        if (e.polarization == Polarization::V) {
            s.amps(i, 0) = co;
            s.amps(i, 1) = cross;
        } else {
            s.amps(i, 0) = cross;
            s.amps(i, 1) = co;
        }
        s.k_dot_pos(i) = k.dot(e.position);
    }
    return s;
}

struct AngleGrid {
    std::vector<double> elevation, azimuth; // per column pair
    Eigen::MatrixXcd dictionary;            // ports x 2*n_angles (carrier frequency)
};

AngleGrid make_grid(const ArrayModel &array, double fc, double el_step, double az_step) {
    AngleGrid g;
    for (double el = -90.0; el <= 90.0 + 1e-9; el += el_step)
        for (double az = -180.0; az < 180.0 - 1e-9; az += az_step) {
            g.elevation.push_back(std::min(el, 90.0));
            g.azimuth.push_back(az);
        }
    const std::size_t n = g.elevation.size();
    g.dictionary.resize(array.port_count(), Eigen::Index(2 * n));
    for (std::size_t i = 0; i < n; ++i)
        g.dictionary.middleCols(Eigen::Index(2 * i), 2) =
            array.response_matrix(g.elevation[i], g.azimuth[i], fc);
    return g;
}

// Concentrated-likelihood machinery for a single path: given angles and
// delay, the optimal 2x2 amplitude solves a 4x4 least-squares system and the
// captured energy b^H M^{-1} b is the refinement objective.
class PathObjective {
  public:
    PathObjective(const std::vector<Eigen::MatrixXcd> &slices, const FrequencyGrid &grid,
                  const ArrayModel &rx, const ArrayModel &tx)
        : slices_(slices), grid_(grid), rx_(rx), tx_(tx) {}

    void set_angles(double eoa, double aoa, double eod, double aod) {
        rx_steer_ = make_steering(rx_, eoa, wrap_degrees(aoa));
        tx_steer_ = make_steering(tx_, eod, wrap_degrees(aod));
        gram_valid_ = false;
    }

    // Captured energy at delay tau given current angles.
    double energy(double tau) {
        compute_projections(tau);
        return std::real(b_.dot(gram_solver_.solve(b_)));
    }

    Eigen::Matrix2cd solve_amplitude(double tau) {
        compute_projections(tau);
        const Eigen::Vector4cd a = gram_solver_.solve(b_);
        Eigen::Matrix2cd amp;
        amp << a(0), a(1), a(2), a(3); // row-major (p, q) = (Rx pol, Tx pol)
        return amp;
    }

  private:
    void refresh_gram() {
        if (gram_valid_)
            return;
        const Eigen::Matrix2d ar = rx_steer_.amps.transpose() * rx_steer_.amps;
        const Eigen::Matrix2d at = tx_steer_.amps.transpose() * tx_steer_.amps;
        Eigen::Matrix4cd m;
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
                for (int pp = 0; pp < 2; ++pp)
                    for (int qq = 0; qq < 2; ++qq)
                        m(2 * p + q, 2 * pp + qq) = ar(p, pp) * at(q, qq);
        m *= double(grid_.size());
        gram_solver_.compute(m + 1e-12 * m.trace() * Eigen::Matrix4cd::Identity());
        gram_valid_ = true;
    }

    void compute_projections(double tau) {
        refresh_gram();
        b_.setZero();
        for (int f = 0; f < grid_.size(); ++f) {
            const double freq = grid_.frequency(f);
            const Eigen::MatrixXcd fr = rx_steer_.response(freq);
            const Eigen::MatrixXcd ft = tx_steer_.response(freq);
            const std::complex<double> rot = std::polar(1.0, -2.0 * M_PI * freq * tau);
            const Eigen::Matrix2cd c = fr.adjoint() * slices_[std::size_t(f)] * ft.conjugate();
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q)
                    b_(2 * p + q) += rot * c(p, q);
        }
    }

    const std::vector<Eigen::MatrixXcd> &slices_;
    const FrequencyGrid &grid_;
    const ArrayModel &rx_, &tx_;
    Steering rx_steer_, tx_steer_;
    bool gram_valid_ = false;
    Eigen::LDLT<Eigen::Matrix4cd> gram_solver_;
    Eigen::Vector4cd b_;
};

double golden_section_max(const std::function<double(double)> &f, double lo, double hi,
                          double tol) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

std::vector<SmcPath> estimate_smc(const ChannelTensor &tensor, const SageConfig &config) {
    config.validate();
    if (!tensor.is_finite())
        throw std::invalid_argument("estimate_smc: tensor has non-finite entries");
    std::vector<SmcPath> paths;
    if (tensor.total_power() == 0.0)
        return paths;
    if (!tensor.rx_array() || !tensor.tx_array())
        throw std::invalid_argument("estimate_smc: tensor carries no array geometry");

    const ArrayModel &rx = *tensor.rx_array();
    const ArrayModel &tx = *tensor.tx_array();
    const FrequencyGrid &grid = tensor.grid();
    const int m_f = grid.size();
    const double dtau = grid.delay_resolution();

    const AngleGrid rx_grid = make_grid(rx, grid.fc(), config.coarse_elevation_step_deg,
                                        config.coarse_azimuth_step_deg);
    const AngleGrid tx_grid = make_grid(tx, grid.fc(), config.coarse_elevation_step_deg,
                                        config.coarse_azimuth_step_deg);

    ChannelTensor residual = tensor;
    double first_power = 0.0;

    for (int l = 0; l < config.max_paths; ++l) {
        // strongest delay bin of the residual; ties resolve to the smallest delay
        Eigen::VectorXd profile = Eigen::VectorXd::Zero(m_f);
        Eigen::MatrixXcd cir(residual.links(), m_f);
        for (int r = 0; r < residual.rx_ports(); ++r)
            for (int t = 0; t < residual.tx_ports(); ++t) {
                const Eigen::VectorXcd h =
                    delay_transform(Eigen::VectorXcd(residual.link_response(r, t)));
                cir.row(Eigen::Index(r) * residual.tx_ports() + t) = h.transpose();
                profile += h.cwiseAbs2();
            }
        Eigen::Index peak_bin = 0;
        profile.maxCoeff(&peak_bin);

        Eigen::MatrixXcd slice(residual.rx_ports(), residual.tx_ports());
        for (int r = 0; r < residual.rx_ports(); ++r)
            for (int t = 0; t < residual.tx_ports(); ++t)
                slice(r, t) = cir(Eigen::Index(r) * residual.tx_ports() + t, peak_bin);

        // coarse beamformer scans on the peak-bin slice
        auto scan_best = [](const Eigen::MatrixXcd &projections, const AngleGrid &g) {
            double best = -1.0;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < g.elevation.size(); ++i) {
                const double p = projections.middleCols(Eigen::Index(2 * i), 2).squaredNorm();
                if (p > best) {
                    best = p;
                    best_i = i;
                }
            }
            return std::make_pair(g.elevation[best_i], g.azimuth[best_i]);
        };
        const Eigen::MatrixXcd rx_proj = (rx_grid.dictionary.adjoint() * slice).transpose();
        auto [eoa, aoa] = scan_best(rx_proj, rx_grid);
        const Eigen::MatrixXcd tx_proj = slice * tx_grid.dictionary.conjugate();
        auto [eod, aod] = scan_best(tx_proj, tx_grid);
        double tau = double(peak_bin) * dtau;

        // cyclic coordinate refinement
        std::vector<Eigen::MatrixXcd> slices;
        slices.resize(std::size_t(m_f));
        for (int f = 0; f < m_f; ++f)
            slices[std::size_t(f)] = residual.slice_at_frequency(f);
        PathObjective objective(slices, grid, rx, tx);
        objective.set_angles(eoa, aoa, eod, aod);
        double energy = objective.energy(tau);
        const double tau_tol = dtau / 50.0;
        const double span = grid.delay_span();
        for (int cycle = 0; cycle < config.refine_cycles; ++cycle) {
            tau = golden_section_max([&](double t) { return objective.energy(t); },
                                     std::max(0.0, tau - dtau), std::min(span - dtau * 1e-6, tau + dtau),
                                     tau_tol);
            eoa = golden_section_max(
                [&](double e) {
                    objective.set_angles(std::clamp(e, -90.0, 90.0), aoa, eod, aod);
                    return objective.energy(tau);
                },
                std::max(-90.0, eoa - config.coarse_elevation_step_deg),
                std::min(90.0, eoa + config.coarse_elevation_step_deg), config.angle_tolerance_deg);
            aoa = golden_section_max(
                [&](double a) {
                    objective.set_angles(eoa, a, eod, aod);
                    return objective.energy(tau);
                },
                aoa - config.coarse_azimuth_step_deg, aoa + config.coarse_azimuth_step_deg,
                config.angle_tolerance_deg);
            eod = golden_section_max(
                [&](double e) {
                    objective.set_angles(eoa, aoa, std::clamp(e, -90.0, 90.0), aod);
                    return objective.energy(tau);
                },
                std::max(-90.0, eod - config.coarse_elevation_step_deg),
                std::min(90.0, eod + config.coarse_elevation_step_deg), config.angle_tolerance_deg);
            aod = golden_section_max(
                [&](double a) {
                    objective.set_angles(eoa, aoa, eod, a);
                    return objective.energy(tau);
                },
                aod - config.coarse_azimuth_step_deg, aod + config.coarse_azimuth_step_deg,
                config.angle_tolerance_deg);
            objective.set_angles(eoa, aoa, eod, aod);
            const double next = objective.energy(tau);
            const bool settled = std::abs(next - energy) < config.epsilon * std::max(next, 1e-300);
            energy = next;
            if (settled)
                break;
        }

        SmcPath path;
        path.eoa_deg = std::clamp(eoa, -90.0, 90.0);
        path.aoa_deg = wrap_degrees(aoa);
        path.eod_deg = std::clamp(eod, -90.0, 90.0);
        path.aod_deg = wrap_degrees(aod);
        path.delay_s = std::clamp(tau, 0.0, span * (1.0 - 1e-12));
        path.amp = objective.solve_amplitude(path.delay_s);

        const double power = path.power();
        if (l == 0) {
            first_power = power;
            if (power <= 0.0)
                break;
        } else if (power < first_power * std::pow(10.0, config.stop_threshold_db / 10.0)) {
            break;
        }
        paths.push_back(path);
        residual -= synth_smc({path}, tensor.tx_array(), tensor.rx_array(), grid);
    }

    std::stable_sort(paths.begin(), paths.end(),
                     [](const SmcPath &a, const SmcPath &b) { return a.power() > b.power(); });
    return paths;
}

ChannelTensor smc_residual(const ChannelTensor &tensor, const std::vector<SmcPath> &paths) {
    if (paths.empty())
        return tensor;
    ChannelTensor residual = tensor;
    residual -= synth_smc(paths, tensor.tx_array(), tensor.rx_array(), tensor.grid());
    return residual;
}

DmcCovariance measured_dmc_covariance(const ChannelTensor &residual) {
    const int m_f = residual.freq_points();
    const int links = residual.links();
    DmcCovariance cov;
    cov.data_matrix.resize(m_f, links);
    for (int r = 0; r < residual.rx_ports(); ++r)
        for (int t = 0; t < residual.tx_ports(); ++t)
            cov.data_matrix.col(Eigen::Index(r) * residual.tx_ports() + t) =
                residual.link_response(r, t);
    cov.data_matrix /= std::sqrt(double(links));
    cov.frequency_marginal = cov.data_matrix * cov.data_matrix.adjoint();

    cov.rx_marginal = Eigen::MatrixXcd::Zero(residual.rx_ports(), residual.rx_ports());
    cov.tx_marginal = Eigen::MatrixXcd::Zero(residual.tx_ports(), residual.tx_ports());
    for (int f = 0; f < m_f; ++f) {
        const Eigen::MatrixXcd s = residual.slice_at_frequency(f);
        cov.rx_marginal.noalias() += s * s.adjoint();
        cov.tx_marginal.noalias() += s.transpose() * s.conjugate();
    }
    cov.rx_marginal /= double(m_f) * residual.tx_ports();
    cov.tx_marginal /= double(m_f) * residual.rx_ports();
    return cov;
}

Eigen::MatrixXcd DmcCovariance::full_outer_product() const {
    const Eigen::Index m_f = data_matrix.rows();
    const Eigen::Index links = data_matrix.cols();
    const Eigen::Index dim = m_f * links;
    if (dim > 4096)
        throw std::invalid_argument(
            "full_outer_product: tensor too large to materialize; use the marginals");
    // frequency-major vec: index = f * links + s; undo the 1/sqrt(links) scale
    Eigen::VectorXcd v(dim);
    for (Eigen::Index f = 0; f < m_f; ++f)
        v.segment(f * links, links) = data_matrix.row(f).transpose() * std::sqrt(double(links));
    return v * v.adjoint();
}

std::string paths_to_csv(const std::vector<SmcPath> &paths) {
    std::ostringstream out;
    out << "index,eoa_deg,aoa_deg,eod_deg,aod_deg,delay_ns,"
           "re_vv,im_vv,re_vh,im_vh,re_hv,im_hv,re_hh,im_hh,power_db\n";
    char line[512];
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const SmcPath &p = paths[i];
        std::snprintf(line, sizeof line,
                      "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                      "%.10g,%.10g\n",
                      i, p.eoa_deg, p.aoa_deg, p.eod_deg, p.aod_deg, p.delay_s * 1e9,
                      p.amp(0, 0).real(), p.amp(0, 0).imag(), p.amp(0, 1).real(), p.amp(0, 1).imag(),
                      p.amp(1, 0).real(), p.amp(1, 0).imag(), p.amp(1, 1).real(), p.amp(1, 1).imag(),
                      10.0 * std::log10(std::max(p.power(), 1e-300)));
        out << line;
    }
    return out.str();
}

std::vector<SmcPath> paths_from_csv(const std::string &csv) {
    std::vector<SmcPath> paths;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line))
        throw format_error("paths_from_csv: empty input");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::vector<double> vals;
        std::string field;
        while (std::getline(ls, field, ','))
            vals.push_back(std::stod(field));
        if (vals.size() != 15)
            throw format_error("paths_from_csv: expected 15 columns, got " +
                               std::to_string(vals.size()));
        SmcPath p;
        p.eoa_deg = vals[1];
        p.aoa_deg = vals[2];
        p.eod_deg = vals[3];
        p.aod_deg = vals[4];
        p.delay_s = vals[5] * 1e-9;
        p.amp(0, 0) = {vals[6], vals[7]};
        p.amp(0, 1) = {vals[8], vals[9]};
        p.amp(1, 0) = {vals[10], vals[11]};
        p.amp(1, 1) = {vals[12], vals[13]};
        paths.push_back(p);
    }
    return paths;
}

} // namespace mpchan
