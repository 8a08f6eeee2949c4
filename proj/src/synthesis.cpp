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

#include "mpchan/synthesis.hpp"

#include "mpchan/errors.hpp"
#include "mpchan/rng.hpp"
#include "mpchan/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace mpchan {

void DmcDelayProcess::validate() const {
    if (alpha1 <= 0.0 || decay <= 0.0 || base_delay < 0.0)
        throw std::invalid_argument(
            "DmcDelayProcess: alpha1 and decay must be positive, base_delay nonnegative");
}

void DmcModel::validate() const {
    if (processes.empty())
        throw std::invalid_argument("DmcModel: at least one delay process required");
    for (const auto &p : processes)
        p.validate();
    if (noise_floor < 0.0)
        throw std::invalid_argument("DmcModel: noise floor must be nonnegative");
    validate_mixture(vmf_rx);
    validate_mixture(vmf_tx);
}

ChannelTensor synth_smc(const std::vector<SmcPath> &paths,
                        const std::shared_ptr<const ArrayModel> &tx,
                        const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid) {
    ChannelTensor h(rx, tx, grid);
    const double span = grid.delay_span();
    for (const auto &p : paths) {
        if (!(p.delay_s >= 0.0 && p.delay_s < span))
            throw std::invalid_argument("synth_smc: path delay outside [0, delay span)");
        if (!p.amp.allFinite())
            throw std::invalid_argument("synth_smc: non-finite path amplitude");
    }
    for (int i = 0; i < grid.size(); ++i) {
        const double f = grid.frequency(i);
        Eigen::MatrixXcd slice = Eigen::MatrixXcd::Zero(h.rx_ports(), h.tx_ports());
        for (const auto &p : paths) {
            const Eigen::MatrixXcd fr = rx->response_matrix(p.eoa_deg, p.aoa_deg, f);
            const Eigen::MatrixXcd ft = tx->response_matrix(p.eod_deg, p.aod_deg, f);
            const std::complex<double> rot = std::polar(1.0, 2.0 * M_PI * f * p.delay_s);
            slice.noalias() += rot * (fr * p.amp * ft.transpose());
        }
        h.set_slice_at_frequency(i, slice);
    }
    return h;
}

Eigen::VectorXd dmc_delay_psd(const DmcModel &model, const Eigen::VectorXd &delays_s) {
    model.validate();
    Eigen::VectorXd psd = Eigen::VectorXd::Constant(delays_s.size(), model.noise_floor);
    for (const auto &p : model.processes) {
        // onset half-power sample goes to the nearest grid point
        Eigen::Index onset = 0;
        (delays_s.array() - p.base_delay).abs().minCoeff(&onset);
        for (Eigen::Index i = 0; i < delays_s.size(); ++i) {
            if (i == onset)
                psd(i) += 0.5 * p.alpha1;
            else if (delays_s(i) > p.base_delay)
                psd(i) += p.alpha1 * std::exp(-p.decay * (delays_s(i) - p.base_delay));
        }
    }
    return psd;
}

Eigen::VectorXcd dmc_frequency_kernel(const std::vector<DmcDelayProcess> &processes,
                                      const FrequencyGrid &grid) {
    // First-column generator of the Toeplitz covariance. Its conjugate (the
    // first row) is (alpha1/M) e^{-j 2 pi m ntau} / (beta + j 2 pi m / M);
    // this orientation pairs with the e^{+j 2 pi f tau} path phase so delay
    // reconstructions land at positive delay bins.
    const int m_f = grid.size();
    const double dtau = grid.delay_resolution();
    Eigen::VectorXcd kappa = Eigen::VectorXcd::Zero(m_f);
    for (const auto &p : processes) {
        p.validate();
        const double ntau = p.base_delay / (m_f * dtau);
        const double beta = p.decay * dtau;
        for (int m = 0; m < m_f; ++m) {
            const std::complex<double> den(beta, -2.0 * M_PI * m / m_f);
            kappa(m) += p.alpha1 / double(m_f) * std::polar(1.0, 2.0 * M_PI * m * ntau) / den;
        }
    }
    return kappa;
}

Eigen::MatrixXcd dmc_frequency_covariance(const std::vector<DmcDelayProcess> &processes,
                                          double noise_floor, const FrequencyGrid &grid) {
    if (processes.empty())
        throw std::invalid_argument("dmc_frequency_covariance: no delay processes");
    const int n = grid.size();
    const Eigen::VectorXcd kappa = dmc_frequency_kernel(processes, grid);
    Eigen::MatrixXcd r(n, n);
    for (int i = 0; i < n; ++i) {
        r(i, i) = kappa(0).real() + noise_floor;
        for (int j = 0; j < i; ++j) {
            r(i, j) = kappa(i - j);
            r(j, i) = std::conj(kappa(i - j));
        }
    }
    r = 0.5 * (r + r.adjoint()).eval();
    // PSD check: the smallest eigenvalue may only be negative by roundoff
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin < -1e-9 * std::max(1.0, lmax))
        throw numerical_error("dmc_frequency_covariance: matrix is not positive semidefinite");
    return r;
}

Eigen::MatrixXcd dmc_spatial_covariance(const VmfMixture &mixture, const ArrayModel &array,
                                        const FrequencyGrid &grid, int quad_elevation,
                                        int quad_azimuth) {
    validate_mixture(mixture);
    const int ports = array.port_count();
    const SphereQuadrature quad = sphere_quadrature(quad_elevation, quad_azimuth);
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(ports, ports);
    for (std::size_t i = 0; i < quad.size(); ++i) {
        const double f = vmf_density(mixture, quad.elevation_deg[i], quad.azimuth_deg[i]);
        if (f * quad.weight[i] == 0.0)
            continue;
        const Eigen::MatrixXcd resp =
            array.response_matrix(quad.elevation_deg[i], quad.azimuth_deg[i], grid.fc());
        const Eigen::VectorXcd a = resp.col(0) + resp.col(1);
        r.selfadjointView<Eigen::Lower>().rankUpdate(a, f * quad.weight[i]);
    }
    r = r.selfadjointView<Eigen::Lower>();
    const double tr = r.trace().real();
    if (tr <= 0.0)
        throw numerical_error("dmc_spatial_covariance: degenerate covariance");
    return r * (double(ports) / tr);
}

Eigen::MatrixXcd covariance_factor(const Eigen::MatrixXcd &r, bool &used_fallback) {
    used_fallback = false;
    Eigen::LLT<Eigen::MatrixXcd> llt(r);
    if (llt.info() == Eigen::Success)
        return llt.matrixL();
    // indefinite by roundoff: clip negative eigenvalues at zero
    used_fallback = true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    if (es.info() != Eigen::Success)
        throw numerical_error("covariance_factor: eigendecomposition failed");
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

ChannelTensor synth_dmc(const DmcModel &model, const std::shared_ptr<const ArrayModel> &tx,
                        const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid,
                        std::uint64_t seed) {
    model.validate();
    if (!tx || !rx)
        throw std::invalid_argument("synth_dmc: arrays are required");

    const int m_f = grid.size();
    const int m_r = rx->port_count();
    const int m_t = tx->port_count();

    bool fb_f = false, fb_r = false, fb_t = false;
    const Eigen::MatrixXcd lf =
        covariance_factor(dmc_frequency_covariance(model.processes, model.noise_floor, grid), fb_f);
    const Eigen::MatrixXcd lr =
        covariance_factor(dmc_spatial_covariance(model.vmf_rx, *rx, grid), fb_r);
    const Eigen::MatrixXcd lt =
        covariance_factor(dmc_spatial_covariance(model.vmf_tx, *tx, grid), fb_t);

    // Z is m_f x (m_r m_t), filled column-major so draws are a pure function
    // of (seed, index).
    CounterRng rng(seed);
    Eigen::MatrixXcd z(m_f, m_r * m_t);
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        for (Eigen::Index rrow = 0; rrow < z.rows(); ++rrow)
            z(rrow, c) = rng.complex_normal();

    // H_D = L_F Z (L_R kron L_T)^T realizes R_F kron R_A^Rx kron R_A^Tx
    // (frequency-major vec order, space index s = r * M_T + t).
    const Eigen::MatrixXcd w = lf * z;
    ChannelTensor h(rx, tx, grid);
    Eigen::MatrixXcd y(m_r, m_t);
    for (int fi = 0; fi < m_f; ++fi) {
        for (int r = 0; r < m_r; ++r)
            y.row(r) = w.block(fi, Eigen::Index(r) * m_t, 1, m_t);
        h.set_slice_at_frequency(fi, lr * y * lt.transpose());
    }
    h.metadata["seed"] = std::to_string(seed);
    if (fb_f || fb_r || fb_t)
        h.metadata["cholesky_fallback"] = "1";
    return h;
}

ChannelTensor synth_full(const std::vector<SmcPath> &paths, const DmcModel &model,
                         const std::shared_ptr<const ArrayModel> &tx,
                         const std::shared_ptr<const ArrayModel> &rx, const FrequencyGrid &grid,
                         std::uint64_t seed) {
    ChannelTensor h = synth_dmc(model, tx, rx, grid, seed);
    if (!paths.empty())
        h += synth_smc(paths, tx, rx, grid);
    return h;
}

} // namespace mpchan
