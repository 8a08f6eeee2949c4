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

#include "mpchan/mimo_analysis.hpp"

#include "mpchan/smc_estimator.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace mpchan {

Eigen::MatrixXd AngularSpectrum::power_db() const {
    return 10.0 * power.array().max(1e-300).log10();
}

std::pair<double, double> AngularSpectrum::peak() const {
    Eigen::Index r = 0, c = 0;
    power.maxCoeff(&r, &c);
    return {elevation_deg(r), azimuth_deg(c)};
}

Eigen::VectorXd default_elevation_grid(double step_deg) {
    const int n = int(std::floor(180.0 / step_deg)) + 1;
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i)
        g(i) = -90.0 + i * step_deg;
    return g;
}

Eigen::VectorXd default_azimuth_grid(double step_deg) {
    const int n = int(std::floor(360.0 / step_deg));
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i)
        g(i) = -180.0 + i * step_deg;
    return g;
}

AngularSpectrum bartlett_spectrum(const ChannelTensor &tensor, LinkSide side,
                                  const Eigen::VectorXd &elevation_grid_deg,
                                  const Eigen::VectorXd &azimuth_grid_deg, BartlettMode mode) {
    const auto &array = side == LinkSide::Rx ? tensor.rx_array() : tensor.tx_array();
    if (!array)
        throw std::invalid_argument("bartlett_spectrum: tensor carries no array geometry");

    AngularSpectrum spec;
    spec.elevation_deg = elevation_grid_deg;
    spec.azimuth_deg = azimuth_grid_deg;
    spec.power = Eigen::MatrixXd::Zero(elevation_grid_deg.size(), azimuth_grid_deg.size());

    const int m_f = tensor.freq_points();
    // G has the scanned side on columns: Rx side scans H^T (M_T x M_R)
    std::vector<Eigen::MatrixXcd> slices(std::size_t(m_f));
    for (int f = 0; f < m_f; ++f) {
        const Eigen::MatrixXcd s = tensor.slice_at_frequency(f);
        slices[std::size_t(f)] = (side == LinkSide::Rx) ? s.transpose() : s;
    }

    for (Eigen::Index ei = 0; ei < elevation_grid_deg.size(); ++ei) {
        for (Eigen::Index ai = 0; ai < azimuth_grid_deg.size(); ++ai) {
            // response at the carrier; F is 2 x ports as in the scan formula
            const Eigen::MatrixXcd f2 =
                array->response_matrix(elevation_grid_deg(ei), azimuth_grid_deg(ai),
                                       tensor.grid().fc())
                    .transpose();
            Eigen::Matrix2cd w = Eigen::Matrix2cd::Identity();
            if (mode == BartlettMode::WeightedInverse) {
                Eigen::Matrix2cd gram = f2 * f2.adjoint();
                Eigen::Matrix2cd inv;
                double det = std::abs(gram.determinant());
                if (det < 1e-18 * std::max(1.0, std::norm(gram.trace()))) {
                    gram += 1e-9 * gram.trace().real() * Eigen::Matrix2cd::Identity();
                    spec.regularized = true;
                }
                w = gram.inverse();
            }
            double p = 0.0;
            for (int f = 0; f < m_f; ++f) {
                // tr(|G F^H W F G^H|) with elementwise magnitude on the diagonal
                const Eigen::MatrixXcd proj = slices[std::size_t(f)] * f2.adjoint(); // rows x 2
                for (Eigen::Index r = 0; r < proj.rows(); ++r)
                    p += std::abs((proj.row(r) * w * proj.row(r).adjoint())(0, 0));
            }
            spec.power(ei, ai) = p / double(m_f);
        }
    }
    return spec;
}

NormalizedChannel normalize_channel(const ChannelTensor &tensor) {
    const double mean_power = tensor.total_power() / double(tensor.freq_points());
    if (mean_power <= 0.0)
        throw std::invalid_argument("normalize_channel: zero tensor");
    NormalizedChannel out{tensor, mean_power / double(tensor.links())};
    out.tensor.flat() /= std::sqrt(out.gamma);
    return out;
}

SvResult singular_values(const ChannelTensor &tensor, int k) {
    const int kmax = std::min(tensor.rx_ports(), tensor.tx_ports());
    if (k < 1 || k > kmax)
        throw std::invalid_argument("singular_values: k out of range");
    SvResult res;
    res.per_frequency.resize(k, tensor.freq_points());
    double captured = 0.0;
    for (int f = 0; f < tensor.freq_points(); ++f) {
        const Eigen::MatrixXcd slice = tensor.slice_at_frequency(f);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(slice);
        res.per_frequency.col(f) = svd.singularValues().head(k);
        captured += svd.singularValues().head(k).squaredNorm();
    }
    res.averaged_profile = res.per_frequency.rowwise().mean();
    const double total = tensor.total_power();
    res.power_fraction_topk = total > 0.0 ? captured / total : 0.0;
    return res;
}

double capacity_bits(const ChannelTensor &normalized, double snr_db) {
    const double rho = std::pow(10.0, snr_db / 10.0);
    const double scale = rho / double(normalized.tx_ports());
    double cap = 0.0;
    for (int f = 0; f < normalized.freq_points(); ++f) {
        const Eigen::MatrixXcd slice = normalized.slice_at_frequency(f);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(slice);
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            cap += std::log2(1.0 + scale * svd.singularValues()(i) * svd.singularValues()(i));
    }
    return cap / double(normalized.freq_points());
}

CapacityResult analyze_capacity(const ChannelTensor &raw, double snr_db, int top_k) {
    NormalizedChannel norm = normalize_channel(raw);
    CapacityResult res;
    res.snr_db = snr_db;
    res.gamma = norm.gamma;
    res.capacity_bps_hz = capacity_bits(norm.tensor, snr_db);
    res.sv_profile = singular_values(norm.tensor, top_k).averaged_profile;
    return res;
}

double dmc_power_fraction(const ChannelTensor &tensor, const std::vector<SmcPath> &paths,
                          double noise_floor_alpha0) {
    const double total = tensor.total_power();
    if (total <= 0.0)
        return 0.0;
    ChannelTensor residual = paths.empty() ? tensor : smc_residual(tensor, paths);
    const double noise_power =
        noise_floor_alpha0 * double(tensor.freq_points()) * double(tensor.links());
    const double dmc = residual.total_power() - noise_power;
    return std::clamp(dmc / total, 0.0, 1.0);
}

} // namespace mpchan
