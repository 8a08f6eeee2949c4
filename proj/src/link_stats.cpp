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

#include "mpchan/link_stats.hpp"

#include "mpchan/fft_utils.hpp"
#include "mpchan/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mpchan {

Eigen::VectorXd delay_psd(const Eigen::VectorXcd &link_response) {
    return delay_transform(link_response).cwiseAbs2();
}

Eigen::VectorXd delay_psd(const ChannelTensor &tensor) {
    Eigen::VectorXd psd = Eigen::VectorXd::Zero(tensor.freq_points());
    for (int r = 0; r < tensor.rx_ports(); ++r)
        for (int t = 0; t < tensor.tx_ports(); ++t)
            psd += delay_psd(Eigen::VectorXcd(tensor.link_response(r, t)));
    return psd / double(tensor.links());
}

Eigen::VectorXd delay_psd_polarized(const ChannelTensor &tensor, Polarization rx_pol,
                                    Polarization tx_pol) {
    if (!tensor.rx_array() || !tensor.tx_array())
        throw std::invalid_argument("delay_psd_polarized: tensor carries no array geometry");
    const auto &rx_elems = tensor.rx_array()->elements();
    const auto &tx_elems = tensor.tx_array()->elements();
    Eigen::VectorXd psd = Eigen::VectorXd::Zero(tensor.freq_points());
    int count = 0;
    for (int r = 0; r < tensor.rx_ports(); ++r) {
        if (rx_elems[std::size_t(r)].polarization != rx_pol)
            continue;
        for (int t = 0; t < tensor.tx_ports(); ++t) {
            if (tx_elems[std::size_t(t)].polarization != tx_pol)
                continue;
            psd += delay_psd(Eigen::VectorXcd(tensor.link_response(r, t)));
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("delay_psd_polarized: no ports with requested polarization");
    return psd / double(count);
}

double estimate_noise_floor_db(const Eigen::VectorXd &psd_linear) {
    const Eigen::Index n = psd_linear.size();
    if (n < 10)
        throw std::invalid_argument("estimate_noise_floor_db: PSD too short");
    const Eigen::Index tail = std::max<Eigen::Index>(1, n / 10);
    std::vector<double> last(psd_linear.data() + (n - tail), psd_linear.data() + n);
    std::nth_element(last.begin(), last.begin() + last.size() / 2, last.end());
    const double median = last[last.size() / 2];
    return 10.0 * std::log10(std::max(median, 1e-300)) + 3.0;
}

std::vector<Mpc> extract_mpcs(const Eigen::VectorXd &psd_linear, double noise_floor_db,
                              double delta_tau_s) {
    std::vector<Mpc> mpcs;
    if (psd_linear.size() == 0)
        return mpcs;
    const double peak_db = 10.0 * std::log10(std::max(psd_linear.maxCoeff(), 1e-300));
    const double threshold_db = std::max(noise_floor_db + 10.0, peak_db - 20.0);
    const double threshold = std::pow(10.0, threshold_db / 10.0);
    const Eigen::Index n = psd_linear.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double left = (i > 0) ? psd_linear(i - 1) : -1.0;
        const double right = (i + 1 < n) ? psd_linear(i + 1) : -1.0;
        const bool local_max = (psd_linear(i) >= left && psd_linear(i) > right) ||
                               (psd_linear(i) > left && psd_linear(i) >= right);
        if (local_max && psd_linear(i) >= threshold)
            mpcs.push_back({double(i) * delta_tau_s, psd_linear(i)});
    }
    return mpcs;
}

double ci_intercept_db(double fc_ghz) {
    return 20.0 * std::log10(4.0 * M_PI * fc_ghz * 1e9 / kSpeedOfLight);
}

double PathLossFit::evaluate(double distance_m) const {
    return intercept_db + 10.0 * exponent * std::log10(distance_m);
}

PathLossFit fit_pathloss(const std::vector<std::pair<double, double>> &records,
                         PathLossModel model, double fc_ghz) {
    if (records.size() < 2)
        throw std::invalid_argument("fit_pathloss: need at least two samples");
    for (const auto &[d, pl] : records)
        if (d <= 0.0)
            throw std::invalid_argument("fit_pathloss: distances must be positive");

    PathLossFit fit;
    fit.model = model;
    fit.fc_ghz = fc_ghz;
    const std::size_t n = records.size();
    Eigen::VectorXd x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(Eigen::Index(i)) = 10.0 * std::log10(records[i].first);
        y(Eigen::Index(i)) = records[i].second;
    }

    if (model == PathLossModel::CI) {
        fit.intercept_db = ci_intercept_db(fc_ghz);
        const Eigen::VectorXd z = y.array() - fit.intercept_db;
        const double xx = x.squaredNorm();
        if (xx == 0.0)
            throw std::invalid_argument("fit_pathloss: all distances equal 1 m; CI slope undefined");
        fit.exponent = x.dot(z) / xx;
    } else {
        const double sx = x.mean(), sy = y.mean();
        const double sxx = (x.array() - sx).square().sum();
        if (sxx == 0.0)
            throw std::invalid_argument("fit_pathloss: FI degenerate, all distances equal");
        fit.exponent = (x.array() - sx).cwiseProduct(y.array() - sy).sum() / sxx;
        fit.intercept_db = sy - fit.exponent * sx;
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y(Eigen::Index(i)) - fit.evaluate(records[i].first);
        ss += r * r;
    }
    fit.sigma_db = std::sqrt(ss / double(n));
    return fit;
}

double excess_delay(const std::vector<Mpc> &mpcs) {
    if (mpcs.empty())
        throw std::invalid_argument("excess_delay: no MPCs");
    auto [mn, mx] = std::minmax_element(
        mpcs.begin(), mpcs.end(), [](const Mpc &a, const Mpc &b) { return a.delay_s < b.delay_s; });
    return mx->delay_s - mn->delay_s;
}

double delay_spread(const std::vector<Mpc> &mpcs) {
    if (mpcs.empty())
        throw std::invalid_argument("delay_spread: no MPCs");
    double p = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto &c : mpcs) {
        p += c.power;
        m1 += c.power * c.delay_s;
        m2 += c.power * c.delay_s * c.delay_s;
    }
    if (p <= 0.0)
        throw std::invalid_argument("delay_spread: nonpositive total power");
    const double mean = m1 / p;
    return std::sqrt(std::max(m2 / p - mean * mean, 0.0));
}

KFactorEstimate kfactor_moment(const Eigen::VectorXcd &link_response) {
    if (link_response.size() < 8)
        throw std::invalid_argument("kfactor_moment: need at least 8 frequency samples");
    const Eigen::VectorXd x = link_response.cwiseAbs2();
    const double mean = x.mean();
    if (mean <= 0.0)
        throw std::invalid_argument("kfactor_moment: zero response");
    const double var = (x.array() - mean).square().mean();
    const double gamma_v = var / (mean * mean);

    KFactorEstimate est;
    if (gamma_v >= 1.0) {
        est.k_db = -40.0;
        est.clamped_low = true;
        return est;
    }
    const double root = std::sqrt(1.0 - gamma_v);
    if (1.0 - root < 1e-12) {
        est.k_db = 40.0;
        est.clamped_high = true;
        return est;
    }
    const double k = root / (1.0 - root);
    est.k_db = 10.0 * std::log10(k);
    if (est.k_db > 40.0) {
        est.k_db = 40.0;
        est.clamped_high = true;
    } else if (est.k_db < -40.0) {
        est.k_db = -40.0;
        est.clamped_low = true;
    }
    return est;
}

double angular_spread(const std::vector<double> &angles_deg, const std::vector<double> &powers) {
    if (angles_deg.empty() || angles_deg.size() != powers.size())
        throw std::invalid_argument("angular_spread: empty or mismatched inputs");
    std::complex<double> resultant(0.0, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
        resultant += powers[i] * std::polar(1.0, deg2rad(angles_deg[i]));
        total += powers[i];
    }
    if (total <= 0.0)
        throw std::invalid_argument("angular_spread: nonpositive total power");
    const double mean_deg = rad2deg(std::arg(resultant));
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
        const double norm = wrap_degrees(angles_deg[i] - mean_deg);
        m1 += powers[i] * norm;
        m2 += powers[i] * norm * norm;
    }
    m1 /= total;
    m2 /= total;
    return std::sqrt(std::max(m2 - m1 * m1, 0.0));
}

namespace {

// ln I0(z), switching to the asymptotic expansion before e^z overflows
double log_bessel_i0(double z) {
    if (z < 600.0)
        return std::log(std::cyl_bessel_i(0.0, z));
    const double inv = 1.0 / (8.0 * z);
    return z - 0.5 * std::log(2.0 * M_PI * z) + std::log1p(inv * (1.0 + 4.5 * inv));
}

double rician_loglik(const std::vector<double> &r, double omega, double k) {
    const double sigma2 = omega / (2.0 * (1.0 + k));
    const double nu2 = omega * k / (1.0 + k);
    const double nu = std::sqrt(nu2);
    double ll = 0.0;
    for (double ri : r)
        ll += std::log(ri / sigma2) - (ri * ri + nu2) / (2.0 * sigma2) +
              log_bessel_i0(ri * nu / sigma2);
    return ll;
}

// golden-section maximizer on [lo, hi]
double golden_max(const std::function<double(double)> &f, double lo, double hi, double tol) {
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

double ks_statistic(const std::vector<double> &sorted, const std::function<double(double)> &cdf) {
    const double n = double(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max(d, std::abs(f - double(i + 1) / n));
        d = std::max(d, std::abs(f - double(i) / n));
    }
    return d;
}

} // namespace

SsfFit fit_ssf_amplitude(const std::vector<double> &amplitudes) {
    if (amplitudes.size() < 50)
        throw std::invalid_argument("fit_ssf_amplitude: need at least 50 samples");
    double omega = 0.0;
    double spread_check = 0.0;
    for (double a : amplitudes) {
        if (!(a > 0.0) || !std::isfinite(a))
            throw std::invalid_argument("fit_ssf_amplitude: amplitudes must be positive finite");
        omega += a * a;
    }
    omega /= double(amplitudes.size());
    for (double a : amplitudes)
        spread_check += std::abs(a * a - omega);
    if (spread_check / (double(amplitudes.size()) * omega) < 1e-12)
        throw std::invalid_argument("fit_ssf_amplitude: degenerate zero-variance samples");

    SsfFit fit;
    // Rayleigh ML: sigma^2 = omega / 2
    fit.rayleigh_sigma = std::sqrt(omega / 2.0);

    // Rician ML over K with the power constraint omega = nu^2 + 2 sigma^2
    const double log_k =
        golden_max([&](double lk) { return rician_loglik(amplitudes, omega, std::exp(lk)); },
                   std::log(1e-4), std::log(1e4), 1e-4);
    const double k = std::exp(log_k);
    fit.rician_sigma = std::sqrt(omega / (2.0 * (1.0 + k)));
    fit.rician_nu = std::sqrt(omega * k / (1.0 + k));
    fit.k_db = 10.0 * std::log10(k);

    std::vector<double> sorted = amplitudes;
    std::sort(sorted.begin(), sorted.end());

    const double sr2 = fit.rayleigh_sigma * fit.rayleigh_sigma;
    fit.ks_rayleigh = ks_statistic(
        sorted, [&](double r) { return -std::expm1(-r * r / (2.0 * sr2)); });

    // Rician CDF by cumulative trapezoid of the PDF on a fine grid
    const double rmax = sorted.back() * 1.05;
    const int ngrid = 8192;
    std::vector<double> grid_cdf(ngrid, 0.0);
    const double dr = rmax / (ngrid - 1);
    const double s2 = fit.rician_sigma * fit.rician_sigma;
    auto log_pdf = [&](double r) {
        return std::log(r / s2) - (r * r + fit.rician_nu * fit.rician_nu) / (2.0 * s2) +
               log_bessel_i0(r * fit.rician_nu / s2);
    };
    double prev = 0.0; // pdf(0) = 0
    for (int i = 1; i < ngrid; ++i) {
        const double cur = std::exp(log_pdf(i * dr));
        grid_cdf[std::size_t(i)] = grid_cdf[std::size_t(i) - 1] + 0.5 * (prev + cur) * dr;
        prev = cur;
    }
    fit.ks_rician = ks_statistic(sorted, [&](double r) {
        const double pos = std::clamp(r / dr, 0.0, double(ngrid - 1));
        const int i0 = int(pos);
        const double frac = pos - i0;
        const double c = (i0 + 1 < ngrid)
                             ? grid_cdf[std::size_t(i0)] * (1.0 - frac) + grid_cdf[std::size_t(i0) + 1] * frac
                             : grid_cdf[std::size_t(i0)];
        return std::min(c, 1.0);
    });

    fit.selected = fit.ks_rician < fit.ks_rayleigh ? SsfDistribution::Rician
                                                   : SsfDistribution::Rayleigh;
    return fit;
}

namespace {

double ratio_db(double num, double den) {
    if (den <= 0.0)
        return std::numeric_limits<double>::infinity();
    if (num <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(num / den);
}

} // namespace

XprCpr xpr_cpr_from_psd(const Eigen::VectorXd &psd_hh, const Eigen::VectorXd &psd_hv,
                        const Eigen::VectorXd &psd_vh, const Eigen::VectorXd &psd_vv) {
    if (psd_hh.size() != psd_hv.size() || psd_hh.size() != psd_vh.size() ||
        psd_hh.size() != psd_vv.size())
        throw std::invalid_argument("xpr_cpr_from_psd: PSD lengths differ");
    XprCpr out;
    out.xpr_h_db = ratio_db(psd_hh.sum(), psd_hv.sum());
    out.xpr_v_db = ratio_db(psd_vv.sum(), psd_vh.sum());
    out.cpr_db = ratio_db(psd_hh.sum(), psd_vv.sum());
    return out;
}

XprCpr xpr_cpr_per_path(const SmcPath &path) {
    if (!path.amp.allFinite())
        throw std::invalid_argument("xpr_cpr_per_path: non-finite amplitudes");
    // amp layout [[VV, VH], [HV, HH]]; first index Rx pol, second Tx pol
    const double vv = std::norm(path.amp(0, 0));
    const double vh = std::norm(path.amp(0, 1));
    const double hv = std::norm(path.amp(1, 0));
    const double hh = std::norm(path.amp(1, 1));
    XprCpr out;
    out.xpr_h_db = ratio_db(hh, vh);
    out.xpr_v_db = ratio_db(vv, hv);
    out.cpr_db = ratio_db(hh, vv);
    return out;
}

std::pair<double, double> fit_lsp_distribution(const std::vector<double> &values,
                                               LspTransform transform) {
    if (values.size() < 2)
        throw std::invalid_argument("fit_lsp_distribution: need at least two values");
    std::vector<double> t(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (transform == LspTransform::Log10) {
            if (values[i] <= 0.0)
                throw std::invalid_argument("fit_lsp_distribution: log10 of nonpositive value");
            t[i] = std::log10(values[i]);
        } else {
            t[i] = values[i];
        }
    }
    const double mu = std::accumulate(t.begin(), t.end(), 0.0) / double(t.size());
    double ss = 0.0;
    for (double v : t)
        ss += (v - mu) * (v - mu);
    const double sigma = std::sqrt(ss / double(t.size() - 1));
    return {mu, sigma};
}

} // namespace mpchan
