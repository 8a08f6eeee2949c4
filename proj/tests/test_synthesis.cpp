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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpchan/rng.hpp"
#include "mpchan/sphere.hpp"
#include "mpchan/synthesis.hpp"
#include "mpchan/vmf.hpp"

#include <cmath>
#include <memory>

using namespace mpchan;

namespace {

std::shared_ptr<const ArrayModel> iso_array(int ports_pairs_rows, int cols) {
    return std::make_shared<const ArrayModel>(
        build_upa(ports_pairs_rows, cols, half_wavelength(5.5e9), ElementPattern::isotropic_0dbi()));
}

std::shared_ptr<const ArrayModel> single_port() {
    return std::make_shared<const ArrayModel>(build_single(ElementPattern::isotropic_0dbi()));
}

// brute-force IDFT oracle, independent of the fft helpers
Eigen::VectorXcd idft_oracle(const Eigen::VectorXcd &h) {
    const int n = int(h.size());
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            out(k) += h(i) * std::polar(1.0 / n, -2.0 * M_PI * i * k / n);
    return out;
}

} // namespace

TEST_CASE("empty path list synthesizes a zero tensor") {
    const FrequencyGrid grid(5.5e9, 320e6, 32);
    const ChannelTensor h = synth_smc({}, iso_array(1, 2), iso_array(2, 2), grid);
    CHECK(h.total_power() == 0.0);
}

TEST_CASE("single zero-delay path on single ports is constant over frequency") {
    const FrequencyGrid grid(5.5e9, 320e6, 64);
    SmcPath p;
    p.amp = 0.7 * Eigen::Matrix2cd::Identity();
    const ChannelTensor h = synth_smc({p}, single_port(), single_port(), grid);
    for (int f = 0; f < grid.size(); ++f)
        CHECK(std::abs(h.at(0, 0, f)) == doctest::Approx(0.7).epsilon(1e-12));
    const Eigen::VectorXcd resp = h.link_response(0, 0);
    CHECK((resp.array() - resp(0)).abs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("planted delay lands at its bin under the brute-force IDFT") {
    const FrequencyGrid grid(5.5e9, 320e6, 256);
    SmcPath p;
    p.delay_s = 100.0 * grid.delay_resolution();
    p.amp = Eigen::Matrix2cd::Identity();
    const ChannelTensor h = synth_smc({p}, single_port(), single_port(), grid);
    const Eigen::VectorXcd cir = idft_oracle(Eigen::VectorXcd(h.link_response(0, 0)));
    Eigen::Index peak = 0;
    cir.cwiseAbs().maxCoeff(&peak);
    CHECK(peak == 100);
}

TEST_CASE("synthesis is linear in the amplitudes") {
    const FrequencyGrid grid(5.5e9, 320e6, 16);
    CounterRng rng(7);
    SmcPath p;
    p.delay_s = 12e-9;
    p.aoa_deg = 30.0;
    p.eoa_deg = -10.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            p.amp(i, j) = rng.complex_normal();
    auto rx = iso_array(2, 2), tx = iso_array(1, 2);
    const ChannelTensor h1 = synth_smc({p}, tx, rx, grid);
    SmcPath scaled = p;
    scaled.amp *= 3.0;
    const ChannelTensor h3 = synth_smc({scaled}, tx, rx, grid);
    CHECK((h3.flat() - 3.0 * h1.flat()).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("delay outside the span is rejected") {
    const FrequencyGrid grid(5.5e9, 320e6, 16);
    SmcPath p;
    p.delay_s = grid.delay_span() * 1.5;
    CHECK_THROWS_AS(synth_smc({p}, single_port(), single_port(), grid),
                    std::invalid_argument);
}

TEST_CASE("dmc delay PSD holds the half-power onset and the floor") {
    const FrequencyGrid grid(5.5e9, 320e6, 256);
    DmcModel model;
    model.processes = {{2.0, 5e6, 100.0 * grid.delay_resolution()}};
    model.noise_floor = 1e-4;
    const Eigen::VectorXd psd = dmc_delay_psd(model, grid.delays());
    CHECK(psd(100) == doctest::Approx(1.0 + 1e-4)); // alpha1/2 + alpha0 at the onset
    CHECK(psd(99) == doctest::Approx(1e-4));        // floor before the onset
    CHECK(psd(255) ==
          doctest::Approx(1e-4 + 2.0 * std::exp(-5e6 * 155 * grid.delay_resolution())));
}

TEST_CASE("three processes give a piecewise PSD with three onsets") {
    const FrequencyGrid grid(5.5e9, 320e6, 512);
    const double dtau = grid.delay_resolution();
    DmcModel model;
    model.processes = {{1.0, 2e7, 30 * dtau}, {0.5, 3e7, 200 * dtau}, {0.25, 2.5e7, 380 * dtau}};
    model.noise_floor = 1e-9;
    const Eigen::VectorXd psd = dmc_delay_psd(model, grid.delays());
    // each onset bin steps up from its predecessor by at least its alpha1/2
    for (int onset : {30, 200, 380})
        CHECK(psd(onset) > psd(onset - 1) + 0.1);
    // decaying between onsets
    CHECK(psd(100) < psd(31));
    CHECK(psd(300) < psd(201));
}

TEST_CASE("pure-noise frequency covariance is diagonal") {
    const FrequencyGrid grid(5.5e9, 320e6, 64);
    // alpha1 -> 0 is not representable (must be positive); use a negligible one
    std::vector<DmcDelayProcess> procs = {{1e-20, 1e7, 0.0}};
    const Eigen::MatrixXcd r = dmc_frequency_covariance(procs, 0.25, grid);
    CHECK((r - 0.25 * Eigen::MatrixXcd::Identity(64, 64)).norm() ==
          doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("covariance diagonal equals alpha0 plus kappa(0)") {
    const FrequencyGrid grid(5.5e9, 320e6, 128);
    std::vector<DmcDelayProcess> procs = {{1.0, 8e6, 40 * grid.delay_resolution()},
                                          {0.3, 2e7, 300 * grid.delay_resolution()}};
    const Eigen::VectorXcd kappa = dmc_frequency_kernel(procs, grid);
    const Eigen::MatrixXcd r = dmc_frequency_covariance(procs, 0.01, grid);
    for (int i = 0; i < 128; ++i)
        CHECK(r(i, i).real() == doctest::Approx(kappa(0).real() + 0.01).epsilon(1e-12));
    // Hermitian by construction
    CHECK((r - r.adjoint()).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("kernel and model delay PSD form a Fourier pair") {
    const FrequencyGrid grid(5.5e9, 320e6, 1024);
    const double dtau = grid.delay_resolution();
    DmcModel model;
    model.processes = {{1.0, 0.03 / dtau, 60 * dtau}};
    model.noise_floor = 1e-7;
    const Eigen::VectorXcd kappa = dmc_frequency_kernel(model.processes, grid);

    // reconstruct from the one-sided lag kernel (brute force, e^{-} kernel)
    Eigen::VectorXd rec(grid.size());
    for (int n = 0; n < grid.size(); ++n) {
        std::complex<double> acc = 0.0;
        for (int m = 0; m < grid.size(); ++m)
            acc += kappa(m) * std::polar(1.0, -2.0 * M_PI * m * n / grid.size());
        rec(n) = 2.0 * acc.real() - kappa(0).real() + model.noise_floor;
    }
    const Eigen::VectorXd psd = dmc_delay_psd(model, grid.delays());
    // compare across the decay region, away from the onset discontinuity
    double max_rel = 0.0;
    for (int n = 0; n < grid.size(); ++n) {
        if (std::abs(n - 60) <= 8 || psd(n) < 0.02)
            continue;
        max_rel = std::max(max_rel, std::abs(rec(n) - psd(n)) / psd(n));
    }
    CHECK(max_rel < 0.02);
}

TEST_CASE("vmf density: uniform limit and maximum at the mean direction") {
    CHECK(vmf_density(uniform_mixture(), 12.0, -45.0) ==
          doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-12));

    VmfMixture single = {{20.0, 60.0, 35.0, 1.0}};
    const double at_mean = vmf_density(single, 20.0, 60.0);
    for (double el : {-60.0, 0.0, 45.0})
        for (double az : {-120.0, 0.0, 100.0})
            CHECK(vmf_density(single, el, az) <= at_mean + 1e-15);
}

TEST_CASE("vmf density survives huge concentrations") {
    VmfMixture sharp = {{0.0, 0.0, 5000.0, 1.0}};
    CHECK(std::isfinite(vmf_density(sharp, 0.0, 0.0)));
    CHECK(vmf_density(sharp, 0.0, 180.0) == doctest::Approx(0.0));
}

TEST_CASE("vmf mixtures integrate to one over the sphere") {
    const SphereQuadrature quad = sphere_quadrature(80, 160);
    VmfMixture mixture = {{10.0, 30.0, 50.0, 0.5}, {-20.0, -100.0, 5.0, 0.3}, {0.0, 0.0, 0.0, 0.2}};
    double integral = 0.0;
    for (std::size_t i = 0; i < quad.size(); ++i)
        integral += quad.weight[i] * vmf_density(mixture, quad.elevation_deg[i], quad.azimuth_deg[i]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("weights must sum to one") {
    VmfMixture bad = {{0.0, 0.0, 1.0, 0.7}};
    CHECK_THROWS_AS(validate_mixture(bad), std::invalid_argument);
}

TEST_CASE("spatial covariance: trace normalization and Hermitian structure") {
    const FrequencyGrid grid(5.5e9, 320e6, 16);
    const ArrayModel one = build_single(ElementPattern::isotropic_0dbi());
    const Eigen::MatrixXcd r1 = dmc_spatial_covariance(uniform_mixture(), one, grid, 24, 48);
    CHECK(r1(0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));

    const ArrayModel uca = build_uca(2, 4, half_wavelength(5.5e9), ElementPattern{});
    const Eigen::MatrixXcd r = dmc_spatial_covariance(uniform_mixture(), uca, grid, 32, 64);
    CHECK(r.trace().real() == doctest::Approx(uca.port_count()).epsilon(1e-9));
    CHECK((r - r.adjoint()).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("high concentration drives the spatial covariance to rank one") {
    const FrequencyGrid grid(5.5e9, 320e6, 16);
    const ArrayModel upa =
        build_upa(2, 2, half_wavelength(5.5e9), ElementPattern::isotropic_0dbi());
    VmfMixture sharp = {{10.0, 40.0, 500.0, 1.0}};
    const Eigen::MatrixXcd r = dmc_spatial_covariance(sharp, upa, grid, 192, 384);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    const Eigen::VectorXd ev = es.eigenvalues();
    CHECK(ev(ev.size() - 2) / ev(ev.size() - 1) < 0.05);
}

TEST_CASE("synth_dmc: white model gives unit-variance entries and determinism") {
    const FrequencyGrid grid(5.5e9, 320e6, 128);
    auto rx = iso_array(2, 2), tx = iso_array(1, 2);
    DmcModel model;
    model.processes = {{1e-18, 1e7, 0.0}};
    const double sigma2 = 0.04;
    model.noise_floor = sigma2;

    const ChannelTensor a = synth_dmc(model, tx, rx, grid, 99);
    const ChannelTensor b = synth_dmc(model, tx, rx, grid, 99);
    CHECK((a.flat() - b.flat()).norm() == 0.0); // bit-identical

    // >= 1e5 entries per draw? 8*4*128 = 4096; accumulate over seeds
    double acc = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
        const ChannelTensor h = synth_dmc(model, tx, rx, grid, seed);
        acc += h.total_power();
        count += int(h.flat().size());
    }
    CHECK(acc / count == doctest::Approx(sigma2).epsilon(0.03));
}

TEST_CASE("synth_dmc realizations match the Kronecker covariance") {
    const FrequencyGrid grid(5.5e9, 320e6, 16);
    auto rx = iso_array(1, 2), tx = single_port(); // 4 x 1 spatial
    DmcModel model;
    const double dtau = grid.delay_resolution();
    model.processes = {{1.0, 0.35 / dtau, 2.0 * dtau}};
    model.noise_floor = 1e-6;
    model.vmf_rx = {{0.0, 20.0, 30.0, 1.0}};

    const Eigen::MatrixXcd rf =
        dmc_frequency_covariance(model.processes, model.noise_floor, grid);
    const Eigen::MatrixXcd rr = dmc_spatial_covariance(model.vmf_rx, *rx, grid);
    const Eigen::MatrixXcd rt = dmc_spatial_covariance(model.vmf_tx, *tx, grid);
    Eigen::MatrixXcd ra = Eigen::MatrixXcd::Zero(rr.rows() * rt.rows(), rr.rows() * rt.rows());
    for (int r1 = 0; r1 < rr.rows(); ++r1)
        for (int r2 = 0; r2 < rr.rows(); ++r2)
            for (int t1 = 0; t1 < rt.rows(); ++t1)
                for (int t2 = 0; t2 < rt.rows(); ++t2)
                    ra(r1 * rt.rows() + t1, r2 * rt.rows() + t2) = rr(r1, r2) * rt(t1, t2);

    const int dim = grid.size() * int(ra.rows());
    Eigen::MatrixXcd target(dim, dim);
    for (int f1 = 0; f1 < grid.size(); ++f1)
        for (int f2 = 0; f2 < grid.size(); ++f2)
            target.block(f1 * ra.rows(), f2 * ra.rows(), ra.rows(), ra.cols()) = rf(f1, f2) * ra;

    Eigen::MatrixXcd sample = Eigen::MatrixXcd::Zero(dim, dim);
    const int realizations = 2000;
    Eigen::VectorXcd v(dim);
    for (int n = 0; n < realizations; ++n) {
        const ChannelTensor h = synth_dmc(model, tx, rx, grid, 1000 + std::uint64_t(n));
        // frequency-major vec: index = f * links + (r * M_T + t)
        for (int f = 0; f < grid.size(); ++f)
            for (int r = 0; r < h.rx_ports(); ++r)
                for (int t = 0; t < h.tx_ports(); ++t)
                    v(f * h.links() + r * h.tx_ports() + t) = h.at(r, t, f);
        sample.selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0 / realizations);
    }
    sample = sample.selfadjointView<Eigen::Lower>();
    CHECK((sample - target).norm() / target.norm() < 0.10);
}

TEST_CASE("synth_full: power additivity and degenerate cases") {
    const FrequencyGrid grid(5.5e9, 320e6, 64);
    auto rx = iso_array(2, 2), tx = iso_array(1, 2);
    const double dtau = grid.delay_resolution();

    SmcPath p;
    p.delay_s = 20 * dtau;
    p.aoa_deg = 45.0;
    p.amp = 0.5 * Eigen::Matrix2cd::Identity();

    DmcModel model;
    model.processes = {{0.1, 0.1 / dtau, 10 * dtau}};
    model.noise_floor = 1e-7;

    // empty paths -> equals synth_dmc exactly
    const ChannelTensor dmc_only = synth_dmc(model, tx, rx, grid, 5);
    const ChannelTensor full_no_paths = synth_full({}, model, tx, rx, grid, 5);
    CHECK((dmc_only.flat() - full_no_paths.flat()).norm() == 0.0);

    // power additivity over seeds
    const ChannelTensor smc_only = synth_smc({p}, tx, rx, grid);
    double full_power = 0.0, dmc_power = 0.0;
    const int seeds = 500;
    for (int s = 0; s < seeds; ++s) {
        full_power += synth_full({p}, model, tx, rx, grid, std::uint64_t(s)).total_power();
        dmc_power += synth_dmc(model, tx, rx, grid, std::uint64_t(s)).total_power();
    }
    full_power /= seeds;
    dmc_power /= seeds;
    CHECK(full_power ==
          doctest::Approx(smc_only.total_power() + dmc_power).epsilon(0.02));
}

TEST_CASE("counter rng streams are reproducible and well distributed") {
    CounterRng a(42, 1), b(42, 1), c(42, 2);
    for (int i = 0; i < 100; ++i)
        CHECK(a.uniform() == b.uniform());
    // different stream: decorrelated draws
    double mean = 0.0;
    for (int i = 0; i < 20000; ++i)
        mean += c.normal();
    CHECK(mean / 20000 == doctest::Approx(0.0).epsilon(0.05));
}
