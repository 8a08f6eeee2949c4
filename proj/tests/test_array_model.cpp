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

#include "mpchan/array_model.hpp"
#include "mpchan/sphere.hpp"

#include <cmath>
#include <complex>

using namespace mpchan;

namespace {
const double kFc = 5.5e9;
const double kHalfWave = half_wavelength(kFc);
} // namespace

TEST_CASE("half wavelength at 5.5 GHz") {
    CHECK(half_wavelength(5.5e9) == doctest::Approx(0.027252).epsilon(0).scale(0).epsilon(2e-4));
}

TEST_CASE("UPA port count and ordering") {
    const ArrayModel upa = build_upa(4, 4, kHalfWave, ElementPattern{});
    CHECK(upa.port_count() == 32);
    // V before H per grid point
    CHECK(upa.elements()[0].polarization == Polarization::V);
    CHECK(upa.elements()[1].polarization == Polarization::H);
    CHECK(upa.elements()[0].position == upa.elements()[1].position);

    const ArrayModel tiny = build_upa(1, 1, 0.01, ElementPattern{});
    CHECK(tiny.port_count() == 2);
    CHECK(tiny.elements()[0].position.norm() == doctest::Approx(0.0));
}

TEST_CASE("UPA rejects bad dimensions") {
    CHECK_THROWS_AS(build_upa(0, 4, kHalfWave, ElementPattern{}), std::invalid_argument);
    CHECK_THROWS_AS(build_upa(4, 4, -1.0, ElementPattern{}), std::invalid_argument);
}

TEST_CASE("UCA geometry") {
    const ArrayModel uca = build_uca(4, 8, kHalfWave, ElementPattern{});
    CHECK(uca.port_count() == 64);
    // radius keeps adjacent columns one spacing apart along the arc
    const double radius = uca.elements()[0].position.head<2>().norm();
    CHECK(radius == doctest::Approx(kHalfWave / (2.0 * M_PI / 8.0)));

    const ArrayModel ring = build_uca(1, 3, 0.03, ElementPattern{});
    CHECK(ring.port_count() == 6);
    for (const auto &e : ring.elements())
        CHECK(e.position.z() == doctest::Approx(0.0));

    CHECK_THROWS_AS(build_uca(4, 2, kHalfWave, ElementPattern{}), std::invalid_argument);
}

TEST_CASE("broadside arrival gives equal phase across a UPA") {
    const ArrayModel upa = build_upa(4, 4, kHalfWave, ElementPattern{});
    const Eigen::MatrixXcd f = upa.response_matrix(0.0, 0.0, kFc);
    for (int i = 0; i < upa.port_count(); ++i)
        CHECK(std::arg(f(i, 0)) == doctest::Approx(std::arg(f(0, 0))).epsilon(1e-12));
}

TEST_CASE("two elements half a wavelength apart see a pi phase difference endfire") {
    // elements along y; arrival along the baseline (azimuth 90 deg)
    const ArrayModel upa = build_upa(1, 2, kHalfWave, ElementPattern::isotropic_0dbi());
    const Eigen::MatrixXcd f = upa.response_matrix(0.0, 90.0, kFc);
    const double dphi = std::arg(f(2, 0) / f(0, 0)); // ports 0 and 2 are the two V ports
    CHECK(std::abs(dphi) == doctest::Approx(M_PI).epsilon(1e-9));
}

TEST_CASE("cross-polar response at boresight is the axial XPR down") {
    const ArrayModel upa = build_upa(2, 2, kHalfWave, ElementPattern{});
    const Eigen::MatrixXcd f = upa.response_matrix(0.0, 0.0, kFc);
    // port 0 is V: column 0 co-pol, column 1 cross-pol
    const double ratio_db = 20.0 * std::log10(std::abs(f(0, 0)) / std::abs(f(0, 1)));
    CHECK(ratio_db == doctest::Approx(15.0).epsilon(1e-9));
}

TEST_CASE("steering magnitudes are frequency independent for isotropic patterns") {
    const ArrayModel uca = build_uca(2, 4, kHalfWave, ElementPattern::isotropic_0dbi());
    const Eigen::MatrixXcd f1 = uca.response_matrix(15.0, 40.0, 5.35e9);
    const Eigen::MatrixXcd f2 = uca.response_matrix(15.0, 40.0, 5.65e9);
    CHECK((f1.cwiseAbs() - f2.cwiseAbs()).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((f1 - f2).norm() > 1e-3); // phases do change
}

TEST_CASE("co-located V/H ports differ only in polarization weighting") {
    const ArrayModel upa = build_upa(2, 2, kHalfWave, ElementPattern{});
    const Eigen::MatrixXcd f = upa.response_matrix(10.0, 20.0, kFc);
    // ports 0 (V) and 1 (H) share a position: same phase per column
    CHECK(std::arg(f(0, 0)) == doctest::Approx(std::arg(f(1, 0))).epsilon(1e-12));
    CHECK(std::arg(f(0, 1)) == doctest::Approx(std::arg(f(1, 1))).epsilon(1e-12));
}

TEST_CASE("permuting the element list permutes response rows identically") {
    const ArrayModel upa = build_upa(2, 3, kHalfWave, ElementPattern{});
    std::vector<ArrayElement> reversed(upa.elements().rbegin(), upa.elements().rend());
    const ArrayModel flipped(ArrayKind::UPA, reversed, upa.pattern());
    const Eigen::MatrixXcd f = upa.response_matrix(25.0, -60.0, kFc);
    const Eigen::MatrixXcd g = flipped.response_matrix(25.0, -60.0, kFc);
    CHECK((f.colwise().reverse() - g).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("angle range validation") {
    const ArrayModel upa = build_upa(2, 2, kHalfWave, ElementPattern{});
    CHECK_THROWS_AS(upa.response_matrix(95.0, 0.0, kFc), std::invalid_argument);
    CHECK_THROWS_AS(upa.response_matrix(0.0, 200.0, kFc), std::invalid_argument);
}

TEST_CASE("element pattern reproduces its published constants") {
    ElementPattern p;
    CHECK(20.0 * std::log10(p.co_amplitude(0.0)) == doctest::Approx(p.boresight_gain_dbi));
    // 3 dB beamwidth: half power at half the beamwidth off boresight
    const double half = 0.5 * p.beamwidth_3db_deg;
    const double drop_db = 20.0 * std::log10(p.co_amplitude(0.0) / p.co_amplitude(half));
    CHECK(drop_db == doctest::Approx(3.0103).epsilon(1e-3));
    CHECK(p.xpr_db(0.0) == doctest::Approx(15.0));
    CHECK(p.xpr_db(60.0) == doctest::Approx(10.0));
    CHECK(p.xpr_db(80.0) == doctest::Approx(10.0)); // clamped beyond the sector
    // back lobe floored at front-to-back
    const double back_db = 20.0 * std::log10(p.co_amplitude(0.0) / p.co_amplitude(180.0));
    CHECK(back_db == doctest::Approx(17.0).epsilon(1e-9));

    ElementPattern bad;
    bad.axial_xpr_db = 5.0; // below the sector XPR
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("array description round-trips") {
    const ArrayModel uca = build_uca(4, 8, kHalfWave, ElementPattern{});
    const ArrayModel back = parse_array(uca.describe());
    CHECK(back.port_count() == uca.port_count());
    CHECK(back.kind() == uca.kind());
    const Eigen::MatrixXcd f = uca.response_matrix(5.0, 12.0, kFc);
    const Eigen::MatrixXcd g = back.response_matrix(5.0, 12.0, kFc);
    CHECK((f - g).norm() == doctest::Approx(0.0).epsilon(1e-15));
}
