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

#include "mpchan/array_model.hpp"

#include "mpchan/errors.hpp"
#include "mpchan/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace mpchan {

double ElementPattern::co_amplitude(double psi_deg) const {
    if (isotropic)
        return std::pow(10.0, boresight_gain_dbi / 20.0);
    const double g0 = std::pow(10.0, boresight_gain_dbi / 10.0);
    const double floor = g0 * std::pow(10.0, -front_to_back_db / 10.0);
    const double half = 0.5 * beamwidth_3db_deg;
    const double q = std::log(0.5) / std::log(std::cos(deg2rad(half)));
    double gain = floor;
    if (psi_deg < 90.0)
        gain = std::max(g0 * std::pow(std::cos(deg2rad(psi_deg)), q), floor);
    return std::sqrt(gain);
}

double ElementPattern::xpr_db(double psi_deg) const {
    const double t = std::min(std::abs(psi_deg), 60.0) / 60.0;
    return axial_xpr_db + (sector_xpr_db - axial_xpr_db) * t;
}

double ElementPattern::cross_amplitude(double psi_deg) const {
    return co_amplitude(psi_deg) * std::pow(10.0, -xpr_db(psi_deg) / 20.0);
}

void ElementPattern::validate() const {
    if (axial_xpr_db < sector_xpr_db)
        throw std::invalid_argument("ElementPattern: axial XPR must be >= sector XPR");
    if (!isotropic && (beamwidth_3db_deg <= 0.0 || beamwidth_3db_deg >= 180.0))
        throw std::invalid_argument("ElementPattern: 3 dB beamwidth must be in (0, 180) deg");
}

ElementPattern ElementPattern::isotropic_0dbi() {
    ElementPattern p;
    p.boresight_gain_dbi = 0.0;
    p.isotropic = true;
    return p;
}

ArrayModel::ArrayModel(ArrayKind kind, std::vector<ArrayElement> elements, ElementPattern pattern)
    : kind_(kind), elements_(std::move(elements)), pattern_(pattern) {
    pattern_.validate();
    for (const auto &e : elements_) {
        if (std::abs(e.orientation.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("ArrayElement: orientation must be a unit vector");
    }
}

Eigen::MatrixXcd ArrayModel::response_matrix(double elevation_deg, double azimuth_deg,
                                             double frequency_hz) const {
    if (elevation_deg < -90.0 || elevation_deg > 90.0)
        throw std::invalid_argument("response_matrix: elevation out of [-90, 90]");
    if (azimuth_deg < -180.0 || azimuth_deg >= 180.0000001)
        throw std::invalid_argument("response_matrix: azimuth out of [-180, 180)");

    const Eigen::Vector3d k = unit_direction(elevation_deg, azimuth_deg);
    const double wavenumber = 2.0 * M_PI * frequency_hz / kSpeedOfLight;

    Eigen::MatrixXcd f(port_count(), 2);
    for (int i = 0; i < port_count(); ++i) {
        const auto &e = elements_[std::size_t(i)];
        const double cospsi = std::clamp(k.dot(e.orientation), -1.0, 1.0);
        const double psi = rad2deg(std::acos(cospsi));
        const double co = pattern_.co_amplitude(psi);
        const double cross = pattern_.cross_amplitude(psi);
        const std::complex<double> phase = std::polar(1.0, wavenumber * k.dot(e.position));
        if (e.polarization == Polarization::V) {
            f(i, 0) = co * phase;
            f(i, 1) = cross * phase;
        } else {
            f(i, 0) = cross * phase;
            f(i, 1) = co * phase;
        }
    }
    return f;
}

namespace {

void push_dual_port(std::vector<ArrayElement> &out, const Eigen::Vector3d &pos,
                    const Eigen::Vector3d &orient) {
    ArrayElement v{pos, orient, Polarization::V};
    ArrayElement h{pos, orient, Polarization::H};
    out.push_back(v);
    out.push_back(h);
}

} // namespace

ArrayModel build_upa(int rows, int cols, double spacing_m, const ElementPattern &pattern) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("build_upa: rows and cols must be >= 1");
    if (spacing_m <= 0.0)
        throw std::invalid_argument("build_upa: spacing must be positive");
    std::vector<ArrayElement> elements;
    elements.reserve(std::size_t(2) * rows * cols);
    // grid in the y-z plane, centered, boresight +x
    for (int r = 0; r < rows; ++r) {
        const double z = (r - 0.5 * (rows - 1)) * spacing_m;
        for (int c = 0; c < cols; ++c) {
            const double y = (c - 0.5 * (cols - 1)) * spacing_m;
            push_dual_port(elements, {0.0, y, z}, Eigen::Vector3d::UnitX());
        }
    }
    ArrayModel a(ArrayKind::UPA, std::move(elements), pattern);
    a.dim1 = rows;
    a.dim2 = cols;
    a.spacing_m = spacing_m;
    return a;
}

ArrayModel build_uca(int rings, int columns, double spacing_m, const ElementPattern &pattern) {
    if (rings < 1)
        throw std::invalid_argument("build_uca: rings must be >= 1");
    if (columns < 3)
        throw std::invalid_argument("build_uca: cylinder needs at least 3 columns");
    if (spacing_m <= 0.0)
        throw std::invalid_argument("build_uca: spacing must be positive");
    const double radius = spacing_m / (2.0 * M_PI / columns); // arc length = r * dphi
    std::vector<ArrayElement> elements;
    elements.reserve(std::size_t(2) * rings * columns);
    for (int ring = 0; ring < rings; ++ring) {
        const double z = (ring - 0.5 * (rings - 1)) * spacing_m;
        for (int c = 0; c < columns; ++c) {
            const double phi = 2.0 * M_PI * c / columns;
            const Eigen::Vector3d radial(std::cos(phi), std::sin(phi), 0.0);
            push_dual_port(elements, radius * radial + Eigen::Vector3d(0, 0, z), radial);
        }
    }
    ArrayModel a(ArrayKind::UCA, std::move(elements), pattern);
    a.dim1 = rings;
    a.dim2 = columns;
    a.spacing_m = spacing_m;
    return a;
}

ArrayModel build_single(const ElementPattern &pattern) {
    std::vector<ArrayElement> elements(1);
    ArrayModel a(ArrayKind::Single, std::move(elements), pattern);
    a.dim1 = 1;
    a.dim2 = 1;
    return a;
}

std::map<std::string, std::string> ArrayModel::describe() const {
    std::map<std::string, std::string> d;
    switch (kind_) {
    case ArrayKind::UPA: d["kind"] = "upa"; break;
    case ArrayKind::UCA: d["kind"] = "uca"; break;
    case ArrayKind::Single: d["kind"] = "single"; break;
    }
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    d["dim1"] = std::to_string(dim1);
    d["dim2"] = std::to_string(dim2);
    d["spacing_m"] = num(spacing_m);
    d["gain_dbi"] = num(pattern_.boresight_gain_dbi);
    d["beamwidth_deg"] = num(pattern_.beamwidth_3db_deg);
    d["axial_xpr_db"] = num(pattern_.axial_xpr_db);
    d["sector_xpr_db"] = num(pattern_.sector_xpr_db);
    d["front_to_back_db"] = num(pattern_.front_to_back_db);
    d["isotropic"] = pattern_.isotropic ? "1" : "0";
    return d;
}

ArrayModel parse_array(const std::map<std::string, std::string> &desc) {
    auto get = [&desc](const std::string &key) -> const std::string & {
        auto it = desc.find(key);
        if (it == desc.end())
            throw format_error("array description missing key '" + key + "'");
        return it->second;
    };
    ElementPattern p;
    p.boresight_gain_dbi = std::stod(get("gain_dbi"));
    p.beamwidth_3db_deg = std::stod(get("beamwidth_deg"));
    p.axial_xpr_db = std::stod(get("axial_xpr_db"));
    p.sector_xpr_db = std::stod(get("sector_xpr_db"));
    p.front_to_back_db = std::stod(get("front_to_back_db"));
    p.isotropic = get("isotropic") == "1";
    const std::string &kind = get("kind");
    if (kind == "upa")
        return build_upa(std::stoi(get("dim1")), std::stoi(get("dim2")), std::stod(get("spacing_m")), p);
    if (kind == "uca")
        return build_uca(std::stoi(get("dim1")), std::stoi(get("dim2")), std::stod(get("spacing_m")), p);
    if (kind == "single")
        return build_single(p);
    throw format_error("unknown array kind '" + kind + "'");
}

double half_wavelength(double frequency_hz) {
    return kSpeedOfLight / (2.0 * frequency_hz);
}

} // namespace mpchan
