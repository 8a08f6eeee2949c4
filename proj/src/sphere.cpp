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

#include "mpchan/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace mpchan {

double wrap_degrees(double deg) {
    double w = std::fmod(deg + 180.0, 360.0);
    if (w < 0.0)
        w += 360.0;
    w -= 180.0;
    if (w == -180.0)
        w = 180.0;
    return w;
}

Eigen::Vector3d unit_direction(double elevation_deg, double azimuth_deg) {
    const double el = deg2rad(elevation_deg);
    const double az = deg2rad(azimuth_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double angular_distance_deg(double el1_deg, double az1_deg, double el2_deg, double az2_deg) {
    const double c = unit_direction(el1_deg, az1_deg).dot(unit_direction(el2_deg, az2_deg));
    return rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double> &nodes, std::vector<double> &weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

} // namespace

SphereQuadrature sphere_quadrature(int n_elevation, int n_azimuth) {
    if (n_elevation < 1 || n_azimuth < 1)
        throw std::invalid_argument("sphere_quadrature: node counts must be positive");
    std::vector<double> u, wu;
    gauss_legendre(n_elevation, u, wu);

    SphereQuadrature q;
    q.elevation_deg.reserve(std::size_t(n_elevation) * n_azimuth);
    q.azimuth_deg.reserve(std::size_t(n_elevation) * n_azimuth);
    q.weight.reserve(std::size_t(n_elevation) * n_azimuth);
    const double waz = 2.0 * M_PI / n_azimuth;
    for (int i = 0; i < n_elevation; ++i) {
        // substitute u = sin(el): integral over the sphere becomes du * daz
        const double el = rad2deg(std::asin(u[i]));
        for (int j = 0; j < n_azimuth; ++j) {
            const double az = -180.0 + 360.0 * j / n_azimuth;
            q.elevation_deg.push_back(el);
            q.azimuth_deg.push_back(az);
            q.weight.push_back(wu[i] * waz);
        }
    }
    return q;
}

} // namespace mpchan
