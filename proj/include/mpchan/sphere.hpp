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

#include <Eigen/Dense>
#include <vector>

namespace mpchan {

constexpr double kSpeedOfLight = 299792458.0; // m/s

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / M_PI; }

/// Wraps an angle in degrees to (-180, 180].
double wrap_degrees(double deg);

/// Unit direction for elevation/azimuth in degrees.
/// Elevation is measured from the horizon (z = sin(el)), boresight of the
/// coordinate frame is +x at (0, 0).
Eigen::Vector3d unit_direction(double elevation_deg, double azimuth_deg);

/// Great-circle angle between two directions, degrees.
double angular_distance_deg(double el1_deg, double az1_deg, double el2_deg, double az2_deg);

/// Deterministic spherical quadrature: Gauss-Legendre in sin(elevation)
/// crossed with a uniform (trapezoidal) azimuth grid. Weights sum to 4*pi.
struct SphereQuadrature {
    std::vector<double> elevation_deg;
    std::vector<double> azimuth_deg;
    std::vector<double> weight;

    std::size_t size() const { return weight.size(); }
};

SphereQuadrature sphere_quadrature(int n_elevation, int n_azimuth);

} // namespace mpchan
