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

/// One von Mises-Fisher lobe on the sphere. kappa = 0 degenerates to the
/// uniform density 1/(4 pi).
struct VmfComponent {
    double mean_elevation_deg = 0.0;
    double mean_azimuth_deg = 0.0;
    double kappa = 0.0;
    double weight = 1.0;

    Eigen::Vector3d mean_direction() const;
};

using VmfMixture = std::vector<VmfComponent>;

/// Throws invalid_argument unless weights sum to 1 within 1e-9 and all
/// kappa >= 0.
void validate_mixture(const VmfMixture &mixture);

/// Single uniform component (kappa = 0).
VmfMixture uniform_mixture();

/// Density of one unit-weight component at inner product t = <mu, omega>.
/// Evaluated in the log domain; safe for arbitrarily large kappa.
double vmf_unit_density(double kappa, double t);

/// d/d kappa of vmf_unit_density at fixed t.
double vmf_unit_density_dkappa(double kappa, double t);

/// Mixture density at (elevation, azimuth); integrates to 1 over the sphere.
double vmf_density(const VmfMixture &mixture, double elevation_deg, double azimuth_deg);

} // namespace mpchan
