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

#include "mpchan/vmf.hpp"

#include "mpchan/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace mpchan {

Eigen::Vector3d VmfComponent::mean_direction() const {
    return unit_direction(mean_elevation_deg, mean_azimuth_deg);
}

void validate_mixture(const VmfMixture &mixture) {
    if (mixture.empty())
        throw std::invalid_argument("VMF mixture must have at least one component");
    double sum = 0.0;
    for (const auto &c : mixture) {
        if (c.kappa < 0.0)
            throw std::invalid_argument("VMF kappa must be nonnegative");
        sum += c.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("VMF mixture weights must sum to 1");
}

VmfMixture uniform_mixture() {
    return {VmfComponent{0.0, 0.0, 0.0, 1.0}};
}

double vmf_unit_density(double kappa, double t) {
    // kappa / (4 pi sinh(kappa)) * exp(kappa t), rewritten so the exponential
    // argument is kappa (t - 1) <= 0: never overflows.
    if (kappa == 0.0)
        return 1.0 / (4.0 * M_PI);
    const double a = kappa / (-std::expm1(-2.0 * kappa)); // -> 1/2 as kappa -> 0
    return a / (2.0 * M_PI) * std::exp(kappa * (t - 1.0));
}

double vmf_unit_density_dkappa(double kappa, double t) {
    const double f = vmf_unit_density(kappa, t);
    double dloga; // d/dkappa ln( kappa / (1 - e^{-2kappa}) )
    if (kappa < 1e-8) {
        dloga = 1.0 - kappa / 3.0;
    } else {
        dloga = 1.0 / kappa - 2.0 / std::expm1(2.0 * kappa);
    }
    return f * (dloga + (t - 1.0));
}

double vmf_density(const VmfMixture &mixture, double elevation_deg, double azimuth_deg) {
    validate_mixture(mixture);
    const Eigen::Vector3d omega = unit_direction(elevation_deg, azimuth_deg);
    double density = 0.0;
    for (const auto &c : mixture) {
        const double t = std::clamp(c.mean_direction().dot(omega), -1.0, 1.0);
        density += c.weight * vmf_unit_density(c.kappa, t);
    }
    return density;
}

} // namespace mpchan
