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
#include <map>
#include <string>
#include <vector>

namespace mpchan {

enum class Polarization { V, H };

/// Synthetic dual-polarized element pattern. Co-polarized power gain is
/// G0 * cos^q(psi) with q solved from the 3 dB beamwidth and floored at
/// G0 - front_to_back. Cross-polar leakage interpolates linearly in dB
/// between the axial XPR at 0 deg and the sector XPR at 60 deg, clamped
/// beyond.
struct ElementPattern {
    double boresight_gain_dbi = 8.0;
    double beamwidth_3db_deg = 90.0;
    double axial_xpr_db = 15.0;
    double sector_xpr_db = 10.0;
    double front_to_back_db = 17.0;
    bool isotropic = false;

    /// Co-polarized amplitude (sqrt of linear power gain) at angle psi off
    /// boresight, degrees.
    double co_amplitude(double psi_deg) const;
    /// Cross-polarized amplitude at psi off boresight.
    double cross_amplitude(double psi_deg) const;
    /// XPR in dB at psi off boresight.
    double xpr_db(double psi_deg) const;

    void validate() const;

    static ElementPattern isotropic_0dbi();
};

struct ArrayElement {
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // meters
    Eigen::Vector3d orientation = Eigen::Vector3d::UnitX();
    Polarization polarization = Polarization::V;
};

enum class ArrayKind { UPA, UCA, Single };

/// Dual-polarized antenna array: ordered ports with positions, orientations
/// and a shared element pattern. Port ordering is part of the contract; the
/// channel container stores the geometry so estimation can rebuild the exact
/// tensor <-> geometry mapping.
class ArrayModel {
  public:
    ArrayModel() = default;
    ArrayModel(ArrayKind kind, std::vector<ArrayElement> elements, ElementPattern pattern);

    int port_count() const { return int(elements_.size()); }
    const std::vector<ArrayElement> &elements() const { return elements_; }
    const ElementPattern &pattern() const { return pattern_; }
    ArrayKind kind() const { return kind_; }

    /// Dual-polarized response, port_count x 2 (column 0: V incidence,
    /// column 1: H incidence). Phase reference is the coordinate origin;
    /// entry = pattern amplitude * exp(+j 2 pi f/c <k(el, az), p>).
    Eigen::MatrixXcd response_matrix(double elevation_deg, double azimuth_deg,
                                     double frequency_hz) const;

    /// Geometry summary embedded in container headers; see parse_array().
    std::map<std::string, std::string> describe() const;

    // construction metadata, kept for serialization
    int dim1 = 0;          // UPA rows / UCA rings
    int dim2 = 0;          // UPA cols / UCA columns
    double spacing_m = 0.0;

  private:
    ArrayKind kind_ = ArrayKind::Single;
    std::vector<ArrayElement> elements_;
    ElementPattern pattern_;
};

/// 2*rows*cols ports on a planar grid in the y-z plane facing +x.
/// Ordering: grid row-major (rows over z), V before H per grid point.
ArrayModel build_upa(int rows, int cols, double spacing_m, const ElementPattern &pattern);

/// 2*rings*columns ports on a cylinder around the z axis. Ring radius puts
/// adjacent columns `spacing_m` apart along the arc; rings are stacked with
/// the same vertical spacing. Ordering: ring-major, azimuth-minor, V before H.
ArrayModel build_uca(int rings, int columns, double spacing_m, const ElementPattern &pattern);

/// One V-polarized port at the origin (SISO omnidirectional antenna).
ArrayModel build_single(const ElementPattern &pattern);

/// Rebuilds an array from describe() output.
ArrayModel parse_array(const std::map<std::string, std::string> &desc);

/// Half wavelength at the given carrier, meters.
double half_wavelength(double frequency_hz);

} // namespace mpchan
