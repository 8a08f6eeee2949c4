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

#include "mpchan/array_model.hpp"

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <memory>
#include <string>

namespace mpchan {

/// Evenly spaced measurement frequencies centered on the carrier.
/// Spacing df = bandwidth / m_f, delay resolution 1/bandwidth, unambiguous
/// delay span m_f / bandwidth.
class FrequencyGrid {
  public:
    FrequencyGrid() = default;
    FrequencyGrid(double fc_hz, double bandwidth_hz, int m_f);

    double fc() const { return fc_hz_; }
    double bandwidth() const { return bandwidth_hz_; }
    int size() const { return m_f_; }

    double spacing() const { return bandwidth_hz_ / m_f_; }
    double delay_resolution() const { return 1.0 / bandwidth_hz_; }
    double delay_span() const { return m_f_ / bandwidth_hz_; }

    double frequency(int i) const { return fc_hz_ + (i - 0.5 * (m_f_ - 1)) * spacing(); }
    Eigen::VectorXd frequencies() const;
    /// Delay-grid sample n * delta_tau, n = 0..m_f-1.
    Eigen::VectorXd delays() const;

    bool operator==(const FrequencyGrid &other) const = default;

  private:
    double fc_hz_ = 5.5e9;
    double bandwidth_hz_ = 320e6;
    int m_f_ = 0;
};

/// Complex channel response over (Rx port, Tx port, frequency). Storage is
/// frequency-fastest, then Tx, then Rx -- the same layout as the container
/// payload, so vec ordering contracts hold bit-exactly.
class ChannelTensor {
  public:
    ChannelTensor() = default;
    ChannelTensor(std::shared_ptr<const ArrayModel> rx, std::shared_ptr<const ArrayModel> tx,
                  const FrequencyGrid &grid);

    int rx_ports() const { return m_rx_; }
    int tx_ports() const { return m_tx_; }
    int freq_points() const { return m_f_; }
    int links() const { return m_rx_ * m_tx_; }
    const FrequencyGrid &grid() const { return grid_; }

    const std::shared_ptr<const ArrayModel> &rx_array() const { return rx_; }
    const std::shared_ptr<const ArrayModel> &tx_array() const { return tx_; }

    std::complex<double> &at(int rx, int tx, int f) { return data_[index(rx, tx, f)]; }
    const std::complex<double> &at(int rx, int tx, int f) const { return data_[index(rx, tx, f)]; }

    Eigen::VectorXcd &flat() { return data_; }
    const Eigen::VectorXcd &flat() const { return data_; }

    /// Contiguous frequency response of one Rx/Tx link.
    Eigen::Map<const Eigen::VectorXcd> link_response(int rx, int tx) const;

    /// Rx x Tx slice at one frequency point (copies; slices are strided).
    Eigen::MatrixXcd slice_at_frequency(int f) const;
    void set_slice_at_frequency(int f, const Eigen::MatrixXcd &slice);

    /// Squared Frobenius norm over the whole tensor.
    double total_power() const { return data_.squaredNorm(); }
    bool is_finite() const { return data_.allFinite(); }

    std::map<std::string, std::string> metadata;

    ChannelTensor &operator+=(const ChannelTensor &other);
    ChannelTensor &operator-=(const ChannelTensor &other);

  private:
    std::size_t index(int rx, int tx, int f) const {
        return (std::size_t(rx) * m_tx_ + tx) * m_f_ + f;
    }

    int m_rx_ = 0, m_tx_ = 0, m_f_ = 0;
    FrequencyGrid grid_;
    std::shared_ptr<const ArrayModel> rx_, tx_;
    Eigen::VectorXcd data_;
};

/// Throws invalid_argument when the tensors' shapes or grids differ.
void require_compatible(const ChannelTensor &a, const ChannelTensor &b, const char *op);

} // namespace mpchan
