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

#include "mpchan/channel_tensor.hpp"

#include <stdexcept>

namespace mpchan {

FrequencyGrid::FrequencyGrid(double fc_hz, double bandwidth_hz, int m_f)
    : fc_hz_(fc_hz), bandwidth_hz_(bandwidth_hz), m_f_(m_f) {
    if (fc_hz <= 0.0 || bandwidth_hz <= 0.0 || m_f < 1)
        throw std::invalid_argument("FrequencyGrid: fc, bandwidth and m_f must be positive");
}

Eigen::VectorXd FrequencyGrid::frequencies() const {
    Eigen::VectorXd f(m_f_);
    for (int i = 0; i < m_f_; ++i)
        f(i) = frequency(i);
    return f;
}

Eigen::VectorXd FrequencyGrid::delays() const {
    Eigen::VectorXd tau(m_f_);
    for (int i = 0; i < m_f_; ++i)
        tau(i) = i * delay_resolution();
    return tau;
}

ChannelTensor::ChannelTensor(std::shared_ptr<const ArrayModel> rx,
                             std::shared_ptr<const ArrayModel> tx, const FrequencyGrid &grid)
    : m_rx_(rx ? rx->port_count() : 0), m_tx_(tx ? tx->port_count() : 0), m_f_(grid.size()),
      grid_(grid), rx_(std::move(rx)), tx_(std::move(tx)) {
    if (!rx_ || !tx_)
        throw std::invalid_argument("ChannelTensor: rx and tx arrays are required");
    data_ = Eigen::VectorXcd::Zero(Eigen::Index(m_rx_) * m_tx_ * m_f_);
}

Eigen::Map<const Eigen::VectorXcd> ChannelTensor::link_response(int rx, int tx) const {
    return {data_.data() + index(rx, tx, 0), m_f_};
}

Eigen::MatrixXcd ChannelTensor::slice_at_frequency(int f) const {
    Eigen::MatrixXcd s(m_rx_, m_tx_);
    for (int r = 0; r < m_rx_; ++r)
        for (int t = 0; t < m_tx_; ++t)
            s(r, t) = data_[index(r, t, f)];
    return s;
}

void ChannelTensor::set_slice_at_frequency(int f, const Eigen::MatrixXcd &slice) {
    if (slice.rows() != m_rx_ || slice.cols() != m_tx_)
        throw std::invalid_argument("set_slice_at_frequency: slice shape mismatch");
    for (int r = 0; r < m_rx_; ++r)
        for (int t = 0; t < m_tx_; ++t)
            data_[index(r, t, f)] = slice(r, t);
}

void require_compatible(const ChannelTensor &a, const ChannelTensor &b, const char *op) {
    if (a.rx_ports() != b.rx_ports() || a.tx_ports() != b.tx_ports() ||
        a.freq_points() != b.freq_points() || !(a.grid() == b.grid()))
        throw std::invalid_argument(std::string(op) + ": tensor shape/grid mismatch");
}

ChannelTensor &ChannelTensor::operator+=(const ChannelTensor &other) {
    require_compatible(*this, other, "tensor sum");
    data_ += other.data_;
    return *this;
}

ChannelTensor &ChannelTensor::operator-=(const ChannelTensor &other) {
    require_compatible(*this, other, "tensor difference");
    data_ -= other.data_;
    return *this;
}

} // namespace mpchan
