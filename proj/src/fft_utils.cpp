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

#include "mpchan/fft_utils.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace mpchan {

namespace {

// fftw planning is not thread-safe; executions on distinct buffers are.
std::mutex g_plan_mutex;
std::map<std::pair<int, int>, fftw_plan> g_plans;

fftw_plan plan_for(int n, int sign) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_pair(n, sign);
    auto it = g_plans.find(key);
    if (it != g_plans.end())
        return it->second;
    Eigen::VectorXcd scratch(n);
    fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex *>(scratch.data()),
                                      reinterpret_cast<fftw_complex *>(scratch.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    g_plans.emplace(key, plan);
    return plan;
}

void execute(Eigen::VectorXcd &x, int sign) {
    if (x.size() == 0)
        return;
    fftw_plan plan = plan_for(int(x.size()), sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(x.data()),
                     reinterpret_cast<fftw_complex *>(x.data()));
}

} // namespace

void fft_forward(Eigen::VectorXcd &x) { execute(x, FFTW_FORWARD); }

void fft_backward(Eigen::VectorXcd &x) { execute(x, FFTW_BACKWARD); }

Eigen::VectorXcd delay_transform(const Eigen::VectorXcd &freq_response) {
    Eigen::VectorXcd h = freq_response;
    fft_forward(h);
    h /= double(freq_response.size());
    return h;
}

Eigen::MatrixXcd multiply_hermitian_toeplitz(const Eigen::MatrixXcd &p,
                                             const Eigen::VectorXcd &col) {
    const Eigen::Index n = col.size();
    if (p.cols() != n)
        throw std::invalid_argument("multiply_hermitian_toeplitz: dimension mismatch");
    const Eigen::Index nfft = 2 * n;

    // Circular embedding of the kernel g(m) = T[c, c+m]; lags stay distinct
    // because the kernel support 2n-1 fits in the length-2n transform.
    Eigen::VectorXcd kernel = Eigen::VectorXcd::Zero(nfft);
    kernel(0) = col(0);
    for (Eigen::Index m = 1; m < n; ++m) {
        kernel(m) = std::conj(col(m));
        kernel(nfft - m) = col(m);
    }
    fft_forward(kernel);

    Eigen::MatrixXcd out(p.rows(), n);
    Eigen::VectorXcd row(nfft);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        row.head(n) = p.row(r).transpose();
        row.tail(n).setZero();
        fft_forward(row);
        row.array() *= kernel.array();
        fft_backward(row);
        out.row(r) = row.head(n).transpose() / double(nfft);
    }
    return out;
}

} // namespace mpchan
