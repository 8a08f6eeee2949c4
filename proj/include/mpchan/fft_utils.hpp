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
#include <complex>

namespace mpchan {

/// In-place complex DFT, x[k] = sum_n x[n] e^{-j 2 pi k n / N} (unnormalized).
/// Backed by FFTW with a process-wide plan cache; thread-safe.
void fft_forward(Eigen::VectorXcd &x);

/// In-place inverse kernel, x[k] = sum_n x[n] e^{+j 2 pi k n / N} (unnormalized).
void fft_backward(Eigen::VectorXcd &x);

/// Frequency response -> delay-domain response for one link:
/// h[n] = (1/M) sum_i H[i] e^{-j 2 pi i n / M}.
/// A path synthesized with phase e^{+j 2 pi f tau} peaks at bin tau/delta_tau.
Eigen::VectorXcd delay_transform(const Eigen::VectorXcd &freq_response);

/// Multiplies a dense matrix by a Hermitian Toeplitz matrix, A = P * T,
/// where T has first column `col` (and first row conj(col)). FFT-based,
/// O(n^2 log n); exact to roundoff.
Eigen::MatrixXcd multiply_hermitian_toeplitz(const Eigen::MatrixXcd &p,
                                             const Eigen::VectorXcd &col);

} // namespace mpchan
