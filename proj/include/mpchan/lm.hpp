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

/// Likelihood maximized by Fisher-scoring Levenberg-Marquardt. Implementers
/// supply the objective value and its gradient/Fisher information at a
/// parameter vector; project() lets them clamp or wrap iterates.
class LmObjective {
  public:
    virtual ~LmObjective() = default;
    virtual double value(const Eigen::VectorXd &params) const = 0;
    virtual double value_gradient_fisher(const Eigen::VectorXd &params, Eigen::VectorXd &gradient,
                                         Eigen::MatrixXd &fisher) const = 0;
    virtual Eigen::VectorXd project(Eigen::VectorXd params) const { return params; }
};

struct LmOptions {
    int max_iterations = 100;
    double rel_tolerance = 1e-6;
    double initial_damping = 1e-3;
    double damping_increase = 10.0;
    double damping_decrease = 10.0;
    double max_damping = 1e12;
};

struct LmResult {
    Eigen::VectorXd params;
    std::vector<double> ll_trace; // objective after init and each accepted step
    int iterations = 0;           // accepted steps
    bool converged = false;
};

/// Maximizes the objective. Steps solve (F + lambda diag(F)) d = g; steps
/// that do not improve the objective are rejected and the damping inflated,
/// so the ll_trace is non-decreasing by construction.
LmResult maximize_likelihood_lm(const LmObjective &objective, Eigen::VectorXd initial,
                                const LmOptions &options = {});

} // namespace mpchan
