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

#include "mpchan/lm.hpp"

#include <cmath>

namespace mpchan {

LmResult maximize_likelihood_lm(const LmObjective &objective, Eigen::VectorXd initial,
                                const LmOptions &options) {
    LmResult result;
    result.params = objective.project(std::move(initial));

    Eigen::VectorXd gradient;
    Eigen::MatrixXd fisher;
    double current = objective.value_gradient_fisher(result.params, gradient, fisher);
    result.ll_trace.push_back(current);

    double damping = options.initial_damping;
    const Eigen::Index n = result.params.size();

    while (result.iterations < options.max_iterations) {
        // scale-invariant damping on the Fisher diagonal
        Eigen::MatrixXd system = fisher;
        for (Eigen::Index i = 0; i < n; ++i)
            system(i, i) += damping * std::max(fisher(i, i), 1e-12);
        const Eigen::VectorXd step = system.ldlt().solve(gradient);
        if (!step.allFinite())
            break;

        const Eigen::VectorXd trial = objective.project(result.params + step);
        const double trial_value = objective.value(trial);

        if (std::isfinite(trial_value) && trial_value > current) {
            result.params = trial;
            ++result.iterations;
            const double improvement = trial_value - current;
            current = trial_value;
            result.ll_trace.push_back(current);
            damping = std::max(damping / options.damping_decrease, 1e-12);
            if (improvement < options.rel_tolerance * (std::abs(current) + 1.0)) {
                result.converged = true;
                break;
            }
            current = objective.value_gradient_fisher(result.params, gradient, fisher);
        } else {
            damping *= options.damping_increase;
            if (damping > options.max_damping) {
                result.converged = true; // stuck at a stationary point
                break;
            }
        }
    }
    return result;
}

} // namespace mpchan
