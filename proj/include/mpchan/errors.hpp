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

#include <stdexcept>
#include <string>

namespace mpchan {

/// Bad campaign/estimator configuration (CLI exit code 2).
class config_error : public std::runtime_error {
  public:
    explicit config_error(const std::string &what) : std::runtime_error(what) {}
};

/// Corrupt or inconsistent on-disk data (CLI exit code 3).
class format_error : public std::runtime_error {
  public:
    explicit format_error(const std::string &what) : std::runtime_error(what) {}
};

/// Numerical failure that invalidates a result (CLI exit code 4).
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string &what) : std::runtime_error(what) {}
};

} // namespace mpchan
