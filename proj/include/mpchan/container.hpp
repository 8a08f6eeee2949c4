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

#include "mpchan/channel_tensor.hpp"

#include <filesystem>
#include <string>

namespace mpchan {

/// Channel-tensor container ("CHTN1"): a line-oriented self-describing text
/// header (dimensions, grid, array geometries, metadata), a '---' separator,
/// then the payload -- complex doubles, little-endian, re/im interleaved,
/// frequency-fastest then Tx then Rx. Payload length is 16*M_R*M_T*M_f bytes.
inline constexpr char kContainerMagic[] = "CHTN1";

/// Serializes a tensor; writes to a temp file and renames into place.
void write_container(const std::filesystem::path &path, const ChannelTensor &tensor);

/// Parses a container; throws format_error naming the byte offset on magic,
/// header, or payload-length mismatches.
ChannelTensor read_container(const std::filesystem::path &path);

} // namespace mpchan
