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

#include "mpchan/container.hpp"

#include "mpchan/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "container payload is little-endian; big-endian hosts are unsupported");

namespace mpchan {

void write_container(const std::filesystem::path &path, const ChannelTensor &tensor) {
    std::ostringstream header;
    header.precision(17);
    header << kContainerMagic << "\n";
    header << "m_rx=" << tensor.rx_ports() << "\n";
    header << "m_tx=" << tensor.tx_ports() << "\n";
    header << "m_f=" << tensor.freq_points() << "\n";
    header << "fc_hz=" << tensor.grid().fc() << "\n";
    header << "bandwidth_hz=" << tensor.grid().bandwidth() << "\n";
    for (const auto &[key, value] : tensor.rx_array()->describe())
        header << "rx." << key << "=" << value << "\n";
    for (const auto &[key, value] : tensor.tx_array()->describe())
        header << "tx." << key << "=" << value << "\n";
    for (const auto &[key, value] : tensor.metadata)
        header << "meta." << key << "=" << value << "\n";
    const std::size_t payload_bytes = std::size_t(tensor.flat().size()) * 16;
    header << "payload_bytes=" << payload_bytes << "\n";
    header << "---\n";

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw format_error("cannot open '" + tmp.string() + "' for writing");
        const std::string head = header.str();
        out.write(head.data(), std::streamsize(head.size()));
        out.write(reinterpret_cast<const char *>(tensor.flat().data()),
                  std::streamsize(payload_bytes));
        if (!out)
            throw format_error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

ChannelTensor read_container(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw format_error("cannot open container '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line) || line != kContainerMagic)
        throw format_error("container '" + path.string() + "': bad magic at offset 0");

    std::map<std::string, std::string> kv;
    std::size_t header_bytes = line.size() + 1;
    bool found_separator = false;
    while (std::getline(in, line)) {
        header_bytes += line.size() + 1;
        if (line == "---") {
            found_separator = true;
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw format_error("container '" + path.string() + "': malformed header line at offset " +
                               std::to_string(header_bytes - line.size() - 1));
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!found_separator)
        throw format_error("container '" + path.string() + "': missing header separator");

    auto get = [&](const std::string &key) -> const std::string & {
        auto it = kv.find(key);
        if (it == kv.end())
            throw format_error("container '" + path.string() + "': missing header key '" + key +
                               "'");
        return it->second;
    };
    auto sub_map = [&](const std::string &prefix) {
        std::map<std::string, std::string> out;
        for (const auto &[key, value] : kv)
            if (key.rfind(prefix, 0) == 0)
                out[key.substr(prefix.size())] = value;
        return out;
    };

    const int m_rx = std::stoi(get("m_rx"));
    const int m_tx = std::stoi(get("m_tx"));
    const int m_f = std::stoi(get("m_f"));
    const FrequencyGrid grid(std::stod(get("fc_hz")), std::stod(get("bandwidth_hz")), m_f);
    auto rx = std::make_shared<ArrayModel>(parse_array(sub_map("rx.")));
    auto tx = std::make_shared<ArrayModel>(parse_array(sub_map("tx.")));
    if (rx->port_count() != m_rx || tx->port_count() != m_tx)
        throw format_error("container '" + path.string() +
                           "': array geometry does not match declared port counts");

    ChannelTensor tensor(rx, tx, grid);
    for (const auto &[key, value] : sub_map("meta."))
        tensor.metadata[key] = value;

    const std::size_t expected = std::stoull(get("payload_bytes"));
    if (expected != std::size_t(tensor.flat().size()) * 16)
        throw format_error("container '" + path.string() + "': payload_bytes " +
                           std::to_string(expected) + " does not match dimensions");
    in.read(reinterpret_cast<char *>(tensor.flat().data()), std::streamsize(expected));
    if (std::size_t(in.gcount()) != expected)
        throw format_error("container '" + path.string() + "': truncated payload at offset " +
                           std::to_string(header_bytes + std::size_t(in.gcount())) + " (expected " +
                           std::to_string(header_bytes + expected) + " bytes)");
    return tensor;
}

} // namespace mpchan
