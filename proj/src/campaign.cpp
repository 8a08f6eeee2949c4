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

#include "mpchan/campaign.hpp"

#include "mpchan/container.hpp"
#include "mpchan/errors.hpp"
#include "mpchan/link_stats.hpp"
#include "mpchan/rng.hpp"
#include "mpchan/sphere.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mpchan {

ArrayModel ArraySpec::build(double fc_hz) const {
    const double spacing = spacing_m > 0.0 ? spacing_m : half_wavelength(fc_hz);
    if (kind == "upa")
        return build_upa(dim1, dim2, spacing, pattern);
    if (kind == "uca")
        return build_uca(dim1, dim2, spacing, pattern);
    if (kind == "single")
        return build_single(pattern);
    throw config_error("unknown array kind '" + kind + "'");
}

void CampaignConfig::validate() const {
    if (fc_hz <= 0.0 || bandwidth_hz <= 0.0 || m_f < 8)
        throw config_error("campaign: fc_hz, bandwidth_hz must be positive and m_f >= 8");
    if (positions.empty())
        throw config_error("campaign: no positions given");
    if (scenario.dmc_fraction < 0.0 || scenario.dmc_fraction >= 1.0)
        throw config_error("campaign: dmc_fraction must be in [0, 1)");
    if (jobs < 1)
        throw config_error("campaign: jobs must be >= 1");
    for (const auto &p : positions)
        if ((p.coordinates - tx_position).norm() <= 0.0)
            throw config_error("campaign: position " + std::to_string(p.id) +
                               " coincides with the transmitter");
}

namespace {

std::vector<std::string> split_ws(const std::string &s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok)
        out.push_back(tok);
    return out;
}

ArraySpec parse_array_spec(const std::string &value) {
    const auto tok = split_ws(value);
    if (tok.empty())
        throw config_error("array spec is empty");
    ArraySpec spec;
    spec.kind = tok[0];
    if (spec.kind == "single") {
        spec.pattern = ElementPattern::isotropic_0dbi();
        return spec;
    }
    if (tok.size() < 3)
        throw config_error("array spec '" + value + "': expected '<kind> <dim1> <dim2> [spacing]'");
    spec.dim1 = std::stoi(tok[1]);
    spec.dim2 = std::stoi(tok[2]);
    if (tok.size() > 3 && tok[3] != "half_wave")
        spec.spacing_m = std::stod(tok[3]);
    return spec;
}

} // namespace

CampaignConfig parse_campaign_config(const std::string &text) {
    CampaignConfig config;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(line_no) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "fc_hz") config.fc_hz = std::stod(value);
            else if (key == "bandwidth_hz") config.bandwidth_hz = std::stod(value);
            else if (key == "m_f") config.m_f = std::stoi(value);
            else if (key == "seed") config.seed = std::stoull(value);
            else if (key == "jobs") config.jobs = std::stoi(value);
            else if (key == "out_dir") config.out_dir = value;
            else if (key == "tx_array") config.tx_array = parse_array_spec(value);
            else if (key == "rx_array") config.rx_array = parse_array_spec(value);
            else if (key == "tx_position") {
                const auto tok = split_ws(value);
                if (tok.size() != 3)
                    throw config_error("tx_position needs 'x y z'");
                config.tx_position = {std::stod(tok[0]), std::stod(tok[1]), std::stod(tok[2])};
            }
            else if (key == "smc_count") config.scenario.smc_count = std::stoi(value);
            else if (key == "smc_min_delay_ns") config.scenario.smc_min_delay_ns = std::stod(value);
            else if (key == "smc_max_delay_ns") config.scenario.smc_max_delay_ns = std::stod(value);
            else if (key == "smc_power_decay_db") config.scenario.smc_power_decay_db = std::stod(value);
            else if (key == "smc_xpr_mean_db") config.scenario.smc_xpr_mean_db = std::stod(value);
            else if (key == "smc_xpr_std_db") config.scenario.smc_xpr_std_db = std::stod(value);
            else if (key == "los_k_db") config.scenario.los_k_db = std::stod(value);
            else if (key == "dmc_processes") config.scenario.dmc_processes = std::stoi(value);
            else if (key == "dmc_fraction") config.scenario.dmc_fraction = std::stod(value);
            else if (key == "dmc_min_beta") config.scenario.dmc_min_beta = std::stod(value);
            else if (key == "dmc_max_beta") config.scenario.dmc_max_beta = std::stod(value);
            else if (key == "snr_db") config.scenario.snr_db = std::stod(value);
            else if (key == "sf_sigma_db") config.scenario.sf_sigma_db = std::stod(value);
            else if (key == "vmf_components") config.scenario.vmf_components = std::stoi(value);
            else if (key == "sage_max_paths") config.sage_max_paths = std::stoi(value);
            else if (key == "sage_stop_db") config.sage_stop_db = std::stod(value);
            else if (key == "dmc_k_max") config.dmc_k_max = std::stoi(value);
            else if (key == "fit_angular") config.fit_angular = value == "1" || value == "true";
            else if (key == "rho_db") config.rho_db = std::stod(value);
            else if (key == "min_fit_distance_m") config.min_fit_distance_m = std::stod(value);
            else if (key == "plot_positions") config.plot_positions = std::stoi(value);
            else if (key == "position") {
                const auto tok = split_ws(value);
                if (tok.size() != 5)
                    throw config_error("position needs 'id x y z los|nlos'");
                Position p;
                p.id = std::stoi(tok[0]);
                p.coordinates = {std::stod(tok[1]), std::stod(tok[2]), std::stod(tok[3])};
                if (tok[4] == "los") p.los = true;
                else if (tok[4] == "nlos") p.los = false;
                else throw config_error("position flag must be 'los' or 'nlos'");
                config.positions.push_back(p);
            }
            else throw config_error("unknown key '" + key + "'");
        } catch (const config_error &) {
            throw;
        } catch (const std::exception &e) {
            throw config_error("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

CampaignConfig load_campaign_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_campaign_config(buffer.str());
}

// ---------------------------------------------------------------------------
// scenario generation
// ---------------------------------------------------------------------------

PositionTruth generate_scenario(const CampaignConfig &config, const Position &position,
                                std::uint64_t seed) {
    const ScenarioSpec &sc = config.scenario;
    const FrequencyGrid grid = config.grid();
    CounterRng rng(seed, derive_stream(config.seed, std::uint64_t(position.id)));

    PositionTruth truth;
    truth.position = position;
    truth.seed = seed;
    truth.distance_m = (position.coordinates - config.tx_position).norm();

    const double los_delay = truth.distance_m / kSpeedOfLight;
    const double span = grid.delay_span();
    if (los_delay >= 0.75 * span)
        throw config_error("position " + std::to_string(position.id) +
                           ": geometric delay exceeds the unambiguous span");

    // free-space total gain with lognormal shadowing
    const double pl_db = ci_intercept_db(config.fc_hz / 1e9) +
                         20.0 * std::log10(truth.distance_m) + sc.sf_sigma_db * rng.normal();
    const double total_gain = std::pow(10.0, -pl_db / 10.0);
    const double smc_gain = total_gain * (1.0 - sc.dmc_fraction);
    const double dmc_gain = total_gain * sc.dmc_fraction;

    // geometry-ish angles: departure confined to the Tx panel sector
    const Eigen::Vector3d direction =
        (position.coordinates - config.tx_position).normalized();
    const double geo_aod = rad2deg(std::atan2(direction.y(), direction.x()));
    const double geo_eod = rad2deg(std::asin(std::clamp(direction.z(), -1.0, 1.0)));

    auto draw_amp = [&](double power) {
        // co-polar terms share the power; cross terms sit one XPR below
        const double xpr_db = sc.smc_xpr_mean_db + sc.smc_xpr_std_db * rng.normal();
        const double cross = std::pow(10.0, -std::max(xpr_db, 0.0) / 10.0);
        const double co_power = power / (2.0 * (1.0 + cross));
        Eigen::Matrix2cd amp;
        amp(0, 0) = std::sqrt(co_power) * rng.complex_normal() * std::sqrt(2.0);
        amp(1, 1) = std::sqrt(co_power) * rng.complex_normal() * std::sqrt(2.0);
        amp(0, 1) = std::sqrt(co_power * cross) * rng.complex_normal() * std::sqrt(2.0);
        amp(1, 0) = std::sqrt(co_power * cross) * rng.complex_normal() * std::sqrt(2.0);
        return amp;
    };

    // path powers: LOS (when present) sits los_k_db above the NLOS sum
    std::vector<double> rel_powers;
    const int nlos_count = std::max(sc.smc_count - (position.los ? 1 : 0), 1);
    for (int i = 0; i < nlos_count; ++i)
        rel_powers.push_back(std::pow(10.0, -rng.uniform(0.0, sc.smc_power_decay_db) / 10.0));
    double nlos_sum = 0.0;
    for (double p : rel_powers)
        nlos_sum += p;

    std::vector<SmcPath> paths;
    if (position.los) {
        SmcPath los;
        los.delay_s = los_delay;
        los.aod_deg = std::clamp(geo_aod, -70.0, 70.0);
        los.eod_deg = std::clamp(geo_eod, -40.0, 40.0);
        los.aoa_deg = wrap_degrees(los.aod_deg + 180.0);
        los.eoa_deg = -los.eod_deg;
        const double los_power = nlos_sum * std::pow(10.0, sc.los_k_db / 10.0);
        // the LOS path keeps polarization: strong diagonal, weak leakage
        const double leak = std::pow(10.0, -15.0 / 10.0);
        Eigen::Matrix2cd amp = Eigen::Matrix2cd::Zero();
        amp(0, 0) = std::sqrt(los_power / 2.0) * std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
        amp(1, 1) = std::sqrt(los_power / 2.0) * std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
        amp(0, 1) = std::sqrt(los_power * leak / 2.0) * rng.complex_normal();
        amp(1, 0) = std::sqrt(los_power * leak / 2.0) * rng.complex_normal();
        los.amp = amp;
        paths.push_back(los);
    }
    for (int i = 0; i < nlos_count; ++i) {
        SmcPath p;
        const double lo = los_delay + sc.smc_min_delay_ns * 1e-9;
        const double hi = std::min(los_delay + sc.smc_max_delay_ns * 1e-9, 0.9 * span);
        p.delay_s = rng.uniform(lo, hi);
        p.aoa_deg = rng.uniform(-180.0, 180.0);
        p.eoa_deg = rng.uniform(-60.0, 60.0);
        p.aod_deg = rng.uniform(-70.0, 70.0);
        p.eod_deg = rng.uniform(-40.0, 40.0);
        p.amp = draw_amp(rel_powers[std::size_t(i)]);
        paths.push_back(p);
    }
    // normalize so the SMC per-link mean power hits its share
    double amp_power = 0.0;
    for (const auto &p : paths)
        amp_power += p.power();
    const double amp_scale = std::sqrt(smc_gain / std::max(amp_power, 1e-300));
    for (auto &p : paths)
        p.amp *= amp_scale;
    truth.paths = paths;

    // DMC: exponential processes starting at the first arrival
    DmcModel dmc;
    const double dtau = grid.delay_resolution();
    std::vector<double> rel_dmc;
    for (int k = 0; k < sc.dmc_processes; ++k)
        rel_dmc.push_back(std::pow(10.0, -rng.uniform(0.0, 6.0) / 10.0));
    double rel_sum = 0.0;
    std::vector<double> betas;
    for (int k = 0; k < sc.dmc_processes; ++k) {
        betas.push_back(rng.uniform(sc.dmc_min_beta, sc.dmc_max_beta));
        rel_sum += rel_dmc[std::size_t(k)];
    }
    for (int k = 0; k < sc.dmc_processes; ++k) {
        DmcDelayProcess p;
        const double frac = double(k) / std::max(sc.dmc_processes, 1);
        p.base_delay = los_delay + frac * 0.45 * span;
        p.decay = betas[std::size_t(k)] / dtau;
        // sum_n alpha1 e^{-beta n} ~ alpha1/beta is the per-link power share
        const double share = dmc_gain * rel_dmc[std::size_t(k)] / rel_sum;
        p.alpha1 = share * betas[std::size_t(k)];
        dmc.processes.push_back(p);
    }
    dmc.noise_floor = total_gain * std::pow(10.0, -sc.snr_db / 10.0) / grid.size();

    auto draw_mixture = [&](int components, double center_az) {
        VmfMixture m;
        for (int q = 0; q < components; ++q) {
            VmfComponent c;
            c.mean_elevation_deg = rng.uniform(-40.0, 40.0);
            c.mean_azimuth_deg = wrap_degrees(center_az + rng.uniform(-90.0, 90.0));
            c.kappa = rng.uniform(20.0, 80.0);
            c.weight = rng.uniform(0.5, 1.0);
            m.push_back(c);
        }
        double sum = 0.0;
        for (const auto &c : m)
            sum += c.weight;
        for (auto &c : m)
            c.weight /= sum;
        return m;
    };
    dmc.vmf_rx = draw_mixture(sc.vmf_components, paths.front().aoa_deg);
    dmc.vmf_tx = draw_mixture(std::max(sc.vmf_components - 1, 1), geo_aod);
    truth.dmc = dmc;
    return truth;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

std::string manifest_to_text(const Manifest &manifest) {
    std::ostringstream out;
    out.precision(17);
    out << "MANIFEST1\n";
    out << "positions=" << manifest.entries.size() << "\n";
    for (const auto &e : manifest.entries) {
        out << "[position]\n";
        out << "id=" << e.position.id << "\n";
        out << "file=" << e.file << "\n";
        out << "seed=" << e.seed << "\n";
        out << "x=" << e.position.coordinates.x() << "\n";
        out << "y=" << e.position.coordinates.y() << "\n";
        out << "z=" << e.position.coordinates.z() << "\n";
        out << "los=" << (e.position.los ? 1 : 0) << "\n";
        out << "distance_m=" << e.distance_m << "\n";
        out << "smc_count=" << e.paths.size() << "\n";
        for (std::size_t i = 0; i < e.paths.size(); ++i) {
            const SmcPath &p = e.paths[i];
            out << "smc." << i << "=" << p.eoa_deg << " " << p.aoa_deg << " " << p.eod_deg << " "
                << p.aod_deg << " " << p.delay_s << " " << p.amp(0, 0).real() << " "
                << p.amp(0, 0).imag() << " " << p.amp(0, 1).real() << " " << p.amp(0, 1).imag()
                << " " << p.amp(1, 0).real() << " " << p.amp(1, 0).imag() << " "
                << p.amp(1, 1).real() << " " << p.amp(1, 1).imag() << "\n";
        }
        out << "dmc.processes=" << e.dmc.processes.size() << "\n";
        for (std::size_t k = 0; k < e.dmc.processes.size(); ++k)
            out << "dmc." << k << "=" << e.dmc.processes[k].alpha1 << " "
                << e.dmc.processes[k].decay << " " << e.dmc.processes[k].base_delay << "\n";
        out << "dmc.noise_floor=" << e.dmc.noise_floor << "\n";
        auto dump_mixture = [&out](const char *name, const VmfMixture &m) {
            out << name << ".components=" << m.size() << "\n";
            for (std::size_t q = 0; q < m.size(); ++q)
                out << name << "." << q << "=" << m[q].mean_elevation_deg << " "
                    << m[q].mean_azimuth_deg << " " << m[q].kappa << " " << m[q].weight << "\n";
        };
        dump_mixture("dmc.vmf_rx", e.dmc.vmf_rx);
        dump_mixture("dmc.vmf_tx", e.dmc.vmf_tx);
        out << "[end]\n";
    }
    return out.str();
}

Manifest manifest_from_text(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "MANIFEST1")
        throw format_error("manifest: bad magic");
    Manifest manifest;
    std::map<std::string, std::string> kv;
    bool in_position = false;
    auto get = [&kv](const std::string &key) -> const std::string & {
        auto it = kv.find(key);
        if (it == kv.end())
            throw format_error("manifest: missing key '" + key + "'");
        return it->second;
    };
    while (std::getline(in, line)) {
        if (line == "[position]") {
            kv.clear();
            in_position = true;
            continue;
        }
        if (line == "[end]") {
            if (!in_position)
                throw format_error("manifest: [end] without [position]");
            PositionTruth e;
            e.position.id = std::stoi(get("id"));
            e.file = get("file");
            e.seed = std::stoull(get("seed"));
            e.position.coordinates = {std::stod(get("x")), std::stod(get("y")),
                                      std::stod(get("z"))};
            e.position.los = get("los") == "1";
            e.distance_m = std::stod(get("distance_m"));
            const int nsmc = std::stoi(get("smc_count"));
            for (int i = 0; i < nsmc; ++i) {
                std::istringstream ps(get("smc." + std::to_string(i)));
                SmcPath p;
                double re, im;
                ps >> p.eoa_deg >> p.aoa_deg >> p.eod_deg >> p.aod_deg >> p.delay_s;
                ps >> re >> im;
                p.amp(0, 0) = {re, im};
                ps >> re >> im;
                p.amp(0, 1) = {re, im};
                ps >> re >> im;
                p.amp(1, 0) = {re, im};
                ps >> re >> im;
                p.amp(1, 1) = {re, im};
                e.paths.push_back(p);
            }
            const int nproc = std::stoi(get("dmc.processes"));
            for (int k = 0; k < nproc; ++k) {
                std::istringstream ds(get("dmc." + std::to_string(k)));
                DmcDelayProcess p;
                ds >> p.alpha1 >> p.decay >> p.base_delay;
                e.dmc.processes.push_back(p);
            }
            e.dmc.noise_floor = std::stod(get("dmc.noise_floor"));
            auto load_mixture = [&](const char *name) {
                VmfMixture m;
                const int q = std::stoi(get(std::string(name) + ".components"));
                for (int i = 0; i < q; ++i) {
                    std::istringstream ms(get(std::string(name) + "." + std::to_string(i)));
                    VmfComponent c;
                    ms >> c.mean_elevation_deg >> c.mean_azimuth_deg >> c.kappa >> c.weight;
                    m.push_back(c);
                }
                return m;
            };
            e.dmc.vmf_rx = load_mixture("dmc.vmf_rx");
            e.dmc.vmf_tx = load_mixture("dmc.vmf_tx");
            manifest.entries.push_back(std::move(e));
            in_position = false;
            continue;
        }
        const auto eq = line.find('=');
        if (eq != std::string::npos && in_position)
            kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return manifest;
}

void write_manifest(const std::filesystem::path &path, const Manifest &manifest) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw format_error("cannot open '" + tmp.string() + "' for writing");
        out << manifest_to_text(manifest);
    }
    std::filesystem::rename(tmp, path);
}

Manifest read_manifest(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw format_error("cannot open manifest '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return manifest_from_text(buffer.str());
}

// ---------------------------------------------------------------------------
// campaign stages
// ---------------------------------------------------------------------------

Manifest synth_campaign(const CampaignConfig &config, const std::filesystem::path &out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    const FrequencyGrid grid = config.grid();
    auto tx = std::make_shared<const ArrayModel>(config.tx_array.build(config.fc_hz));
    auto rx = std::make_shared<const ArrayModel>(config.rx_array.build(config.fc_hz));

    Manifest manifest;
    manifest.entries.resize(config.positions.size());

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= config.positions.size())
                return;
            try {
                const Position &pos = config.positions[i];
                const std::uint64_t seed = derive_stream(config.seed, std::uint64_t(pos.id));
                PositionTruth truth = generate_scenario(config, pos, seed);
                char name[64];
                std::snprintf(name, sizeof name, "pos_%04d.chtn", pos.id);
                truth.file = name;

                ChannelTensor tensor = synth_full(truth.paths, truth.dmc, tx, rx, grid, seed);
                tensor.metadata["position_id"] = std::to_string(pos.id);
                tensor.metadata["los"] = pos.los ? "1" : "0";
                tensor.metadata["distance_m"] = std::to_string(truth.distance_m);
                write_container(out_dir / name, tensor);
                manifest.entries[i] = std::move(truth);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(config.jobs, int(config.positions.size())));
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t)
        threads.emplace_back(worker);
    for (auto &t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);

    write_manifest(out_dir / "manifest.txt", manifest); // manifest last
    return manifest;
}

EstimateResult estimate_tensor(const ChannelTensor &tensor, const CampaignConfig &config) {
    EstimateResult result;
    SageConfig sage;
    sage.max_paths = config.sage_max_paths;
    sage.stop_threshold_db = config.sage_stop_db;
    result.paths = estimate_smc(tensor, sage);
    result.total_power = tensor.total_power();

    const ChannelTensor residual = smc_residual(tensor, result.paths);
    result.residual_power = residual.total_power();

    const DmcCovariance cov = measured_dmc_covariance(residual);
    const Eigen::VectorXd psd = marginal_delay_psd(cov.frequency_marginal);
    const double floor_db = estimate_noise_floor_db(psd);
    DetectConfig detect;
    detect.max_processes = config.dmc_k_max;
    const auto segments =
        detect_processes((10.0 * psd.array().max(1e-300).log10()).matrix(), floor_db, detect);
    if (!segments.empty()) {
        const DelayInit init = init_dmc_delay(segments, psd, tensor.grid());
        result.dmc_report = fit_dmc_delay(cov, init, tensor.grid());
    }
    if (config.fit_angular && tensor.rx_ports() > 1 && tensor.tx_ports() > 1) {
        result.vmf_rx_init = bartlett_init_angular(residual, LinkSide::Rx);
        result.vmf_tx_init = bartlett_init_angular(residual, LinkSide::Tx);
        result.dmc_report.fitted.vmf_rx =
            fit_dmc_angular(cov.rx_marginal, result.vmf_rx_init, *tensor.rx_array(), tensor.grid())
                .fitted;
        result.dmc_report.fitted.vmf_tx =
            fit_dmc_angular(cov.tx_marginal, result.vmf_tx_init, *tensor.tx_array(), tensor.grid())
                .fitted;
    }
    return result;
}

void estimate_containers(const std::vector<std::filesystem::path> &containers,
                         const CampaignConfig &config, const std::filesystem::path &out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> index(containers.size());

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= containers.size())
                return;
            try {
                const ChannelTensor tensor = read_container(containers[i]);
                EstimateResult result = estimate_tensor(tensor, config);
                const std::string stem = containers[i].stem().string();
                {
                    std::ofstream paths_csv(out_dir / (stem + "_paths.csv"), std::ios::trunc);
                    paths_csv << paths_to_csv(result.paths);
                }
                {
                    std::ofstream report(out_dir / (stem + "_dmc.txt"), std::ios::trunc);
                    report << fit_report_to_text(result.dmc_report);
                }
                char line[512];
                std::snprintf(line, sizeof line, "%s,%s,%zu,%.10g,%.10g,%.10g", stem.c_str(),
                              containers[i].string().c_str(), result.paths.size(),
                              result.total_power, result.residual_power,
                              result.dmc_report.power_capture_ratio);
                index[i] = line;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(config.jobs, int(containers.size())));
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t)
        threads.emplace_back(worker);
    for (auto &t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);

    std::ofstream idx(out_dir / "index.csv", std::ios::trunc);
    idx << "stem,container,paths,total_power,residual_power,power_capture_ratio\n";
    for (const auto &line : index)
        idx << line << "\n";
}

} // namespace mpchan
