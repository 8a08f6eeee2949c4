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
#include "mpchan/mimo_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mpchan {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw format_error("cannot open '" + path.string() + "' for writing");
    out << content;
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw format_error("cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void append_cdf(std::ostringstream &out, std::vector<double> values) {
    std::sort(values.begin(), values.end());
    for (std::size_t i = 0; i < values.size(); ++i)
        out << num(values[i]) << "," << num(double(i + 1) / double(values.size())) << "\n";
}

void fit_rows(std::ostringstream &out, const std::string &parameter, const std::string &scenario,
              LspTransform transform, const std::vector<double> &values) {
    if (values.size() < 2)
        return;
    const auto [mu, sigma] = fit_lsp_distribution(values, transform);
    out << parameter << "," << scenario << ","
        << (transform == LspTransform::Log10 ? "log10" : "identity") << "," << num(mu) << ","
        << num(sigma) << "," << values.size() << "\n";
}

struct PositionData {
    PositionTruth truth;
    ChannelTensor tensor;
    std::vector<SmcPath> est_paths;
    DmcFitReport dmc_report;
    StatRecord record;
};

} // namespace

void characterize_campaign(const CampaignConfig &config, const std::filesystem::path &manifest_path,
                           const std::filesystem::path &estimates_dir,
                           const std::filesystem::path &out_dir) {
    const Manifest manifest = read_manifest(manifest_path);
    if (manifest.entries.empty())
        throw config_error("characterize: manifest is empty");
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "plotdata");

    const std::filesystem::path container_dir = manifest_path.parent_path();
    std::vector<PositionData> data;
    data.reserve(manifest.entries.size());

    for (const auto &entry : manifest.entries) {
        PositionData pd;
        pd.truth = entry;
        pd.tensor = read_container(container_dir / entry.file);
        const std::string stem = std::filesystem::path(entry.file).stem().string();
        pd.est_paths = paths_from_csv(read_text(estimates_dir / (stem + "_paths.csv")));
        pd.dmc_report = fit_report_from_text(read_text(estimates_dir / (stem + "_dmc.txt")));
        data.push_back(std::move(pd));
    }

    const FrequencyGrid grid = config.grid();
    const double dtau = grid.delay_resolution();
    auto tx = std::make_shared<const ArrayModel>(config.tx_array.build(config.fc_hz));
    auto rx = std::make_shared<const ArrayModel>(config.rx_array.build(config.fc_hz));

    // ---- per-position statistics -------------------------------------------------
    std::ostringstream records_csv;
    records_csv << "position_id,distance_3d_m,pl_db,ds_s,ed_s,kf_db,asd_deg,asa_deg,esd_deg,"
                   "esa_deg,xpr_h_db,xpr_v_db,cpr_db,los\n";
    std::ostringstream capacity_csv;
    capacity_csv << "position_id,rho_db,capacity_measured,capacity_smc_only,capacity_smc_dmc,"
                    "rel_err_smc_only,rel_err_smc_dmc\n";
    std::ostringstream sv_csv;
    sv_csv << "position_id,source,sv1,sv2,sv3,power_fraction_top3\n";
    std::ostringstream fraction_csv;
    fraction_csv << "position_id,dmc_power_fraction\n";

    for (auto &pd : data) {
        StatRecord &rec = pd.record;
        rec.position_id = pd.truth.position.id;
        rec.distance_3d_m = pd.truth.distance_m;
        rec.los = pd.truth.position.los;

        const Eigen::VectorXd psd = delay_psd(pd.tensor);
        const double floor_db = estimate_noise_floor_db(psd);
        const auto mpcs = extract_mpcs(psd, floor_db, dtau);
        if (mpcs.empty())
            throw numerical_error("characterize: no MPCs at position " +
                                  std::to_string(rec.position_id));
        double received = 0.0;
        for (const auto &m : mpcs)
            received += m.power;
        rec.pl_db = -10.0 * std::log10(received);
        rec.ds_s = delay_spread(mpcs);
        rec.ed_s = excess_delay(mpcs);

        // median K-factor over a deterministic link subset
        std::vector<double> kfs;
        const int stride = std::max(1, pd.tensor.links() / 64);
        for (int link = 0; link < pd.tensor.links(); link += stride) {
            const int r = link / pd.tensor.tx_ports();
            const int t = link % pd.tensor.tx_ports();
            kfs.push_back(
                kfactor_moment(Eigen::VectorXcd(pd.tensor.link_response(r, t))).k_db);
        }
        std::nth_element(kfs.begin(), kfs.begin() + kfs.size() / 2, kfs.end());
        rec.kf_db = kfs[kfs.size() / 2];

        if (!pd.est_paths.empty()) {
            std::vector<double> powers, aoa, aod, eoa, eod;
            for (const auto &p : pd.est_paths) {
                powers.push_back(p.power());
                aoa.push_back(p.aoa_deg);
                aod.push_back(p.aod_deg);
                eoa.push_back(p.eoa_deg);
                eod.push_back(p.eod_deg);
            }
            rec.asa_deg = angular_spread(aoa, powers);
            rec.asd_deg = angular_spread(aod, powers);
            rec.esa_deg = angular_spread(eoa, powers);
            rec.esd_deg = angular_spread(eod, powers);
        }

        const XprCpr xpr = xpr_cpr_from_psd(
            delay_psd_polarized(pd.tensor, Polarization::H, Polarization::H),
            delay_psd_polarized(pd.tensor, Polarization::V, Polarization::H),
            delay_psd_polarized(pd.tensor, Polarization::H, Polarization::V),
            delay_psd_polarized(pd.tensor, Polarization::V, Polarization::V));
        rec.xpr_h_db = xpr.xpr_h_db;
        rec.xpr_v_db = xpr.xpr_v_db;
        rec.cpr_db = xpr.cpr_db;

        records_csv << rec.position_id << "," << num(rec.distance_3d_m) << "," << num(rec.pl_db)
                    << "," << num(rec.ds_s) << "," << num(rec.ed_s) << "," << num(rec.kf_db) << ","
                    << num(rec.asd_deg) << "," << num(rec.asa_deg) << "," << num(rec.esd_deg)
                    << "," << num(rec.esa_deg) << "," << num(rec.xpr_h_db) << ","
                    << num(rec.xpr_v_db) << "," << num(rec.cpr_db) << "," << (rec.los ? 1 : 0)
                    << "\n";

        // capacity and singular values: measured vs reconstructions
        const std::uint64_t recon_seed = pd.truth.seed ^ 0x5eedu;
        const ChannelTensor smc_only = synth_smc(pd.est_paths, tx, rx, grid);
        ChannelTensor smc_dmc = smc_only;
        if (!pd.dmc_report.fitted.processes.empty())
            smc_dmc += synth_dmc(pd.dmc_report.fitted, tx, rx, grid, recon_seed);

        const CapacityResult cap_meas = analyze_capacity(pd.tensor, config.rho_db);
        const double cap_smc = smc_only.total_power() > 0.0
                                   ? analyze_capacity(smc_only, config.rho_db).capacity_bps_hz
                                   : 0.0;
        const double cap_full = smc_dmc.total_power() > 0.0
                                    ? analyze_capacity(smc_dmc, config.rho_db).capacity_bps_hz
                                    : 0.0;
        const double rel_smc = std::abs(cap_smc - cap_meas.capacity_bps_hz) /
                               std::max(cap_meas.capacity_bps_hz, 1e-12);
        const double rel_full = std::abs(cap_full - cap_meas.capacity_bps_hz) /
                                std::max(cap_meas.capacity_bps_hz, 1e-12);
        capacity_csv << rec.position_id << "," << num(config.rho_db) << ","
                     << num(cap_meas.capacity_bps_hz) << "," << num(cap_smc) << ","
                     << num(cap_full) << "," << num(rel_smc) << "," << num(rel_full) << "\n";

        auto sv_row = [&](const char *source, const ChannelTensor &t) {
            if (t.total_power() <= 0.0)
                return;
            const SvResult sv = singular_values(normalize_channel(t).tensor, 3);
            sv_csv << rec.position_id << "," << source << "," << num(sv.averaged_profile(0)) << ","
                   << num(sv.averaged_profile(1)) << "," << num(sv.averaged_profile(2)) << ","
                   << num(sv.power_fraction_topk) << "\n";
        };
        sv_row("measured", pd.tensor);
        sv_row("smc_only", smc_only);
        sv_row("smc_dmc", smc_dmc);

        fraction_csv << rec.position_id << ","
                     << num(dmc_power_fraction(pd.tensor, pd.est_paths,
                                               pd.dmc_report.fitted.noise_floor))
                     << "\n";
    }
    write_text(out_dir / "stat_records.csv", records_csv.str());
    write_text(out_dir / "capacity.csv", capacity_csv.str());
    write_text(out_dir / "sv_profiles.csv", sv_csv.str());
    write_text(out_dir / "dmc_power_fractions.csv", fraction_csv.str());

    // ---- path-loss fits ----------------------------------------------------------
    std::ostringstream pl_csv;
    pl_csv << "scenario,parameter,ci,fi\n";
    for (const bool los : {true, false}) {
        std::vector<std::pair<double, double>> samples;
        for (const auto &pd : data)
            if (pd.record.los == los && pd.record.distance_3d_m >= config.min_fit_distance_m)
                samples.push_back({pd.record.distance_3d_m, pd.record.pl_db});
        if (samples.size() < 2)
            continue;
        const PathLossFit ci = fit_pathloss(samples, PathLossModel::CI, config.fc_hz / 1e9);
        const PathLossFit fi = fit_pathloss(samples, PathLossModel::FI, config.fc_hz / 1e9);
        const std::string scenario = los ? "los" : "nlos";
        pl_csv << scenario << ",n," << num(ci.exponent) << "," << num(fi.exponent) << "\n";
        pl_csv << scenario << ",beta," << num(ci.intercept_db) << "," << num(fi.intercept_db)
               << "\n";
        pl_csv << scenario << ",sigma," << num(ci.sigma_db) << "," << num(fi.sigma_db) << "\n";
    }
    write_text(out_dir / "pl_fits.csv", pl_csv.str());

    // ---- large-scale parameter distribution fits ---------------------------------
    std::ostringstream lsp_csv;
    lsp_csv << "parameter,scenario,transform,mu,sigma,count\n";
    for (const bool los : {true, false}) {
        std::vector<double> ds, ed, kf_lg, asd, asa, esd, esa;
        for (const auto &pd : data) {
            if (pd.record.los != los)
                continue;
            ds.push_back(pd.record.ds_s);
            ed.push_back(pd.record.ed_s);
            kf_lg.push_back(pd.record.kf_db / 10.0); // lg(KF)
            if (pd.record.asd_deg > 0.0) asd.push_back(pd.record.asd_deg);
            if (pd.record.asa_deg > 0.0) asa.push_back(pd.record.asa_deg);
            if (pd.record.esd_deg > 0.0) esd.push_back(pd.record.esd_deg);
            if (pd.record.esa_deg > 0.0) esa.push_back(pd.record.esa_deg);
        }
        const std::string scenario = los ? "los" : "nlos";
        fit_rows(lsp_csv, "ds", scenario, LspTransform::Log10, ds);
        fit_rows(lsp_csv, "ed", scenario, LspTransform::Log10, ed);
        fit_rows(lsp_csv, "kf_lg", scenario, LspTransform::Identity, kf_lg);
        fit_rows(lsp_csv, "asd", scenario, LspTransform::Log10, asd);
        fit_rows(lsp_csv, "asa", scenario, LspTransform::Log10, asa);
        fit_rows(lsp_csv, "esd", scenario, LspTransform::Log10, esd);
        fit_rows(lsp_csv, "esa", scenario, LspTransform::Log10, esa);
    }
    write_text(out_dir / "lsp_fits.csv", lsp_csv.str());

    // ---- polarization-ratio fits ---------------------------------------------------
    std::ostringstream xpr_csv;
    xpr_csv << "source,metric,mu,sigma,count\n";
    {
        std::vector<double> xh, xv, cp;
        for (const auto &pd : data) {
            if (std::isfinite(pd.record.xpr_h_db)) xh.push_back(pd.record.xpr_h_db);
            if (std::isfinite(pd.record.xpr_v_db)) xv.push_back(pd.record.xpr_v_db);
            if (std::isfinite(pd.record.cpr_db)) cp.push_back(pd.record.cpr_db);
        }
        auto row = [&](const char *metric, const std::vector<double> &v) {
            if (v.size() < 2)
                return;
            const auto [mu, sigma] = fit_lsp_distribution(v, LspTransform::Identity);
            xpr_csv << "measurement," << metric << "," << num(mu) << "," << num(sigma) << ","
                    << v.size() << "\n";
        };
        row("xpr_h", xh);
        row("xpr_v", xv);
        row("cpr", cp);
    }
    {
        // per-path ratios of estimated SMCs, split by LOS path vs the rest
        std::vector<double> los_h, los_v, los_c, nlos_h, nlos_v, nlos_c;
        for (const auto &pd : data) {
            for (std::size_t i = 0; i < pd.est_paths.size(); ++i) {
                const XprCpr x = xpr_cpr_per_path(pd.est_paths[i]);
                const bool is_los = pd.record.los && i == 0;
                auto push = [](std::vector<double> &v, double value) {
                    if (std::isfinite(value))
                        v.push_back(value);
                };
                push(is_los ? los_h : nlos_h, x.xpr_h_db);
                push(is_los ? los_v : nlos_v, x.xpr_v_db);
                push(is_los ? los_c : nlos_c, x.cpr_db);
            }
        }
        auto row = [&](const char *source, const char *metric, const std::vector<double> &v) {
            if (v.size() < 2)
                return;
            const auto [mu, sigma] = fit_lsp_distribution(v, LspTransform::Identity);
            xpr_csv << source << "," << metric << "," << num(mu) << "," << num(sigma) << ","
                    << v.size() << "\n";
        };
        row("smc_los_path", "xpr_h", los_h);
        row("smc_los_path", "xpr_v", los_v);
        row("smc_los_path", "cpr", los_c);
        row("smc_nlos_paths", "xpr_h", nlos_h);
        row("smc_nlos_paths", "xpr_v", nlos_v);
        row("smc_nlos_paths", "cpr", nlos_c);
    }
    write_text(out_dir / "xpr_cpr_fits.csv", xpr_csv.str());

    // ---- plot data ----------------------------------------------------------------
    {
        std::ostringstream ed_cdf, ds_cdf, kf_cdf, cap_cdf;
        std::vector<double> eds, dss, kfs, caps;
        for (const auto &pd : data) {
            eds.push_back(pd.record.ed_s * 1e9);
            dss.push_back(pd.record.ds_s * 1e9);
            kfs.push_back(pd.record.kf_db);
        }
        ed_cdf << "ed_ns,cdf\n";
        append_cdf(ed_cdf, eds);
        ds_cdf << "ds_ns,cdf\n";
        append_cdf(ds_cdf, dss);
        kf_cdf << "kf_db,cdf\n";
        append_cdf(kf_cdf, kfs);
        write_text(out_dir / "plotdata" / "cdf_ed.csv", ed_cdf.str());
        write_text(out_dir / "plotdata" / "cdf_ds.csv", ds_cdf.str());
        write_text(out_dir / "plotdata" / "cdf_kf.csv", kf_cdf.str());
    }
    const int plot_count = std::min<int>(config.plot_positions, int(data.size()));
    for (int i = 0; i < plot_count; ++i) {
        const auto &pd = data[std::size_t(i)];
        const std::string id = std::to_string(pd.record.position_id);

        std::ostringstream psd_csv;
        psd_csv << "delay_ns,measured_db,smc_only_db,smc_dmc_db\n";
        const Eigen::VectorXd meas = delay_psd(pd.tensor);
        const ChannelTensor smc_only = synth_smc(pd.est_paths, tx, rx, grid);
        ChannelTensor smc_dmc = smc_only;
        if (!pd.dmc_report.fitted.processes.empty())
            smc_dmc += synth_dmc(pd.dmc_report.fitted, tx, rx, grid, pd.truth.seed ^ 0x5eedu);
        const Eigen::VectorXd psd_smc = delay_psd(smc_only);
        const Eigen::VectorXd psd_full = delay_psd(smc_dmc);
        for (int n = 0; n < grid.size(); ++n)
            psd_csv << num(n * dtau * 1e9) << ","
                    << num(10.0 * std::log10(std::max(meas(n), 1e-300))) << ","
                    << num(10.0 * std::log10(std::max(psd_smc(n), 1e-300))) << ","
                    << num(10.0 * std::log10(std::max(psd_full(n), 1e-300))) << "\n";
        write_text(out_dir / "plotdata" / ("delay_psd_pos" + id + ".csv"), psd_csv.str());

        for (const LinkSide side : {LinkSide::Rx, LinkSide::Tx}) {
            if ((side == LinkSide::Rx ? pd.tensor.rx_ports() : pd.tensor.tx_ports()) < 2)
                continue;
            const ChannelTensor residual = smc_residual(pd.tensor, pd.est_paths);
            const AngularSpectrum spec =
                bartlett_spectrum(residual, side, default_elevation_grid(4.0),
                                  default_azimuth_grid(4.0));
            std::ostringstream ang_csv;
            ang_csv << "elevation_deg,azimuth_deg,power_db\n";
            const Eigen::MatrixXd db = spec.power_db();
            for (Eigen::Index e = 0; e < db.rows(); ++e)
                for (Eigen::Index a = 0; a < db.cols(); ++a)
                    ang_csv << num(spec.elevation_deg(e)) << "," << num(spec.azimuth_deg(a)) << ","
                            << num(db(e, a)) << "\n";
            write_text(out_dir / "plotdata" /
                           ("angular_pos" + id + (side == LinkSide::Rx ? "_rx" : "_tx") + ".csv"),
                       ang_csv.str());
        }
    }

    std::ostringstream report_manifest;
    report_manifest << "REPORT1\n";
    report_manifest << "positions=" << data.size() << "\n";
    report_manifest << "tables=stat_records.csv,pl_fits.csv,lsp_fits.csv,xpr_cpr_fits.csv,"
                       "sv_profiles.csv,capacity.csv,dmc_power_fractions.csv\n";
    report_manifest << "plot_positions=" << plot_count << "\n";
    write_text(out_dir / "report_manifest.txt", report_manifest.str());
}

} // namespace mpchan
