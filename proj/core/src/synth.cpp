#include "ecoperceiver/synth.hpp"

#include <cmath>
#include <fstream>

#include "ecoperceiver/rng.hpp"
#include "ecoperceiver/timeutil.hpp"

namespace ecp {

namespace {

constexpr int64_t kStartMinutes = 26297280;  // 2020-01-01 00:00

double season_of_day(int64_t day_index) {
    return std::sin(2.0 * M_PI * (static_cast<double>(day_index) - 80.0) / 365.25);
}

double leaf_index(double season) {
    const double s = 0.5 + 0.5 * season;
    return 0.15 + 0.85 * std::pow(s, 1.5);
}

double sat_vapor_hpa(double ta) { return 6.1078 * std::exp(17.27 * ta / (ta + 237.3)); }

int8_t draw_qc(Rng& rng) {
    const double u = rng.uniform01();
    if (u < 0.88) return 0;
    if (u < 0.95) return 1;
    if (u < 0.98) return 2;
    return 3;
}

}  // namespace

double synthetic_nee(const SyntheticSiteSpec& spec, double ta, double sw_in, double leaf) {
    return spec.reco0 * std::exp(spec.gamma * ta) -
           spec.alpha * leaf * sw_in / (spec.beta + sw_in);
}

SyntheticSite generate_synthetic_site(const SyntheticSiteSpec& spec) {
    spec.validate();
    SyntheticSite site;
    site.law = spec;
    site.meta.site_id = spec.site_id;
    site.meta.igbp = spec.igbp;
    site.meta.latitude = spec.latitude;
    site.meta.longitude = spec.longitude;

    Rng met_rng = Rng::derive(spec.seed, "synth/met/" + spec.site_id);
    Rng qc_rng = Rng::derive(spec.seed, "synth/qc/" + spec.site_id);
    Rng miss_rng = Rng::derive(spec.seed, "synth/miss/" + spec.site_id);
    Rng img_rng = Rng::derive(spec.seed, "synth/img/" + spec.site_id);

    TimeTable& t = site.table;
    t.cadence_minutes = 60;
    const int64_t rows = static_cast<int64_t>(spec.n_days) * 24;
    for (int64_t r = 0; r < rows; ++r) t.start_minutes.push_back(kStartMinutes + r * 60);

    const auto catalog = default_catalog();
    std::vector<std::string> codes;
    for (const auto& v : catalog.vars)
        if (v.kind != VarKind::SpectralBand) codes.push_back(v.code);
    for (const auto& tgt : target_codes()) codes.push_back(tgt);
    for (const auto& c : codes) t.add_column(c);
    for (const auto& c : codes) {
        const int64_t ci = catalog.index_of(c);
        const bool needs_qc = ci < 0 || !catalog.at(ci).qc_exempt;  // targets carry QC too
        if (needs_qc) t.qc[c].assign(static_cast<size_t>(rows), 0);
    }

    const double a = spec.seasonality;
    double ar_ta = 0.0, ar_rh = 0.0, ar_ws = 0.0;
    double wd = met_rng.uniform(0.0, 360.0);

    auto put = [&](const std::string& code, int64_t r, double v) {
        auto& col = t.cols[code];
        if (miss_rng.uniform01() < spec.missing_rate) return;  // injected gap
        col.values[static_cast<size_t>(r)] = v;
        col.present[static_cast<size_t>(r)] = 1;
        auto qit = t.qc.find(code);
        if (qit != t.qc.end()) qit->second[static_cast<size_t>(r)] = draw_qc(qc_rng);
    };

    std::vector<double> daily_mean_ta(static_cast<size_t>(spec.n_days), 0.0);

    for (int64_t r = 0; r < rows; ++r) {
        const int64_t day = r / 24;
        const int64_t hour = r % 24;
        const double season = season_of_day(day);
        const double leaf = leaf_index(a * season);
        const double h_mid = static_cast<double>(hour) + 0.5;

        const double sunrise = 6.0 - 2.0 * a * season;
        const double sunset = 18.0 + 2.0 * a * season;
        const double daylen = sunset - sunrise;
        double sw_in = 0.0;
        if (h_mid > sunrise && h_mid < sunset) {
            const double s0 = std::max(120.0, 750.0 * (1.0 + 0.6 * a * season));
            sw_in = s0 * std::sin(M_PI * (h_mid - sunrise) / daylen);
        }

        ar_ta = 0.95 * ar_ta + spec.noise * 0.35 * met_rng.normal();
        const double t_daily = 7.0 + 18.0 * a * season;
        const double ta = t_daily + 4.5 * std::cos(2.0 * M_PI * (h_mid - 14.5) / 24.0) + ar_ta;
        daily_mean_ta[static_cast<size_t>(day)] += ta / 24.0;

        ar_rh = 0.9 * ar_rh + spec.noise * 1.2 * met_rng.normal();
        const double rh = std::min(100.0, std::max(15.0, 75.0 - 1.1 * (ta - t_daily) -
                                                              8.0 * a * season + ar_rh));
        const double vpd = std::max(0.0, sat_vapor_hpa(ta) * (1.0 - rh / 100.0));

        ar_ws = 0.85 * ar_ws + spec.noise * 0.5 * met_rng.normal();
        const double ws = std::max(0.2, 2.2 + ar_ws);
        const double ustar = 0.08 + 0.055 * ws + spec.noise * 0.01 * met_rng.normal();
        wd += 25.0 * met_rng.normal();
        wd -= 360.0 * std::floor(wd / 360.0);

        const double albedo = 0.14 + 0.45 * (a * season < -0.55 ? 1.0 : 0.0);
        const double sw_out = sw_in * albedo;
        const double lw_in = 282.0 + 2.2 * ta + spec.noise * 2.0 * met_rng.normal();
        const double lw_out = 316.0 + 3.1 * ta;
        const double netrad = sw_in - sw_out + lw_in - lw_out;

        const double gpp = spec.alpha * leaf * sw_in / (spec.beta + sw_in);
        const double reco = spec.reco0 * std::exp(spec.gamma * ta);
        const double nee = reco - gpp + spec.noise * met_rng.normal();

        put("TA_F", r, ta);
        put("PA_F", r, 98.4 + 0.25 * met_rng.normal() * spec.noise);
        put("P_F", r, met_rng.uniform01() < 0.04 ? -1.2 * std::log(1.0 - met_rng.uniform01()) : 0.0);
        put("RH", r, rh);
        put("VPD_F", r, vpd);
        put("WS_F", r, ws);
        put("USTAR", r, ustar);
        put("WD", r, wd);
        put("NETRAD", r, netrad);
        put("SW_IN_F", r, sw_in);
        put("SW_OUT", r, sw_out + spec.noise * 1.5 * met_rng.normal());
        put("SW_DIF", r, 0.32 * sw_in + spec.noise * 2.0 * met_rng.normal());
        put("LW_IN_F", r, lw_in);
        put("LW_OUT", r, lw_out + spec.noise * 1.5 * met_rng.normal());
        put("PPFD_IN", r, 2.02 * sw_in + spec.noise * 4.0 * met_rng.normal());
        put("PPFD_OUT", r, 0.12 * 2.02 * sw_in + spec.noise * 1.0 * met_rng.normal());
        put("PPFD_DIF", r, 0.35 * 2.02 * sw_in + spec.noise * 2.0 * met_rng.normal());
        put("CO2_F_MDS", r, 412.0 - 8.0 * season + 4.0 * std::cos(2.0 * M_PI * (h_mid - 5.0) / 24.0) +
                                spec.noise * 0.8 * met_rng.normal());
        put("G_F_MDS", r, 0.08 * netrad + spec.noise * 1.0 * met_rng.normal());
        put("LE_F_MDS", r, std::max(0.0, 0.45 * netrad * leaf) + spec.noise * 3.0 * met_rng.normal());
        put("H_F_MDS", r, 0.32 * netrad + spec.noise * 3.0 * met_rng.normal());
        put("NEE_VUT_REF", r, nee);
        put("GPP_DT_VUT_REF", r, gpp + spec.noise * 0.3 * met_rng.normal());
        put("GPP_NT_VUT_REF", r, gpp + spec.noise * 0.3 * met_rng.normal());
        put("RECO_DT_VUT_REF", r, reco + spec.noise * 0.2 * met_rng.normal());
        put("RECO_NT_VUT_REF", r, reco + spec.noise * 0.2 * met_rng.normal());
    }

    // daily imagery: smooth seasonal reflectances, an NDVI-like band carrying
    // the leaf index, water fraction, and a snow flag
    const int64_t day0 = epoch_day(kStartMinutes);
    const size_t n_px = static_cast<size_t>(kBandChannels * kBandEdge * kBandEdge);
    for (int64_t d = 0; d < spec.n_days; ++d) {
        if (img_rng.uniform01() < spec.image_missing_rate) continue;
        DayImage img;
        img.epoch_day = day0 + d;
        img.pixels.assign(n_px, 0.0f);
        img.present.assign(n_px, 0);
        const double season = season_of_day(d);
        const double leaf = leaf_index(a * season);
        const double snow = daily_mean_ta[static_cast<size_t>(d)] < -1.0 ? 1.0 : 0.0;
        const double base[kBandChannels] = {
            0.045 + 0.02 * leaf,  0.16 + 0.60 * leaf, 0.03 + 0.015 * leaf, 0.05 + 0.03 * leaf,
            0.28 + 0.10 * leaf,   0.22 - 0.05 * leaf, 0.12 - 0.03 * leaf,  0.02,
            snow};
        for (int64_t c = 0; c < kBandChannels; ++c)
            for (int64_t p = 0; p < kBandEdge * kBandEdge; ++p) {
                const size_t off = static_cast<size_t>(c * kBandEdge * kBandEdge + p);
                if (img_rng.uniform01() < spec.pixel_missing_rate) continue;
                img.pixels[off] = static_cast<float>(base[c] + 0.015 * img_rng.normal());
                img.present[off] = 1;
            }
        site.imagery.days.push_back(std::move(img));
    }
    site.imagery.site_id = spec.site_id;
    return site;
}

void write_law_file(const std::string& path, const SyntheticSiteSpec& spec) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "law_version=1\n";
    out << "seed=" << spec.seed << "\n";
    out << "site_id=" << spec.site_id << "\n";
    out << "igbp=" << spec.igbp << "\n";
    out << "n_days=" << spec.n_days << "\n";
    char buf[64];
    auto kv = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << k << "=" << buf << "\n";
    };
    kv("latitude", spec.latitude);
    kv("longitude", spec.longitude);
    kv("seasonality", spec.seasonality);
    kv("noise", spec.noise);
    kv("missing_rate", spec.missing_rate);
    kv("pixel_missing_rate", spec.pixel_missing_rate);
    kv("image_missing_rate", spec.image_missing_rate);
    kv("reco0", spec.reco0);
    kv("gamma", spec.gamma);
    kv("alpha", spec.alpha);
    kv("beta", spec.beta);
}

SyntheticSiteSpec read_law_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SyntheticSiteSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "law_version") {
            if (val != "1") throw FormatError(path + ": unsupported law file version");
        } else if (key == "seed") {
            spec.seed = std::stoull(val);
        } else if (key == "site_id") {
            spec.site_id = val;
        } else if (key == "igbp") {
            spec.igbp = val;
        } else if (key == "n_days") {
            spec.n_days = std::stoi(val);
        } else if (key == "latitude") {
            spec.latitude = std::stod(val);
        } else if (key == "longitude") {
            spec.longitude = std::stod(val);
        } else if (key == "seasonality") {
            spec.seasonality = std::stod(val);
        } else if (key == "noise") {
            spec.noise = std::stod(val);
        } else if (key == "missing_rate") {
            spec.missing_rate = std::stod(val);
        } else if (key == "pixel_missing_rate") {
            spec.pixel_missing_rate = std::stod(val);
        } else if (key == "image_missing_rate") {
            spec.image_missing_rate = std::stod(val);
        } else if (key == "reco0") {
            spec.reco0 = std::stod(val);
        } else if (key == "gamma") {
            spec.gamma = std::stod(val);
        } else if (key == "alpha") {
            spec.alpha = std::stod(val);
        } else if (key == "beta") {
            spec.beta = std::stod(val);
        } else {
            throw FormatError(path + ": unknown key " + key);
        }
    }
    return spec;
}

}  // namespace ecp
