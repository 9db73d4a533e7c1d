#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/imagery.hpp"
#include "ecoperceiver/table.hpp"

namespace ecp {

// Desk-scale stand-in for restricted tower data. The flux law keeps a real
// respiration/photosynthesis structure:
//   NEE = reco0 * exp(gamma * TA) - alpha * leaf * SW_IN / (beta + SW_IN) + noise
// with a seasonal leaf index that the NDVI-like image band also carries, so
// the exponential term defeats a linear fit and imagery carries real signal.
struct SyntheticSiteSpec {
    uint64_t seed = 0;
    std::string site_id = "SY-X01";
    std::string igbp = "ENF";
    double latitude = 55.0;
    double longitude = 15.0;
    int n_days = 365;
    double seasonality = 0.5;  // latitude-like seasonal amplitude in [0, 1]
    double noise = 0.6;        // flux/meteorology noise scale (0 = exact law)
    double missing_rate = 0.05;
    double pixel_missing_rate = 0.05;
    double image_missing_rate = 0.05;
    // flux law coefficients
    double reco0 = 1.2;
    double gamma = 0.095;
    double alpha = 18.0;
    double beta = 300.0;

    void validate() const {
        if (n_days < 1) throw ConfigError("synth: n_days must be >= 1");
        if (seasonality < 0.0 || seasonality > 1.0)
            throw ConfigError("synth: seasonality must lie in [0,1]");
        if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
        for (double r : {missing_rate, pixel_missing_rate, image_missing_rate})
            if (r < 0.0 || r >= 1.0) throw ConfigError("synth: missing rates must lie in [0,1)");
        if (site_id.empty() || igbp.empty()) throw ConfigError("synth: site_id and igbp required");
    }
};

struct SyntheticSite {
    SiteMeta meta;
    TimeTable table;  // hourly, physical units, QC flags populated
    ImageryStack imagery;
    SyntheticSiteSpec law;  // ground truth, persisted for oracle evaluation
};

// Pure function of the spec: identical specs generate identical sites.
SyntheticSite generate_synthetic_site(const SyntheticSiteSpec& spec);

// Respiration-minus-photosynthesis law value for oracle checks.
double synthetic_nee(const SyntheticSiteSpec& spec, double ta, double sw_in, double leaf);

void write_law_file(const std::string& path, const SyntheticSiteSpec& spec);
SyntheticSiteSpec read_law_file(const std::string& path);

}  // namespace ecp
