#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecoperceiver/errors.hpp"

namespace ecp {

enum class VarKind { Acyclic, Cyclic, SpectralBand };

// How a variable aggregates when two half-hours collapse into one hour.
enum class AggKind { Mean, Sum, CircularMean };

struct VarDesc {
    std::string code;
    VarKind kind = VarKind::Acyclic;
    AggKind agg = AggKind::Mean;
    bool qc_exempt = false;
    // Physical period for cyclic variables; the manifest pins min/max to it.
    double cycle_min = 0.0;
    double cycle_max = 0.0;
    // Canonical unit; releases carrying an explicit unit line must agree.
    std::string unit;
};

// Ordered variable inventory: tabular predictors first, then spectral bands.
// The ordering is frozen per model (embedding indices key into it).
struct VariableCatalog {
    std::vector<VarDesc> vars;

    int64_t total_count() const { return static_cast<int64_t>(vars.size()); }
    int64_t tabular_count() const;
    int64_t band_count() const { return total_count() - tabular_count(); }

    const VarDesc& at(int64_t index) const;
    // -1 when the code is not in the catalog.
    int64_t index_of(const std::string& code) const;
    bool contains(const std::string& code) const { return index_of(code) >= 0; }

    // Drops the spectral bands (the use_images=false ablation).
    VariableCatalog tabular_only() const;
};

// The 21 hourly meteorological predictors plus the 9 spectral bands
// (7 reflectance bands, then water flag, then snow flag).
VariableCatalog default_catalog();

// Pixels per band token: 8x8 site-centered image.
inline constexpr int64_t kBandPixels = 64;
inline constexpr int64_t kBandEdge = 8;
inline constexpr int64_t kBandChannels = 9;

// Flux columns usable as the prediction target.
const std::vector<std::string>& target_codes();
bool is_target_code(const std::string& code);

}  // namespace ecp
