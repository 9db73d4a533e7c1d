#include "ecoperceiver/catalog.hpp"

#include <algorithm>

namespace ecp {

int64_t VariableCatalog::tabular_count() const {
    int64_t n = 0;
    for (const auto& v : vars) {
        if (v.kind == VarKind::SpectralBand) break;
        ++n;
    }
    return n;
}

const VarDesc& VariableCatalog::at(int64_t index) const {
    if (index < 0 || index >= total_count())
        throw ContractError("catalog: variable index " + std::to_string(index) + " out of range [0," +
                            std::to_string(total_count()) + ")");
    return vars[static_cast<size_t>(index)];
}

int64_t VariableCatalog::index_of(const std::string& code) const {
    for (size_t i = 0; i < vars.size(); ++i)
        if (vars[i].code == code) return static_cast<int64_t>(i);
    return -1;
}

VariableCatalog VariableCatalog::tabular_only() const {
    VariableCatalog out;
    for (const auto& v : vars)
        if (v.kind != VarKind::SpectralBand) out.vars.push_back(v);
    return out;
}

VariableCatalog default_catalog() {
    VariableCatalog c;
    auto met = [&c](const std::string& code, bool qc_exempt, const std::string& unit,
                    AggKind agg = AggKind::Mean) {
        c.vars.push_back(VarDesc{code, VarKind::Acyclic, agg, qc_exempt, 0.0, 0.0, unit});
    };
    met("TA_F", false, "deg C");
    met("PA_F", false, "kPa");
    met("P_F", false, "mm", AggKind::Sum);  // precipitation accumulates
    met("RH", true, "%");
    met("VPD_F", false, "hPa");
    met("WS_F", false, "m s-1");
    met("USTAR", true, "m s-1");
    c.vars.push_back(
        VarDesc{"WD", VarKind::Cyclic, AggKind::CircularMean, true, 0.0, 360.0, "decimal degrees"});
    met("NETRAD", true, "W m-2");
    met("SW_IN_F", false, "W m-2");
    met("SW_OUT", true, "W m-2");
    met("SW_DIF", true, "W m-2");
    met("LW_IN_F", false, "W m-2");
    met("LW_OUT", true, "W m-2");
    met("PPFD_IN", true, "umol Photon m-2 s-1");
    met("PPFD_OUT", true, "umol Photon m-2 s-1");
    met("PPFD_DIF", true, "umol Photon m-2 s-1");
    met("CO2_F_MDS", false, "umol CO2 mol-1");
    met("G_F_MDS", false, "W m-2");
    met("LE_F_MDS", false, "W m-2");
    met("H_F_MDS", false, "W m-2");
    const char* bands[] = {"MCD_B1", "MCD_B2", "MCD_B3", "MCD_B4", "MCD_B5",
                           "MCD_B6", "MCD_B7", "MCD_WATER", "MCD_SNOW"};
    for (const char* b : bands)
        c.vars.push_back(VarDesc{b, VarKind::SpectralBand, AggKind::Mean, true, 0.0, 0.0, "reflectance"});
    return c;
}

const std::vector<std::string>& target_codes() {
    static const std::vector<std::string> codes = {
        "NEE_VUT_REF", "GPP_DT_VUT_REF", "GPP_NT_VUT_REF", "RECO_DT_VUT_REF", "RECO_NT_VUT_REF"};
    return codes;
}

bool is_target_code(const std::string& code) {
    const auto& t = target_codes();
    return std::find(t.begin(), t.end(), code) != t.end();
}

}  // namespace ecp
