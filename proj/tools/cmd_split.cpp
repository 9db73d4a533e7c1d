#include <cstdio>
#include <filesystem>

#include "cli_common.hpp"
#include "commands.hpp"

namespace ecptool {

void run_split(const ecp::RunConfig& cfg, const std::string& corpus_dir, uint64_t seed,
               const std::string& out_path) {
    (void)cfg;
    std::vector<ecp::SiteRef> sites;
    for (const auto& dir : list_site_dirs(corpus_dir)) {
        const auto meta = ecp::read_site_meta((std::filesystem::path(dir) / "meta.txt").string());
        sites.push_back(ecp::SiteRef{meta.site_id, meta.igbp});
    }
    const auto plan = ecp::stratified_split(sites, seed);
    const auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    ecp::write_split_plan(out_path, plan);
    std::fputs(format_split_table(plan).c_str(), stdout);
    std::printf("split: plan for %zu sites written to %s\n", sites.size(), out_path.c_str());
}

}  // namespace ecptool
