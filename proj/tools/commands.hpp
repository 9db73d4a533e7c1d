#pragma once

#include <string>
#include <vector>

#include "ecoperceiver/config.hpp"

namespace ecptool {

void run_synth(const ecp::RunConfig& cfg, const std::string& out_dir);

void run_pipeline(const ecp::RunConfig& cfg, const std::string& in_dir, const std::string& out_dir,
                  const std::string& split_path);

void run_split(const ecp::RunConfig& cfg, const std::string& corpus_dir, uint64_t seed,
               const std::string& out_path);

void run_train(const ecp::RunConfig& cfg, const std::string& corpus_dir,
               const std::string& split_path, const std::string& out_dir);

void run_eval(const ecp::RunConfig& cfg, const std::string& corpus_dir,
              const std::string& split_path, const std::string& runs_dir,
              const std::string& out_dir, const std::string& compare_report);

void run_baseline(const ecp::RunConfig& cfg, const std::string& corpus_dir,
                  const std::string& split_path, const std::string& out_dir);

void run_ablate(const ecp::RunConfig& cfg, const std::string& corpus_dir,
                const std::string& split_path, const std::string& out_dir,
                const std::vector<std::string>& switches);

}  // namespace ecptool
