#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/model.hpp"
#include "ecoperceiver/synth.hpp"
#include "ecoperceiver/trainer.hpp"

namespace ecp {

// Schema-driven key=value configuration. Every key has a documented default;
// unknown keys fail fast. Precedence: command-line override > config file >
// default.
struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

const std::vector<ConfigKey>& config_schema();

class RunConfig {
public:
    // All keys at their documented defaults.
    static RunConfig defaults();

    // UTF-8 key=value lines, '#' comments. Unknown keys are errors.
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // unknown key -> ConfigError
    void set_kv(const std::string& assignment);                  // "key=value"

    const std::string& get(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<uint64_t> get_seed_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    ModelConfig model_config() const;
    TrainConfig train_config(uint64_t seed) const;
    SyntheticSiteSpec synth_spec() const;  // per-corpus fields; site fields filled later

    // Effective configuration echoed into output directories.
    std::string to_text() const;

    // --help body: every key with its default and description.
    static std::string help_text();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace ecp
