#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/checkpoint.hpp"
#include "ecoperceiver/model.hpp"
#include "ecoperceiver/windows.hpp"

namespace ecp {

struct TrainConfig {
    double lr = 8e-5;
    int64_t batch_size = 256;  // desk default; the full-scale runs used 4096
    int warmup_epochs = 1;
    int total_epochs = 20;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    int patience = 5;  // early stop on validation loss
    int workers = 1;   // batch assembly threads

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (warmup_epochs < 0 || warmup_epochs >= total_epochs)
            throw ConfigError("train: need 0 <= warmup_epochs < total_epochs");
        if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
        if (patience < 1) throw ConfigError("train: patience must be >= 1");
    }
};

// Linear warm-up to lr over the warm-up steps, then cosine annealing to
// exactly zero at the final step.
double lr_schedule(int64_t step, int64_t steps_per_epoch, const TrainConfig& cfg);

// Decoupled-weight-decay adaptive-moment optimizer. Weight decay scales the
// parameters directly; the gradient path only feeds the moment estimates.
class AdamW {
public:
    AdamW(Model<float>::Params& params, const TrainConfig& cfg);

    void step(double lr);
    void zero_grad();

private:
    Model<float>::Params* params_;
    TrainConfig cfg_;
    std::map<std::string, std::vector<float>> m_;
    std::map<std::string, std::vector<float>> v_;
    int64_t t_ = 0;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;  // schedule value at the epoch's first optimizer step
    double wall_seconds = 0.0;
    uint64_t rng_fingerprint = 0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

void write_train_log(const std::string& path, const TrainLog& log);

struct TrainResult {
    Model<float> model;  // best-validation parameters
    TrainLog log;
    CheckpointInfo info;
};

// Seeded end-to-end training: per-epoch seeded shuffles, observational
// dropout draws and the parameter init all derive from cfg.seed, so a rerun
// reproduces the loss trace bit for bit (single-threaded).
TrainResult train(const ModelConfig& model_cfg, const VariableCatalog& full_catalog,
                  const WindowDataset& train_ds, const WindowDataset& val_ds, const TrainConfig& cfg);

}  // namespace ecp
