#include "ecoperceiver/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ecp {

double lr_schedule(int64_t step, int64_t steps_per_epoch, const TrainConfig& cfg) {
    if (step < 0) throw ContractError("lr_schedule: negative step");
    if (steps_per_epoch < 1) throw ContractError("lr_schedule: steps_per_epoch must be >= 1");
    const int64_t warm = static_cast<int64_t>(cfg.warmup_epochs) * steps_per_epoch;
    const int64_t total = static_cast<int64_t>(cfg.total_epochs) * steps_per_epoch;
    if (step < warm) return cfg.lr * static_cast<double>(step) / static_cast<double>(warm);
    if (step >= total) return 0.0;
    const double progress =
        static_cast<double>(step - warm) / static_cast<double>(total - warm);
    return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(Model<float>::Params& params, const TrainConfig& cfg) : params_(&params), cfg_(cfg) {
    cfg_.validate();
    for (const auto& [name, t] : params) {
        m_[name].assign(static_cast<size_t>(t.numel()), 0.0f);
        v_[name].assign(static_cast<size_t>(t.numel()), 0.0f);
    }
}

void AdamW::zero_grad() {
    for (auto& [name, t] : *params_) t.zero_grad();
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(cfg_.beta1);
    const float b2 = static_cast<float>(cfg_.beta2);
    for (auto& [name, t] : *params_) {
        float* p = t.data();
        const float* g = t.grad();
        float* m = m_[name].data();
        float* v = v_[name].data();
        const int64_t n = t.numel();
        const float decay = static_cast<float>(1.0 - lr * cfg_.weight_decay);
        for (int64_t i = 0; i < n; ++i) {
            if (std::isnan(g[i]))
                throw Error("optimizer: NaN gradient in parameter " + name + " at element " +
                            std::to_string(i));
            p[i] *= decay;
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const double mhat = static_cast<double>(m[i]) / bc1;
            const double vhat = static_cast<double>(v[i]) / bc2;
            p[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

void write_train_log(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,train_loss,val_loss,lr,wall_seconds,rng_fingerprint\n";
    char buf[40];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    for (const auto& e : log.epochs)
        out << e.epoch << "," << fmt(e.train_loss) << "," << fmt(e.val_loss) << "," << fmt(e.lr)
            << "," << fmt(e.wall_seconds) << "," << e.rng_fingerprint << "\n";
    out << "# best_epoch=" << log.best_epoch << "\n";
    if (!out) throw IoError("short write to " + path);
}

namespace {

uint64_t state_fingerprint(const Rng& rng) {
    uint64_t h = 1469598103934665603ull;
    for (uint64_t w : rng.state()) {
        h ^= w;
        h *= 1099511628211ull;
    }
    return h;
}

double eval_loss(const Model<float>& model, const WindowDataset& ds, int64_t batch_size,
                 int workers) {
    Tape<float> tape;
    tape.recording = false;
    double acc = 0.0;
    int64_t n = 0;
    for (const auto& refs : make_batches(ds, batch_size, 0, 0, false)) {
        auto batch = ds.gather(refs, workers);
        auto out = model.forward(tape, batch, Mode::Eval);
        for (int64_t i = 0; i < out.predictions.numel(); ++i) {
            const double d = static_cast<double>(out.predictions.data()[i]) - batch.targets[static_cast<size_t>(i)];
            acc += d * d;
            ++n;
        }
    }
    if (n == 0) throw ContractError("eval_loss: empty dataset");
    return acc / static_cast<double>(n);
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const VariableCatalog& full_catalog,
                  const WindowDataset& train_ds, const WindowDataset& val_ds,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_ds.size() == 0) throw ConfigError("train: empty training window set");
    if (val_ds.size() == 0) throw ConfigError("train: empty validation window set");

    Model<float> model(model_cfg, full_catalog, cfg.seed);
    AdamW opt(model.params(), cfg);
    Rng dropout_rng = Rng::derive(cfg.seed, "dropout");

    const int64_t steps_per_epoch =
        (train_ds.size() + cfg.batch_size - 1) / cfg.batch_size;

    TrainLog log;
    Model<float>::Params best_params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;
    int64_t global_step = 0;
    CheckpointInfo info;
    info.seed = cfg.seed;

    for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        int64_t epoch_samples = 0;
        double first_lr = 0.0;
        bool first = true;
        for (const auto& refs : make_batches(train_ds, cfg.batch_size, cfg.seed, epoch)) {
            auto batch = train_ds.gather(refs, cfg.workers);
            const double lr = lr_schedule(global_step, steps_per_epoch, cfg);
            if (first) {
                first_lr = lr;
                first = false;
            }
            Tape<float> tape;
            auto out = model.forward(tape, batch, Mode::Train, &dropout_rng);
            auto target = Tensor<float>::zeros({batch.batch});
            for (int64_t i = 0; i < batch.batch; ++i)
                target.data()[i] = static_cast<float>(batch.targets[static_cast<size_t>(i)]);
            auto loss = mse_loss(tape, out.predictions, target);
            opt.zero_grad();
            tape.backward(loss);
            opt.step(lr);
            epoch_loss += static_cast<double>(loss.item()) * static_cast<double>(batch.batch);
            epoch_samples += batch.batch;
            ++global_step;
        }

        EpochLog e;
        e.epoch = epoch;
        e.train_loss = epoch_loss / static_cast<double>(epoch_samples);
        e.val_loss = eval_loss(model, val_ds, cfg.batch_size, cfg.workers);
        e.lr = first_lr;
        e.rng_fingerprint = state_fingerprint(dropout_rng);
        e.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(e);

        if (e.val_loss < best_val) {
            best_val = e.val_loss;
            best_epoch = epoch;
            since_best = 0;
            best_params.clear();
            for (const auto& [name, t] : model.params()) {
                auto copy = Tensor<float>::from(t.shape(), t.values(), true);
                best_params.emplace(name, std::move(copy));
            }
            info.rng_state = dropout_rng.state();
            info.epoch = static_cast<uint32_t>(epoch);
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    log.best_epoch = best_epoch;
    log.best_val_loss = best_val;
    TrainResult result{Model<float>(model_cfg, model.catalog(), std::move(best_params)),
                       std::move(log), info};
    return result;
}

}  // namespace ecp
