#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecoperceiver/encoding.hpp"
#include "ecoperceiver/windows.hpp"

namespace ecp {

// Closed-form ridge regression over flattened final-timestep features:
// the tabular values (train-mean-imputed where masked) followed by one
// mean-pixel value per band. Deterministic; no rng anywhere.
struct LinearBaseline {
    int64_t v_tab = 0;
    int64_t v_band = 0;
    double lambda = 0.0;
    std::vector<double> weights;        // v_tab + v_band
    double intercept = 0.0;
    std::vector<double> feature_means;  // imputation values from training

    int64_t n_features() const { return v_tab + v_band; }
    std::vector<double> features(const ObservationWindow& w) const;
    double predict(const ObservationWindow& w) const;
};

// Least squares with ridge damping lambda on centered features (the
// intercept is not penalized, so lambda -> inf drives predictions to the
// training mean). Rank deficiency at lambda=0 is an error suggesting
// lambda > 0.
LinearBaseline fit_linear_baseline(const std::vector<ObservationWindow>& windows, double lambda);
LinearBaseline fit_linear_baseline(const WindowDataset& train, double lambda);

void write_baseline(const std::string& path, const LinearBaseline& b);
LinearBaseline read_baseline(const std::string& path);

}  // namespace ecp
