#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecoperceiver/errors.hpp"

namespace ecp {

// Nash-Sutcliffe efficiency: 1 - sum((y-x)^2) / sum((y-ybar)^2). 1 is a
// perfect fit, 0 matches guessing the mean of the observations.
double nse(std::span<const double> pred, std::span<const double> obs);

double rmse(std::span<const double> pred, std::span<const double> obs);

struct TTest {
    double t = 0.0;
    double p = 0.0;  // two-sided
    int64_t df = 0;
};

// Paired t-test on a-b with n-1 degrees of freedom; sd uses the n-1
// denominator. Zero-variance differences raise DegenerateError.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

// Two-sided p for Student's t via the regularized incomplete beta function
// (continued fraction, absolute error < 1e-8).
double student_t_two_sided_p(double t, int64_t df);
double incomplete_beta(double a, double b, double x);

// --- evaluation reports -------------------------------------------------

// Pooled predictions of one trained artifact (one seed) on the test sites,
// grouped by IGBP class.
struct PredictionSet {
    int64_t seed = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_igbp;  // pred, obs
};

struct EvalEntry {
    std::string igbp;
    int64_t seed = 0;
    double nse = 0.0;
    double rmse = 0.0;
    int64_t n = 0;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    std::vector<std::string> warnings;  // excluded classes, with reasons

    std::vector<std::string> igbp_classes() const;
    std::vector<double> nse_per_seed(const std::string& igbp) const;
    double mean_nse(const std::string& igbp) const;
    double mean_rmse(const std::string& igbp) const;
};

// Per-(IGBP, seed) NSE/RMSE from pooled predictions; classes with zero test
// samples are excluded with a warning entry, never silently.
EvalReport evaluate(const std::vector<PredictionSet>& prediction_sets);

struct ComparisonRow {
    std::string igbp;
    double a_nse = 0.0, a_rmse = 0.0;
    double b_nse = 0.0, b_rmse = 0.0;
    bool has_test = false;  // needs >= 2 paired seeds
    TTest test;
};

// Pairs per-seed NSE values of two reports per IGBP class. A deterministic
// single-entry report (the linear baseline) broadcasts against the other
// side's seeds; a single seed on both sides leaves the test fields absent.
std::vector<ComparisonRow> compare_reports(const EvalReport& a, const EvalReport& b);

void write_report_csv(const std::string& path, const EvalReport& report);
EvalReport read_report_csv(const std::string& path);
void write_summary_csv(const std::string& path, const std::vector<ComparisonRow>& rows);

}  // namespace ecp
