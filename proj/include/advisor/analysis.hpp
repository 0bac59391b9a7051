#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace advisor {

struct AutocorrSeries {
    std::vector<int> lags;        // 0..max_lag
    std::vector<double> values;   // values[0] == 1
    double conf_bound = 0.0;      // 1.96 / sqrt(n)
};

struct WhitenessResult {
    double fraction_inside = 0.0;  // share of lags 1..max_lag inside the band
    int exceedances = 0;
    double q_statistic = 0.0;      // Ljung-Box
    double p_value = 0.0;
    bool pass = false;             // p_value >= 1 - confidence
};

[[nodiscard]] double rmse(std::span<const double> pred, std::span<const double> actual);

// 1 - SSE/SST; throws ZeroVariance when actual is constant.
[[nodiscard]] double r_squared(std::span<const double> pred, std::span<const double> actual);

// Biased, mean-removed sample autocorrelation.
[[nodiscard]] AutocorrSeries autocorrelation(std::span<const double> residuals, int max_lag);

// Ljung-Box portmanteau test over lags 1..max_lag; band statistics reported alongside.
[[nodiscard]] WhitenessResult whiteness_test(std::span<const double> residuals, int max_lag = 20,
                                             double confidence = 0.95);

// Percent reduction of the generalized RMSE relative to the two-point RMSE.
[[nodiscard]] double rmse_decrease(double two_point_rmse, double generalized_rmse);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
};

[[nodiscard]] MeanStd mean_std(std::span<const double> values);

struct ModelMetricsRow {
    std::string driver_id;
    std::string model;
    double rmse = 0.0;
    double r2 = 0.0;
    double rmse_dec = 0.0;  // percent; only meaningful on the generalized row
};

struct LateralSummaryRow {
    std::string group;
    int runs = 0;
    double mean = 0.0;
    double std = 0.0;
};

void write_model_metrics_csv(const std::filesystem::path& path, const std::vector<ModelMetricsRow>& rows);
void write_lateral_summary_csv(const std::filesystem::path& path, const std::vector<LateralSummaryRow>& rows);
void write_autocorrelation_csv(const std::filesystem::path& path, const AutocorrSeries& acf);

}  // namespace advisor
