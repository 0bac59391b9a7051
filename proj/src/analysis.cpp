#include "advisor/analysis.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <fstream>
#include <numeric>

#include "advisor/errors.hpp"

namespace advisor {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw InputError("series lengths differ");
    if (pred.empty()) throw InputError("series must be non-empty");
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out.precision(10);
    return out;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sse += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return std::sqrt(sse / static_cast<double>(pred.size()));
}

double r_squared(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sse += (pred[i] - actual[i]) * (pred[i] - actual[i]);
        sst += (actual[i] - mean) * (actual[i] - mean);
    }
    if (!(sst > 0.0)) throw ZeroVariance("r_squared: actual series has zero variance");
    return 1.0 - sse / sst;
}

AutocorrSeries autocorrelation(std::span<const double> r, int max_lag) {
    if (max_lag < 1) throw InputError("autocorrelation: max_lag must be at least 1");
    const std::size_t n = r.size();
    if (n <= static_cast<std::size_t>(max_lag)) throw InputError("autocorrelation: series shorter than max_lag");
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = r[i] - mean;
    const double c0 = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    if (!(c0 > 0.0)) throw ZeroVariance("autocorrelation: series has zero variance");

    AutocorrSeries out;
    out.conf_bound = 1.96 / std::sqrt(static_cast<double>(n));
    out.lags.resize(static_cast<std::size_t>(max_lag) + 1);
    out.values.resize(out.lags.size());
    out.lags[0] = 0;
    out.values[0] = 1.0;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        const double c = std::inner_product(x.begin(), x.end() - static_cast<std::ptrdiff_t>(l), x.begin() + static_cast<std::ptrdiff_t>(l), 0.0);
        out.lags[l] = lag;
        out.values[l] = c / c0;
    }
    return out;
}

WhitenessResult whiteness_test(std::span<const double> r, int max_lag, double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw InputError("whiteness_test: confidence must lie in (0,1)");
    const AutocorrSeries acf = autocorrelation(r, max_lag);
    const double n = static_cast<double>(r.size());
    WhitenessResult out;
    double q = 0.0;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const double rho = acf.values[static_cast<std::size_t>(lag)];
        if (std::abs(rho) > acf.conf_bound) ++out.exceedances;
        q += rho * rho / (n - lag);
    }
    out.q_statistic = n * (n + 2.0) * q;
    out.fraction_inside = 1.0 - static_cast<double>(out.exceedances) / max_lag;
    const boost::math::chi_squared chi2(static_cast<double>(max_lag));
    out.p_value = boost::math::cdf(boost::math::complement(chi2, out.q_statistic));
    out.pass = out.p_value >= 1.0 - confidence;
    return out;
}

double rmse_decrease(double two_point_rmse, double generalized_rmse) {
    if (!(two_point_rmse > 0.0)) throw InputError("rmse_decrease: two-point rmse must be positive");
    return 100.0 * (1.0 - generalized_rmse / two_point_rmse);
}

MeanStd mean_std(std::span<const double> v) {
    if (v.empty()) throw InputError("mean_std: empty input");
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

void write_model_metrics_csv(const std::filesystem::path& path, const std::vector<ModelMetricsRow>& rows) {
    auto out = open_csv(path);
    out << "driver_id,model,rmse,r2,rmse_dec\n";
    for (const auto& r : rows) {
        out << r.driver_id << ',' << r.model << ',' << r.rmse << ',' << r.r2 << ',';
        if (r.model == "generalized") out << r.rmse_dec;
        out << '\n';
    }
}

void write_lateral_summary_csv(const std::filesystem::path& path, const std::vector<LateralSummaryRow>& rows) {
    auto out = open_csv(path);
    out << "group,runs,mean,std\n";
    for (const auto& r : rows) out << r.group << ',' << r.runs << ',' << r.mean << ',' << r.std << '\n';
}

void write_autocorrelation_csv(const std::filesystem::path& path, const AutocorrSeries& acf) {
    auto out = open_csv(path);
    out << "lag,acf,lower,upper\n";
    for (std::size_t i = 0; i < acf.lags.size(); ++i)
        out << acf.lags[i] << ',' << acf.values[i] << ',' << -acf.conf_bound << ',' << acf.conf_bound << '\n';
}

}  // namespace advisor
