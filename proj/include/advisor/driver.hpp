#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "advisor/dynamics.hpp"

namespace advisor {

struct VisualAngles {
    double phi = 0.0;    // near-point angle (rad)
    double omega = 0.0;  // far-point angle (rad)
};

struct TwoPointGains {
    double kn = 0.0;
    double kf = 0.0;
    double ki = 0.0;  // (1/s)
};

struct ModelOrders {
    int na = 0;
    int nb = 0;
    int nc = 0;
    int nd = 0;

    [[nodiscard]] int max() const;
    // Number of coefficients; b0, c0 and d0 are always present.
    [[nodiscard]] int count() const { return na + nb + nc + nd + 3; }
    void validate() const;
    friend bool operator==(const ModelOrders&, const ModelOrders&) = default;
};

// ARX steering law
//   delta(k) = sum a_i delta(k-i) + sum b_i phi(k-i) + sum c_i Omega(k-i) + sum d_i xi3(k-i)
// a holds a_1..a_na, b/c/d hold indices 0..n.
struct GeneralizedSteeringParams {
    std::vector<double> a;
    std::vector<double> b{0.0};
    std::vector<double> c{0.0};
    std::vector<double> d{0.0};

    [[nodiscard]] ModelOrders orders() const;
    void validate() const;

    // Nominal (2,3,0,1) coefficient set. Its closed loop with the kinematic plant is
    // unstable, so simulations drive the car with reference_driver().
    [[nodiscard]] static GeneralizedSteeringParams nominal();
    // Stable (2,3,0,1) synthetic driver used by default scenarios.
    [[nodiscard]] static GeneralizedSteeringParams reference_driver();
    // Two-point law rewritten as an order (1,1,1,0) ARX model.
    [[nodiscard]] static GeneralizedSteeringParams from_two_point(const TwoPointGains& g, double ts);
    // Flattened as (a, b, c, d).
    [[nodiscard]] std::vector<double> flatten() const;
    [[nodiscard]] static GeneralizedSteeringParams unflatten(const std::vector<double>& theta, const ModelOrders& o);
};

// Past steering plus current and past visual inputs. Lag 0 is the current sample.
class SteeringHistory {
public:
    explicit SteeringHistory(std::size_t depth);

    // Starts a new sample with its inputs.
    void push_inputs(double phi, double omega, double xi3);
    // Records the steering applied at the current sample.
    void push_delta(double delta);
    // Sets every stored lag to the given values.
    void fill(double delta, double phi, double omega, double xi3);

    [[nodiscard]] std::size_t depth() const { return depth_; }
    [[nodiscard]] double delta(std::size_t lag) const;  // lag >= 1
    [[nodiscard]] double phi(std::size_t lag) const;
    [[nodiscard]] double omega(std::size_t lag) const;
    [[nodiscard]] double xi3(std::size_t lag) const;

private:
    std::size_t depth_;
    std::deque<double> delta_, phi_, omega_, xi3_;
};

// Aligned per-sample regression data.
struct SteeringSeries {
    std::vector<double> delta;
    std::vector<double> phi;
    std::vector<double> omega;
    std::vector<double> xi3;

    [[nodiscard]] std::size_t size() const { return delta.size(); }
    void validate() const;
};

struct FitReport {
    std::string model;  // "generalized" or "two-point"
    GeneralizedSteeringParams params;
    std::optional<TwoPointGains> gains;
    double rmse = 0.0;  // one-step, in-sample (rad)
    double r2 = 0.0;
    std::vector<double> residuals;
};

// Throws InputError when xi1 <= 0.
[[nodiscard]] VisualAngles visual_angles(double xi1, double xi2, double xi3, const VehicleParams& params);

[[nodiscard]] double two_point_steer(const SteeringHistory& hist, const TwoPointGains& gains,
                                     const VehicleParams& params);

[[nodiscard]] double generalized_steer(const SteeringHistory& hist, const GeneralizedSteeringParams& p);

// Regresses delta(k) - delta(k-1) on (phi(k)+phi(k-1), Omega(k)+Omega(k-1), ts*phi(k)).
[[nodiscard]] FitReport fit_two_point(const SteeringSeries& series, const VehicleParams& params);

// Ordinary least squares on samples start..n-1 (start defaults to the max order).
[[nodiscard]] FitReport fit_generalized(const SteeringSeries& series, const ModelOrders& orders,
                                        std::optional<std::size_t> start = std::nullopt);

// Exhaustive BIC search over all orders up to max_orders, on a common sample window.
[[nodiscard]] ModelOrders select_order(const SteeringSeries& series, const ModelOrders& max_orders);

[[nodiscard]] double bic(double sse, std::size_t n, int p);

// Predicts delta(k) for k >= warmup. Free-run feeds back its own predictions; otherwise
// the recorded steering is used (one-step-ahead). Returns n - warmup values.
[[nodiscard]] std::vector<double> predict_steering(const GeneralizedSteeringParams& p, const SteeringSeries& series,
                                                   std::size_t warmup, bool free_run = true);

}  // namespace advisor
