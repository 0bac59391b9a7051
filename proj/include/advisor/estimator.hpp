#pragma once

#include <Eigen/Dense>
#include <vector>

#include "advisor/driver.hpp"
#include "advisor/dynamics.hpp"

namespace advisor {

// (xi1..xi4) = (x velocity, lateral position, lateral velocity, lane bias);
// (xi5, xi6, xi7) = observer-canonical states of the steering model.
using AugmentedState = Eigen::Matrix<double, 7, 1>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;

enum class JacobianMode { paper, exact };
enum class SensorRows { camera_speed_only, with_human };

struct NoiseConfig {
    Eigen::Matrix3d R;       // speed (m^2/s^2), camera (m^2), steering (rad^2)
    Matrix7 Q;
    double nu_sigma = 1e-3;  // std dev added to the planar acceleration inputs (m/s^2)

    [[nodiscard]] static NoiseConfig defaults();
    void validate() const;
};

struct Measurement {
    double z1 = 0.0;  // speed (m/s)
    double z2 = 0.0;  // biased lateral position (m)
    double z3 = 0.0;  // observed steering (rad)
};

struct GaussianComponent {
    AugmentedState mean = AugmentedState::Zero();
    Matrix7 cov = Matrix7::Identity();
    double weight = 1.0;
};

struct MixtureEstimate {
    std::vector<GaussianComponent> components;

    [[nodiscard]] AugmentedState aggregate_mean() const;
    [[nodiscard]] std::vector<double> weights() const;
};

struct SteeringFunctions {
    double g1 = 0.0;  // next xi5
    double g2 = 0.0;  // next xi6
    double g3 = 0.0;  // next xi7
};

struct InitialGuess {
    double xi1 = 15.0;
    double camera_y = -0.5;  // lateral position as reported by the camera
    double xi3 = 0.0;
};

// Largest model order the three internal states can realize.
inline constexpr int kMaxRealizationOrder = 3;

// Throws InputError unless the orders fit the 7-state realization (and, in paper
// mode, the (2,3,0,1) structure).
void check_realizable(const GeneralizedSteeringParams& p, JacobianMode mode = JacobianMode::exact);

[[nodiscard]] SteeringFunctions g_functions(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                            const VehicleParams& params);

// xi7 + b0 phi + c0 Omega + d0 xi3.
[[nodiscard]] double predicted_steering(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                        const VehicleParams& params);

// Noise-free, input-free transition F(xi).
[[nodiscard]] AugmentedState transition(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                        const VehicleParams& params);

[[nodiscard]] Eigen::VectorXd predicted_measurement(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                                    const VehicleParams& params,
                                                    SensorRows rows = SensorRows::with_human);

[[nodiscard]] Matrix7 state_jacobian(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                     const VehicleParams& params, JacobianMode mode);

[[nodiscard]] Eigen::MatrixXd measurement_jacobian(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                                   const VehicleParams& params, JacobianMode mode,
                                                   SensorRows rows = SensorRows::with_human);

[[nodiscard]] Eigen::Matrix<double, 7, 2> input_matrix(const VehicleParams& params);

[[nodiscard]] GaussianComponent propagate(const GaussianComponent& comp, const PlanarAcceleration& input,
                                          const GeneralizedSteeringParams& p, const VehicleParams& params,
                                          const NoiseConfig& noise, JacobianMode mode = JacobianMode::exact);

struct UpdateResult {
    GaussianComponent component;
    Eigen::VectorXd residual;
    Eigen::MatrixXd innovation_cov;
};

[[nodiscard]] UpdateResult update(const GaussianComponent& comp, const Measurement& meas,
                                  const GeneralizedSteeringParams& p, const VehicleParams& params,
                                  const NoiseConfig& noise, JacobianMode mode = JacobianMode::exact,
                                  SensorRows rows = SensorRows::with_human);

// Multivariate normal density of each residual, times the prior weight, floored and normalized.
[[nodiscard]] std::vector<double> update_weights(const std::vector<double>& weights,
                                                 const std::vector<Eigen::VectorXd>& residuals,
                                                 const std::vector<Eigen::MatrixXd>& innovation_covs);

[[nodiscard]] AugmentedState aggregate(const std::vector<GaussianComponent>& components);

// Linearized at (xi1, 0, ..., 0).
[[nodiscard]] int observability_rank(const GeneralizedSteeringParams& p, const VehicleParams& params,
                                     SensorRows rows, double xi1 = 15.0,
                                     JacobianMode mode = JacobianMode::exact);

[[nodiscard]] int controllability_rank(const GeneralizedSteeringParams& p, const VehicleParams& params,
                                       double xi1 = 15.0);

// Runs the realization over recorded samples, feeding back the recorded steering.
// Returns (xi5, xi6, xi7).
[[nodiscard]] Eigen::Vector3d warmup_internal(const GeneralizedSteeringParams& p, const SteeringSeries& series,
                                              std::size_t samples);

// One component per hypothesized lane offset h: xi2 = camera_y - h, xi4 = h.
[[nodiscard]] MixtureEstimate init_mixture(const std::vector<double>& hypotheses, const InitialGuess& guess,
                                           const Eigen::Vector3d& internal, double internal_var = 1.0);

struct FilterConfig {
    NoiseConfig noise = NoiseConfig::defaults();
    JacobianMode mode = JacobianMode::exact;
    bool use_human = true;
};

// Bank of EKFs with Bayesian weights. Single owner; advance with update() then propagate().
class GmmEkf {
public:
    GmmEkf(GeneralizedSteeringParams p, VehicleParams params, FilterConfig cfg, MixtureEstimate init);

    void update(const Measurement& z);
    void propagate(const PlanarAcceleration& input);

    [[nodiscard]] const MixtureEstimate& mixture() const { return mix_; }
    [[nodiscard]] AugmentedState aggregate() const { return mix_.aggregate_mean(); }

private:
    GeneralizedSteeringParams p_;
    VehicleParams params_;
    FilterConfig cfg_;
    MixtureEstimate mix_;
};

}  // namespace advisor
