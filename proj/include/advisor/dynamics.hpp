#pragma once

#include <Eigen/Dense>

namespace advisor {

struct VehicleParams {
    double kappa = 1.0 / 2.8;    // steering-to-yaw gain (1/m)
    double ts = 0.05;            // sampling time (s)
    double near_dist = 6.2;      // near-point preview (m)
    double far_dist = 20.0;      // far-point preview (m)
    double v_min_invert = 0.1;   // (m/s)
    int substeps = 10;           // RK4 steps per sample

    void validate() const;
};

struct ContinuousVehicleState {
    double x = 0.0;      // (m)
    double y = 0.0;      // (m)
    double v = 0.0;      // (m/s)
    double theta = 0.0;  // (rad)
};

struct ControlCommand {
    double delta = 0.0;  // (rad)
    double accel = 0.0;  // (m/s^2)
};

struct PlanarAcceleration {
    double xddot = 0.0;  // (m/s^2)
    double yddot = 0.0;  // (m/s^2)
};

// Unmodelled lateral motion injected into the truth plant, held over one sample.
struct PlantDisturbance {
    double yaw_rate = 0.0;      // (rad/s)
    double lateral_slip = 0.0;  // body-frame lateral velocity (m/s)
};

using Vector4 = Eigen::Vector4d;

struct DiscreteModel {
    Eigen::Matrix4d A;
    Eigen::Matrix<double, 4, 2> B;
};

// Wraps to (-pi, pi].
[[nodiscard]] double normalize_angle(double angle);

[[nodiscard]] Vector4 derivative(const ContinuousVehicleState& state, const ControlCommand& cmd,
                                 const VehicleParams& params, const PlantDisturbance& w = {});

// One RK4 step of size dt (0 < dt <= ts).
[[nodiscard]] ContinuousVehicleState step(const ContinuousVehicleState& state, const ControlCommand& cmd,
                                          const VehicleParams& params, double dt,
                                          const PlantDisturbance& w = {});

// Advances one sampling period with params.substeps RK4 steps and wraps theta.
[[nodiscard]] ContinuousVehicleState advance(const ContinuousVehicleState& state, const ControlCommand& cmd,
                                             const VehicleParams& params, const PlantDisturbance& w = {});

[[nodiscard]] PlanarAcceleration accel_map(const ControlCommand& cmd, double v, double theta,
                                           const VehicleParams& params);

// Throws StallError when v < params.v_min_invert.
[[nodiscard]] ControlCommand accel_map_inverse(const PlanarAcceleration& pa, double v, double theta,
                                               const VehicleParams& params);

[[nodiscard]] DiscreteModel discrete_matrices(const VehicleParams& params);

}  // namespace advisor
