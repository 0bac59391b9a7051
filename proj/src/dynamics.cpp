#include "advisor/dynamics.hpp"

#include <cmath>
#include <numbers>

#include "advisor/errors.hpp"

namespace advisor {

namespace {

bool finite(const ContinuousVehicleState& s) {
    return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.v) && std::isfinite(s.theta);
}

ContinuousVehicleState add(const ContinuousVehicleState& s, const Vector4& d, double h) {
    return {s.x + h * d[0], s.y + h * d[1], s.v + h * d[2], s.theta + h * d[3]};
}

}  // namespace

void VehicleParams::validate() const {
    if (!(kappa > 0.0)) throw InputError("kappa must be positive");
    if (!(ts > 0.0)) throw InputError("ts must be positive");
    if (!(near_dist > 0.0)) throw InputError("near_dist must be positive");
    if (!(far_dist > near_dist)) throw InputError("far_dist must exceed near_dist");
    if (!(v_min_invert > 0.0)) throw InputError("v_min_invert must be positive");
    if (substeps < 1) throw InputError("substeps must be at least 1");
}

double normalize_angle(double angle) {
    constexpr double pi = std::numbers::pi;
    double a = std::remainder(angle, 2.0 * pi);
    if (a <= -pi) a += 2.0 * pi;
    return a;
}

Vector4 derivative(const ContinuousVehicleState& s, const ControlCommand& cmd, const VehicleParams& params,
                   const PlantDisturbance& w) {
    if (!finite(s) || !std::isfinite(cmd.delta) || !std::isfinite(cmd.accel) || !std::isfinite(w.yaw_rate) ||
        !std::isfinite(w.lateral_slip))
        throw InputError("derivative: non-finite input");
    if (std::abs(cmd.delta) >= std::numbers::pi / 2) throw InputError("derivative: |delta| must be below pi/2");
    const double c = std::cos(s.theta);
    const double sn = std::sin(s.theta);
    return {s.v * c - w.lateral_slip * sn, s.v * sn + w.lateral_slip * c, cmd.accel,
            s.v * params.kappa * std::tan(cmd.delta) + w.yaw_rate};
}

ContinuousVehicleState step(const ContinuousVehicleState& s, const ControlCommand& cmd, const VehicleParams& params,
                            double dt, const PlantDisturbance& w) {
    if (!(dt > 0.0) || dt > params.ts * (1.0 + 1e-12)) throw InputError("step: dt must lie in (0, ts]");
    const Vector4 k1 = derivative(s, cmd, params, w);
    const Vector4 k2 = derivative(add(s, k1, dt / 2), cmd, params, w);
    const Vector4 k3 = derivative(add(s, k2, dt / 2), cmd, params, w);
    const Vector4 k4 = derivative(add(s, k3, dt), cmd, params, w);
    const ContinuousVehicleState out = add(s, k1 + 2.0 * k2 + 2.0 * k3 + k4, dt / 6.0);
    if (!finite(out)) throw NumericalError("step: integration produced a non-finite state");
    return out;
}

ContinuousVehicleState advance(const ContinuousVehicleState& s, const ControlCommand& cmd, const VehicleParams& params,
                               const PlantDisturbance& w) {
    const double dt = params.ts / params.substeps;
    ContinuousVehicleState out = s;
    for (int i = 0; i < params.substeps; ++i) out = step(out, cmd, params, dt, w);
    out.theta = normalize_angle(out.theta);
    return out;
}

PlanarAcceleration accel_map(const ControlCommand& cmd, double v, double theta, const VehicleParams& params) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double lat = v * v * params.kappa * std::tan(cmd.delta);
    return {c * cmd.accel - s * lat, s * cmd.accel + c * lat};
}

ControlCommand accel_map_inverse(const PlanarAcceleration& pa, double v, double theta, const VehicleParams& params) {
    if (!(v >= params.v_min_invert))
        throw StallError("accel_map_inverse: speed below v_min_invert, vehicle only controllable when moving");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double a = c * pa.xddot + s * pa.yddot;
    const double tan_delta = (-s * pa.xddot + c * pa.yddot) / (v * v * params.kappa);
    return {std::atan(tan_delta), a};
}

DiscreteModel discrete_matrices(const VehicleParams& params) {
    if (!(params.ts > 0.0)) throw InputError("discrete_matrices: ts must be positive");
    const double ts = params.ts;
    DiscreteModel m;
    m.A.setIdentity();
    m.A(1, 2) = ts;
    m.B.setZero();
    m.B(0, 0) = ts;
    m.B(1, 1) = ts * ts / 2.0;
    m.B(2, 1) = ts;
    return m;
}

}  // namespace advisor
