#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "advisor/driver.hpp"
#include "advisor/dynamics.hpp"
#include "advisor/estimator.hpp"

namespace advisor {

struct TrackSpec {
    enum class Kind { straight, curved };
    Kind kind = Kind::straight;
    double length = 3000.0;     // (m)
    double lane_width = 3.6;    // (m)
    double amplitude = 20.0;    // centerline amplitude (m), curved only
    double wavelength = 400.0;  // (m), curved only

    void validate() const;
    [[nodiscard]] static TrackSpec curved();
};

// Centerline y = A sin(2 pi x / lambda); straight tracks have A = 0.
class Track {
public:
    explicit Track(TrackSpec spec = {});

    [[nodiscard]] double center(double x) const;
    [[nodiscard]] double heading(double x) const;
    [[nodiscard]] const TrackSpec& spec() const { return spec_; }

private:
    TrackSpec spec_;
    double amp_ = 0.0;
    double wavenumber_ = 0.0;
};

[[nodiscard]] Track build_track(const TrackSpec& spec);

// Lane-relative near/far angles and lateral velocity relative to the road.
struct TrackAngles {
    double phi = 0.0;
    double omega = 0.0;
    double xi3 = 0.0;
};

[[nodiscard]] TrackAngles track_angles(const ContinuousVehicleState& s, const Track& track,
                                       const VehicleParams& params);

struct SpeedProfile {
    enum class Kind { constant, sweep };
    Kind kind = Kind::constant;
    double v0 = 15.0;  // (m/s)
    double v1 = 45.0;  // sweep end speed (m/s)

    [[nodiscard]] double target(double t, double duration) const;
};

struct DriverConfig {
    enum class Kind { synthetic, logged, live };
    Kind kind = Kind::synthetic;
    GeneralizedSteeringParams params = GeneralizedSteeringParams::reference_driver();
    double steer_sigma = 1e-3;  // (rad)
    double accel_sigma = 2.0;   // (m/s^2)
    double speed_gain = 0.5;    // (1/s)
    SpeedProfile speed;
    std::filesystem::path log;  // command source for Kind::logged
};

struct DisturbanceConfig {
    double yaw_rate_sigma = 0.02;      // (rad/s)
    double lateral_slip_sigma = 0.05;  // (m/s)
};

struct EstimatorSettings {
    JacobianMode mode = JacobianMode::exact;
    bool use_human = true;
    double internal_var = 1.0;
    // Steering model used by live sessions; defaults to the driver's params.
    std::optional<GeneralizedSteeringParams> model;
};

struct InitialState {
    double v = 15.0;   // (m/s)
    double y = -0.5;   // offset from the centerline (m)
};

struct ScenarioConfig {
    TrackSpec track;
    InitialState initial;
    std::vector<double> hypotheses{0.0, -1.8};
    double true_bias = 0.0;
    double duration = 30.0;  // (s)
    std::uint64_t seed = 0;
    VehicleParams vehicle;
    NoiseConfig noise = NoiseConfig::defaults();
    DriverConfig driver;
    DisturbanceConfig disturbance;
    EstimatorSettings estimator;

    void validate() const;
    [[nodiscard]] std::size_t steps() const;
};

struct TrajectoryRow {
    double t = 0.0;
    ContinuousVehicleState truth;
    ControlCommand cmd;
    PlanarAcceleration input;
    Measurement z;
};

using TrajectoryLog = std::vector<TrajectoryRow>;

struct EstimationRow {
    double t = 0.0;
    AugmentedState mean = AugmentedState::Zero();
    std::vector<double> weights;
    double lat_err = 0.0;  // estimated minus true lateral position (m)
};

using EstimationLog = std::vector<EstimationRow>;

// Steering regression data from a log, with track-relative angles from the logged truth.
[[nodiscard]] SteeringSeries steering_series(const TrajectoryLog& log, const Track& track,
                                             const VehicleParams& params);

// Truth plant plus sensors. step() records the sample for the given command,
// then integrates one sampling period.
class PlantSimulator {
public:
    explicit PlantSimulator(const ScenarioConfig& cfg);

    TrajectoryRow step(const ControlCommand& cmd);

    [[nodiscard]] const ContinuousVehicleState& state() const { return state_; }
    [[nodiscard]] double time() const;
    [[nodiscard]] std::size_t index() const { return k_; }
    [[nodiscard]] TrackAngles angles() const;
    [[nodiscard]] const Track& track() const { return track_; }

private:
    ScenarioConfig cfg_;
    Track track_;
    ContinuousVehicleState state_;
    std::size_t k_ = 0;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Generalized steering law on track-relative angles plus Gaussian perturbations,
// with a proportional speed hold.
class SyntheticDriver {
public:
    SyntheticDriver(const DriverConfig& cfg, double duration, std::uint64_t seed);

    ControlCommand command(const ContinuousVehicleState& s, const TrackAngles& angles, double t);

private:
    DriverConfig cfg_;
    double duration_;
    SteeringHistory hist_;
    bool primed_ = false;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Deterministic in cfg.seed. Throws StallError if the speed collapses.
[[nodiscard]] TrajectoryLog run_closed_loop(const ScenarioConfig& cfg);

struct EstimationSettings {
    FilterConfig filter;
    std::vector<double> hypotheses{0.0, -1.8};
    double internal_var = 1.0;
    std::uint64_t seed = 0;  // input-noise stream
};

// Consumes log rows one at a time. The first max-order rows seed the internal
// steering states; estimation starts at the next row.
class OnlineEstimator {
public:
    OnlineEstimator(GeneralizedSteeringParams p, VehicleParams params, Track track, EstimationSettings settings);

    std::optional<EstimationRow> consume(const TrajectoryRow& row);

    [[nodiscard]] std::size_t warmup() const { return warmup_; }
    [[nodiscard]] const GmmEkf* filter() const { return filter_ ? &*filter_ : nullptr; }

private:
    GeneralizedSteeringParams p_;
    VehicleParams params_;
    Track track_;
    EstimationSettings settings_;
    std::size_t warmup_;
    SteeringSeries buffer_;
    std::optional<GmmEkf> filter_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Settings and steering model a scenario implies for estimation. Live sessions and
// offline replays both go through these.
[[nodiscard]] EstimationSettings estimation_settings(const ScenarioConfig& cfg);
[[nodiscard]] GeneralizedSteeringParams estimation_model(const ScenarioConfig& cfg);

[[nodiscard]] EstimationLog run_estimation(const TrajectoryLog& log, const GeneralizedSteeringParams& p,
                                           const VehicleParams& params, const EstimationSettings& settings,
                                           const Track& track = Track{});

struct LateralErrorSummary {
    std::vector<double> t;
    std::vector<double> err;
    double ss_rmse = 0.0;      // over t >= steady_start
    double ss_mean_abs = 0.0;
    double ss_std_abs = 0.0;
    std::vector<double> final_weights;
};

[[nodiscard]] LateralErrorSummary lateral_error_series(const EstimationLog& est, double steady_start = 5.0);

}  // namespace advisor
