#include "advisor/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "advisor/errors.hpp"
#include "advisor/io.hpp"

namespace advisor {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

}  // namespace

void TrackSpec::validate() const {
    if (!(length > 0.0)) throw InputError("track: length must be positive");
    if (!(lane_width > 0.0)) throw InputError("track: lane_width must be positive");
    if (kind == Kind::curved) {
        if (!(amplitude >= 0.0) || !(wavelength > 0.0)) throw InputError("track: invalid curvature profile");
        const double k = 2.0 * std::numbers::pi / wavelength;
        if (amplitude * k * k > 0.1) throw InputError("track: peak curvature above 0.1 1/m is not drivable");
    }
}

TrackSpec TrackSpec::curved() {
    TrackSpec s;
    s.kind = Kind::curved;
    return s;
}

Track::Track(TrackSpec spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind == TrackSpec::Kind::curved) {
        amp_ = spec_.amplitude;
        wavenumber_ = 2.0 * std::numbers::pi / spec_.wavelength;
    }
}

double Track::center(double x) const { return amp_ * std::sin(wavenumber_ * x); }

double Track::heading(double x) const { return std::atan(amp_ * wavenumber_ * std::cos(wavenumber_ * x)); }

Track build_track(const TrackSpec& spec) { return Track(spec); }

TrackAngles track_angles(const ContinuousVehicleState& s, const Track& track, const VehicleParams& params) {
    const double ln = params.near_dist;
    const double lf = params.far_dist;
    TrackAngles a;
    a.phi = normalize_angle(s.theta - std::atan2(track.center(s.x + ln) - s.y, ln));
    a.omega = normalize_angle(s.theta - std::atan2(track.center(s.x + lf) - s.y, lf));
    a.xi3 = s.v * std::sin(s.theta - track.heading(s.x));
    return a;
}

double SpeedProfile::target(double t, double duration) const {
    if (kind == Kind::constant || duration <= 0.0) return v0;
    return v0 + (v1 - v0) * std::clamp(t / duration, 0.0, 1.0);
}

void ScenarioConfig::validate() const {
    track.validate();
    vehicle.validate();
    noise.validate();
    driver.params.validate();
    if (!(duration > 0.0)) throw InputError("scenario: duration must be positive");
    if (!(initial.v >= vehicle.v_min_invert)) throw InputError("scenario: initial speed below v_min_invert");
    if (!std::isfinite(initial.y) || !std::isfinite(true_bias)) throw InputError("scenario: non-finite initial state");
    if (hypotheses.empty()) throw InputError("scenario: need at least one bias hypothesis");
    if (!(driver.steer_sigma >= 0.0) || !(driver.accel_sigma >= 0.0))
        throw InputError("scenario: driver noise must be non-negative");
    if (!(disturbance.yaw_rate_sigma >= 0.0) || !(disturbance.lateral_slip_sigma >= 0.0))
        throw InputError("scenario: disturbance std devs must be non-negative");
    if (!(estimator.internal_var > 0.0)) throw InputError("scenario: estimator internal_var must be positive");
}

std::size_t ScenarioConfig::steps() const {
    return static_cast<std::size_t>(std::llround(duration / vehicle.ts));
}

SteeringSeries steering_series(const TrajectoryLog& log, const Track& track, const VehicleParams& params) {
    SteeringSeries s;
    for (auto* v : {&s.delta, &s.phi, &s.omega, &s.xi3}) v->reserve(log.size());
    for (const auto& row : log) {
        const TrackAngles a = track_angles(row.truth, track, params);
        s.delta.push_back(row.cmd.delta);
        s.phi.push_back(a.phi);
        s.omega.push_back(a.omega);
        s.xi3.push_back(a.xi3);
    }
    return s;
}

PlantSimulator::PlantSimulator(const ScenarioConfig& cfg) : cfg_(cfg), track_(cfg.track), rng_(cfg.seed) {
    cfg_.validate();
    state_ = {0.0, track_.center(0.0) + cfg_.initial.y, cfg_.initial.v, track_.heading(0.0)};
}

double PlantSimulator::time() const { return static_cast<double>(k_) * cfg_.vehicle.ts; }

TrackAngles PlantSimulator::angles() const { return track_angles(state_, track_, cfg_.vehicle); }

TrajectoryRow PlantSimulator::step(const ControlCommand& cmd) {
    const VehicleParams& vp = cfg_.vehicle;
    TrajectoryRow row;
    row.t = time();
    row.truth = state_;
    row.cmd = cmd;
    row.input = accel_map(cmd, state_.v, state_.theta, vp);
    const Eigen::Vector3d sd = cfg_.noise.R.diagonal().cwiseSqrt();
    row.z.z1 = state_.v * std::cos(state_.theta) + sd(0) * normal_(rng_);
    row.z.z2 = state_.y + cfg_.true_bias + sd(1) * normal_(rng_);
    row.z.z3 = cmd.delta + sd(2) * normal_(rng_);

    PlantDisturbance w;
    w.yaw_rate = cfg_.disturbance.yaw_rate_sigma * normal_(rng_);
    w.lateral_slip = cfg_.disturbance.lateral_slip_sigma * normal_(rng_);
    state_ = advance(state_, cmd, vp, w);
    ++k_;
    if (!(state_.v >= vp.v_min_invert)) throw StallError("simulation: speed collapsed below v_min_invert");
    return row;
}

SyntheticDriver::SyntheticDriver(const DriverConfig& cfg, double duration, std::uint64_t seed)
    : cfg_(cfg),
      duration_(duration),
      hist_(static_cast<std::size_t>(std::max(cfg.params.orders().max(), 1))),
      rng_(make_rng(seed, 0x5eed)) {
    cfg_.params.validate();
}

ControlCommand SyntheticDriver::command(const ContinuousVehicleState& s, const TrackAngles& a, double t) {
    if (!(s.v > 0.0)) throw InputError("synthetic driver: speed must be positive");
    if (!primed_) {
        hist_.fill(0.0, a.phi, a.omega, a.xi3);
        primed_ = true;
    }
    hist_.push_inputs(a.phi, a.omega, a.xi3);
    ControlCommand cmd;
    cmd.delta = generalized_steer(hist_, cfg_.params) + cfg_.steer_sigma * normal_(rng_);
    cmd.accel = cfg_.speed_gain * (cfg_.speed.target(t, duration_) - s.v) + cfg_.accel_sigma * normal_(rng_);
    hist_.push_delta(cmd.delta);
    return cmd;
}

TrajectoryLog run_closed_loop(const ScenarioConfig& cfg) {
    PlantSimulator sim(cfg);
    const std::size_t n = cfg.steps();
    TrajectoryLog log;
    log.reserve(n);
    switch (cfg.driver.kind) {
        case DriverConfig::Kind::synthetic: {
            SyntheticDriver driver(cfg.driver, cfg.duration, cfg.seed);
            for (std::size_t k = 0; k < n; ++k)
                log.push_back(sim.step(driver.command(sim.state(), sim.angles(), sim.time())));
            break;
        }
        case DriverConfig::Kind::logged: {
            const TrajectoryLog source = read_trajectory_log(cfg.driver.log);
            for (std::size_t k = 0; k < n && k < source.size(); ++k) log.push_back(sim.step(source[k].cmd));
            break;
        }
        case DriverConfig::Kind::live:
            throw InputError("run_closed_loop: live drivers run through the bridge");
    }
    return log;
}

OnlineEstimator::OnlineEstimator(GeneralizedSteeringParams p, VehicleParams params, Track track,
                                 EstimationSettings settings)
    : p_(std::move(p)),
      params_(params),
      track_(std::move(track)),
      settings_(std::move(settings)),
      warmup_(0),
      rng_(settings_.seed) {
    check_realizable(p_, settings_.filter.mode);
    if (settings_.hypotheses.empty()) throw InputError("estimation: need at least one hypothesis");
    warmup_ = static_cast<std::size_t>(p_.orders().max());
}

std::optional<EstimationRow> OnlineEstimator::consume(const TrajectoryRow& row) {
    if (!filter_) {
        if (buffer_.size() < warmup_) {
            const TrackAngles a = track_angles(row.truth, track_, params_);
            buffer_.delta.push_back(row.cmd.delta);
            buffer_.phi.push_back(a.phi);
            buffer_.omega.push_back(a.omega);
            buffer_.xi3.push_back(a.xi3);
            return std::nullopt;
        }
        const Eigen::Vector3d internal = warmup_internal(p_, buffer_, warmup_);
        const InitialGuess guess{row.truth.v * std::cos(row.truth.theta), row.z.z2,
                                 row.truth.v * std::sin(row.truth.theta)};
        filter_.emplace(p_, params_, settings_.filter,
                        init_mixture(settings_.hypotheses, guess, internal, settings_.internal_var));
    }

    filter_->update(row.z);
    EstimationRow out;
    out.t = row.t;
    out.mean = filter_->aggregate();
    out.weights = filter_->mixture().weights();
    out.lat_err = out.mean(1) - row.truth.y;

    const double nu = settings_.filter.noise.nu_sigma;
    PlanarAcceleration u = row.input;
    u.xddot += nu * normal_(rng_);
    u.yddot += nu * normal_(rng_);
    filter_->propagate(u);
    return out;
}

EstimationSettings estimation_settings(const ScenarioConfig& cfg) {
    EstimationSettings s;
    s.filter = {cfg.noise, cfg.estimator.mode, cfg.estimator.use_human};
    s.hypotheses = cfg.hypotheses;
    s.internal_var = cfg.estimator.internal_var;
    s.seed = cfg.seed;
    return s;
}

GeneralizedSteeringParams estimation_model(const ScenarioConfig& cfg) {
    return cfg.estimator.model ? *cfg.estimator.model : cfg.driver.params;
}

EstimationLog run_estimation(const TrajectoryLog& log, const GeneralizedSteeringParams& p,
                             const VehicleParams& params, const EstimationSettings& settings, const Track& track) {
    if (log.empty()) throw InputError("run_estimation: empty log");
    OnlineEstimator est(p, params, track, settings);
    EstimationLog out;
    out.reserve(log.size());
    for (const auto& row : log)
        if (auto r = est.consume(row)) out.push_back(std::move(*r));
    if (out.empty()) throw InputError("run_estimation: log shorter than the warm-up window");
    return out;
}

LateralErrorSummary lateral_error_series(const EstimationLog& est, double steady_start) {
    if (est.empty()) throw InputError("lateral_error_series: empty estimation log");
    LateralErrorSummary s;
    double sq = 0.0, sum_abs = 0.0;
    std::vector<double> abs_ss;
    for (const auto& r : est) {
        s.t.push_back(r.t);
        s.err.push_back(r.lat_err);
        if (r.t >= steady_start - 1e-9) {
            sq += r.lat_err * r.lat_err;
            sum_abs += std::abs(r.lat_err);
            abs_ss.push_back(std::abs(r.lat_err));
        }
    }
    if (abs_ss.empty()) throw InputError("lateral_error_series: no samples after steady_start");
    const double n = static_cast<double>(abs_ss.size());
    s.ss_rmse = std::sqrt(sq / n);
    s.ss_mean_abs = sum_abs / n;
    double var = 0.0;
    for (double a : abs_ss) var += (a - s.ss_mean_abs) * (a - s.ss_mean_abs);
    s.ss_std_abs = abs_ss.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    s.final_weights = est.back().weights;
    return s;
}

}  // namespace advisor
