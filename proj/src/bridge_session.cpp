#include "advisor/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "advisor/errors.hpp"
#include "advisor/io.hpp"

namespace advisor::bridge {

namespace {

constexpr double kSteerLimit = std::numbers::pi / 2.0;

json telemetry(const TrajectoryRow& row, const MixtureEstimate& mix, const AugmentedState& mean, double lat_err,
               bool clamped) {
    json comp_y = json::array();
    for (const auto& c : mix.components) comp_y.push_back(c.mean(1));
    return json{{"type", "telemetry"},
                {"t", row.t},
                {"truth", {{"x", row.truth.x}, {"y", row.truth.y}, {"v", row.truth.v}, {"theta", row.truth.theta}}},
                {"camera_y", row.z.z2},
                {"estimate",
                 {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                  {"weights", mix.weights()},
                  {"component_y", comp_y}}},
                {"lat_err", lat_err},
                {"command", {{"steer", row.cmd.delta}, {"accel", row.cmd.accel}}},
                {"steer_clamped", clamped}};
}

double finite_field(const json& msg, const char* key) {
    if (!msg.contains(key) || !msg[key].is_number()) throw InputError(std::string("control: '") + key + "' must be a number");
    const double v = msg[key].get<double>();
    if (!std::isfinite(v)) throw InputError(std::string("control: '") + key + "' must be finite");
    return v;
}

}  // namespace

json error_message(const std::string& code, const std::string& message) {
    return json{{"type", "error"}, {"code", code}, {"message", message}};
}

Session::Session(std::optional<std::filesystem::path> record_dir) : record_dir_(std::move(record_dir)) {}

std::vector<json> Session::handle(const std::string& text) {
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::exception& e) {
        return {error_message("bad_json", e.what())};
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
        return {error_message("bad_message", "message must be an object with a string 'type'")};
    const std::string type = msg["type"].get<std::string>();
    try {
        if (type == "start") return start(msg);
        if (type == "control") {
            if (!running()) return {error_message("not_running", "control before start")};
            control(msg);
            return {};
        }
        if (type == "pause") {
            if (!running()) return {error_message("not_running", "pause before start")};
            paused_ = !paused_;
            return {};
        }
        if (type == "reset") {
            reset();
            return {};
        }
        return {error_message("unknown_type", "unknown message type '" + type + "'")};
    } catch (const InputError& e) {
        return {error_message("invalid", e.what())};
    } catch (const NumericalError& e) {
        reset();
        return {error_message("numerical", e.what())};
    }
}

std::vector<json> Session::start(const json& msg) {
    if (running()) return {error_message("already_running", "a session is already running; send reset first")};
    const json scenario = msg.contains("scenario") ? msg["scenario"] : json::object();
    if (!scenario.is_object()) return {error_message("invalid", "'scenario' must be an object")};
    ScenarioConfig cfg = scenario_from_json(scenario);
    cfg.driver.kind = DriverConfig::Kind::live;
    auto est = std::make_unique<OnlineEstimator>(estimation_model(cfg), cfg.vehicle, Track(cfg.track),
                                                 estimation_settings(cfg));
    auto plant = std::make_unique<PlantSimulator>(cfg);
    reset();
    cfg_ = std::move(cfg);
    plant_ = std::move(plant);
    estimator_ = std::move(est);
    ++sessions_;
    return {};
}

void Session::control(const json& msg) {
    const double steer = finite_field(msg, "steer");
    const double accel = finite_field(msg, "accel");
    // The plant rejects |delta| >= pi/2, so clamp just inside the limit.
    const double lim = std::nextafter(kSteerLimit, 0.0);
    clamped_ = std::abs(steer) > lim;
    held_ = {std::clamp(steer, -lim, lim), accel};
}

void Session::reset() {
    plant_.reset();
    estimator_.reset();
    held_ = {};
    clamped_ = false;
    paused_ = false;
    finished_ = false;
    log_.clear();
    est_.clear();
    recording_.reset();
}

std::vector<json> Session::tick() {
    if (!running() || paused_) return {};
    std::vector<json> out;
    try {
        const TrajectoryRow row = plant_->step(held_);
        log_.push_back(row);
        if (auto e = estimator_->consume(row)) {
            est_.push_back(*e);
            out.push_back(telemetry(row, estimator_->filter()->mixture(), e->mean, e->lat_err, clamped_));
        } else {
            // Warm-up: report the prior the filter will start from.
            const InitialGuess guess{row.truth.v * std::cos(row.truth.theta), row.z.z2,
                                     row.truth.v * std::sin(row.truth.theta)};
            const MixtureEstimate prior =
                init_mixture(cfg_.hypotheses, guess, Eigen::Vector3d::Zero(), cfg_.estimator.internal_var);
            const AugmentedState mean = prior.aggregate_mean();
            out.push_back(telemetry(row, prior, mean, mean(1) - row.truth.y, clamped_));
        }
    } catch (const std::exception& e) {
        // The run cannot continue (vehicle stalled or filter diverged); end it cleanly.
        out.push_back(error_message("numerical", e.what()));
        finished_ = true;
        return out;
    }
    if (log_.size() >= cfg_.steps()) {
        finished_ = true;
        record();
        json fin{{"type", "finished"}, {"rows", log_.size()}};
        if (recording_) fin["recording"] = recording_->string();
        out.push_back(std::move(fin));
    }
    return out;
}

void Session::record() {
    if (!record_dir_) return;
    const auto dir = *record_dir_ / ("session_" + std::to_string(cfg_.seed) + "_" + std::to_string(sessions_));
    std::filesystem::create_directories(dir);
    write_text_file(dir / "scenario.json", to_json(cfg_).dump(2) + "\n");
    write_trajectory_log(dir / "trajectory.jsonl", log_);
    write_estimation_log(dir / "estimation.jsonl", est_);
    recording_ = dir;
}

}  // namespace advisor::bridge
