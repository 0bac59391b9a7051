#include "advisor/io.hpp"

#include <fstream>
#include <sstream>

#include "advisor/errors.hpp"

namespace advisor {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("field '") + key + "': " + e.what());
    }
}

const json& require_object(const json& j, const char* what) {
    if (!j.is_object()) throw InputError(std::string(what) + " must be a JSON object");
    return j;
}

double num(const json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
    const json& v = j.at(key);
    if (!v.is_number()) throw InputError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

std::vector<double> number_array(const json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
    const json& v = j.at(key);
    if (!v.is_array()) throw InputError(std::string("field '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw InputError(std::string("field '") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<json> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename Rows>
void write_lines(const std::filesystem::path& path, const Rows& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    for (const auto& r : rows) out << to_json(r).dump() << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

ordered_json to_json(const GeneralizedSteeringParams& p) {
    return ordered_json{{"a", p.a}, {"b", p.b}, {"c", p.c}, {"d", p.d}};
}

GeneralizedSteeringParams steering_params_from_json(const json& j) {
    require_object(j, "steering coefficients");
    GeneralizedSteeringParams p;
    p.a = j.contains("a") ? number_array(j, "a") : std::vector<double>{};
    p.b = number_array(j, "b");
    p.c = number_array(j, "c");
    p.d = number_array(j, "d");
    p.validate();
    return p;
}

ordered_json to_json(const FitReport& rep) {
    const ModelOrders o = rep.params.orders();
    ordered_json j;
    j["model"] = rep.model;
    j["orders"] = {o.na, o.nb, o.nc, o.nd};
    j["coefficients"] = to_json(rep.params);
    if (rep.gains) j["gains"] = {{"kn", rep.gains->kn}, {"kf", rep.gains->kf}, {"ki", rep.gains->ki}};
    j["rmse"] = rep.rmse;
    j["r2"] = rep.r2;
    return j;
}

FitReport fit_report_from_json(const json& j) {
    require_object(j, "fit report");
    FitReport rep;
    rep.model = get_or<std::string>(j, "model", "generalized");
    if (!j.contains("coefficients")) throw InputError("fit report: missing 'coefficients'");
    rep.params = steering_params_from_json(j.at("coefficients"));
    if (j.contains("orders")) {
        const std::vector<double> o = number_array(j, "orders");
        const ModelOrders got = rep.params.orders();
        if (o.size() != 4 || o[0] != got.na || o[1] != got.nb || o[2] != got.nc || o[3] != got.nd)
            throw InputError("fit report: 'orders' disagree with coefficient lengths");
    }
    if (j.contains("gains")) {
        const json& g = require_object(j.at("gains"), "gains");
        rep.gains = TwoPointGains{num(g, "kn"), num(g, "kf"), num(g, "ki")};
    }
    rep.rmse = get_or<double>(j, "rmse", 0.0);
    rep.r2 = get_or<double>(j, "r2", 0.0);
    return rep;
}

std::string jacobian_mode_name(JacobianMode mode) { return mode == JacobianMode::paper ? "paper" : "exact"; }

JacobianMode parse_jacobian_mode(const std::string& name) {
    if (name == "paper") return JacobianMode::paper;
    if (name == "exact") return JacobianMode::exact;
    throw InputError("jacobian mode must be 'paper' or 'exact'");
}

ordered_json to_json(const ScenarioConfig& c) {
    ordered_json j;
    j["track"] = {{"kind", c.track.kind == TrackSpec::Kind::curved ? "curved" : "straight"},
                  {"length", c.track.length},
                  {"lane_width", c.track.lane_width},
                  {"amplitude", c.track.amplitude},
                  {"wavelength", c.track.wavelength}};
    j["initial"] = {{"v", c.initial.v}, {"y", c.initial.y}};
    j["hypotheses"] = c.hypotheses;
    j["true_bias"] = c.true_bias;
    j["duration"] = c.duration;
    j["seed"] = c.seed;
    j["vehicle"] = {{"kappa", c.vehicle.kappa},         {"ts", c.vehicle.ts},
                    {"near_dist", c.vehicle.near_dist}, {"far_dist", c.vehicle.far_dist},
                    {"v_min_invert", c.vehicle.v_min_invert}, {"substeps", c.vehicle.substeps}};
    const Eigen::VectorXd r = c.noise.R.diagonal();
    const Eigen::VectorXd q = c.noise.Q.diagonal();
    j["noise"] = {{"R", std::vector<double>(r.data(), r.data() + r.size())},
                  {"Q", std::vector<double>(q.data(), q.data() + q.size())},
                  {"nu_sigma", c.noise.nu_sigma}};
    const char* kinds[] = {"synthetic", "logged", "live"};
    ordered_json d;
    d["kind"] = kinds[static_cast<int>(c.driver.kind)];
    d["params"] = to_json(c.driver.params);
    d["steer_sigma"] = c.driver.steer_sigma;
    d["accel_sigma"] = c.driver.accel_sigma;
    d["speed_gain"] = c.driver.speed_gain;
    d["speed"] = {{"profile", c.driver.speed.kind == SpeedProfile::Kind::sweep ? "sweep" : "constant"},
                  {"v0", c.driver.speed.v0},
                  {"v1", c.driver.speed.v1}};
    if (!c.driver.log.empty()) d["log"] = c.driver.log.string();
    j["driver"] = d;
    j["disturbance"] = {{"yaw_rate_sigma", c.disturbance.yaw_rate_sigma},
                        {"lateral_slip_sigma", c.disturbance.lateral_slip_sigma}};
    ordered_json e;
    e["jacobian"] = jacobian_mode_name(c.estimator.mode);
    e["use_human"] = c.estimator.use_human;
    e["internal_var"] = c.estimator.internal_var;
    if (c.estimator.model) e["model"] = to_json(*c.estimator.model);
    j["estimator"] = e;
    return j;
}

ScenarioConfig scenario_from_json(const json& j) {
    require_object(j, "scenario");
    ScenarioConfig c;
    if (j.contains("track")) {
        const json& t = require_object(j.at("track"), "track");
        const std::string kind = get_or<std::string>(t, "kind", "straight");
        if (kind == "curved") {
            c.track = TrackSpec::curved();
        } else if (kind != "straight") {
            throw InputError("track.kind must be 'straight' or 'curved'");
        }
        c.track.length = get_or(t, "length", c.track.length);
        c.track.lane_width = get_or(t, "lane_width", c.track.lane_width);
        c.track.amplitude = get_or(t, "amplitude", c.track.amplitude);
        c.track.wavelength = get_or(t, "wavelength", c.track.wavelength);
    }
    if (j.contains("initial")) {
        const json& i = require_object(j.at("initial"), "initial");
        c.initial.v = get_or(i, "v", c.initial.v);
        c.initial.y = get_or(i, "y", c.initial.y);
    }
    if (j.contains("hypotheses")) c.hypotheses = number_array(j, "hypotheses");
    c.true_bias = get_or(j, "true_bias", c.true_bias);
    c.duration = get_or(j, "duration", c.duration);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("vehicle")) {
        const json& v = require_object(j.at("vehicle"), "vehicle");
        c.vehicle.kappa = get_or(v, "kappa", c.vehicle.kappa);
        c.vehicle.ts = get_or(v, "ts", c.vehicle.ts);
        c.vehicle.near_dist = get_or(v, "near_dist", c.vehicle.near_dist);
        c.vehicle.far_dist = get_or(v, "far_dist", c.vehicle.far_dist);
        c.vehicle.v_min_invert = get_or(v, "v_min_invert", c.vehicle.v_min_invert);
        c.vehicle.substeps = get_or(v, "substeps", c.vehicle.substeps);
    }
    if (j.contains("noise")) {
        const json& n = require_object(j.at("noise"), "noise");
        if (n.contains("R")) {
            const auto r = number_array(n, "R");
            if (r.size() != 3) throw InputError("noise.R must list 3 variances");
            c.noise.R = Eigen::Vector3d(r[0], r[1], r[2]).asDiagonal();
        }
        if (n.contains("Q")) {
            const auto q = number_array(n, "Q");
            if (q.size() != 7) throw InputError("noise.Q must list 7 variances");
            c.noise.Q = Eigen::Map<const Eigen::Matrix<double, 7, 1>>(q.data()).asDiagonal();
        }
        c.noise.nu_sigma = get_or(n, "nu_sigma", c.noise.nu_sigma);
    }
    if (j.contains("driver")) {
        const json& d = require_object(j.at("driver"), "driver");
        const std::string kind = get_or<std::string>(d, "kind", "synthetic");
        if (kind == "synthetic") c.driver.kind = DriverConfig::Kind::synthetic;
        else if (kind == "logged") c.driver.kind = DriverConfig::Kind::logged;
        else if (kind == "live") c.driver.kind = DriverConfig::Kind::live;
        else throw InputError("driver.kind must be synthetic, logged or live");
        if (d.contains("params")) c.driver.params = steering_params_from_json(d.at("params"));
        c.driver.steer_sigma = get_or(d, "steer_sigma", c.driver.steer_sigma);
        c.driver.accel_sigma = get_or(d, "accel_sigma", c.driver.accel_sigma);
        c.driver.speed_gain = get_or(d, "speed_gain", c.driver.speed_gain);
        if (d.contains("speed")) {
            const json& s = require_object(d.at("speed"), "driver.speed");
            const std::string prof = get_or<std::string>(s, "profile", "constant");
            if (prof == "sweep") c.driver.speed.kind = SpeedProfile::Kind::sweep;
            else if (prof != "constant") throw InputError("driver.speed.profile must be constant or sweep");
            c.driver.speed.v0 = get_or(s, "v0", c.driver.speed.v0);
            c.driver.speed.v1 = get_or(s, "v1", c.driver.speed.v1);
        }
        c.driver.log = get_or<std::string>(d, "log", "");
    }
    if (j.contains("disturbance")) {
        const json& w = require_object(j.at("disturbance"), "disturbance");
        c.disturbance.yaw_rate_sigma = get_or(w, "yaw_rate_sigma", c.disturbance.yaw_rate_sigma);
        c.disturbance.lateral_slip_sigma = get_or(w, "lateral_slip_sigma", c.disturbance.lateral_slip_sigma);
    }
    if (j.contains("estimator")) {
        const json& e = require_object(j.at("estimator"), "estimator");
        c.estimator.mode = parse_jacobian_mode(get_or<std::string>(e, "jacobian", "exact"));
        c.estimator.use_human = get_or(e, "use_human", c.estimator.use_human);
        c.estimator.internal_var = get_or(e, "internal_var", c.estimator.internal_var);
        if (e.contains("model")) c.estimator.model = steering_params_from_json(e.at("model"));
    }
    c.validate();
    return c;
}

ordered_json to_json(const TrajectoryRow& r) {
    ordered_json j;
    j["t"] = r.t;
    j["x"] = r.truth.x;
    j["y"] = r.truth.y;
    j["v"] = r.truth.v;
    j["theta"] = r.truth.theta;
    j["delta"] = r.cmd.delta;
    j["accel"] = r.cmd.accel;
    j["xddot"] = r.input.xddot;
    j["yddot"] = r.input.yddot;
    j["z1"] = r.z.z1;
    j["z2"] = r.z.z2;
    j["z3"] = r.z.z3;
    return j;
}

TrajectoryRow trajectory_row_from_json(const json& j) {
    require_object(j, "trajectory row");
    TrajectoryRow r;
    r.t = num(j, "t");
    r.truth = {num(j, "x"), num(j, "y"), num(j, "v"), num(j, "theta")};
    r.cmd = {num(j, "delta"), num(j, "accel")};
    r.input = {num(j, "xddot"), num(j, "yddot")};
    r.z = {num(j, "z1"), num(j, "z2"), num(j, "z3")};
    return r;
}

ordered_json to_json(const EstimationRow& r) {
    ordered_json j;
    j["t"] = r.t;
    j["est_mean"] = std::vector<double>(r.mean.data(), r.mean.data() + r.mean.size());
    j["weights"] = r.weights;
    j["lat_err"] = r.lat_err;
    return j;
}

EstimationRow estimation_row_from_json(const json& j) {
    require_object(j, "estimation row");
    EstimationRow r;
    r.t = num(j, "t");
    const auto m = number_array(j, "est_mean");
    if (m.size() != 7) throw InputError("est_mean must have 7 entries");
    r.mean = Eigen::Map<const AugmentedState>(m.data());
    r.weights = number_array(j, "weights");
    r.lat_err = num(j, "lat_err");
    return r;
}

void write_trajectory_log(const std::filesystem::path& path, const TrajectoryLog& log) { write_lines(path, log); }

TrajectoryLog read_trajectory_log(const std::filesystem::path& path) {
    TrajectoryLog log;
    for (const auto& j : read_lines(path)) log.push_back(trajectory_row_from_json(j));
    for (std::size_t i = 1; i < log.size(); ++i)
        if (!(log[i].t > log[i - 1].t)) throw InputError(path.string() + ": timestamps must increase strictly");
    return log;
}

void write_estimation_log(const std::filesystem::path& path, const EstimationLog& log) { write_lines(path, log); }

EstimationLog read_estimation_log(const std::filesystem::path& path) {
    EstimationLog log;
    for (const auto& j : read_lines(path)) log.push_back(estimation_row_from_json(j));
    return log;
}

}  // namespace advisor
