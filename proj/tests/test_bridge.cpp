#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "advisor/bridge.hpp"
#include "advisor/cli.hpp"
#include "advisor/io.hpp"

using namespace advisor;
using namespace advisor::bridge;

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

std::string start_msg(const json& scenario = json::object()) {
    return json{{"type", "start"}, {"scenario", scenario}}.dump();
}

std::string control_msg(double steer, double accel) {
    return json{{"type", "control"}, {"steer", steer}, {"accel", accel}}.dump();
}

json only(const std::vector<json>& msgs) {
    REQUIRE(msgs.size() == 1);
    return msgs.front();
}

// Simple lane keeper standing in for the human at the wheel.
std::pair<double, double> keep_lane(const json& tel) {
    const auto& tr = tel["truth"];
    const double y = tr["y"].get<double>(), th = tr["theta"].get<double>(), v = tr["v"].get<double>();
    return {-0.004 * y - 0.08 * th, 0.5 * (15.0 - v)};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("advisor_bridge_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

class Client {
public:
    explicit Client(std::uint16_t port) : ws_(io_) {
        tcp::resolver resolver(io_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
        ws_.text(true);
    }
    void send(const std::string& s) { ws_.write(net::buffer(s)); }
    json read() {
        beast::flat_buffer buf;
        ws_.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }
    void close() { ws_.close(websocket::close_code::normal); }

private:
    net::io_context io_;
    websocket::stream<tcp::socket> ws_;
};

struct RunningServer {
    explicit RunningServer(ServerOptions opts) : server([&] {
        opts.port = 0;
        return opts;
    }()), thread([this] { server.run(); }) {}
    ~RunningServer() {
        server.stop();
        thread.join();
    }
    Server server;
    std::thread thread;
};

}  // namespace

TEST_CASE("session rejects malformed and out-of-order messages") {
    Session s;
    CHECK(only(s.handle("{nope"))["code"] == "bad_json");
    CHECK(only(s.handle("[1,2]"))["code"] == "bad_message");
    CHECK(only(s.handle(R"({"type":"fly"})"))["code"] == "unknown_type");
    CHECK(only(s.handle(control_msg(0.1, 0)))["code"] == "not_running");
    CHECK(only(s.handle(R"({"type":"pause"})"))["code"] == "not_running");
    CHECK(only(s.handle(start_msg(json{{"duration", -3}})))["code"] == "invalid");
    CHECK(s.tick().empty());
    CHECK_FALSE(s.running());
}

TEST_CASE("session start, telemetry and restart guard") {
    Session s;
    CHECK(s.handle(start_msg()).empty());
    REQUIRE(s.running());
    const json t0 = only(s.tick());
    CHECK(t0["type"] == "telemetry");
    CHECK(t0["t"] == 0.0);
    CHECK(t0["truth"]["y"].get<double>() == doctest::Approx(-0.5));
    CHECK(t0["estimate"]["mean"].size() == 7);
    CHECK(t0["estimate"]["weights"].size() == 2);

    const json again = only(s.handle(start_msg(json{{"hypotheses", {0.0, 1.8, -1.8}}})));
    CHECK(again["code"] == "already_running");
    CHECK(s.ticks() == 1);
    CHECK(only(s.tick())["estimate"]["weights"].size() == 2);

    for (int k = 0; k < 50; ++k) {
        const json t = only(s.tick());
        double sum = 0.0;
        for (const auto& w : t["estimate"]["weights"]) sum += w.get<double>();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(t["camera_y"].get<double>() != t["truth"]["y"].get<double>());
    }
}

TEST_CASE("three hypotheses give three components") {
    Session s;
    REQUIRE(s.handle(start_msg(json{{"hypotheses", {0.0, 1.8, -1.8}}})).empty());
    for (int k = 0; k < 10; ++k) {
        const json t = only(s.tick());
        CHECK(t["estimate"]["weights"].size() == 3);
        CHECK(t["estimate"]["component_y"].size() == 3);
    }
}

TEST_CASE("commands are held and clamped") {
    Session s;
    REQUIRE(s.handle(start_msg()).empty());
    CHECK(s.handle(control_msg(0.01, 0.2)).empty());
    for (int k = 0; k < 5; ++k) (void)s.tick();
    for (const auto& row : s.trajectory()) {
        CHECK(row.cmd.delta == 0.01);
        CHECK(row.cmd.accel == 0.2);
    }
    CHECK(only(s.handle(R"({"type":"control","steer":"left","accel":0})"))["code"] == "invalid");
    CHECK(s.handle(control_msg(2.0, 0.0)).empty());
    const json t = only(s.tick());
    CHECK(t["steer_clamped"] == true);
    CHECK(t["command"]["steer"].get<double>() < std::numbers::pi / 2);
    CHECK(t["command"]["steer"].get<double>() > 1.57);
    CHECK(s.handle(control_msg(-0.001, 0.0)).empty());
    const std::vector<json> next = s.tick();
    REQUIRE_FALSE(next.empty());
    if (next[0]["type"] == "telemetry") CHECK(next[0]["steer_clamped"] == false);
}

TEST_CASE("pause toggles telemetry and reset starts clean") {
    Session s;
    REQUIRE(s.handle(start_msg()).empty());
    (void)s.tick();
    (void)s.tick();
    CHECK(s.handle(R"({"type":"pause"})").empty());
    CHECK(s.tick().empty());
    CHECK(s.tick().empty());
    CHECK(s.ticks() == 2);
    CHECK(s.handle(R"({"type":"pause"})").empty());
    CHECK(only(s.tick())["t"].get<double>() == doctest::Approx(0.1));

    CHECK(s.handle(R"({"type":"reset"})").empty());
    CHECK_FALSE(s.running());
    CHECK(s.ticks() == 0);
    REQUIRE(s.handle(start_msg()).empty());
    CHECK(only(s.tick())["t"] == 0.0);
}

TEST_CASE("session finishes, records, and replays offline bit-identically") {
    const auto dir = temp_dir("record");
    Session s(dir);
    REQUIRE(s.handle(start_msg(json{{"duration", 3.0}, {"seed", 11}})).empty());
    std::vector<json> last;
    std::size_t telemetry = 0;
    json latest;
    while (s.running()) {
        last = s.tick();
        for (const auto& m : last)
            if (m["type"] == "telemetry") {
                ++telemetry;
                latest = m;
            }
        if (s.running()) {
            const auto [steer, accel] = keep_lane(latest);
            (void)s.handle(control_msg(steer, accel));
        }
    }
    CHECK(telemetry == 60);
    REQUIRE(last.size() == 2);
    CHECK(last[1]["type"] == "finished");
    CHECK(last[1]["rows"] == 60);
    REQUIRE(s.recording());
    const auto rec = *s.recording();
    CHECK(last[1]["recording"] == rec.string());

    const ScenarioConfig cfg = scenario_from_json(read_json_file(rec / "scenario.json"));
    const EstimationLog offline = run_estimation(read_trajectory_log(rec / "trajectory.jsonl"), estimation_model(cfg),
                                                 cfg.vehicle, estimation_settings(cfg), Track(cfg.track));
    REQUIRE(offline.size() == s.estimation().size());
    for (std::size_t k = 0; k < offline.size(); ++k) {
        CHECK(offline[k].mean == s.estimation()[k].mean);
        CHECK(offline[k].weights == s.estimation()[k].weights);
    }

    const auto out = dir / "replay";
    const std::string log = (rec / "trajectory.jsonl").string(), sc = (rec / "scenario.json").string(),
                      od = out.string();
    const char* argv[] = {"advisor", "estimate", log.c_str(), "--scenario", sc.c_str(), "--out", od.c_str()};
    std::ostringstream o, e;
    REQUIRE(run_cli(7, argv, o, e) == 0);
    CHECK(read_file(out / "estimation_trajectory.jsonl") == read_file(rec / "estimation.jsonl"));
}

TEST_CASE("parse_bind") {
    CHECK(parse_bind("127.0.0.1:8742") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 8742});
    CHECK(parse_bind("0.0.0.0:0").second == 0);
    CHECK_THROWS((void)parse_bind("localhost"));
    CHECK_THROWS((void)parse_bind("host:99999"));
    CHECK_THROWS((void)parse_bind("host:12ab"));
}

TEST_CASE("live session over WebSocket: liveness, rate, reconnect") {
    const auto dir = temp_dir("live");
    ServerOptions opts;
    opts.record_dir = dir;
    RunningServer srv(opts);
    using Clock = std::chrono::steady_clock;
    {
        Client c(srv.server.port());
        c.send(start_msg(json{{"seed", 3}}));
        const auto sent = Clock::now();
        std::vector<Clock::time_point> arrivals;
        json finished;
        while (true) {
            const json m = c.read();
            if (m["type"] == "finished") {
                finished = m;
                break;
            }
            REQUIRE(m["type"] == "telemetry");
            arrivals.push_back(Clock::now());
            const auto [steer, accel] = keep_lane(m);
            c.send(control_msg(steer, accel));
        }
        REQUIRE(arrivals.size() == 600);
        const double first = std::chrono::duration<double>(arrivals.front() - sent).count();
        CHECK(first < 2 * 0.05);
        const double span = std::chrono::duration<double>(arrivals.back() - arrivals.front()).count();
        const double rate = 599.0 / span;
        CHECK(rate == doctest::Approx(20.0).epsilon(0.05));
        // Offset of each frame from an ideal 20 Hz grid. Drift is the shift of the
        // median offset between the first and last 50 frames; jitter is the worst frame.
        std::vector<double> offset;
        for (std::size_t k = 0; k < arrivals.size(); ++k)
            offset.push_back(std::chrono::duration<double>(arrivals[k] - arrivals.front()).count() -
                             0.05 * static_cast<double>(k));
        auto median = [](std::vector<double> v) {
            std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
            return v[v.size() / 2];
        };
        const double drift = std::abs(median({offset.end() - 50, offset.end()}) - median({offset.begin(), offset.begin() + 50}));
        double jitter = 0.0;
        for (double o : offset) jitter = std::max(jitter, std::abs(o));
        MESSAGE("tick drift " << drift * 1e3 << " ms, worst frame offset " << jitter * 1e3 << " ms");
        CHECK(drift < 0.010);
        CHECK(jitter < 0.050);

        // Every tick consumed the most recent command sent before it.
        const auto rec = std::filesystem::path(finished["recording"].get<std::string>());
        const TrajectoryLog log = read_trajectory_log(rec / "trajectory.jsonl");
        REQUIRE(log.size() == 600);
        CHECK(log[0].cmd.delta == 0.0);
        std::size_t nonzero = 0;
        for (const auto& r : log) nonzero += r.cmd.delta != 0.0;
        CHECK(nonzero > 590);
        c.close();
    }
    {
        // A new connection starts from scratch even when the old one vanished mid-run.
        Client a(srv.server.port());
        a.send(start_msg());
        for (int k = 0; k < 5; ++k) CHECK(a.read()["type"] == "telemetry");
    }
    Client b(srv.server.port());
    b.send(start_msg(json{{"hypotheses", {0.0, 1.8, -1.8}}}));
    const json t = b.read();
    CHECK(t["t"] == 0.0);
    CHECK(t["estimate"]["weights"].size() == 3);
    b.send(R"({"type":"pause"})");
    b.send(R"({"type":"reset"})");
    b.send(start_msg(json{{"seed", 1}}));
    b.send(start_msg());
    bool saw_error = false;
    double t_last = -1.0;
    for (int k = 0; k < 20; ++k) {
        const json m = b.read();
        if (m["type"] == "error") {
            CHECK(m["code"] == "already_running");
            saw_error = true;
        } else {
            t_last = m["t"].get<double>();
        }
    }
    CHECK(saw_error);
    CHECK(t_last < 1.0);
    b.close();
}
