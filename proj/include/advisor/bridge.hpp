#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advisor/scenario.hpp"

namespace advisor::bridge {

using json = nlohmann::json;

inline constexpr std::uint16_t kDefaultPort = 8742;

[[nodiscard]] json error_message(const std::string& code, const std::string& message);

// Transport-free state machine for one connection. Messages go in through
// handle(); the owner calls tick() once per sampling period while running().
class Session {
public:
    explicit Session(std::optional<std::filesystem::path> record_dir = std::nullopt);

    // Replies to send immediately (errors only; control is acknowledged in telemetry).
    [[nodiscard]] std::vector<json> handle(const std::string& text);

    // One simulation step. Returns telemetry, then a "finished" message after the last row.
    [[nodiscard]] std::vector<json> tick();

    [[nodiscard]] bool running() const { return plant_ != nullptr && !finished_; }
    [[nodiscard]] bool paused() const { return paused_; }
    [[nodiscard]] double ts() const { return cfg_.vehicle.ts; }
    [[nodiscard]] std::size_t ticks() const { return log_.size(); }
    [[nodiscard]] const TrajectoryLog& trajectory() const { return log_; }
    [[nodiscard]] const EstimationLog& estimation() const { return est_; }
    [[nodiscard]] const ScenarioConfig& scenario() const { return cfg_; }
    // Set once a finished session has been written to the record directory.
    [[nodiscard]] const std::optional<std::filesystem::path>& recording() const { return recording_; }

private:
    std::vector<json> start(const json& msg);
    void control(const json& msg);
    void reset();
    void record();

    std::optional<std::filesystem::path> record_dir_;
    std::optional<std::filesystem::path> recording_;
    unsigned sessions_ = 0;
    ScenarioConfig cfg_;
    std::unique_ptr<PlantSimulator> plant_;
    std::unique_ptr<OnlineEstimator> estimator_;
    ControlCommand held_;
    bool clamped_ = false;
    bool paused_ = false;
    bool finished_ = false;
    TrajectoryLog log_;
    EstimationLog est_;
};

struct ServerOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = kDefaultPort;  // 0 picks a free port
    std::optional<std::filesystem::path> record_dir;
    bool stop_on_signal = false;  // SIGINT/SIGTERM end run()
};

// WebSocket server on a single io_context thread; one Session per connection.
class Server {
public:
    explicit Server(ServerOptions opts);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    [[nodiscard]] std::uint16_t port() const;
    void run();   // blocks until stop()
    void stop();  // thread-safe

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "host:port" -> (host, port); InputError on malformed input.
[[nodiscard]] std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind);

}  // namespace advisor::bridge
