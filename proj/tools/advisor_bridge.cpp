#include <iostream>

#include <CLI11.hpp>

#include "advisor/bridge.hpp"
#include "advisor/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Live-session WebSocket server"};
    std::string bind = "127.0.0.1:" + std::to_string(advisor::bridge::kDefaultPort);
    std::string record;
    app.add_option("--bind", bind, "host:port to listen on");
    app.add_option("--record", record, "write each finished session (scenario, trajectory, estimation) here");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        advisor::bridge::ServerOptions opts;
        std::tie(opts.address, opts.port) = advisor::bridge::parse_bind(bind);
        if (!record.empty()) opts.record_dir = record;
        opts.stop_on_signal = true;
        advisor::bridge::Server server(opts);
        std::cout << "listening on " << opts.address << ":" << server.port() << std::endl;
        server.run();
    } catch (const advisor::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
