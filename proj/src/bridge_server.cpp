#include "advisor/bridge.hpp"

#include <chrono>
#include <csignal>
#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "advisor/errors.hpp"

namespace advisor::bridge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, std::optional<std::filesystem::path> record_dir)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(std::move(record_dir)) {}

    void run() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->read();
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            // Disconnect: stop the clock; the session dies with the last handler.
            closed_ = true;
            timer_.cancel();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        for (auto& reply : session_.handle(text)) send(reply);
        if (session_.running() && !ticking_) {
            ticking_ = true;
            deadline_ = Clock::now() + period();
            wait();
        }
        read();
    }

    Clock::duration period() const {
        return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(session_.ts()));
    }

    void wait() {
        timer_.expires_at(deadline_);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
    }

    void on_tick(beast::error_code ec) {
        if (ec || closed_) return;
        if (!session_.running()) {
            ticking_ = false;
            return;
        }
        for (auto& msg : session_.tick()) send(msg);
        if (!session_.running()) {
            ticking_ = false;
            return;
        }
        // Absolute deadlines keep the tick clock free of cumulative drift.
        deadline_ += period();
        wait();
    }

    void send(const json& msg) {
        if (closed_) return;
        queue_.push_back(msg.dump());
        if (queue_.size() == 1) write();
    }

    void write() {
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->timer_.cancel();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    Session session_;
    Clock::time_point deadline_;
    bool ticking_ = false;
    bool closed_ = false;
};

}  // namespace

struct Server::Impl {
    explicit Impl(ServerOptions o) : opts(std::move(o)), acceptor(io) {
        beast::error_code ec;
        const auto addr = net::ip::make_address(opts.address, ec);
        if (ec) throw InputError("bridge: bad bind address '" + opts.address + "'");
        const tcp::endpoint ep(addr, opts.port);
        acceptor.open(ep.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(ep, ec);
        if (ec) throw InputError("bridge: cannot bind " + opts.address + ":" + std::to_string(opts.port) + ": " +
                                 ec.message());
        acceptor.listen();
        accept();
        if (opts.stop_on_signal) {
            signals.emplace(io, SIGINT, SIGTERM);
            signals->async_wait([this](beast::error_code, int) { io.stop(); });
        }
    }

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Connection>(std::move(socket), opts.record_dir)->run();
            accept();
        });
    }

    ServerOptions opts;
    net::io_context io{1};
    tcp::acceptor acceptor;
    std::optional<net::signal_set> signals;
};

Server::Server(ServerOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

Server::~Server() = default;

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() { impl_->io.run(); }

void Server::stop() { impl_->io.stop(); }

std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size())
        throw InputError("bind must be host:port, got '" + bind + "'");
    const std::string port = bind.substr(colon + 1);
    if (port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5)
        throw InputError("bind port must be numeric, got '" + port + "'");
    const unsigned long p = std::stoul(port);
    if (p > 65535) throw InputError("bind port out of range: " + port);
    return {bind.substr(0, colon), static_cast<std::uint16_t>(p)};
}

}  // namespace advisor::bridge
