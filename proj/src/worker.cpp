#include "evoaug/worker.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <sodium.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <thread>

#include "evoaug/errors.hpp"

extern char** environ;

namespace evoaug {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Base64

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    const std::size_t cap = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(cap, '\0');
    sodium_bin2base64(out.data(), cap, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size())
        throw FormatError("malformed base64 payload");
    out.resize(len);
    return out;
}

// ---------------------------------------------------------------------------
// Config

void RemoteOperatorConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("worker endpoint is empty");
    if (!(timeout_seconds > 0.0)) throw ConfigError("worker timeout must be positive");
    if (max_retries < 0) throw ConfigError("worker retries must be non-negative");
    if (max_in_flight < 1 || max_in_flight > 1024) throw ConfigError("worker in-flight limit must be in [1, 1024]");
    if (nerf_rotation_degrees.empty()) throw ConfigError("NeRF rotation choice set is empty");
}

RemoteOperatorConfig RemoteOperatorConfig::from_endpoint(const std::string& spec) {
    RemoteOperatorConfig cfg;
    constexpr std::string_view kTcp = "tcp://";
    if (spec.rfind(kTcp, 0) == 0) {
        cfg.transport = WorkerTransport::tcp;
        cfg.endpoint = spec.substr(kTcp.size());
    } else {
        cfg.endpoint = spec;
    }
    return cfg;
}

bool WorkerCapabilities::supports(const std::string& tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

// ---------------------------------------------------------------------------
// Response validation

json parse_response(const std::string& line) {
    json r;
    try {
        r = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError("<line>", std::string("not valid JSON: ") + e.what());
    }
    if (!r.is_object()) throw ProtocolError("<line>", "response is not a JSON object");
    if (!r.contains("id") || !r["id"].is_string()) throw ProtocolError("id", "missing or not a string");
    if (!r.contains("ok") || !r["ok"].is_boolean()) throw ProtocolError("ok", "missing or not a boolean");
    if (r.contains("capabilities")) {
        const auto& caps = r["capabilities"];
        if (!caps.is_array() || !std::all_of(caps.begin(), caps.end(), [](const json& c) { return c.is_string(); }))
            throw ProtocolError("capabilities", "must be an array of strings");
    }
    if (r.contains("mode") && !r["mode"].is_string()) throw ProtocolError("mode", "must be a string");
    if (r.contains("image_png_b64") && !r["image_png_b64"].is_string())
        throw ProtocolError("image_png_b64", "must be a string");
    if (r.contains("embedding")) {
        const auto& e = r["embedding"];
        if (!e.is_array() || !std::all_of(e.begin(), e.end(), [](const json& v) { return v.is_number(); }))
            throw ProtocolError("embedding", "must be an array of numbers");
    }
    if (r.contains("error") && !r["error"].is_string()) throw ProtocolError("error", "must be a string");
    if (!r["ok"].get<bool>() && !r.contains("error")) throw ProtocolError("error", "missing on a failed response");
    return r;
}

// ---------------------------------------------------------------------------
// Connections

namespace {

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::clamp<long long>(left, 0, 1 << 30));
}

// Line framing over a stream socket; subprocess workers get one end of a
// socketpair as stdin/stdout so both transports share this code.
class SocketConnection : public LineConnection {
public:
    explicit SocketConnection(int fd) : fd_(fd) {}
    ~SocketConnection() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void send_line(const std::string& line) override {
        std::string msg = line;
        msg.push_back('\n');
        std::size_t off = 0;
        while (off < msg.size()) {
            const ssize_t n = ::send(fd_, msg.data() + off, msg.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw WorkerUnreachable(std::string("worker write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::optional<std::string> read_line(Clock::time_point deadline) override {
        for (;;) {
            if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            pollfd pfd{fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw WorkerUnreachable(std::string("worker poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) return std::nullopt;
            char chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                throw WorkerUnreachable(std::string("worker read failed: ") + std::strerror(errno));
            }
            if (n == 0) throw WorkerUnreachable("worker closed the connection");
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

protected:
    int fd_;
    std::string buf_;
};

class SubprocessConnection : public SocketConnection {
public:
    SubprocessConnection(int fd, pid_t pid) : SocketConnection(fd), pid_(pid) {}
    ~SubprocessConnection() override {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
        // Give the worker a moment to exit on EOF before terminating it.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        ::kill(pid_, SIGTERM);
        ::waitpid(pid_, nullptr, 0);
    }

private:
    pid_t pid_;
};

std::unique_ptr<LineConnection> spawn_worker(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
        throw WorkerUnreachable(std::string("socketpair failed: ") + std::strerror(errno));
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = 0;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char**>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
        ::close(fds[0]);
        throw WorkerUnreachable("cannot spawn worker '" + command + "': " + std::strerror(rc));
    }
    return std::make_unique<SubprocessConnection>(fds[0], pid);
}

std::unique_ptr<LineConnection> connect_tcp(const std::string& endpoint, double timeout_seconds) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) throw ConfigError("tcp endpoint must be host:port, got '" + endpoint + "'");
    const std::string host = endpoint.substr(0, colon);
    const std::string port = endpoint.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw WorkerUnreachable("cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);

    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_seconds));
    std::string last_error = "no address";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
        if (fd < 0) continue;
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, remaining_ms(deadline));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                rc = -1;
                errno = ETIMEDOUT;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
            return std::make_unique<SocketConnection>(fd);
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    throw WorkerUnreachable("cannot connect to " + endpoint + ": " + last_error);
}

}  // namespace

std::unique_ptr<LineConnection> open_connection(const RemoteOperatorConfig& cfg) {
    cfg.validate();
    if (cfg.transport == WorkerTransport::tcp) return connect_tcp(cfg.endpoint, cfg.timeout_seconds);
    return spawn_worker(cfg.endpoint);
}

// ---------------------------------------------------------------------------
// Client

WorkerClient::WorkerClient(RemoteOperatorConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(std::max(1, std::min(cfg_.max_in_flight, 1024))) {
    cfg_.validate();
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
}

WorkerClient::~WorkerClient() = default;

void WorkerClient::drop_connection_locked() {
    conn_.reset();
    ++generation_;
    cv_.notify_all();
}

json WorkerClient::exchange_once(const json& request, const std::string& id) {
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(cfg_.timeout_seconds));
    std::unique_lock lk(mu_);
    if (!conn_) conn_ = open_connection(cfg_);
    const auto conn = conn_;
    const auto gen = generation_;
    try {
        conn->send_line(request.dump());
    } catch (const WorkerUnreachable&) {
        drop_connection_locked();
        throw ConnectionLost{};
    }

    for (;;) {
        if (auto it = ready_.find(id); it != ready_.end()) {
            json r = std::move(it->second);
            ready_.erase(it);
            return r;
        }
        if (generation_ != gen) throw ConnectionLost{};
        if (!reader_active_) {
            reader_active_ = true;
            lk.unlock();
            std::optional<std::string> line;
            std::exception_ptr failure;
            try {
                line = conn->read_line(deadline);
            } catch (...) {
                failure = std::current_exception();
            }
            lk.lock();
            reader_active_ = false;
            cv_.notify_all();
            if (failure) {
                if (generation_ == gen) drop_connection_locked();
                throw ConnectionLost{};
            }
            if (!line) {
                // A stuck worker cannot be trusted with further requests.
                if (generation_ == gen) drop_connection_locked();
                throw Timeout{};
            }
            json r;
            try {
                r = parse_response(*line);
            } catch (const ProtocolError&) {
                if (generation_ == gen) drop_connection_locked();
                throw;
            }
            auto rid = r["id"].get<std::string>();
            ready_[std::move(rid)] = std::move(r);
        } else if (cv_.wait_until(lk, deadline) == std::cv_status::timeout && !ready_.contains(id)) {
            throw Timeout{};
        }
    }
}

json WorkerClient::call(json request) {
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    std::string last_failure;
    double backoff = cfg_.backoff_initial_seconds;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        std::string id;
        {
            std::lock_guard lk(mu_);
            id = std::to_string(next_id_++);
        }
        request["id"] = id;
        try {
            return exchange_once(request, id);
        } catch (const Timeout&) {
            last_failure = "timed out after " + std::to_string(cfg_.timeout_seconds) + " s";
        } catch (const ConnectionLost&) {
            last_failure = "connection lost";
        } catch (const WorkerUnreachable& e) {
            last_failure = e.what();
        }
    }
    throw WorkerUnreachable("worker " + cfg_.endpoint + ": " + last_failure + " (after " +
                            std::to_string(cfg_.max_retries + 1) + " attempts)");
}

WorkerCapabilities WorkerClient::capabilities() {
    const json r = call({{"kind", "capabilities"}});
    if (!r["ok"].get<bool>()) throw ProtocolError("ok", "capabilities request refused: " + r.value("error", ""));
    if (!r.contains("capabilities")) throw ProtocolError("capabilities", "missing from handshake response");
    WorkerCapabilities caps;
    caps.tags = r["capabilities"].get<std::vector<std::string>>();
    caps.mode = r.value("mode", "");
    return caps;
}

RasterImage WorkerClient::augment(const std::string& op, const RasterImage& img, const json& params,
                                  std::uint64_t seed) {
    json req = {{"kind", "augment"},
                {"operator", op},
                {"image_png_b64", base64_encode(encode_png(img))},
                {"params", params.is_null() ? json::object() : params},
                {"seed", seed}};
    const json r = call(std::move(req));
    if (!r["ok"].get<bool>()) throw OperatorError(op, r["error"].get<std::string>());
    if (!r.contains("image_png_b64")) throw ProtocolError("image_png_b64", "missing from augment response");
    try {
        return decode_image(base64_decode(r["image_png_b64"].get<std::string>()));
    } catch (const FormatError& e) {
        throw ProtocolError("image_png_b64", e.what());
    }
}

std::vector<double> WorkerClient::embed(const RasterImage& img) {
    const json r = call({{"kind", "embed"}, {"image_png_b64", base64_encode(encode_png(img))}});
    if (!r["ok"].get<bool>()) throw OperatorError("embed", r["error"].get<std::string>());
    if (!r.contains("embedding")) throw ProtocolError("embedding", "missing from embed response");
    return r["embedding"].get<std::vector<double>>();
}

WorkerCapabilities probe_worker(const RemoteOperatorConfig& cfg) {
    WorkerClient client(cfg);
    return client.capabilities();
}

}  // namespace evoaug
