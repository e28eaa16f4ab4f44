#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoaug/raster.hpp"

namespace evoaug {

// Wire protocol: newline-delimited JSON over a subprocess's stdin/stdout or a
// TCP stream.
//
//   request  {"id", "kind": capabilities|augment|embed, "operator"?,
//             "image_png_b64"?, "params"?, "seed"?}
//   response {"id", "ok", "capabilities"?, "mode"?, "image_png_b64"?,
//             "embedding"?, "error"?}
//
// One response per request, matched by id; responses may arrive out of order.

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

enum class WorkerTransport { subprocess, tcp };

struct RemoteOperatorConfig {
    WorkerTransport transport = WorkerTransport::subprocess;
    /// Shell command line (subprocess) or "host:port" (tcp).
    std::string endpoint;
    double timeout_seconds = 120.0;
    int max_retries = 2;
    double backoff_initial_seconds = 0.5;
    int max_in_flight = 4;
    /// Azimuth choices for the NeRF operator; elevation stays at 0.
    std::vector<int> nerf_rotation_degrees{-15, 15};

    void validate() const;

    /// "tcp://host:port" selects TCP; anything else is a subprocess command.
    static RemoteOperatorConfig from_endpoint(const std::string& spec);
};

struct WorkerCapabilities {
    std::vector<std::string> tags;
    std::string mode;
    bool supports(const std::string& tag) const;
};

/// Parses and checks one response line. Throws ProtocolError naming the
/// offending field.
nlohmann::json parse_response(const std::string& line);

/// A bidirectional line-oriented byte stream.
class LineConnection {
public:
    virtual ~LineConnection() = default;
    virtual void send_line(const std::string& line) = 0;
    /// Next complete line without the terminator, or nullopt if the deadline
    /// passes first. Throws WorkerUnreachable when the peer has gone away.
    virtual std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline) = 0;
};

/// Opens a connection per the config; throws WorkerUnreachable.
std::unique_ptr<LineConnection> open_connection(const RemoteOperatorConfig& cfg);

/// Thread-safe client multiplexing concurrent requests over one connection.
/// Transport failures and timeouts reconnect and retry with exponential
/// backoff; a response with ok=false is returned to the caller as is.
class WorkerClient {
public:
    explicit WorkerClient(RemoteOperatorConfig cfg);
    ~WorkerClient();
    WorkerClient(const WorkerClient&) = delete;
    WorkerClient& operator=(const WorkerClient&) = delete;

    const RemoteOperatorConfig& config() const { return cfg_; }

    /// Sends `request` (an "id" is assigned) and returns the parsed response.
    nlohmann::json call(nlohmann::json request);

    WorkerCapabilities capabilities();
    /// Throws OperatorError when the worker reports failure.
    RasterImage augment(const std::string& op, const RasterImage& img, const nlohmann::json& params,
                        std::uint64_t seed);
    std::vector<double> embed(const RasterImage& img);

private:
    struct Timeout {};
    struct ConnectionLost {};

    nlohmann::json exchange_once(const nlohmann::json& request, const std::string& id);
    void drop_connection_locked();

    RemoteOperatorConfig cfg_;
    std::counting_semaphore<1024> in_flight_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::shared_ptr<LineConnection> conn_;
    std::uint64_t generation_ = 0;
    bool reader_active_ = false;
    std::map<std::string, nlohmann::json> ready_;
    std::uint64_t next_id_ = 1;
};

/// Opens a fresh connection and runs the capabilities handshake.
WorkerCapabilities probe_worker(const RemoteOperatorConfig& cfg);

}  // namespace evoaug
