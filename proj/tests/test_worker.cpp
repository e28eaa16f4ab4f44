#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <thread>

#include "evoaug/errors.hpp"
#include "evoaug/operators.hpp"
#include "evoaug/worker.hpp"
#include "support/fake_worker.hpp"
#include "support/test_util.hpp"

using namespace evoaug;
using evoaug::testing::fake_worker_command;

namespace {

RasterImage random_image(int w, int h, int c, std::uint64_t seed) {
    RandomStream rng(seed);
    RasterImage img(w, h, c);
    for (auto& v : img.mutable_data()) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

RemoteOperatorConfig fake_config(const std::string& flags = "") {
    auto cfg = RemoteOperatorConfig::from_endpoint(fake_worker_command(flags));
    cfg.timeout_seconds = 10.0;
    cfg.backoff_initial_seconds = 0.01;
    return cfg;
}

// Minimal TCP server answering with the fake worker's request handler.
class TcpFakeWorker {
public:
    TcpFakeWorker() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        ::listen(listen_fd_, 4);
        thread_ = std::thread([this] { serve(); });
    }
    ~TcpFakeWorker() {
        stop_ = true;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        thread_.join();
    }
    int port() const { return port_; }

private:
    void serve() {
        while (!stop_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) return;
            std::string buf;
            char chunk[4096];
            for (;;) {
                const ssize_t n = ::read(fd, chunk, sizeof chunk);
                if (n <= 0) break;
                buf.append(chunk, static_cast<std::size_t>(n));
                std::size_t nl;
                while ((nl = buf.find('\n')) != std::string::npos) {
                    const auto reply = evoaug::testing::handle_request_line(buf.substr(0, nl), {}) + "\n";
                    buf.erase(0, nl + 1);
                    ::send(fd, reply.data(), reply.size(), MSG_NOSIGNAL);
                }
            }
            ::close(fd);
        }
    }

    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

}  // namespace

TEST(Base64, RoundTripAndKnownVector) {
    const std::string s = "Man";
    EXPECT_EQ(base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), "TWFu");
    const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255};
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
    EXPECT_THROW(base64_decode("###"), FormatError);
}

TEST(ParseResponse, NamesOffendingField) {
    auto field_of = [](const std::string& line) {
        try {
            parse_response(line);
        } catch (const ProtocolError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(field_of(R"({"id":"1","ok":"yes"})"), "ok");
    EXPECT_EQ(field_of(R"({"ok":true})"), "id");
    EXPECT_EQ(field_of(R"({"id":"1","ok":true,"embedding":["a"]})"), "embedding");
    EXPECT_EQ(field_of(R"({"id":"1","ok":false})"), "error");
    EXPECT_EQ(field_of("not json"), "<line>");
    EXPECT_EQ(field_of(R"({"id":"1","ok":true,"capabilities":["canny"],"mode":"fake"})"), "<none>");
}

TEST(RemoteConfig, EndpointParsingAndValidation) {
    const auto tcp = RemoteOperatorConfig::from_endpoint("tcp://127.0.0.1:9000");
    EXPECT_EQ(tcp.transport, WorkerTransport::tcp);
    EXPECT_EQ(tcp.endpoint, "127.0.0.1:9000");
    const auto sub = RemoteOperatorConfig::from_endpoint("python -m genworker");
    EXPECT_EQ(sub.transport, WorkerTransport::subprocess);
    auto bad = sub;
    bad.timeout_seconds = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = sub;
    bad.nerf_rotation_degrees.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(WorkerClient, ProbeAdvertisesGenerativeOperators) {
    const auto caps = probe_worker(fake_config());
    for (const char* tag : {"canny", "segment", "depth", "color", "nerf"}) EXPECT_TRUE(caps.supports(tag)) << tag;
    EXPECT_EQ(caps.mode, "fake");
}

TEST(WorkerClient, DeadEndpointIsUnreachable) {
    auto cfg = fake_config();
    cfg.endpoint = "/nonexistent/worker/binary";
    cfg.max_retries = 1;
    EXPECT_THROW(probe_worker(cfg), WorkerUnreachable);

    auto tcp = RemoteOperatorConfig::from_endpoint("tcp://127.0.0.1:1");
    tcp.max_retries = 0;
    tcp.timeout_seconds = 2.0;
    EXPECT_THROW(probe_worker(tcp), WorkerUnreachable);
}

TEST(WorkerClient, MalformedResponseNamesOk) {
    try {
        probe_worker(fake_config("--malformed"));
        FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.field(), "ok");
    }
}

TEST(WorkerClient, AugmentMatchesLocalHandler) {
    WorkerClient client(fake_config());
    const auto img = random_image(6, 5, 3, 1);
    const auto out = client.augment("canny", img, nlohmann::json::object(), 7);
    for (std::size_t i = 1; i < img.data().size(); ++i) EXPECT_EQ(out.data()[i], 255 - img.data()[i]);
    EXPECT_EQ(out.data()[0], (img.data()[0] + 7) & 0xFF);
}

TEST(WorkerClient, FailureIsOperatorError) {
    WorkerClient client(fake_config());
    const auto img = random_image(3, 3, 3, 2);
    EXPECT_THROW(client.augment("nerf", img, {{"rotation", 30}, {"elevation", 0}}, 0), OperatorError);
    EXPECT_THROW(client.augment("blur", img, nlohmann::json::object(), 0), OperatorError);
}

TEST(WorkerClient, OutOfOrderResponsesAreMatchedById) {
    // The worker holds two requests and answers them in reverse order.
    auto cfg = fake_config("--batch 2");
    cfg.max_in_flight = 2;
    WorkerClient client(cfg);
    const auto img = random_image(4, 4, 3, 3);
    RasterImage a, b;
    std::thread ta([&] { a = client.augment("color", img, nlohmann::json::object(), 1); });
    std::thread tb([&] { b = client.augment("color", img, nlohmann::json::object(), 2); });
    ta.join();
    tb.join();
    EXPECT_EQ(a.data()[0], (img.data()[0] + 1) & 0xFF);
    EXPECT_EQ(b.data()[0], (img.data()[0] + 2) & 0xFF);
}

TEST(WorkerClient, ReconnectsAfterWorkerExit) {
    WorkerClient client(fake_config("--die-after 1"));
    const auto img = random_image(4, 4, 3, 4);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto out = client.augment("segment", img, nlohmann::json::object(), s);
        EXPECT_EQ(out.data()[0], (img.data()[0] + s) & 0xFF);
    }
}

TEST(WorkerClient, HangingWorkerTimesOut) {
    auto cfg = fake_config("--hang");
    cfg.timeout_seconds = 0.2;
    cfg.max_retries = 1;
    WorkerClient client(cfg);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(client.capabilities(), WorkerUnreachable);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(WorkerClient, TcpTransport) {
    TcpFakeWorker server;
    auto cfg = RemoteOperatorConfig::from_endpoint("tcp://127.0.0.1:" + std::to_string(server.port()));
    cfg.timeout_seconds = 5.0;
    WorkerClient client(cfg);
    EXPECT_TRUE(client.capabilities().supports("depth"));
    const auto img = random_image(5, 5, 1, 5);
    EXPECT_EQ(client.embed(img).size(), 8u);
}

TEST(RemoteOperators, RegistryDispatchesToWorker) {
    auto client = std::make_shared<WorkerClient>(fake_config());
    const auto caps = client->capabilities();
    OperatorRegistry reg;
    reg.register_remote(OperatorKind("Canny"), client, caps);
    reg.register_remote(OperatorKind("NeRF"), client, caps);
    EXPECT_EQ(reg.descriptor(OperatorKind("Canny")).source, OperatorSource::remote);

    WorkerCapabilities partial{{"canny"}, "fake"};
    OperatorRegistry other;
    EXPECT_THROW(other.register_remote(OperatorKind("Depth"), client, partial), UnknownOperator);

    const auto img = random_image(8, 4, 3, 6);
    RandomStream a(3), b(3);
    const auto x = apply_operator(reg, OperatorKind("NeRF"), img, a);
    const auto y = apply_operator(reg, OperatorKind("NeRF"), img, b);
    EXPECT_EQ(x, y);
    EXPECT_EQ(x.width(), img.width());
}

TEST(RemoteOperators, WorkerRefusalSurfacesAsOperatorError) {
    auto cfg = fake_config();
    cfg.nerf_rotation_degrees = {30};
    auto client = std::make_shared<WorkerClient>(cfg);
    OperatorRegistry reg;
    reg.register_remote(OperatorKind("NeRF"), client, client->capabilities());
    RandomStream rng(0);
    try {
        apply_operator(reg, OperatorKind("NeRF"), random_image(3, 3, 3, 7), rng);
        FAIL();
    } catch (const OperatorError& e) {
        EXPECT_EQ(e.op(), "NeRF");
    }
}
