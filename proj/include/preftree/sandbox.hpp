#pragma once

// Client side of the code-execution worker protocol: newline-delimited JSON
// over the worker's stdio, a {"version":"v1"} hello line at startup, then one
// response line per request line.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace preftree {

inline constexpr const char* kSandboxProtocolVersion = "v1";
inline constexpr int kMaxExecTimeoutMs = 600000;
inline constexpr std::size_t kMaxCodeBytes = 1 << 20;

enum class ExecKind { Run, SyntaxCheck };

struct ExecRequest {
    std::string id;
    ExecKind kind = ExecKind::Run;
    std::string code;
    std::string stdin_text;
    int timeout_ms = 10000;
    int memory_mb = 512;
};

struct ExecResponse {
    std::string id;
    std::string stdout_text;
    std::string stderr_text;
    std::optional<std::string> traceback;
    int exit_status = 0;
    bool timed_out = false;
    double duration_ms = 0;
    std::optional<bool> syntax_ok;
    // Set when the worker rejected the request line itself.
    std::optional<std::string> error;
};

// Worker died, hung past its deadline, or broke protocol. Distinct from a
// program traceback, which is an ordinary ExecResponse.
class SandboxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Throws std::invalid_argument when limits are out of range.
void validate_request(const ExecRequest& req);

nlohmann::json encode_request(const ExecRequest& req);
ExecRequest decode_request(const nlohmann::json& j);
nlohmann::json encode_response(const ExecResponse& resp);
ExecResponse decode_response(const nlohmann::json& j);

// Thread-safe execution backend.
class Sandbox {
public:
    virtual ~Sandbox() = default;
    virtual ExecResponse execute(const ExecRequest& req) = 0;
};

using SandboxPtr = std::shared_ptr<Sandbox>;

// In-process canned backend for tests and dry runs.
class StubSandbox final : public Sandbox {
public:
    using Handler = std::function<ExecResponse(const ExecRequest&)>;

    explicit StubSandbox(Handler handler) : handler_(std::move(handler)) {}

    ExecResponse execute(const ExecRequest& req) override;
    std::uint64_t requests() const { return requests_.load(); }

private:
    Handler handler_;
    std::atomic<std::uint64_t> requests_{0};
};

// One worker subprocess serving one serial request stream. Not thread-safe.
class WorkerProcess {
public:
    explicit WorkerProcess(std::vector<std::string> argv, int startup_timeout_ms = 10000);
    ~WorkerProcess();
    WorkerProcess(const WorkerProcess&) = delete;
    WorkerProcess& operator=(const WorkerProcess&) = delete;

    ExecResponse call(const ExecRequest& req);
    // Sends a raw line and returns the raw reply line; for protocol tests.
    std::string call_raw(const std::string& line, int timeout_ms);
    bool alive() const { return pid_ > 0; }
    int pid() const { return pid_; }

private:
    std::string read_line(int timeout_ms);
    void write_line(const std::string& line);
    void terminate();

    int pid_ = -1;
    int fd_ = -1;
    std::string buffer_;
};

// Pool of worker subprocesses; each call checks one out exclusively. A worker
// that fails is replaced before the error propagates.
class WorkerPool final : public Sandbox {
public:
    WorkerPool(std::vector<std::string> argv, std::size_t size);

    ExecResponse execute(const ExecRequest& req) override;
    std::size_t size() const { return workers_.size(); }

private:
    std::vector<std::string> argv_;
    std::vector<std::unique_ptr<WorkerProcess>> workers_;
    std::vector<std::size_t> idle_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace preftree
