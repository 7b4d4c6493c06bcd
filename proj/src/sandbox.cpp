#include "preftree/sandbox.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace preftree {

using nlohmann::json;

namespace {

constexpr int kGraceMs = 300;
constexpr int kReplySlackMs = 5000;

std::string_view kind_name(ExecKind k) { return k == ExecKind::Run ? "Run" : "SyntaxCheck"; }

}  // namespace

void validate_request(const ExecRequest& req) {
    if (req.timeout_ms < 1 || req.timeout_ms > kMaxExecTimeoutMs) {
        throw std::invalid_argument("timeout_ms outside [1, 600000]: " + std::to_string(req.timeout_ms));
    }
    if (req.code.size() > kMaxCodeBytes) throw std::invalid_argument("code exceeds 1 MB");
    if (req.memory_mb < 1) throw std::invalid_argument("memory_mb must be positive");
}

json encode_request(const ExecRequest& req) {
    return json{{"id", req.id},        {"kind", kind_name(req.kind)},   {"code", req.code},
                {"stdin", req.stdin_text}, {"timeout_ms", req.timeout_ms}, {"memory_mb", req.memory_mb}};
}

ExecRequest decode_request(const json& j) {
    ExecRequest req;
    req.id = j.at("id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Run") {
        req.kind = ExecKind::Run;
    } else if (kind == "SyntaxCheck") {
        req.kind = ExecKind::SyntaxCheck;
    } else {
        throw std::invalid_argument("unknown kind " + kind);
    }
    req.code = j.at("code").get<std::string>();
    req.stdin_text = j.value("stdin", std::string{});
    req.timeout_ms = j.value("timeout_ms", 10000);
    req.memory_mb = j.value("memory_mb", 512);
    return req;
}

json encode_response(const ExecResponse& r) {
    json j{{"id", r.id},
           {"stdout", r.stdout_text},
           {"stderr", r.stderr_text},
           {"traceback", r.traceback ? json(*r.traceback) : json(nullptr)},
           {"exit_status", r.exit_status},
           {"timed_out", r.timed_out},
           {"duration_ms", r.duration_ms},
           {"syntax_ok", r.syntax_ok ? json(*r.syntax_ok) : json(nullptr)}};
    if (r.error) j["error"] = *r.error;
    return j;
}

ExecResponse decode_response(const json& j) {
    ExecResponse r;
    if (auto it = j.find("id"); it != j.end() && it->is_string()) r.id = it->get<std::string>();
    r.stdout_text = j.value("stdout", std::string{});
    r.stderr_text = j.value("stderr", std::string{});
    if (auto it = j.find("traceback"); it != j.end() && it->is_string()) r.traceback = it->get<std::string>();
    r.exit_status = j.value("exit_status", 0);
    r.timed_out = j.value("timed_out", false);
    r.duration_ms = j.value("duration_ms", 0.0);
    if (auto it = j.find("syntax_ok"); it != j.end() && it->is_boolean()) r.syntax_ok = it->get<bool>();
    if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
        r.error = it->is_string() ? it->get<std::string>() : it->dump();
    }
    return r;
}

ExecResponse StubSandbox::execute(const ExecRequest& req) {
    validate_request(req);
    ++requests_;
    auto resp = handler_(req);
    if (resp.id.empty()) resp.id = req.id;
    return resp;
}

WorkerProcess::WorkerProcess(std::vector<std::string> argv, int startup_timeout_ms) {
    if (argv.empty()) throw SandboxError("empty worker command");
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
        throw SandboxError(std::string("socketpair: ") + std::strerror(errno));
    }
    std::vector<char*> cargv;
    for (auto& a : argv) cargv.push_back(a.data());
    cargv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        throw SandboxError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        ::execvp(cargv[0], cargv.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    pid_ = pid;
    fd_ = sv[0];

    std::string hello;
    try {
        hello = read_line(startup_timeout_ms);
    } catch (...) {
        terminate();
        throw;
    }
    json h;
    try {
        h = json::parse(hello);
    } catch (const json::exception&) {
        terminate();
        throw SandboxError("worker hello is not JSON: " + hello);
    }
    if (!h.is_object() || h.value("version", std::string{}) != kSandboxProtocolVersion) {
        terminate();
        throw SandboxError("worker speaks unsupported protocol: " + hello);
    }
}

WorkerProcess::~WorkerProcess() { terminate(); }

void WorkerProcess::terminate() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    if (pid_ > 0) {
        // Closing stdin lets a well-behaved worker exit; otherwise kill it.
        for (int i = 0; i < 20; ++i) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            ::usleep(5000);
        }
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

void WorkerProcess::write_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw SandboxError(std::string("worker write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string WorkerProcess::read_line(int timeout_ms) {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
        if (left <= 0) throw SandboxError("worker did not answer within " + std::to_string(timeout_ms) + " ms");
        pollfd p{fd_, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw SandboxError(std::string("poll: ") + std::strerror(errno));
        }
        if (rc == 0) continue;
        char buf[65536];
        const auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw SandboxError(std::string("worker read failed: ") + std::strerror(errno));
        }
        if (n == 0) throw SandboxError("worker closed its stream");
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

std::string WorkerProcess::call_raw(const std::string& line, int timeout_ms) {
    if (pid_ <= 0) throw SandboxError("worker is not running");
    write_line(line);
    return read_line(timeout_ms);
}

ExecResponse WorkerProcess::call(const ExecRequest& req) {
    validate_request(req);
    std::string reply;
    try {
        reply = call_raw(encode_request(req).dump(), req.timeout_ms + kGraceMs + kReplySlackMs);
    } catch (const SandboxError&) {
        terminate();
        throw;
    }
    ExecResponse resp;
    try {
        resp = decode_response(json::parse(reply));
    } catch (const std::exception& e) {
        terminate();
        throw SandboxError(std::string("malformed worker reply: ") + e.what());
    }
    if (resp.error) throw SandboxError("worker rejected request: " + *resp.error);
    if (resp.id != req.id) {
        terminate();
        throw SandboxError("worker reply id " + resp.id + " does not echo " + req.id);
    }
    return resp;
}

WorkerPool::WorkerPool(std::vector<std::string> argv, std::size_t size) : argv_(std::move(argv)) {
    if (size == 0) size = 1;
    for (std::size_t i = 0; i < size; ++i) {
        workers_.push_back(std::make_unique<WorkerProcess>(argv_));
        idle_.push_back(i);
    }
}

ExecResponse WorkerPool::execute(const ExecRequest& req) {
    std::size_t slot = 0;
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !idle_.empty(); });
        slot = idle_.back();
        idle_.pop_back();
    }
    auto release = [&] {
        std::lock_guard lock(mu_);
        idle_.push_back(slot);
        cv_.notify_one();
    };
    ExecRequest r = req;
    if (r.id.empty()) r.id = "r" + std::to_string(next_id_++);
    try {
        if (!workers_[slot]->alive()) workers_[slot] = std::make_unique<WorkerProcess>(argv_);
        auto resp = workers_[slot]->call(r);
        release();
        return resp;
    } catch (...) {
        try {
            if (!workers_[slot]->alive()) workers_[slot] = std::make_unique<WorkerProcess>(argv_);
        } catch (...) {
        }
        release();
        throw;
    }
}

}  // namespace preftree
