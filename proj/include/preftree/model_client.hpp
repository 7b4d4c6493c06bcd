#pragma once

// Chat-completion clients. HttpModelClient speaks the common
// {model, messages, temperature, top_p, n, max_tokens} -> {choices:[{message:{content}}]}
// protocol; ScriptedClient is an in-process stand-in driven by a callback.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace preftree {

struct ChatMessage {
    std::string role;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct SamplingParams {
    double temperature = 0.8;
    double top_p = 0.95;
    int n = 1;
    int max_tokens = 2048;
};

// Network failure, 5xx or 429: worth retrying.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Anything else: malformed reply, wrong choice count, empty completion, 4xx.
class ClientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelClient {
public:
    virtual ~ModelClient() = default;

    // Exactly params.n completions, or throws.
    virtual std::vector<std::string> complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) = 0;
    virtual const std::string& model() const = 0;
};

using ClientPtr = std::shared_ptr<ModelClient>;

nlohmann::json make_chat_request(const std::string& model, const std::vector<ChatMessage>& messages,
                                 const SamplingParams& params);

// Throws ClientError unless the reply carries exactly `expected` choices with string content.
std::vector<std::string> parse_chat_response(const nlohmann::json& reply, int expected);

struct EndpointDescriptor {
    std::string base_url;  // e.g. http://127.0.0.1:8000/v1
    std::string model;
    std::string auth_env;  // name of the environment variable holding the bearer token
    int timeout_ms = 120000;
};

class HttpModelClient final : public ModelClient {
public:
    explicit HttpModelClient(EndpointDescriptor endpoint);

    std::vector<std::string> complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) override;
    const std::string& model() const override { return endpoint_.model; }

private:
    EndpointDescriptor endpoint_;
    std::string scheme_host_port_;
    std::string path_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

// Retries TransportError with exponential backoff; other errors pass through.
class RetryingClient final : public ModelClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingClient(ClientPtr inner, RetryPolicy policy = {}, Sleeper sleeper = {});

    std::vector<std::string> complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) override;
    const std::string& model() const override { return inner_->model(); }

    // Total retries performed over the client's lifetime.
    int retries() const { return retries_.load(); }

private:
    ClientPtr inner_;
    RetryPolicy policy_;
    Sleeper sleeper_;
    std::atomic<int> retries_{0};
};

// Responder receives the conversation, the sampling params and a per-conversation
// call ordinal (0 for the first time this exact message list is seen). Outputs are
// thus independent of how concurrent trees interleave.
class ScriptedClient final : public ModelClient {
public:
    using Responder =
        std::function<std::vector<std::string>(const std::vector<ChatMessage>&, const SamplingParams&, std::uint64_t)>;

    ScriptedClient(std::string model, Responder responder);

    std::vector<std::string> complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) override;
    const std::string& model() const override { return model_; }

    std::uint64_t calls() const { return calls_.load(); }

private:
    std::string model_;
    Responder responder_;
    std::mutex mu_;
    std::unordered_map<std::uint64_t, std::uint64_t> seen_;
    std::atomic<std::uint64_t> calls_{0};
};

// Stable 64-bit digest of a message list.
std::uint64_t conversation_digest(const std::vector<ChatMessage>& messages);

}  // namespace preftree
