#include "preftree/model_client.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "preftree/hash.hpp"

namespace preftree {

using nlohmann::json;

json make_chat_request(const std::string& model, const std::vector<ChatMessage>& messages, const SamplingParams& params) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
    return json{{"model", model},
                {"messages", msgs},
                {"temperature", params.temperature},
                {"top_p", params.top_p},
                {"n", params.n},
                {"max_tokens", params.max_tokens}};
}

std::vector<std::string> parse_chat_response(const json& reply, int expected) {
    if (!reply.is_object() || !reply.contains("choices") || !reply["choices"].is_array()) {
        throw ClientError("reply has no choices array");
    }
    const auto& choices = reply["choices"];
    if (static_cast<int>(choices.size()) != expected) {
        throw ClientError("expected " + std::to_string(expected) + " choices, got " + std::to_string(choices.size()));
    }
    std::vector<std::string> out;
    out.reserve(choices.size());
    for (const auto& c : choices) {
        const json* content = nullptr;
        if (c.contains("message") && c["message"].is_object() && c["message"].contains("content")) {
            content = &c["message"]["content"];
        }
        if (!content || !content->is_string()) throw ClientError("choice without string message.content");
        out.push_back(content->get<std::string>());
    }
    return out;
}

HttpModelClient::HttpModelClient(EndpointDescriptor endpoint) : endpoint_(std::move(endpoint)) {
    const auto& url = endpoint_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ClientError("base_url lacks a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::vector<std::string> HttpModelClient::complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) {
    httplib::Client cli(scheme_host_port_);
    const auto secs = endpoint_.timeout_ms / 1000;
    const auto usecs = (endpoint_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!endpoint_.auth_env.empty()) {
        if (const char* token = std::getenv(endpoint_.auth_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }
    const auto body = make_chat_request(endpoint_.model, messages, params).dump();
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) throw TransportError("POST " + scheme_host_port_ + path_ + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint_.model);
    }
    if (res->status != 200) throw ClientError("HTTP " + std::to_string(res->status) + ": " + res->body);

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception& e) {
        throw ClientError(std::string("reply is not JSON: ") + e.what());
    }
    auto texts = parse_chat_response(reply, params.n);
    for (const auto& t : texts) {
        if (t.empty()) throw ClientError("empty completion from " + endpoint_.model);
    }
    return texts;
}

RetryingClient::RetryingClient(ClientPtr inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (policy_.attempts < 1) policy_.attempts = 1;
}

std::vector<std::string> RetryingClient::complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) {
    auto backoff = policy_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->complete(messages, params);
        } catch (const TransportError&) {
            if (attempt >= policy_.attempts) throw;
            ++retries_;
            sleeper_(backoff);
            backoff *= 2;
        }
    }
}

std::uint64_t conversation_digest(const std::vector<ChatMessage>& messages) {
    std::string key;
    for (const auto& m : messages) {
        key += m.role;
        key.push_back('\x1e');
        key += m.content;
        key.push_back('\x1f');
    }
    return hash64(key);
}

ScriptedClient::ScriptedClient(std::string model, Responder responder)
    : model_(std::move(model)), responder_(std::move(responder)) {}

std::vector<std::string> ScriptedClient::complete(const std::vector<ChatMessage>& messages, const SamplingParams& params) {
    ++calls_;
    std::uint64_t ordinal = 0;
    {
        std::lock_guard lock(mu_);
        ordinal = seen_[conversation_digest(messages)]++;
    }
    auto texts = responder_(messages, params, ordinal);
    if (static_cast<int>(texts.size()) != params.n) {
        throw ClientError(model_ + ": scripted responder returned " + std::to_string(texts.size()) + " of " +
                          std::to_string(params.n) + " completions");
    }
    for (const auto& t : texts) {
        if (t.empty()) throw ClientError("empty completion from " + model_);
    }
    return texts;
}

}  // namespace preftree
