#include <atomic>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "preftree/model_client.hpp"

using namespace preftree;
using nlohmann::json;

namespace {

// Local chat-completion server; the handler decides each reply.
class FakeServer {
public:
    explicit FakeServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json reply_with(const std::vector<std::string>& texts) {
    json choices = json::array();
    for (const auto& t : texts) choices.push_back({{"index", choices.size()}, {"message", {{"role", "assistant"}, {"content", t}}}});
    return {{"choices", choices}};
}

}  // namespace

TEST_CASE("request body follows the chat-completion shape") {
    SamplingParams p;
    p.n = 3;
    p.temperature = 0.5;
    const auto j = make_chat_request("m", {{"system", "s"}, {"user", "u"}}, p);
    CHECK(j["model"] == "m");
    CHECK(j["messages"].size() == 2);
    CHECK(j["messages"][1]["role"] == "user");
    CHECK(j["messages"][1]["content"] == "u");
    CHECK(j["n"] == 3);
    CHECK(j["temperature"] == 0.5);
    CHECK(j.contains("top_p"));
    CHECK(j.contains("max_tokens"));
}

TEST_CASE("response parsing checks choice count and content") {
    CHECK(parse_chat_response(reply_with({"a", "b"}), 2) == std::vector<std::string>{"a", "b"});
    CHECK_THROWS_AS(parse_chat_response(reply_with({"a"}), 2), ClientError);
    CHECK_THROWS_AS(parse_chat_response(json{{"nope", 1}}, 1), ClientError);
    CHECK_THROWS_AS(parse_chat_response(json{{"choices", {{{"message", {{"content", 5}}}}}}}, 1), ClientError);
}

TEST_CASE("http client against a local server") {
    std::atomic<int> hits{0};
    std::string seen_auth;
    json seen_body;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        seen_auth = req.get_header_value("Authorization");
        seen_body = json::parse(req.body);
        const int n = seen_body["n"];
        std::vector<std::string> texts;
        for (int i = 0; i < n; ++i) texts.push_back("answer " + std::to_string(i));
        res.set_content(reply_with(texts).dump(), "application/json");
    });
    ::setenv("PREFTREE_TEST_TOKEN", "sekrit", 1);
    HttpModelClient client({server.base_url(), "tiny", "PREFTREE_TEST_TOKEN", 5000});
    SamplingParams p;
    p.n = 2;
    const auto out = client.complete({{"user", "hi"}}, p);
    CHECK(out == std::vector<std::string>{"answer 0", "answer 1"});
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_body["model"] == "tiny");
    CHECK(seen_body["messages"][0]["content"] == "hi");
    CHECK(hits == 1);
}

TEST_CASE("status codes map to transport and client errors") {
    std::atomic<int> status{500};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        res.status = status;
        res.set_content(status == 200 ? json{{"choices", json::array()}}.dump() : "err", "application/json");
    });
    HttpModelClient client({server.base_url(), "m", "", 5000});
    SamplingParams p;
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, p), TransportError);
    status = 429;
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, p), TransportError);
    status = 400;
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, p), ClientError);
    status = 200;
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, p), ClientError);
}

TEST_CASE("empty completion is a hard error") {
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(reply_with({""}).dump(), "application/json");
    });
    HttpModelClient client({server.base_url(), "m", "", 5000});
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, {}), ClientError);
}

TEST_CASE("unreachable endpoint is a transport error") {
    HttpModelClient client({"http://127.0.0.1:1/v1", "m", "", 500});
    CHECK_THROWS_AS(client.complete({{"user", "x"}}, {}), TransportError);
    CHECK_THROWS_AS(HttpModelClient({"localhost:80", "m", "", 500}), ClientError);
}

TEST_CASE("retrying client: bounded retries with doubling backoff") {
    int failures_left = 2;
    auto flaky = std::make_shared<ScriptedClient>("m", [&](const auto&, const auto& p, std::uint64_t) {
        if (failures_left-- > 0) throw TransportError("down");
        return std::vector<std::string>(static_cast<std::size_t>(p.n), "ok");
    });
    std::vector<long> sleeps;
    RetryingClient retry(flaky, {3, std::chrono::milliseconds(100)},
                         [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CHECK(retry.complete({{"user", "x"}}, {}) == std::vector<std::string>{"ok"});
    CHECK(sleeps == std::vector<long>{100, 200});
    CHECK(retry.retries() == 2);

    failures_left = 10;
    CHECK_THROWS_AS(retry.complete({{"user", "y"}}, {}), TransportError);
    CHECK(retry.retries() == 4);

    auto broken = std::make_shared<ScriptedClient>("m", [&](const auto&, const auto&, std::uint64_t) -> std::vector<std::string> {
        throw ClientError("bad request");
    });
    RetryingClient no_retry(broken, {5, std::chrono::milliseconds(1)}, [](auto) {});
    CHECK_THROWS_AS(no_retry.complete({{"user", "x"}}, {}), ClientError);
    CHECK(no_retry.retries() == 0);
}

TEST_CASE("retrying client over a real flaky server") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 503;
            return;
        }
        res.set_content(reply_with({"fine"}).dump(), "application/json");
    });
    RetryingClient c(std::make_shared<HttpModelClient>(EndpointDescriptor{server.base_url(), "m", "", 5000}),
                     {3, std::chrono::milliseconds(1)});
    CHECK(c.complete({{"user", "x"}}, {}) == std::vector<std::string>{"fine"});
    CHECK(hits == 2);
}

TEST_CASE("scripted client ordinals are per conversation") {
    std::vector<std::uint64_t> ordinals;
    ScriptedClient c("m", [&](const auto&, const auto& p, std::uint64_t o) {
        ordinals.push_back(o);
        return std::vector<std::string>(static_cast<std::size_t>(p.n), "x");
    });
    c.complete({{"user", "a"}}, {});
    c.complete({{"user", "b"}}, {});
    c.complete({{"user", "a"}}, {});
    CHECK(ordinals == std::vector<std::uint64_t>{0, 0, 1});
    CHECK(c.calls() == 3);
    ScriptedClient wrong("m", [](const auto&, const auto&, std::uint64_t) { return std::vector<std::string>{}; });
    CHECK_THROWS_AS(wrong.complete({{"user", "a"}}, {}), ClientError);
}

TEST_CASE("conversation digest separates roles and boundaries") {
    CHECK(conversation_digest({{"user", "ab"}}) != conversation_digest({{"user", "a"}, {"user", "b"}}));
    CHECK(conversation_digest({{"user", "a"}}) != conversation_digest({{"system", "a"}}));
    CHECK(conversation_digest({{"user", "a"}}) == conversation_digest({{"user", "a"}}));
}
