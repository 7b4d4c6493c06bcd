#include "preftree/config.hpp"

#include <fstream>
#include <set>

#include "preftree/errors.hpp"

namespace preftree {

using nlohmann::json;

namespace {

// Reads one JSON object strictly: every key must be consumed, and every value
// read is logged as an override.
class Section {
public:
    Section(const json* j, std::string prefix, std::vector<std::string>& log)
        : j_(j), prefix_(std::move(prefix)), log_(log) {
        if (j_ && !j_->is_object()) throw ConfigError(where("") + " must be an object");
    }

    bool has(const char* key) const { return j_ && j_->contains(key); }

    template <class T>
    void get(const char* key, T& into) {
        if (!has(key)) return;
        seen_.insert(key);
        const auto& v = (*j_)[key];
        try {
            into = v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": wrong type");
        }
        log_.push_back(where(key) + " = " + v.dump());
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return (*j_)[key];
    }

    Section sub(const char* key) {
        if (!has(key)) return Section(nullptr, where(key), log_);
        seen_.insert(key);
        return Section(&(*j_)[key], where(key), log_);
    }

    std::string where(const std::string& key) const {
        if (key.empty()) return prefix_.empty() ? "config" : prefix_;
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    void finish() const {
        if (!j_) return;
        for (const auto& [k, _] : j_->items()) {
            if (!seen_.count(k)) throw ConfigError("unknown config key " + where(k));
        }
    }

private:
    const json* j_;
    std::string prefix_;
    std::vector<std::string>& log_;
    std::set<std::string> seen_;
};

EndpointConfig parse_endpoint(Section s) {
    EndpointConfig e;
    s.get("kind", e.kind);
    if (e.kind == "http") {
        s.get("base_url", e.http.base_url);
        s.get("model", e.http.model);
        s.get("auth_env", e.http.auth_env);
        s.get("timeout_ms", e.http.timeout_ms);
        if (e.http.base_url.empty() || e.http.model.empty()) {
            throw ConfigError(s.where("") + ": http endpoint needs base_url and model");
        }
        if (e.http.timeout_ms <= 0) throw ConfigError(s.where("timeout_ms") + " must be positive");
    } else if (e.kind == "mock") {
        s.get("model", e.mock.model);
        s.get("correct_probability", e.mock.correct_probability);
        s.get("seed", e.mock.seed);
        if (e.mock.correct_probability < 0 || e.mock.correct_probability > 1) {
            throw ConfigError(s.where("correct_probability") + " must be in [0,1]");
        }
    } else {
        throw ConfigError(s.where("kind") + ": unknown endpoint kind \"" + e.kind + "\"");
    }
    s.finish();
    return e;
}

std::vector<EndpointConfig> parse_endpoint_list(Section& parent, const char* key, std::vector<std::string>& log) {
    std::vector<EndpointConfig> out;
    if (!parent.has(key)) return out;
    const auto& arr = parent.raw(key);
    if (!arr.is_array()) throw ConfigError(parent.where(key) + " must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(parse_endpoint(Section(&arr[i], parent.where(key) + "[" + std::to_string(i) + "]", log)));
    }
    return out;
}

}  // namespace

std::string PipelineConfig::path(const std::string& name) const {
    auto it = paths.find(name);
    if (it == paths.end() || it->second.empty()) throw ConfigError("no path configured for \"" + name + "\"");
    return it->second;
}

PipelineConfig parse_config(const json& j) {
    PipelineConfig cfg;
    auto& log = cfg.overrides;
    Section root(&j, "", log);

    root.get("seed", cfg.seed);
    if (root.has("jobs")) {
        std::size_t jobs = 0;
        root.get("jobs", jobs);
        if (jobs == 0) throw ConfigError("jobs must be at least 1");
        cfg.jobs = jobs;
    }
    if (root.has("prompts_dir")) {
        std::string dir;
        root.get("prompts_dir", dir);
        cfg.prompts_dir = dir;
    }

    {
        auto models = root.sub("models");
        for (const char* role : {"actor", "critic", "judge", "elicitor", "test_generator", "probe"}) {
            if (models.has(role)) cfg.models[role] = parse_endpoint(models.sub(role));
        }
        cfg.tiers = parse_endpoint_list(models, "tiers", log);
        cfg.incorrect_pool = parse_endpoint_list(models, "incorrect_pool", log);
        models.finish();
    }
    {
        auto retry = root.sub("retry");
        retry.get("attempts", cfg.retry.attempts);
        if (retry.has("initial_backoff_ms")) {
            long ms = 0;
            retry.get("initial_backoff_ms", ms);
            if (ms < 0) throw ConfigError("retry.initial_backoff_ms must be non-negative");
            cfg.retry.initial_backoff = std::chrono::milliseconds(ms);
        }
        if (cfg.retry.attempts < 1) throw ConfigError("retry.attempts must be at least 1");
        retry.finish();
    }
    {
        auto s = root.sub("sampling");
        s.get("temperature", cfg.sampling.temperature);
        s.get("top_p", cfg.sampling.top_p);
        s.get("max_tokens", cfg.sampling.max_tokens);
        s.finish();
    }
    {
        auto s = root.sub("sandbox");
        s.get("kind", cfg.sandbox.kind);
        s.get("command", cfg.sandbox.command);
        s.get("pool_size", cfg.sandbox.pool_size);
        s.get("timeout_ms", cfg.sandbox.timeout_ms);
        s.get("memory_mb", cfg.sandbox.memory_mb);
        if (cfg.sandbox.kind != "worker" && cfg.sandbox.kind != "stub") {
            throw ConfigError("sandbox.kind must be \"worker\" or \"stub\"");
        }
        if (cfg.sandbox.pool_size == 0) throw ConfigError("sandbox.pool_size must be at least 1");
        if (cfg.sandbox.timeout_ms <= 0) throw ConfigError("sandbox.timeout_ms must be positive");
        s.finish();
    }
    {
        auto s = root.sub("budget");
        s.get("samples_per_round", cfg.budget.samples_per_round);
        s.get("max_rounds", cfg.budget.max_rounds);
        s.get("max_depth", cfg.max_depth);
        if (cfg.budget.samples_per_round < 1 || cfg.budget.max_rounds < 1) {
            throw ConfigError("budget.samples_per_round and budget.max_rounds must be at least 1");
        }
        if (cfg.max_depth < 1 || cfg.max_depth > kMaxTurns) throw ConfigError("budget.max_depth must be in [1,5]");
        s.finish();
    }
    {
        auto s = root.sub("augment");
        s.get("product_cap", cfg.augment.product_cap);
        s.get("max_pairs", cfg.augment.max_pairs);
        s.get("max_occurrence", cfg.augment.max_occurrence);
        s.finish();
    }
    {
        auto s = root.sub("decontam");
        s.get("n", cfg.decontam.n);
        s.get("min_len", cfg.decontam.min_len);
        if (cfg.decontam.n < 1 || cfg.decontam.min_len < 1) throw ConfigError("decontam.n and min_len must be >= 1");
        if (s.has("test_sets")) {
            auto sets = s.sub("test_sets");
            for (const char* task : {"Math", "Coding", "Logic"}) {
                if (!sets.has(task)) continue;
                std::vector<std::string> files;
                sets.get(task, files);
                cfg.test_sets[parse_task(task)] = std::move(files);
            }
            sets.finish();
        }
        s.get("code_corpus", cfg.code_corpus);
        s.finish();
    }
    {
        auto s = root.sub("select");
        s.get("mathqa_per_pattern", cfg.mathqa_per_pattern);
        s.get("probe_attempts", cfg.probe_attempts);
        if (cfg.probe_attempts < 1) throw ConfigError("select.probe_attempts must be at least 1");
        s.finish();
    }
    {
        auto s = root.sub("losslab");
        auto& l = cfg.losslab;
        s.get("pairs", l.pairs);
        s.get("dim", l.dim);
        s.get("separation", l.separation);
        s.get("steps", l.train.steps);
        s.get("learning_rate", l.train.learning_rate);
        s.get("beta", l.beta);
        s.get("lambda_ratio", l.lambda_ratio);
        s.get("fd_points", l.fd_points);
        if (l.pairs == 0 || l.dim == 0 || l.train.steps < 1) throw ConfigError("losslab sizes must be positive");
        if (!(l.lambda_ratio > 0)) throw ConfigError("losslab.lambda_ratio must be positive");
        s.finish();
    }
    {
        auto s = root.sub("paths");
        if (root.has("paths")) {
            const auto& raw = j.at("paths");
            for (const auto& [k, v] : raw.items()) {
                std::string value;
                s.get(k.c_str(), value);
                cfg.paths[k] = value;
            }
        }
        s.finish();
    }
    root.finish();
    cfg.losslab.train.seed = cfg.seed;
    cfg.augment.seed = cfg.seed;
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + file.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

}  // namespace preftree
