#pragma once

// Pipeline configuration file (JSON). Defaults are the construction constants:
// 20 samples x 3 rounds, depth 5, augmentation caps 10/9/3, 8-gram matching.
// Secrets never appear in the file; endpoints name the environment variable
// that holds their token.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "preftree/decontam.hpp"
#include "preftree/engine.hpp"
#include "preftree/mock.hpp"
#include "preftree/pairs.hpp"
#include "preftree/prefloss.hpp"

namespace preftree {

struct EndpointConfig {
    // "http" or "mock".
    std::string kind = "http";
    EndpointDescriptor http;
    MockSpec mock;
};

struct SandboxConfig {
    // "worker" runs command as a pool of subprocesses; "stub" is the toy interpreter.
    std::string kind = "worker";
    std::vector<std::string> command;
    std::size_t pool_size = 4;
    int timeout_ms = 10000;
    int memory_mb = 512;
};

struct LossLabConfig {
    std::size_t pairs = 1000;
    std::size_t dim = 8;
    double separation = 4.0;
    TrainConfig train;
    double beta = kDefaultBeta;
    double lambda_ratio = kDefaultLambdaRatio;
    std::size_t fd_points = 1000;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::optional<std::size_t> jobs;

    // Roles: actor, critic, judge, elicitor, test_generator, probe.
    std::map<std::string, EndpointConfig> models;
    std::vector<EndpointConfig> tiers;
    std::vector<EndpointConfig> incorrect_pool;
    RetryPolicy retry;
    SamplingParams sampling;

    SandboxConfig sandbox;
    LadderBudget budget;
    int max_depth = kMaxTurns;
    std::optional<std::string> prompts_dir;

    AugmentConfig augment;

    DecontamConfig decontam;
    std::map<Task, std::vector<std::string>> test_sets;
    std::vector<std::string> code_corpus;

    std::size_t mathqa_per_pattern = 5;
    int probe_attempts = 1;

    LossLabConfig losslab;

    // Named file paths: instructions, selected, trees, audit, sft, preference,
    // kept, report, trace, candidates, rewards, winners.
    std::map<std::string, std::string> paths;

    // "key = value" for every setting taken from the file or the command line.
    std::vector<std::string> overrides;

    std::string path(const std::string& name) const;
};

// Throws ConfigError on unknown keys, wrong types or out-of-range values.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& file);

}  // namespace preftree
