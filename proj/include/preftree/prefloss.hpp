#pragma once

// Preference objectives on scalar rewards and implicit-reward log-ratios, a
// linear toy reward model trained by full-batch gradient descent, and
// best-of-N reranking helpers.

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "preftree/rng.hpp"

namespace preftree {

// Stable log(sigmoid(x)).
double log_sigmoid(double x);
double sigmoid(double x);

struct LossGrad {
    double loss = 0.0;
    // Partial derivatives w.r.t. the chosen and rejected inputs.
    double d_chosen = 0.0;
    double d_rejected = 0.0;
};

// Pairwise Bradley-Terry: -log sigmoid(r_c - r_r).
LossGrad bt_loss(double r_chosen, double r_rejected);

// Direct reward term: -log sigmoid(r_c) - log sigmoid(-r_r).
LossGrad dr_loss(double r_chosen, double r_rejected);

// Inputs for the policy-side losses: policy minus reference log-probability.
struct PolicyPairLogRatio {
    double chosen = 0.0;
    double rejected = 0.0;
};

inline constexpr double kDefaultBeta = 0.1;
inline constexpr double kDefaultLambdaRatio = 1.33;

// -log sigmoid(beta * (chosen - rejected)).
LossGrad dpo_loss(const PolicyPairLogRatio& p, double beta = kDefaultBeta);

// Fixed-reference form:
//   lambda_d * (1 - sigmoid(beta*(chosen - z_ref))) + lambda_u * (1 - sigmoid(beta*(z_ref - rejected)))
// with lambda_u = 1 and lambda_d = lambda_ratio. Throws ConfigError when lambda_ratio <= 0.
LossGrad kto_loss(const PolicyPairLogRatio& p, double beta = kDefaultBeta, double lambda_ratio = kDefaultLambdaRatio,
                  double z_ref = 0.0);

// Pairwise NCA with implicit rewards u = beta*chosen, v = beta*rejected:
//   -log sigmoid(u) - 0.5 * log sigmoid(-u) - 0.5 * log sigmoid(-v)
LossGrad nca_loss(const PolicyPairLogRatio& p, double beta = kDefaultBeta);

// Implicit rewards reported by the DPO family.
inline double implicit_reward(double log_ratio, double beta = kDefaultBeta) { return beta * log_ratio; }

enum class ExampleSource { TreePipeline, General };
enum class Objective { Ultra, BradleyTerry };

struct PrefExample {
    std::vector<double> chosen;
    std::vector<double> rejected;
    ExampleSource source = ExampleSource::TreePipeline;
};

struct RewardParams {
    std::vector<double> w;
    double b = 0.0;

    double reward(const std::vector<double>& features) const;
};

struct ParamGrad {
    double loss = 0.0;
    std::vector<double> dw;
    double db = 0.0;
};

// Tree-pipeline examples: BT + DR. General examples: BT only.
ParamGrad ultra_loss(const PrefExample& ex, const RewardParams& params);

// Mean loss and gradient over the dataset under the objective.
ParamGrad batch_loss(const std::vector<PrefExample>& data, const RewardParams& params, Objective objective);

struct TrainConfig {
    Objective objective = Objective::Ultra;
    double learning_rate = 0.1;
    int steps = 200;
    std::uint64_t seed = 0;
    // Standard deviation of the initial weights; the bias starts at bias_init.
    double init_scale = 0.01;
    double bias_init = 0.0;
};

struct RewardTrace {
    std::vector<double> chosen_mean;
    std::vector<double> rejected_mean;
    std::vector<double> margin;
    std::vector<double> loss;
    // Bias gradient per step.
    std::vector<double> bias_grad;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int step, const std::string& what) : std::runtime_error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

struct TrainResult {
    RewardParams params;
    RewardTrace trace;
};

// Full-batch gradient descent; the trace records the rewards before each update.
// Throws DivergenceError on a non-finite loss or parameter.
TrainResult train_toy_rm(const std::vector<PrefExample>& data, const TrainConfig& cfg);

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t points = 0;
};

// Central differences with step h at random points for every pair loss and
// for the toy-model parameter gradient. Error per point is
// |analytic - numeric| / max(|analytic|, |numeric|) over the gradient vector.
// Rewards are drawn from [-4, 4] and log-ratios from [-20, 20].
GradientCheck check_gradients(std::size_t points, Rng& rng, double h = 1e-5, double beta = kDefaultBeta,
                              double lambda_ratio = kDefaultLambdaRatio);

// CSV with header step,chosen_mean,rejected_mean,margin.
void write_trace_csv(const RewardTrace& trace, std::ostream& out);

// Gaussian clusters: chosen features around +separation/2 on a random unit
// direction, rejected around -separation/2, unit variance. Draws are redone
// until chosen and rejected fall on opposite sides of the hyperplane through
// the origin (margin separation/4), so the set is separable. When
// bias_feature is set, a constant 1 coordinate is appended on both sides.
std::vector<PrefExample> synthetic_pairs(std::size_t count, std::size_t dim, double separation, Rng& rng,
                                         bool bias_feature = false,
                                         ExampleSource source = ExampleSource::TreePipeline);

// Index of the highest reward; ties go to the lowest index. Empty input throws.
std::size_t rerank(const std::vector<double>& rewards);

// Majority answer after trim/lowercase/numeric normalization; ties go to the
// answer seen first. Empty input throws.
std::string self_consistency(const std::vector<std::string>& answers);

// True iff any of the first n results is correct.
bool pass_at_n(const std::vector<bool>& results, std::size_t n);
double pass_at_n_rate(const std::vector<std::vector<bool>>& results, std::size_t n);

// Fraction of instructions whose reranked winner among the first n candidates is correct.
double rerank_accuracy(const std::vector<std::vector<double>>& rewards, const std::vector<std::vector<bool>>& correct,
                       std::size_t n);

}  // namespace preftree
