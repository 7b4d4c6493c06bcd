#include "preftree/prefloss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "preftree/errors.hpp"
#include "preftree/text.hpp"

namespace preftree {

double log_sigmoid(double x) {
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LossGrad bt_loss(double r_chosen, double r_rejected) {
    const double d = r_chosen - r_rejected;
    const double s = sigmoid(-d);
    return {-log_sigmoid(d), -s, s};
}

LossGrad dr_loss(double r_chosen, double r_rejected) {
    return {-log_sigmoid(r_chosen) - log_sigmoid(-r_rejected), -sigmoid(-r_chosen), sigmoid(r_rejected)};
}

LossGrad dpo_loss(const PolicyPairLogRatio& p, double beta) {
    const double x = beta * (p.chosen - p.rejected);
    const double s = sigmoid(-x);
    return {-log_sigmoid(x), -beta * s, beta * s};
}

LossGrad kto_loss(const PolicyPairLogRatio& p, double beta, double lambda_ratio, double z_ref) {
    if (!(lambda_ratio > 0)) throw ConfigError("KTO lambda ratio must be positive");
    const double lambda_desirable = lambda_ratio;
    const double lambda_undesirable = 1.0;
    const double a = beta * (p.chosen - z_ref);
    const double b = beta * (z_ref - p.rejected);
    LossGrad g;
    g.loss = lambda_desirable * sigmoid(-a) + lambda_undesirable * sigmoid(-b);
    g.d_chosen = -lambda_desirable * beta * sigmoid(a) * sigmoid(-a);
    g.d_rejected = lambda_undesirable * beta * sigmoid(b) * sigmoid(-b);
    return g;
}

LossGrad nca_loss(const PolicyPairLogRatio& p, double beta) {
    const double u = beta * p.chosen;
    const double v = beta * p.rejected;
    LossGrad g;
    g.loss = -log_sigmoid(u) - 0.5 * log_sigmoid(-u) - 0.5 * log_sigmoid(-v);
    g.d_chosen = beta * (-sigmoid(-u) + 0.5 * sigmoid(u));
    g.d_rejected = beta * 0.5 * sigmoid(v);
    return g;
}

double RewardParams::reward(const std::vector<double>& features) const {
    if (features.size() != w.size()) throw std::invalid_argument("feature dimension mismatch");
    double r = b;
    for (std::size_t i = 0; i < w.size(); ++i) r += w[i] * features[i];
    return r;
}

namespace {

ParamGrad example_grad(const PrefExample& ex, const RewardParams& params, bool with_dr) {
    const double rc = params.reward(ex.chosen);
    const double rr = params.reward(ex.rejected);
    auto g = bt_loss(rc, rr);
    if (with_dr) {
        const auto d = dr_loss(rc, rr);
        g.loss += d.loss;
        g.d_chosen += d.d_chosen;
        g.d_rejected += d.d_rejected;
    }
    ParamGrad out;
    out.loss = g.loss;
    out.dw.resize(params.w.size());
    for (std::size_t i = 0; i < out.dw.size(); ++i) out.dw[i] = g.d_chosen * ex.chosen[i] + g.d_rejected * ex.rejected[i];
    out.db = g.d_chosen + g.d_rejected;
    return out;
}

// Neumaier compensated sum.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace

ParamGrad ultra_loss(const PrefExample& ex, const RewardParams& params) {
    return example_grad(ex, params, ex.source == ExampleSource::TreePipeline);
}

ParamGrad batch_loss(const std::vector<PrefExample>& data, const RewardParams& params, Objective objective) {
    Accumulator loss, db;
    std::vector<Accumulator> dw(params.w.size());
    for (const auto& ex : data) {
        auto g = objective == Objective::Ultra ? ultra_loss(ex, params) : example_grad(ex, params, false);
        loss.add(g.loss);
        db.add(g.db);
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i].add(g.dw[i]);
    }
    const double n = data.empty() ? 1.0 : static_cast<double>(data.size());
    ParamGrad out;
    out.loss = loss.value() / n;
    out.db = db.value() / n;
    for (const auto& a : dw) out.dw.push_back(a.value() / n);
    return out;
}

TrainResult train_toy_rm(const std::vector<PrefExample>& data, const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("training set is empty");
    const std::size_t dim = data.front().chosen.size();
    for (const auto& ex : data) {
        if (ex.chosen.size() != dim || ex.rejected.size() != dim) {
            throw std::invalid_argument("inconsistent feature dimension");
        }
    }
    Rng rng(cfg.seed);
    TrainResult result;
    auto& p = result.params;
    p.w.resize(dim);
    for (auto& x : p.w) x = cfg.init_scale * rng.normal();
    p.b = cfg.bias_init;

    auto& t = result.trace;
    for (int step = 0; step < cfg.steps; ++step) {
        Accumulator c, r;
        for (const auto& ex : data) {
            c.add(p.reward(ex.chosen));
            r.add(p.reward(ex.rejected));
        }
        const double n = static_cast<double>(data.size());
        t.chosen_mean.push_back(c.value() / n);
        t.rejected_mean.push_back(r.value() / n);
        t.margin.push_back(t.chosen_mean.back() - t.rejected_mean.back());

        const auto g = batch_loss(data, p, cfg.objective);
        if (!std::isfinite(g.loss)) throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
        t.loss.push_back(g.loss);
        t.bias_grad.push_back(g.db);
        for (std::size_t i = 0; i < dim; ++i) p.w[i] -= cfg.learning_rate * g.dw[i];
        p.b -= cfg.learning_rate * g.db;
        bool finite = std::isfinite(p.b);
        for (double x : p.w) finite = finite && std::isfinite(x);
        if (!finite) throw DivergenceError(step, "non-finite parameters after step " + std::to_string(step));
    }
    return result;
}

namespace {

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::sqrt(std::max({na, nb, 1e-300}));
    return std::sqrt(diff) / scale;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

template <class F>
double check_pair(F f, double x, double y, double h) {
    const auto g = f(x, y);
    const double dx = (f(x + h, y).loss - f(x - h, y).loss) / (2 * h);
    const double dy = (f(x, y + h).loss - f(x, y - h).loss) / (2 * h);
    return rel_error({g.d_chosen, g.d_rejected}, {dx, dy});
}

}  // namespace

GradientCheck check_gradients(std::size_t points, Rng& rng, double h, double beta, double lambda_ratio) {
    GradientCheck out;
    auto note = [&](double e) { out.max_rel_error = std::max(out.max_rel_error, e); };
    for (std::size_t p = 0; p < points; ++p) {
        const double rc = uniform_in(rng, -4, 4), rr = uniform_in(rng, -4, 4);
        note(check_pair(bt_loss, rc, rr, h));
        note(check_pair(dr_loss, rc, rr, h));
        const double dc = uniform_in(rng, -20, 20), dr = uniform_in(rng, -20, 20);
        note(check_pair([&](double a, double b) { return dpo_loss({a, b}, beta); }, dc, dr, h));
        note(check_pair([&](double a, double b) { return kto_loss({a, b}, beta, lambda_ratio); }, dc, dr, h));
        note(check_pair([&](double a, double b) { return nca_loss({a, b}, beta); }, dc, dr, h));

        const std::size_t dim = 4;
        PrefExample ex;
        RewardParams params;
        for (std::size_t i = 0; i < dim; ++i) {
            ex.chosen.push_back(uniform_in(rng, -1, 1));
            ex.rejected.push_back(uniform_in(rng, -1, 1));
            params.w.push_back(uniform_in(rng, -1, 1));
        }
        params.b = uniform_in(rng, -1, 1);
        ex.source = rng.bernoulli(0.5) ? ExampleSource::TreePipeline : ExampleSource::General;
        const auto g = ultra_loss(ex, params);
        std::vector<double> analytic = g.dw, numeric;
        analytic.push_back(g.db);
        for (std::size_t i = 0; i <= dim; ++i) {
            auto plus = params, minus = params;
            (i < dim ? plus.w[i] : plus.b) += h;
            (i < dim ? minus.w[i] : minus.b) -= h;
            numeric.push_back((ultra_loss(ex, plus).loss - ultra_loss(ex, minus).loss) / (2 * h));
        }
        note(rel_error(analytic, numeric));
        ++out.points;
    }
    return out;
}

void write_trace_csv(const RewardTrace& trace, std::ostream& out) {
    out << "step,chosen_mean,rejected_mean,margin\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.margin.size(); ++i) {
        out << i << ',' << trace.chosen_mean[i] << ',' << trace.rejected_mean[i] << ',' << trace.margin[i] << '\n';
    }
}

std::vector<PrefExample> synthetic_pairs(std::size_t count, std::size_t dim, double separation, Rng& rng,
                                         bool bias_feature, ExampleSource source) {
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    std::vector<double> dir(dim);
    double norm = 0.0;
    while (norm < 1e-12) {
        norm = 0.0;
        for (auto& x : dir) {
            x = rng.normal();
            norm += x * x;
        }
    }
    norm = std::sqrt(norm);
    for (auto& x : dir) x /= norm;

    const double margin = separation / 4;
    auto draw = [&](double sign) {
        std::vector<double> v(dim);
        double proj = 0.0;
        do {
            proj = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                v[i] = sign * dir[i] * separation / 2 + rng.normal();
                proj += v[i] * dir[i];
            }
        } while (sign * proj < margin);
        if (bias_feature) v.push_back(1.0);
        return v;
    };

    std::vector<PrefExample> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        PrefExample ex;
        ex.chosen = draw(1.0);
        ex.rejected = draw(-1.0);
        ex.source = source;
        out.push_back(std::move(ex));
    }
    return out;
}

std::size_t rerank(const std::vector<double>& rewards) {
    if (rewards.empty()) throw std::invalid_argument("rerank: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rewards.size(); ++i) {
        if (rewards[i] > rewards[best]) best = i;
    }
    return best;
}

namespace {

std::string normalize_answer(const std::string& a) {
    auto t = to_lower(trim(a));
    if (auto v = parse_number(t)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", *v == 0.0 ? 0.0 : *v);
        return buf;
    }
    return t;
}

}  // namespace

std::string self_consistency(const std::vector<std::string>& answers) {
    if (answers.empty()) throw std::invalid_argument("self_consistency: no answers");
    std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // key -> (count, first index)
    for (std::size_t i = 0; i < answers.size(); ++i) {
        auto [it, fresh] = groups.try_emplace(normalize_answer(answers[i]), 0, i);
        ++it->second.first;
    }
    std::size_t best_count = 0;
    std::size_t best_first = 0;
    for (const auto& [_, g] : groups) {
        if (g.first > best_count || (g.first == best_count && g.second < best_first)) {
            best_count = g.first;
            best_first = g.second;
        }
    }
    return answers[best_first];
}

bool pass_at_n(const std::vector<bool>& results, std::size_t n) {
    const auto k = std::min(n, results.size());
    for (std::size_t i = 0; i < k; ++i) {
        if (results[i]) return true;
    }
    return false;
}

double pass_at_n_rate(const std::vector<std::vector<bool>>& results, std::size_t n) {
    if (results.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : results) hits += pass_at_n(r, n) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double rerank_accuracy(const std::vector<std::vector<double>>& rewards, const std::vector<std::vector<bool>>& correct,
                       std::size_t n) {
    if (rewards.size() != correct.size()) throw std::invalid_argument("rerank_accuracy: size mismatch");
    if (rewards.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (rewards[i].size() != correct[i].size()) throw std::invalid_argument("rerank_accuracy: size mismatch");
        const auto k = std::min(n, rewards[i].size());
        if (k == 0) continue;
        const std::vector<double> head(rewards[i].begin(), rewards[i].begin() + static_cast<std::ptrdiff_t>(k));
        hits += correct[i][rerank(head)] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(rewards.size());
}

}  // namespace preftree
