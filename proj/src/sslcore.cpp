#include "cmatch/sslcore.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cmatch {

void HyperParams::validate(std::size_t classes) const {
    auto fail = [](const std::string& msg) { throw ConfigError("hyperparameters: " + msg); };
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (num_augmentations < 1) fail("num_augmentations (K) must be >= 1");
    if (classes >= 2 && !(threshold > 1.0 / static_cast<double>(classes))) {
        fail("threshold must exceed 1/C = " + std::to_string(1.0 / static_cast<double>(classes)));
    }
    if (!(temperature > 0.0)) fail("temperature must be > 0");
    if (!(alpha > 0.0)) fail("alpha must be > 0");
    if (!(unlabeled_weight >= 0.0)) fail("unlabeled_weight must be >= 0");
    if (rampup_length < 1) fail("rampup_length must be >= 1");
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (max_seq_len < 1) fail("max_seq_len must be >= 1");
    if (!(augment_strength > 0.0 && augment_strength <= 1.0)) fail("augment_strength must be in (0, 1]");
    if (!(consistency_weight >= 0.0)) fail("consistency_weight must be >= 0");
}

ProbDist sharpen(std::span<const double> p, double temperature) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("sharpen: temperature must be positive");
    }
    // Computed in log space relative to the largest entry so that tiny T does not underflow.
    const double inv_t = 1.0 / temperature;
    const double top = *std::max_element(p.begin(), p.end());
    ProbDist out(p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = p[i] > 0.0 ? std::exp(inv_t * (std::log(p[i]) - std::log(top))) : 0.0;
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

ProbDist average_predictions(std::span<const ProbDist> preds) {
    if (preds.empty()) {
        throw std::invalid_argument("average_predictions: empty list");
    }
    ProbDist out(preds.front().size(), 0.0);
    for (const ProbDist& p : preds) {
        if (p.size() != out.size()) {
            throw std::invalid_argument("average_predictions: length mismatch");
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += p[i];
        }
    }
    const double inv_k = 1.0 / static_cast<double>(preds.size());
    for (double& v : out) {
        v *= inv_k;
    }
    return out;
}

std::optional<ProbDist> select_pseudo_label(std::span<const double> q, double threshold,
                                            SelectMode mode) {
    const std::size_t top = argmax(q);
    if (q[top] < threshold) {
        return std::nullopt;
    }
    if (mode.kind == SelectMode::Kind::sharpen) {
        return sharpen(q, mode.temperature);
    }
    return one_hot(top, q.size());
}

MixCoefficient MixCoefficient::from_raw(double raw) { return {raw, std::max(raw, 1.0 - raw)}; }

double sample_beta(double alpha, double beta, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(alpha, 1.0);
    std::gamma_distribution<double> gb(beta, 1.0);
    for (;;) {
        const double x = ga(rng);
        const double y = gb(rng);
        if (x + y > 0.0) {
            return x / (x + y);
        }
    }
}

MixCoefficient draw_mix_coefficient(double alpha, std::mt19937_64& rng) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("draw_mix_coefficient: alpha must be positive");
    }
    return MixCoefficient::from_raw(sample_beta(alpha, alpha, rng));
}

ProbDist mix_targets(std::span<const double> y_i, std::span<const double> y_j, double lambda) {
    if (y_i.size() != y_j.size()) {
        throw std::invalid_argument("mix_targets: length mismatch");
    }
    ProbDist out(y_i.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = lambda * y_i[c] + (1.0 - lambda) * y_j[c];
    }
    return out;
}

double consistency_loss(std::span<const double> p_a, std::span<const double> p_b) {
    if (p_a.size() != p_b.size()) {
        throw std::invalid_argument("consistency_loss: length mismatch");
    }
    return l2_prob_loss(p_a, p_b);
}

double rampup_weight(std::size_t iteration, std::size_t ramp_length, double max_weight) {
    if (ramp_length == 0) {
        return max_weight;
    }
    const double progress =
        std::min(1.0, static_cast<double>(iteration) / static_cast<double>(ramp_length));
    return max_weight * progress;
}

double psl_unlabeled_loss(std::span<const PslTerm> batch, double threshold) {
    if (batch.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const PslTerm& term : batch) {
        const std::size_t top = argmax(term.guess);
        if (term.guess[top] > threshold) {
            total += cross_entropy_soft(one_hot(top, term.guess.size()), term.prediction);
        }
    }
    return total / static_cast<double>(batch.size());
}

} // namespace cmatch
