#pragma once

#include "cmatch/numkit.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace cmatch {

/// Training hyperparameters. Defaults are the usual CrisisMatch settings,
/// except `lr` (raised for a from-scratch encoder) and `mu` (a free choice).
struct HyperParams {
    std::size_t batch_size = 32;       // B
    std::size_t mu = 7;                // unlabeled-to-labeled batch ratio
    std::size_t num_augmentations = 2; // K
    double threshold = 0.75;           // tau
    double temperature = 0.5;          // T
    double alpha = 0.75;               // Beta(alpha, alpha) for mixing
    double unlabeled_weight = 10.0;    // w_u
    std::size_t rampup_length = 1000;
    double lr = 2e-3;
    double weight_decay = 0.01;
    std::size_t max_seq_len = 64;
    double augment_strength = 0.1;
    /// Weight of the explicit pairwise consistency penalty (psl_plus only).
    double consistency_weight = 0.0;

    /// Throws ConfigError on out-of-range values. `classes` bounds the threshold
    /// from below; thresholds above 1 are accepted and disable selection.
    void validate(std::size_t classes) const;

    std::size_t unlabeled_batch() const { return mu * batch_size; }
};

ProbDist sharpen(std::span<const double> p, double temperature);
ProbDist average_predictions(std::span<const ProbDist> preds);

struct SelectMode {
    enum class Kind { hard, sharpen };
    Kind kind = Kind::hard;
    double temperature = 0.5;

    static SelectMode hard() { return {Kind::hard, 0.5}; }
    static SelectMode sharpened(double t) { return {Kind::sharpen, t}; }
};

/// Returns a training target when max(q) >= threshold: a one-hot at argmax
/// (ties to the lowest index) in hard mode, sharpen(q, T) in sharpen mode.
std::optional<ProbDist> select_pseudo_label(std::span<const double> q, double threshold,
                                            SelectMode mode);

struct MixCoefficient {
    double raw = 0.0;    // Beta(alpha, alpha) draw
    double lambda = 1.0; // max(raw, 1 - raw)

    static MixCoefficient from_raw(double raw);
};

double sample_beta(double alpha, double beta, std::mt19937_64& rng);
MixCoefficient draw_mix_coefficient(double alpha, std::mt19937_64& rng);

ProbDist mix_targets(std::span<const double> y_i, std::span<const double> y_j, double lambda);
double consistency_loss(std::span<const double> p_a, std::span<const double> p_b);

/// w_u * min(1, iteration / ramp_length); a zero-length ramp gives w_u throughout.
double rampup_weight(std::size_t iteration, std::size_t ramp_length, double max_weight);

struct PslTerm {
    ProbDist guess;      // q: prediction the pseudo-label is taken from
    ProbDist prediction; // p: prediction being trained
};

/// (1 / |batch|) * sum over the batch of 1(max q > tau) * CE(onehot(argmax q), p).
/// Terms below the threshold still count in the denominator.
double psl_unlabeled_loss(std::span<const PslTerm> batch, double threshold);

} // namespace cmatch
