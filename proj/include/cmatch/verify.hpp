#pragma once

// Self-check suite: operators against brute-force oracles, gradient checks of
// every differentiable piece, and identities that tie the variants together.
// Operators are taken from an OperatorSet so a corrupted implementation can be
// swapped in to confirm the suite notices.

#include "cmatch/sslcore.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cmatch {

struct OperatorSet {
    std::function<ProbDist(std::span<const double>, double)> sharpen;
    std::function<ProbDist(std::span<const ProbDist>)> average_predictions;
    std::function<std::optional<ProbDist>(std::span<const double>, double, SelectMode)>
        select_pseudo_label;
    std::function<ProbDist(std::span<const double>, std::span<const double>, double)> mix_targets;
    std::function<double(std::span<const double>, std::span<const double>)> consistency_loss;
    std::function<double(std::span<const PslTerm>, double)> psl_unlabeled_loss;
    std::function<double(std::size_t, std::size_t, double)> rampup_weight;

    static OperatorSet library();
};

struct PropertyResult {
    std::string name;
    bool passed = true;
    std::size_t cases = 0;
    double worst = 0.0; // largest observed error, where meaningful
    double tolerance = 0.0;
    std::string detail; // first failing case
};

struct VerifyReport {
    std::vector<PropertyResult> results;
    double seconds = 0.0;

    bool passed() const;
    std::size_t failures() const;
};

inline constexpr double kOracleTolerance = 1e-9;
inline constexpr double kPrimitiveGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;
inline constexpr double kDegeneracyTolerance = 1e-9;

/// Each operator (and evaluate) against a brute-force oracle on `cases` random inputs.
std::vector<PropertyResult> verify_operators(const OperatorSet& ops, std::uint64_t seed,
                                             std::size_t cases = 200);
/// Sharpening lowers entropy and keeps argmax; hard selection is one-hot and
/// monotone in the threshold.
std::vector<PropertyResult> verify_entropy(const OperatorSet& ops, std::uint64_t seed,
                                           std::size_t cases = 1000);
/// Finite-difference checks of every layer primitive (over `seeds` seeds) and
/// of a full forward with interpolation at lambda = 0.3.
std::vector<PropertyResult> verify_gradients(std::uint64_t seed, std::size_t seeds = 20);
/// CrisisMatch with nothing accepted, no averaging and no mixing equals the
/// supervised step on augmented data, TextMixUp at lambda 1 equals supervised,
/// and PSL at iteration 0 equals supervised.
std::vector<PropertyResult> verify_degeneracy(std::uint64_t seed, std::size_t steps = 20);

VerifyReport run_verification(const OperatorSet& ops = OperatorSet::library(),
                              std::uint64_t seed = 0);
void print_report(std::ostream& out, const VerifyReport& report);

} // namespace cmatch
