#pragma once

#include "cmatch/dataio.hpp"
#include "cmatch/errors.hpp"
#include "cmatch/evalkit.hpp"
#include "cmatch/model.hpp"
#include "cmatch/sslcore.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cmatch {

enum class Variant { supervised, psl, psl_plus, textmixup, crisismatch, crisismatch_sharpen };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
std::span<const std::string_view> variant_names();

struct VariantConfig {
    Variant variant = Variant::crisismatch;
    bool use_unlabeled = true;
    /// K-way prediction averaging; off forces K = 1.
    bool use_consistency = true;
    /// Hidden-state interpolation; off trains on unmixed examples.
    bool use_textmixup = true;
    /// Supervised only: train on one augmented copy of each labeled example.
    bool augment_labeled = false;
    /// Overrides every mixing coefficient (after which no max-adjustment is applied).
    std::optional<double> fixed_lambda;

    /// Default toggles for a variant.
    static VariantConfig of(Variant v);
    void validate() const;
};

/// Per-step diagnostics.
struct StepTrace {
    std::size_t iteration = 0;
    double labeled_loss = 0.0;   // L_x
    double unlabeled_loss = 0.0; // L_u
    double unlabeled_weight = 0.0;
    double total_loss = 0.0;
    double acceptance_rate = 0.0;
    /// Share of accepted pseudo-labels matching hidden ground truth; empty when
    /// nothing was accepted or no diagnostic labels are available.
    std::optional<double> pseudo_precision;
    std::size_t labeled_count = 0; // |X^|
    std::size_t pseudo_count = 0;  // |U^|
    std::size_t mixed_pool = 0;    // |W|
    std::size_t mix_layer = 0;
};

/// StepTrace log as CSV: iter, L_x, L_u, weight, acceptance_rate, pseudo_precision.
void write_trace_csv(std::ostream& out, std::span<const StepTrace> traces);

/// Raised when a step produces a non-finite loss; carries the step's diagnostics.
class StepError : public NumericalError {
public:
    StepError(const std::string& what, StepTrace step_trace)
        : NumericalError(what), trace(std::move(step_trace)) {}

    StepTrace trace;
};

struct PseudoLabel {
    std::uint64_t uid = 0;
    EncodedText text;
    ProbDist target;
    bool hard = true;
};

/// Everything a step needs besides the batches.
struct StepContext {
    const Vocabulary* vocab = nullptr;
    const SynonymLexicon* lexicon = nullptr;
    /// Ground truth lookup for the precision diagnostic; may be empty.
    std::function<std::optional<std::size_t>(std::uint64_t)> diagnostic_label;
    /// Keep the pseudo-labelled set of each step in StepResult (tests).
    bool record_pseudo_labels = false;
};

struct TrainState {
    TrainState(LayeredClassifier initial, std::uint64_t run_seed)
        : model(std::move(initial)), seed(run_seed) {}

    LayeredClassifier model;
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    double best_dev_f1 = -1.0;
    std::size_t best_iteration = 0;
    std::optional<LayeredClassifier> best;
};

struct StepResult {
    double loss = 0.0;
    StepTrace trace;
    std::vector<PseudoLabel> pseudo_labels; // filled only when requested
};

/// One CrisisMatch update: augment, guess and select pseudo-labels, shuffle
/// into W, interpolate at a random interior layer, L_x + ramp(iter) * L_u,
/// backward and optimizer step. Throws NumericalError on a non-finite loss.
StepResult crisismatch_step(TrainState& state, std::span<const LabeledExample> labeled,
                            std::span<const UnlabeledExample> unlabeled, const HyperParams& hp,
                            const VariantConfig& variant, const StepContext& ctx);

/// Dispatches one update for any variant.
StepResult variant_step(TrainState& state, std::span<const LabeledExample> labeled,
                        std::span<const UnlabeledExample> unlabeled, const HyperParams& hp,
                        const VariantConfig& variant, const StepContext& ctx);

struct TrainOptions {
    std::size_t max_iters = 2000;
    std::size_t eval_every = 50;
    std::size_t dim = 64;
    std::size_t layers = 4;
};

struct TrainResult {
    LayeredClassifier best_model;
    std::size_t best_iteration = 0;
    MetricsReport dev_report;
    MetricsReport test_report;
    std::vector<StepTrace> traces;
};

/// Runs `variant` over planned batches, evaluating on `dev` at iteration 0 and
/// every `eval_every` iterations; the checkpoint with the best dev macro-F1
/// (strict improvement) is scored on `test`.
TrainResult train(const FewShotView& view, const Vocabulary& vocab, const SynonymLexicon& lexicon,
                  const EncodedSplit& dev, const EncodedSplit& test, const VariantConfig& variant,
                  const HyperParams& hp, std::uint64_t seed, const TrainOptions& options);

} // namespace cmatch
