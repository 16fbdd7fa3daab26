#include "cmatch/trainer.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace cmatch {

namespace {

constexpr std::array<std::string_view, 6> kVariantNames{
    "supervised", "psl", "psl_plus", "textmixup", "crisismatch", "crisismatch_sharpen"};

// Stream tags for the per-step random sources.
constexpr std::uint64_t kLabeledAugStream = 0xa11;
constexpr std::uint64_t kShuffleStream = 0x5f1;
constexpr std::uint64_t kMixStream = 0x3c7;
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kPlanStream = 0x9a7;

std::uint64_t step_seed(const TrainState& state) { return mix_seed(state.seed, state.iteration); }

void require_context(const StepContext& ctx) {
    if (ctx.vocab == nullptr || ctx.lexicon == nullptr) {
        throw std::invalid_argument("step context needs a vocabulary and a lexicon");
    }
}

std::vector<EncodedText> encode_labeled(std::span<const LabeledExample> labeled, bool augmented,
                                        std::uint64_t step, const HyperParams& hp,
                                        const StepContext& ctx) {
    std::vector<EncodedText> out;
    out.reserve(labeled.size());
    for (std::size_t b = 0; b < labeled.size(); ++b) {
        if (augmented) {
            AugmenterRng rng(mix_seed(step, kLabeledAugStream), labeled[b].uid, b);
            const Tokens aug = augment(labeled[b].tokens, *ctx.lexicon, rng, hp.augment_strength);
            out.push_back(encode(aug, *ctx.vocab, hp.max_seq_len));
        } else {
            out.push_back(encode(labeled[b].tokens, *ctx.vocab, hp.max_seq_len));
        }
    }
    return out;
}

// Row b * k_count + k holds the k-th augmentation of unlabeled[b].
std::vector<EncodedText> encode_unlabeled(std::span<const UnlabeledExample> unlabeled,
                                          std::size_t k_count, std::uint64_t step,
                                          const HyperParams& hp, const StepContext& ctx) {
    std::vector<EncodedText> out;
    out.reserve(unlabeled.size() * k_count);
    for (const UnlabeledExample& u : unlabeled) {
        for (std::size_t k = 0; k < k_count; ++k) {
            AugmenterRng rng(step, u.uid, k);
            out.push_back(encode(augment(u.tokens, *ctx.lexicon, rng, hp.augment_strength),
                                 *ctx.vocab, hp.max_seq_len));
        }
    }
    return out;
}

std::vector<EncodedText> encode_raw(std::span<const UnlabeledExample> unlabeled,
                                    const HyperParams& hp, const StepContext& ctx) {
    std::vector<EncodedText> out;
    out.reserve(unlabeled.size());
    for (const UnlabeledExample& u : unlabeled) {
        out.push_back(encode(u.tokens, *ctx.vocab, hp.max_seq_len));
    }
    return out;
}

Tensor2D rows_of(const Tensor2D& t, std::size_t begin, std::size_t end) {
    Tensor2D out(end - begin, t.cols());
    std::copy(t.data() + begin * t.cols(), t.data() + end * t.cols(), out.data());
    return out;
}

Tensor2D stack(std::span<const ProbDist> rows, std::size_t cols) {
    Tensor2D out(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
    }
    return out;
}

void place_rows(Tensor2D& dst, std::size_t begin, const Tensor2D& src, double scale) {
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst.data()[begin * dst.cols() + i] = scale * src.data()[i];
    }
}

// Tracks pseudo-label acceptance and, where ground truth is available, precision.
struct SelectionStats {
    std::size_t candidates = 0;
    std::size_t accepted = 0;
    std::size_t judged = 0;
    std::size_t correct = 0;

    void accept(const StepContext& ctx, std::uint64_t uid, std::size_t guessed) {
        ++accepted;
        if (ctx.diagnostic_label) {
            if (const auto truth = ctx.diagnostic_label(uid)) {
                ++judged;
                correct += *truth == guessed ? 1 : 0;
            }
        }
    }

    void fill(StepTrace& trace) const {
        trace.acceptance_rate =
            candidates ? static_cast<double>(accepted) / static_cast<double>(candidates) : 0.0;
        if (judged > 0) {
            trace.pseudo_precision = static_cast<double>(correct) / static_cast<double>(judged);
        }
    }
};

MixSpec draw_mix(std::size_t n, std::span<const std::size_t> partner, std::size_t layers,
                 std::uint64_t step, const HyperParams& hp, const VariantConfig& variant) {
    std::mt19937_64 rng(mix_seed(step, kMixStream));
    MixSpec spec;
    spec.layer = std::uniform_int_distribution<std::size_t>(1, layers - 1)(rng);
    spec.pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lambda =
            variant.fixed_lambda ? *variant.fixed_lambda : draw_mix_coefficient(hp.alpha, rng).lambda;
        spec.pairs.push_back({i, partner[i], lambda});
    }
    return spec;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t step) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(mix_seed(step, kShuffleStream));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

StepResult finish_step(TrainState& state, const HyperParams& hp, const Tensor2D& grad,
                       StepTrace trace) {
    trace.total_loss = trace.labeled_loss + trace.unlabeled_weight * trace.unlabeled_loss;
    if (!std::isfinite(trace.total_loss) || !grad.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite loss at iteration " << trace.iteration << " (L_x=" << trace.labeled_loss
            << ", L_u=" << trace.unlabeled_loss << ")";
        throw StepError(msg.str(), trace);
    }
    state.model.backward(grad);
    AdamWConfig opt;
    opt.lr = hp.lr;
    opt.weight_decay = hp.weight_decay;
    const auto params = state.model.params();
    optimizer_step(params, opt);
    ++state.iteration;
    return {trace.total_loss, trace, {}};
}

StepTrace begin_trace(const TrainState& state, const HyperParams& hp) {
    StepTrace trace;
    trace.iteration = state.iteration;
    trace.unlabeled_weight = rampup_weight(state.iteration, hp.rampup_length, hp.unlabeled_weight);
    return trace;
}

StepResult supervised_step(TrainState& state, std::span<const LabeledExample> labeled,
                           const HyperParams& hp, const VariantConfig& variant,
                           const StepContext& ctx) {
    const std::size_t classes = state.model.config().classes;
    const auto inputs = encode_labeled(labeled, variant.augment_labeled, step_seed(state), hp, ctx);
    Tensor2D targets(labeled.size(), classes);
    for (std::size_t b = 0; b < labeled.size(); ++b) {
        targets(b, labeled[b].label) = 1.0;
    }
    StepTrace trace = begin_trace(state, hp);
    trace.labeled_count = labeled.size();
    trace.mixed_pool = labeled.size();
    const Tensor2D probs = state.model.train_forward(inputs);
    BatchLoss lx = cross_entropy_batch(targets, probs);
    trace.labeled_loss = lx.value;
    return finish_step(state, hp, lx.grad, trace);
}

StepResult textmixup_step(TrainState& state, std::span<const LabeledExample> labeled,
                          const HyperParams& hp, const VariantConfig& variant,
                          const StepContext& ctx) {
    const std::size_t classes = state.model.config().classes;
    const std::uint64_t step = step_seed(state);
    const auto inputs = encode_labeled(labeled, false, step, hp, ctx);
    const std::size_t n = inputs.size();
    const auto partner = shuffled_indices(n, step);
    const MixSpec mix = draw_mix(n, partner, state.model.config().layers, step, hp, variant);
    Tensor2D targets(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
        const ProbDist mixed = mix_targets(one_hot(labeled[i].label, classes),
                                           one_hot(labeled[partner[i]].label, classes),
                                           mix.pairs[i].lambda);
        std::copy(mixed.begin(), mixed.end(), targets.row(i).begin());
    }
    StepTrace trace = begin_trace(state, hp);
    trace.labeled_count = n;
    trace.mixed_pool = n;
    trace.mix_layer = mix.layer;
    const Tensor2D probs = state.model.train_forward(inputs, mix);
    BatchLoss lx = cross_entropy_batch(targets, probs);
    trace.labeled_loss = lx.value;
    return finish_step(state, hp, lx.grad, trace);
}

// PSL (raw inputs, K = 1) and PSL++ (augmented inputs, K-way averaged guesses).
StepResult pseudo_label_step(TrainState& state, std::span<const LabeledExample> labeled,
                             std::span<const UnlabeledExample> unlabeled, const HyperParams& hp,
                             const VariantConfig& variant, const StepContext& ctx) {
    const bool plus = variant.variant == Variant::psl_plus;
    const std::size_t classes = state.model.config().classes;
    const std::uint64_t step = step_seed(state);
    const std::size_t k_count = plus && variant.use_consistency ? hp.num_augmentations : 1;
    const bool explicit_consistency = plus && hp.consistency_weight > 0.0 && k_count > 1;

    std::vector<EncodedText> inputs = encode_labeled(labeled, plus, step, hp, ctx);
    const std::size_t nx = inputs.size();
    std::vector<ProbDist> targets;
    for (const LabeledExample& x : labeled) {
        targets.push_back(one_hot(x.label, classes));
    }

    StepTrace trace = begin_trace(state, hp);
    trace.labeled_count = nx;
    SelectionStats stats;
    struct Group {
        std::size_t source;    // index into `unlabeled`
        std::size_t first_row; // row of copy 0 in the training batch
        std::optional<std::size_t> label;
    };
    std::vector<Group> groups;
    std::vector<ProbDist> guesses;
    if (variant.use_unlabeled && !unlabeled.empty()) {
        const auto candidates = plus ? encode_unlabeled(unlabeled, k_count, step, hp, ctx)
                                     : encode_raw(unlabeled, hp, ctx);
        const Tensor2D guess_probs = state.model.predict(candidates);
        stats.candidates = unlabeled.size();
        for (std::size_t b = 0; b < unlabeled.size(); ++b) {
            std::vector<ProbDist> copies;
            for (std::size_t k = 0; k < k_count; ++k) {
                const auto row = guess_probs.row(b * k_count + k);
                copies.emplace_back(row.begin(), row.end());
            }
            ProbDist q = average_predictions(copies);
            const std::size_t top = argmax(q);
            Group g{b, inputs.size(), std::nullopt};
            if (q[top] > hp.threshold) {
                g.label = top;
                stats.accept(ctx, unlabeled[b].uid, top);
            }
            if (g.label || explicit_consistency) {
                for (std::size_t k = 0; k < k_count; ++k) {
                    inputs.push_back(candidates[b * k_count + k]);
                }
                groups.push_back(g);
            }
            guesses.push_back(std::move(q));
        }
    }
    trace.pseudo_count = inputs.size() - nx;
    trace.mixed_pool = inputs.size();
    stats.fill(trace);

    const Tensor2D probs = state.model.train_forward(inputs);
    Tensor2D grad(inputs.size(), classes);
    BatchLoss lx = cross_entropy_batch(stack(targets, classes), rows_of(probs, 0, nx));
    trace.labeled_loss = lx.value;
    place_rows(grad, 0, lx.grad, 1.0);

    if (!unlabeled.empty() && variant.use_unlabeled) {
        // Pseudo-label loss over all |U| * K candidate copies. Copies that were not trained
        // are below threshold and enter with p = q, contributing zero.
        std::vector<PslTerm> terms;
        terms.reserve(unlabeled.size() * k_count);
        const double denom = static_cast<double>(unlabeled.size() * k_count);
        std::size_t next_group = 0;
        for (std::size_t b = 0; b < unlabeled.size(); ++b) {
            const bool in_batch = next_group < groups.size() && groups[next_group].source == b;
            for (std::size_t k = 0; k < k_count; ++k) {
                if (in_batch) {
                    const auto p = probs.row(groups[next_group].first_row + k);
                    terms.push_back({guesses[b], ProbDist(p.begin(), p.end())});
                } else {
                    terms.push_back({guesses[b], guesses[b]});
                }
            }
            next_group += in_batch ? 1 : 0;
        }
        double lu = psl_unlabeled_loss(terms, hp.threshold);
        for (const Group& g : groups) {
            if (!g.label) {
                continue;
            }
            for (std::size_t k = 0; k < k_count; ++k) {
                const std::size_t r = g.first_row + k;
                const double p = probs(r, *g.label);
                if (p > kLogClamp) {
                    grad(r, *g.label) += -trace.unlabeled_weight / p / denom;
                }
            }
        }

        if (explicit_consistency) {
            const std::size_t pairs_per_group = k_count * (k_count - 1) / 2;
            const double cons_denom = static_cast<double>(unlabeled.size() * pairs_per_group);
            double cons = 0.0;
            const double scale = trace.unlabeled_weight * hp.consistency_weight / cons_denom;
            for (const Group& g : groups) {
                for (std::size_t a = 0; a < k_count; ++a) {
                    for (std::size_t b = a + 1; b < k_count; ++b) {
                        const auto pa = probs.row(g.first_row + a);
                        const auto pb = probs.row(g.first_row + b);
                        cons += consistency_loss(pa, pb);
                        for (std::size_t c = 0; c < classes; ++c) {
                            const double d = 2.0 * (pa[c] - pb[c]) * scale;
                            grad(g.first_row + a, c) += d;
                            grad(g.first_row + b, c) -= d;
                        }
                    }
                }
            }
            lu += hp.consistency_weight * cons / cons_denom;
        }
        trace.unlabeled_loss = lu;
    }
    return finish_step(state, hp, grad, trace);
}

} // namespace

std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

std::optional<Variant> parse_variant(std::string_view name) {
    for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
        if (kVariantNames[i] == name) {
            return static_cast<Variant>(i);
        }
    }
    return std::nullopt;
}

std::span<const std::string_view> variant_names() { return kVariantNames; }

VariantConfig VariantConfig::of(Variant v) {
    VariantConfig cfg;
    cfg.variant = v;
    switch (v) {
    case Variant::supervised:
        cfg.use_unlabeled = false;
        cfg.use_consistency = false;
        cfg.use_textmixup = false;
        break;
    case Variant::psl:
        cfg.use_consistency = false;
        cfg.use_textmixup = false;
        break;
    case Variant::psl_plus:
        cfg.use_textmixup = false;
        break;
    case Variant::textmixup:
        cfg.use_unlabeled = false;
        cfg.use_consistency = false;
        break;
    case Variant::crisismatch:
    case Variant::crisismatch_sharpen:
        break;
    }
    return cfg;
}

void VariantConfig::validate() const {
    if ((variant == Variant::supervised || variant == Variant::textmixup) && use_unlabeled) {
        throw ConfigError(std::string(to_string(variant)) + " cannot use unlabeled data");
    }
    if (augment_labeled && variant != Variant::supervised) {
        throw ConfigError("augment_labeled applies to the supervised variant only");
    }
    if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
        throw ConfigError("fixed_lambda must lie in [0, 1]");
    }
}

void write_trace_csv(std::ostream& out, std::span<const StepTrace> traces) {
    out << "iter,L_x,L_u,weight,acceptance_rate,pseudo_precision\n";
    for (const StepTrace& t : traces) {
        out << t.iteration << ',' << t.labeled_loss << ',' << t.unlabeled_loss << ','
            << t.unlabeled_weight << ',' << t.acceptance_rate << ',';
        if (t.pseudo_precision) {
            out << *t.pseudo_precision;
        } else {
            out << "NA";
        }
        out << '\n';
    }
}

StepResult crisismatch_step(TrainState& state, std::span<const LabeledExample> labeled,
                            std::span<const UnlabeledExample> unlabeled, const HyperParams& hp,
                            const VariantConfig& variant, const StepContext& ctx) {
    require_context(ctx);
    const std::size_t classes = state.model.config().classes;
    const std::uint64_t step = step_seed(state);
    const std::size_t k_count = variant.use_consistency ? hp.num_augmentations : 1;
    const SelectMode mode = variant.variant == Variant::crisismatch_sharpen
                                ? SelectMode::sharpened(hp.temperature)
                                : SelectMode::hard();

    // X^: one augmentation per labeled example.
    std::vector<EncodedText> inputs = encode_labeled(labeled, true, step, hp, ctx);
    std::vector<ProbDist> targets;
    targets.reserve(inputs.size());
    for (const LabeledExample& x : labeled) {
        targets.push_back(one_hot(x.label, classes));
    }
    const std::size_t nx = inputs.size();

    // U^: K augmentations per unlabeled example; every copy of a confident
    // example joins with the shared guessed target.
    StepResult result;
    SelectionStats stats;
    if (variant.use_unlabeled && !unlabeled.empty()) {
        const auto augmented = encode_unlabeled(unlabeled, k_count, step, hp, ctx);
        const Tensor2D guess_probs = state.model.predict(augmented);
        stats.candidates = unlabeled.size();
        std::vector<ProbDist> copies(k_count);
        for (std::size_t b = 0; b < unlabeled.size(); ++b) {
            for (std::size_t k = 0; k < k_count; ++k) {
                const auto row = guess_probs.row(b * k_count + k);
                copies[k].assign(row.begin(), row.end());
            }
            const ProbDist q = average_predictions(copies);
            auto target = select_pseudo_label(q, hp.threshold, mode);
            if (!target) {
                continue;
            }
            stats.accept(ctx, unlabeled[b].uid, argmax(*target));
            for (std::size_t k = 0; k < k_count; ++k) {
                inputs.push_back(augmented[b * k_count + k]);
                targets.push_back(*target);
                if (ctx.record_pseudo_labels) {
                    result.pseudo_labels.push_back({unlabeled[b].uid, augmented[b * k_count + k],
                                                    *target, mode.kind == SelectMode::Kind::hard});
                }
            }
        }
    }
    const std::size_t n = inputs.size();
    const std::size_t nu = n - nx;

    // W = Shuffle(Concat(X^, U^)); row i is mixed with W_i.
    const auto partner = shuffled_indices(n, step);
    StepTrace trace = begin_trace(state, hp);
    trace.labeled_count = nx;
    trace.pseudo_count = nu;
    trace.mixed_pool = n;
    stats.fill(trace);

    std::optional<MixSpec> mix;
    std::vector<ProbDist> mixed = targets;
    if (variant.use_textmixup) {
        mix = draw_mix(n, partner, state.model.config().layers, step, hp, variant);
        trace.mix_layer = mix->layer;
        for (std::size_t i = 0; i < n; ++i) {
            mixed[i] = mix_targets(targets[i], targets[partner[i]], mix->pairs[i].lambda);
        }
    }

    const Tensor2D probs = state.model.train_forward(inputs, mix);
    const Tensor2D all_targets = stack(mixed, classes);
    BatchLoss lx = cross_entropy_batch(rows_of(all_targets, 0, nx), rows_of(probs, 0, nx));
    BatchLoss lu = l2_prob_batch(rows_of(all_targets, nx, n), rows_of(probs, nx, n));
    trace.labeled_loss = lx.value;
    trace.unlabeled_loss = nu ? lu.value : 0.0;

    Tensor2D grad(n, classes);
    place_rows(grad, 0, lx.grad, 1.0);
    if (nu) {
        place_rows(grad, nx, lu.grad, trace.unlabeled_weight);
    }
    StepResult done = finish_step(state, hp, grad, trace);
    done.pseudo_labels = std::move(result.pseudo_labels);
    return done;
}

StepResult variant_step(TrainState& state, std::span<const LabeledExample> labeled,
                        std::span<const UnlabeledExample> unlabeled, const HyperParams& hp,
                        const VariantConfig& variant, const StepContext& ctx) {
    require_context(ctx);
    switch (variant.variant) {
    case Variant::supervised:
        return supervised_step(state, labeled, hp, variant, ctx);
    case Variant::psl:
    case Variant::psl_plus:
        return pseudo_label_step(state, labeled, unlabeled, hp, variant, ctx);
    case Variant::textmixup:
        if (!variant.use_textmixup) {
            return supervised_step(state, labeled, hp, variant, ctx);
        }
        return textmixup_step(state, labeled, hp, variant, ctx);
    case Variant::crisismatch:
    case Variant::crisismatch_sharpen:
        return crisismatch_step(state, labeled, unlabeled, hp, variant, ctx);
    }
    throw std::logic_error("unknown variant");
}

TrainResult train(const FewShotView& view, const Vocabulary& vocab, const SynonymLexicon& lexicon,
                  const EncodedSplit& dev, const EncodedSplit& test, const VariantConfig& variant,
                  const HyperParams& hp, std::uint64_t seed, const TrainOptions& options) {
    const std::size_t classes = view.classes();
    hp.validate(classes);
    variant.validate();
    if (options.eval_every < 1) {
        throw ConfigError("eval_every must be >= 1");
    }
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.dim = options.dim;
    mc.layers = options.layers;
    mc.classes = classes;
    mc.max_seq_len = hp.max_seq_len;
    TrainState state(LayeredClassifier(mc, mix_seed(seed, kInitStream)), seed);

    const bool needs_unlabeled = variant.use_unlabeled && variant.variant != Variant::supervised &&
                                 variant.variant != Variant::textmixup;
    BatchPlanner planner(view.labeled().size(), needs_unlabeled ? view.unlabeled().size() : 0,
                         hp.batch_size, hp.unlabeled_batch(), mix_seed(seed, kPlanStream));
    StepContext ctx;
    ctx.vocab = &vocab;
    ctx.lexicon = &lexicon;
    ctx.diagnostic_label = [&view](std::uint64_t uid) { return view.diagnostic_label(uid); };

    TrainResult result;
    auto consider = [&] {
        MetricsReport report = evaluate(state.model, dev, classes);
        if (report.macro_f1 > state.best_dev_f1) {
            state.best_dev_f1 = report.macro_f1;
            state.best_iteration = state.iteration;
            state.best = state.model;
            result.dev_report = std::move(report);
        }
    };
    consider();

    result.traces.reserve(options.max_iters);
    std::vector<LabeledExample> xs;
    std::vector<UnlabeledExample> us;
    for (std::size_t it = 0; it < options.max_iters; ++it) {
        const BatchPlan plan = planner.plan(it);
        xs.clear();
        us.clear();
        for (std::size_t i : plan.labeled) {
            xs.push_back(view.labeled()[i]);
        }
        for (std::size_t i : plan.unlabeled) {
            us.push_back(view.unlabeled()[i]);
        }
        StepResult step = variant_step(state, xs, us, hp, variant, ctx);
        result.traces.push_back(step.trace);
        if ((it + 1) % options.eval_every == 0 || it + 1 == options.max_iters) {
            consider();
        }
    }
    result.best_model = std::move(*state.best);
    result.best_iteration = state.best_iteration;
    result.test_report = evaluate(result.best_model, test, classes);
    return result;
}

} // namespace cmatch
