#include "cmatch/synthetic.hpp"
#include "cmatch/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cmatch;

namespace {

struct World {
    World(std::size_t classes = 3, std::size_t per_class = 4) {
        SyntheticSpec spec;
        spec.classes = classes;
        spec.train = 40 * classes;
        spec.dev = 10 * classes;
        spec.test = 10 * classes;
        data = generate_synthetic(spec);
        view = few_shot_sample(data.train, per_class, 1);
        vocab = build_vocabulary(data.train);
        dev = encode_split(data.dev, vocab, 64);
        test = encode_split(data.test, vocab, 64);
    }

    StepContext context() const {
        StepContext ctx;
        ctx.vocab = &vocab;
        ctx.lexicon = &data.lexicon;
        ctx.diagnostic_label = [this](std::uint64_t uid) { return view.diagnostic_label(uid); };
        ctx.record_pseudo_labels = true;
        return ctx;
    }

    TrainState state(std::uint64_t seed = 0) const {
        ModelConfig mc;
        mc.vocab_size = vocab.size();
        mc.dim = 16;
        mc.layers = 3;
        mc.classes = view.classes();
        return TrainState(LayeredClassifier(mc, seed), seed);
    }

    SyntheticData data;
    FewShotView view;
    Vocabulary vocab;
    EncodedSplit dev;
    EncodedSplit test;
};

std::vector<UnlabeledExample> first_unlabeled(const FewShotView& view, std::size_t n) {
    return {view.unlabeled().begin(), view.unlabeled().begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<LabeledExample> first_labeled(const FewShotView& view, std::size_t n) {
    return {view.labeled().begin(), view.labeled().begin() + static_cast<std::ptrdiff_t>(n)};
}

} // namespace

TEST_CASE("variant names round-trip") {
    for (std::string_view name : variant_names()) {
        const auto v = parse_variant(name);
        REQUIRE(v);
        CHECK(to_string(*v) == name);
    }
    CHECK_FALSE(parse_variant("fixmatch"));
    CHECK(VariantConfig::of(Variant::supervised).use_unlabeled == false);
    CHECK(VariantConfig::of(Variant::crisismatch).use_textmixup);
}

TEST_CASE("every confident copy joins the mixing pool") {
    const World world;
    HyperParams hp;
    hp.batch_size = 4;
    hp.mu = 3;
    hp.num_augmentations = 2;
    hp.threshold = 0.0;
    TrainState state = world.state();
    const auto xs = first_labeled(world.view, 4);
    const auto us = first_unlabeled(world.view, 12);
    const StepResult r = crisismatch_step(state, xs, us, hp, VariantConfig::of(Variant::crisismatch),
                                          world.context());
    CHECK(r.trace.labeled_count == 4);
    CHECK(r.trace.pseudo_count == 24);
    CHECK(r.trace.mixed_pool == 28);
    CHECK(r.trace.acceptance_rate == 1.0);
    CHECK(r.trace.mix_layer >= 1);
    CHECK(r.trace.mix_layer <= 2);
    CHECK(state.iteration == 1);

    // Targets are one-hot and shared by both copies of an example.
    REQUIRE(r.pseudo_labels.size() == 24);
    for (std::size_t i = 0; i < 24; i += 2) {
        const auto& a = r.pseudo_labels[i];
        const auto& b = r.pseudo_labels[i + 1];
        CHECK(a.uid == b.uid);
        CHECK(a.target == b.target);
        CHECK(a.hard);
        double sum = 0.0;
        for (double v : a.target) {
            CHECK((v == 0.0 || v == 1.0));
            sum += v;
        }
        CHECK(sum == 1.0);
    }
}

TEST_CASE("an unreachable threshold accepts nothing") {
    const World world;
    HyperParams hp;
    hp.threshold = 1.01;
    TrainState state = world.state();
    const auto r = crisismatch_step(state, first_labeled(world.view, 6),
                                    first_unlabeled(world.view, 20), hp,
                                    VariantConfig::of(Variant::crisismatch), world.context());
    CHECK(r.trace.pseudo_count == 0);
    CHECK(r.trace.unlabeled_loss == 0.0);
    CHECK(r.trace.acceptance_rate == 0.0);
    CHECK_FALSE(r.trace.pseudo_precision);
}

TEST_CASE("pseudo-labelling an untrained seven-class model accepts almost nothing") {
    const World world(7, 3);
    HyperParams hp;
    TrainState state = world.state();
    const auto r = variant_step(state, first_labeled(world.view, 10), first_unlabeled(world.view, 100),
                                hp, VariantConfig::of(Variant::psl), world.context());
    CHECK(r.trace.acceptance_rate < 0.01);
}

TEST_CASE("the trace weight follows the ramp-up") {
    const World world;
    HyperParams hp;
    hp.batch_size = 4;
    hp.mu = 2;
    hp.rampup_length = 10;
    TrainState state = world.state();
    for (std::size_t it = 0; it < 4; ++it) {
        const auto r = variant_step(state, first_labeled(world.view, 4),
                                    first_unlabeled(world.view, 8), hp,
                                    VariantConfig::of(Variant::crisismatch), world.context());
        CHECK(r.trace.iteration == it);
        CHECK(r.trace.unlabeled_weight == doctest::Approx(rampup_weight(it, 10, 10.0)));
        CHECK(r.trace.total_loss ==
              doctest::Approx(r.trace.labeled_loss + r.trace.unlabeled_weight * r.trace.unlabeled_loss));
    }
}

TEST_CASE("the sharpened variant keeps soft targets") {
    const World world;
    HyperParams hp;
    hp.threshold = 0.0;
    TrainState state = world.state();
    const auto r = crisismatch_step(state, first_labeled(world.view, 4), first_unlabeled(world.view, 4),
                                    hp, VariantConfig::of(Variant::crisismatch_sharpen),
                                    world.context());
    REQUIRE_FALSE(r.pseudo_labels.empty());
    CHECK_FALSE(r.pseudo_labels[0].hard);
    for (double v : r.pseudo_labels[0].target) CHECK(v < 1.0);
}

TEST_CASE("a missing context is rejected") {
    const World world;
    TrainState state = world.state();
    CHECK_THROWS(variant_step(state, first_labeled(world.view, 4), {}, HyperParams{},
                              VariantConfig::of(Variant::supervised), StepContext{}));
}

TEST_CASE("training is deterministic and zero iterations scores the initial model") {
    const World world;
    HyperParams hp;
    hp.batch_size = 8;
    hp.mu = 2;
    TrainOptions opts;
    opts.max_iters = 20;
    opts.eval_every = 5;
    opts.dim = 16;
    opts.layers = 3;
    for (Variant v : {Variant::supervised, Variant::psl, Variant::psl_plus, Variant::textmixup,
                      Variant::crisismatch, Variant::crisismatch_sharpen}) {
        CAPTURE(to_string(v));
        const auto a = train(world.view, world.vocab, world.data.lexicon, world.dev, world.test,
                             VariantConfig::of(v), hp, 3, opts);
        const auto b = train(world.view, world.vocab, world.data.lexicon, world.dev, world.test,
                             VariantConfig::of(v), hp, 3, opts);
        CHECK(a.test_report.accuracy == b.test_report.accuracy);
        CHECK(a.best_iteration == b.best_iteration);
        CHECK(a.traces.size() == 20);
        CHECK(a.best_iteration % 5 == 0);
        std::ostringstream sa, sb;
        write_trace_csv(sa, a.traces);
        write_trace_csv(sb, b.traces);
        CHECK(sa.str() == sb.str());
    }

    opts.max_iters = 0;
    const auto r = train(world.view, world.vocab, world.data.lexicon, world.dev, world.test,
                         VariantConfig::of(Variant::crisismatch), hp, 3, opts);
    CHECK(r.best_iteration == 0);
    CHECK(r.traces.empty());
    CHECK(r.test_report.n_eval == world.test.texts.size());
}

TEST_CASE("trace csv header and NA precision") {
    StepTrace t;
    t.iteration = 2;
    std::ostringstream out;
    write_trace_csv(out, std::vector<StepTrace>{t});
    CHECK(out.str().rfind("iter,L_x,L_u,weight,acceptance_rate,pseudo_precision\n2,", 0) == 0);
    CHECK(out.str().find("NA") != std::string::npos);
}
