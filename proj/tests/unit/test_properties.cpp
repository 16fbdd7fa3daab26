// Randomised invariants over the public operators.

#include "cmatch/dataio.hpp"
#include "cmatch/evalkit.hpp"
#include "cmatch/sslcore.hpp"
#include "cmatch/synthetic.hpp"
#include "cmatch/textprep.hpp"
#include "cmatch/trainer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace cmatch;

namespace {

ProbDist random_dist(std::size_t n, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(0.5);
    ProbDist p(n);
    double sum = 0.0;
    for (double& v : p) sum += v = g(rng) + 1e-9;
    for (double& v : p) v /= sum;
    return p;
}

double sum_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace

TEST_CASE("softmax is shift invariant and normalised") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> z(2 + rng() % 8);
        for (double& v : z) v = n(rng);
        const ProbDist p = softmax(z);
        CHECK(sum_of(p) == doctest::Approx(1.0).epsilon(1e-12));
        const double c = n(rng) * 10.0;
        std::vector<double> shifted = z;
        for (double& v : shifted) v += c;
        const ProbDist q = softmax(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-9);
    }
}

TEST_CASE("sharpen, averaging and mixing stay on the simplex") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        const std::size_t c = 2 + rng() % 8;
        const ProbDist p = random_dist(c, rng);
        const double temp = 0.05 + unit(rng) * 2.0;
        const ProbDist s = sharpen(p, temp);
        CHECK(sum_of(s) == doctest::Approx(1.0).epsilon(1e-12));
        if (temp < 1.0) CHECK(*std::max_element(s.begin(), s.end()) >= *std::max_element(p.begin(), p.end()) - 1e-12);

        std::vector<ProbDist> preds;
        for (std::size_t k = 0; k < 1 + rng() % 4; ++k) preds.push_back(random_dist(c, rng));
        const ProbDist q = average_predictions(preds);
        CHECK(sum_of(q) == doctest::Approx(1.0).epsilon(1e-12));

        const double lambda = MixCoefficient::from_raw(unit(rng)).lambda;
        const ProbDist m = mix_targets(p, q, lambda);
        CHECK(sum_of(m) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < c; ++i) {
            CHECK(m[i] >= std::min(p[i], q[i]) - 1e-15);
            CHECK(m[i] <= std::max(p[i], q[i]) + 1e-15);
        }
    }
}

TEST_CASE("selection is monotone in the threshold") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const ProbDist q = random_dist(2 + rng() % 6, rng);
        const double lo = unit(rng);
        const double hi = lo + unit(rng) * (1.0 - lo);
        if (select_pseudo_label(q, hi, SelectMode::hard())) {
            CHECK(select_pseudo_label(q, lo, SelectMode::hard()));
        }
        if (const auto y = select_pseudo_label(q, lo, SelectMode::hard())) {
            CHECK(argmax(*y) == argmax(q));
        }
    }
}

TEST_CASE("losses are non-negative and vanish at the target") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 500; ++t) {
        const std::size_t c = 2 + rng() % 6;
        const ProbDist p = random_dist(c, rng);
        const ProbDist y = one_hot(rng() % c, c);
        CHECK(cross_entropy_soft(y, p) >= 0.0);
        CHECK(l2_prob_loss(y, p) >= 0.0);
        CHECK(l2_prob_loss(p, p) == 0.0);
        CHECK(consistency_loss(p, p) == 0.0);
        CHECK(cross_entropy_soft(p, p) == doctest::Approx(entropy(p)).epsilon(1e-9));
    }
}

TEST_CASE("augmentations keep length and edit a bounded number of tokens") {
    const SyntheticData data = generate_synthetic(SyntheticSpec{});
    std::mt19937_64 rng(5);
    for (std::size_t i = 0; i < 300; ++i) {
        const Tokens tokens = tokenize(data.train.examples[rng() % data.train.size()].text);
        AugmenterRng a(9, i, 0);
        const Tokens replaced = synonym_replace(tokens, data.lexicon, a);
        REQUIRE(replaced.size() == tokens.size());
        std::size_t changed = 0;
        for (std::size_t j = 0; j < tokens.size(); ++j) changed += replaced[j] != tokens[j];
        CHECK(changed <= edit_count(tokens.size()));

        AugmenterRng b(9, i, 1);
        Tokens swapped = random_swap(tokens, b);
        Tokens sorted = tokens;
        std::ranges::sort(swapped);
        std::ranges::sort(sorted);
        CHECK(swapped == sorted);
    }
}

TEST_CASE("encoding length is min(tokens, max_len)") {
    const std::vector<Tokens> corpus{{"a", "b", "c"}};
    const Vocabulary vocab = Vocabulary::build(corpus);
    for (std::size_t n = 1; n < 100; n += 7) {
        for (std::size_t max_len : {1u, 8u, 64u}) {
            const EncodedText e = encode(Tokens(n, "b"), vocab, max_len);
            CHECK(e.length == std::min(n, max_len));
            CHECK(e.ids.size() == max_len);
        }
    }
}

TEST_CASE("few-shot views are exact for any seed") {
    const SyntheticData data = generate_synthetic(SyntheticSpec{});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t per_class = 1 + seed % 10;
        const FewShotView view = few_shot_sample(data.train, per_class, seed);
        std::vector<std::size_t> counts(view.classes(), 0);
        for (const auto& e : view.labeled()) ++counts[e.label];
        CHECK(std::ranges::all_of(counts, [&](std::size_t c) { return c == per_class; }));
        CHECK(view.labeled().size() + view.unlabeled().size() == data.train.size());
    }
}

TEST_CASE("metrics are bounded and perfect predictions score 100") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 200; ++t) {
        const std::size_t c = 2 + rng() % 6;
        std::vector<std::size_t> gold(1 + rng() % 50), pred(gold.size());
        for (std::size_t i = 0; i < gold.size(); ++i) {
            gold[i] = rng() % c;
            pred[i] = rng() % c;
        }
        const MetricsReport r = metrics_from_confusion(ConfusionMatrix::from_predictions(gold, pred, c));
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 100.0);
        CHECK(r.macro_f1 >= 0.0);
        CHECK(r.macro_f1 <= 100.0);
        const MetricsReport perfect = metrics_from_confusion(ConfusionMatrix::from_predictions(gold, gold, c));
        CHECK(perfect.accuracy == 100.0);
    }
}

TEST_CASE("the mixing pool is labeled count plus K times accepted") {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.train = 120;
    spec.dev = 30;
    spec.test = 30;
    const SyntheticData data = generate_synthetic(spec);
    const FewShotView view = few_shot_sample(data.train, 4, 0);
    const Vocabulary vocab = build_vocabulary(data.train);
    StepContext ctx;
    ctx.vocab = &vocab;
    ctx.lexicon = &data.lexicon;
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.dim = 8;
    mc.layers = 3;
    mc.classes = 3;
    std::mt19937_64 rng(7);
    for (std::size_t k : {1u, 2u, 3u}) {
        for (double tau : {0.0, 0.334, 0.34, 0.36, 1.01}) {
            HyperParams hp;
            hp.num_augmentations = k;
            hp.threshold = tau;
            TrainState state(LayeredClassifier(mc, rng()), rng());
            const std::vector<LabeledExample> xs(view.labeled().begin(), view.labeled().begin() + 5);
            const std::vector<UnlabeledExample> us(view.unlabeled().begin(), view.unlabeled().begin() + 15);
            const auto r = crisismatch_step(state, xs, us, hp, VariantConfig::of(Variant::crisismatch), ctx);
            const auto accepted = static_cast<std::size_t>(std::llround(r.trace.acceptance_rate * 15.0));
            CHECK(r.trace.pseudo_count == k * accepted);
            CHECK(r.trace.mixed_pool == 5 + k * accepted);
        }
    }
}
