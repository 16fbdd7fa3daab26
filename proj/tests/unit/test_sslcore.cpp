#include "cmatch/errors.hpp"
#include "cmatch/sslcore.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cmatch;
using doctest::Approx;

TEST_CASE("sharpen examples") {
    const ProbDist s = sharpen(ProbDist{0.8, 0.2}, 0.5);
    CHECK(s[0] == Approx(0.941176).epsilon(1e-6));
    CHECK(s[1] == Approx(0.058824).epsilon(1e-5));
    const ProbDist same = sharpen(ProbDist{0.3, 0.7}, 1.0);
    CHECK(same[0] == Approx(0.3));
    CHECK(same[1] == Approx(0.7));
    const ProbDist flat = sharpen(ProbDist{0.25, 0.25, 0.25, 0.25}, 0.1);
    for (double v : flat) CHECK(v == Approx(0.25));
    CHECK_THROWS(sharpen(ProbDist{0.5, 0.5}, 0.0));
}

TEST_CASE("sharpening lowers entropy") {
    std::mt19937_64 rng(1);
    std::gamma_distribution<double> g(1.0);
    for (int t = 0; t < 200; ++t) {
        ProbDist p(5);
        double sum = 0.0;
        for (double& v : p) sum += v = g(rng) + 1e-6;
        for (double& v : p) v /= sum;
        const ProbDist s = sharpen(p, 0.5);
        CHECK(entropy(s) <= entropy(p) + 1e-12);
        CHECK(argmax(s) == argmax(p));
    }
}

TEST_CASE("average predictions") {
    const std::vector<ProbDist> preds{{0.6, 0.4}, {0.8, 0.2}};
    const ProbDist q = average_predictions(preds);
    CHECK(q[0] == Approx(0.7));
    CHECK(q[1] == Approx(0.3));
    CHECK_THROWS(average_predictions(std::vector<ProbDist>{}));
}

TEST_CASE("pseudo-label selection") {
    const auto hit = select_pseudo_label(ProbDist{0.1, 0.8, 0.1}, 0.75, SelectMode::hard());
    REQUIRE(hit);
    CHECK(*hit == ProbDist{0, 1, 0});
    CHECK_FALSE(select_pseudo_label(ProbDist{0.3, 0.4, 0.3}, 0.75, SelectMode::hard()));
    // The boundary is inclusive.
    CHECK(select_pseudo_label(ProbDist{0.75, 0.25}, 0.75, SelectMode::hard()));
    // Ties go to the lowest index.
    CHECK(*select_pseudo_label(ProbDist{0.5, 0.5}, 0.5, SelectMode::hard()) == ProbDist{1, 0});
    CHECK_FALSE(select_pseudo_label(ProbDist{1.0, 0.0}, 1.01, SelectMode::hard()));

    const auto soft = select_pseudo_label(ProbDist{0.8, 0.2}, 0.75, SelectMode::sharpened(0.5));
    REQUIRE(soft);
    CHECK((*soft)[0] == Approx(0.941176).epsilon(1e-6));
}

TEST_CASE("mix coefficient is at least one half") {
    CHECK(MixCoefficient::from_raw(0.2).lambda == Approx(0.8));
    CHECK(MixCoefficient::from_raw(0.7).lambda == Approx(0.7));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10000; ++i) {
        const MixCoefficient c = draw_mix_coefficient(0.75, rng);
        CHECK(c.raw >= 0.0);
        CHECK(c.raw <= 1.0);
        CHECK(c.lambda >= 0.5);
        CHECK(c.lambda <= 1.0);
    }
}

TEST_CASE("Beta(0.75, 0.75) sample moments") {
    std::mt19937_64 rng(3);
    const int n = 100000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_beta(0.75, 0.75, rng);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.01);
    // Var of Beta(a, a) is 1 / (4 (2a + 1)).
    CHECK(std::abs(var - 1.0 / (4.0 * 2.5)) < 0.005);
}

TEST_CASE("mix targets") {
    const ProbDist y = mix_targets(ProbDist{1, 0}, ProbDist{0, 1}, 0.7);
    CHECK(y[0] == Approx(0.7));
    CHECK(y[1] == Approx(0.3));
    CHECK_THROWS(mix_targets(ProbDist{1, 0}, ProbDist{0, 0, 1}, 0.7));
}

TEST_CASE("consistency loss is a squared distance") {
    CHECK(consistency_loss(ProbDist{0.5, 0.5}, ProbDist{0.5, 0.5}) == 0.0);
    CHECK(consistency_loss(ProbDist{1, 0}, ProbDist{0, 1}) == Approx(2.0));
}

TEST_CASE("ramp-up schedule") {
    CHECK(rampup_weight(0, 1000, 10.0) == 0.0);
    CHECK(rampup_weight(500, 1000, 10.0) == Approx(5.0));
    CHECK(rampup_weight(1000, 1000, 10.0) == Approx(10.0));
    CHECK(rampup_weight(5000, 1000, 10.0) == Approx(10.0));
    CHECK(rampup_weight(0, 0, 10.0) == 10.0);
}

TEST_CASE("pseudo-label loss keeps rejected terms in the denominator") {
    const std::vector<PslTerm> batch{
        {{0.9, 0.1}, {0.5, 0.5}},
        {{0.6, 0.4}, {0.2, 0.8}},
    };
    CHECK(psl_unlabeled_loss(batch, 0.75) == Approx(std::log(2.0) / 2.0));
    // Exactly at the threshold is rejected.
    CHECK(psl_unlabeled_loss(std::vector<PslTerm>{{{0.75, 0.25}, {0.5, 0.5}}}, 0.75) == 0.0);
}

TEST_CASE("hyperparameter validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate(7));
    CHECK(hp.unlabeled_batch() == 224);
    hp.threshold = 0.1;
    CHECK_THROWS_AS(hp.validate(7), ConfigError);
    hp = HyperParams{};
    hp.batch_size = 0;
    CHECK_THROWS_AS(hp.validate(7), ConfigError);
    hp = HyperParams{};
    hp.temperature = 0.0;
    CHECK_THROWS_AS(hp.validate(7), ConfigError);
    hp = HyperParams{};
    hp.threshold = 1.5;
    CHECK_NOTHROW(hp.validate(7));
}
