#include "cmatch/errors.hpp"
#include "cmatch/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace cmatch;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.vocab_size = 30;
    cfg.dim = 16;
    cfg.layers = 4;
    cfg.classes = 5;
    cfg.max_seq_len = 12;
    return cfg;
}

std::vector<EncodedText> random_batch(std::size_t n, std::size_t max_len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<EncodedText> batch(n);
    for (auto& text : batch) {
        text.length = 1 + rng() % max_len;
        text.ids.assign(max_len, Vocabulary::kPadding);
        for (std::size_t i = 0; i < text.length; ++i) {
            text.ids[i] = static_cast<std::int32_t>(1 + rng() % 29);
        }
    }
    return batch;
}

Tensor2D one_hot_targets(std::size_t rows, std::size_t classes) {
    Tensor2D t(rows, classes);
    for (std::size_t r = 0; r < rows; ++r) t(r, r % classes) = 1.0;
    return t;
}

std::vector<Tensor2D> grads_of(LayeredClassifier& model) {
    std::vector<Tensor2D> out;
    for (ParamSlot* p : model.params()) out.push_back(p->grad);
    return out;
}

double max_abs_diff(const std::vector<Tensor2D>& a, const std::vector<Tensor2D>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            worst = std::max(worst, std::abs(a[i].data()[j] - b[i].data()[j]));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("config validation") {
    ModelConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.dim = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.layers = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.classes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("untrained model is close to uniform") {
    const LayeredClassifier model(small_config(), 3);
    const Tensor2D probs = model.predict(random_batch(20, 12, 1));
    for (double p : probs.values()) CHECK(std::abs(p - 0.2) < 0.15);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double sum = 0.0;
        for (double p : probs.row(r)) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("forward exposes every layer and resumes bit-identically") {
    const LayeredClassifier model(small_config(), 4);
    const auto batch = random_batch(6, 12, 2);
    const ForwardOutput out = model.forward(batch);
    REQUIRE(out.hidden.size() == 5);
    for (std::size_t m = 0; m <= 4; ++m) {
        CHECK(out.hidden[m].layer == m);
        CHECK(model.forward_from_layer(m, out.hidden[m]) == out.probs);
    }
    CHECK_THROWS(model.forward_from_layer(5, out.hidden[4]));
    CHECK_THROWS(model.forward_from_layer(2, out.hidden[1]));
}

TEST_CASE("padding does not change predictions") {
    const LayeredClassifier model(small_config(), 5);
    auto batch = random_batch(4, 6, 3);
    auto padded = batch;
    for (auto& text : padded) {
        text.ids.resize(12, Vocabulary::kPadding);
        for (std::size_t i = text.length; i < 12; ++i) text.ids[i] = 7; // ignored beyond length
    }
    CHECK(model.predict(batch) == model.predict(padded));
}

TEST_CASE("train_forward without mix matches inference") {
    LayeredClassifier model(small_config(), 6);
    const auto batch = random_batch(5, 12, 4);
    CHECK(model.train_forward(batch) == model.predict(batch));
}

TEST_CASE("degenerate mixes reproduce the unmixed gradients") {
    const auto batch = random_batch(6, 12, 5);
    const Tensor2D targets = one_hot_targets(6, 5);

    LayeredClassifier plain(small_config(), 7);
    const Tensor2D p0 = plain.train_forward(batch);
    plain.backward(cross_entropy_batch(targets, p0).grad);
    const auto reference = grads_of(plain);

    for (double lambda : {1.0, 0.5}) {
        LayeredClassifier mixed(small_config(), 7);
        MixSpec spec;
        spec.layer = 2;
        for (std::size_t i = 0; i < 6; ++i) {
            // lambda = 1 pairs with a different row that must get no weight.
            const std::size_t other = lambda == 1.0 ? (i + 1) % 6 : i;
            spec.pairs.push_back({i, other, lambda});
        }
        const Tensor2D p1 = mixed.train_forward(batch, spec);
        CHECK(max_abs_diff({p1}, {p0}) < 1e-12);
        mixed.backward(cross_entropy_batch(targets, p1).grad);
        CHECK(max_abs_diff(grads_of(mixed), reference) < 1e-12);
    }
}

TEST_CASE("mix output has one row per pair") {
    LayeredClassifier model(small_config(), 8);
    const auto batch = random_batch(4, 12, 6);
    MixSpec spec{1, {{0, 1, 0.7}, {2, 3, 0.9}, {3, 0, 0.6}}};
    CHECK(model.train_forward(batch, spec).rows() == 3);
    MixSpec bad{1, {{0, 9, 0.7}}};
    CHECK_THROWS_AS(model.train_forward(batch, bad), std::out_of_range);
}

TEST_CASE("mix_rows interpolates") {
    const Tensor2D h = Tensor2D::from_rows({{1, 0}, {0, 1}});
    const MixPair pairs[] = {{0, 1, 0.75}, {1, 1, 0.5}};
    CHECK(mix_rows(h, pairs) == Tensor2D::from_rows({{0.75, 0.25}, {0, 1}}));
}

TEST_CASE("backward without a training forward throws") {
    LayeredClassifier model(small_config(), 9);
    CHECK_THROWS_AS(model.backward(Tensor2D(1, 5)), std::logic_error);
}

TEST_CASE("checkpoints round-trip exactly") {
    const LayeredClassifier model(small_config(), 10);
    std::stringstream buffer;
    model.save(buffer);
    const LayeredClassifier loaded = LayeredClassifier::load(buffer);
    CHECK(loaded.config() == model.config());
    const auto a = model.params();
    const auto b = loaded.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->name == b[i]->name);
        CHECK(a[i]->value == b[i]->value);
    }
    const auto batch = random_batch(3, 12, 7);
    CHECK(model.predict(batch) == loaded.predict(batch));

    std::istringstream broken("not a checkpoint");
    CHECK_THROWS_AS(LayeredClassifier::load(broken), DataError);
}

TEST_CASE("initialisation is seeded") {
    const LayeredClassifier a(small_config(), 11);
    const LayeredClassifier b(small_config(), 11);
    const LayeredClassifier c(small_config(), 12);
    CHECK(a.params()[0]->value == b.params()[0]->value);
    CHECK(a.params()[0]->value != c.params()[0]->value);
}
