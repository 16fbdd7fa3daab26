#include "cmatch/errors.hpp"
#include "cmatch/evalkit.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace cmatch;
using doctest::Approx;

namespace {

MetricsReport score(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                    std::size_t classes) {
    return metrics_from_confusion(ConfusionMatrix::from_predictions(gold, pred, classes));
}

} // namespace

TEST_CASE("accuracy and macro-F1 examples") {
    const MetricsReport r = score({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
    CHECK(r.accuracy == Approx(75.0));
    CHECK(r.macro_f1 == Approx(73.3333).epsilon(1e-4));
    CHECK(r.per_class[0].precision == Approx(1.0));
    CHECK(r.per_class[0].recall == Approx(0.5));
    CHECK(r.n_eval == 4);

    const MetricsReport constant = score({0, 0, 1, 1}, {0, 0, 0, 0}, 2);
    CHECK(constant.accuracy == Approx(50.0));
    CHECK(constant.macro_f1 == Approx(33.3333).epsilon(1e-4));
    CHECK(constant.per_class[1].f1 == 0.0);
}

TEST_CASE("confusion matrix bookkeeping") {
    ConfusionMatrix cm(3);
    cm.add(0, 2, 4);
    cm.add(1, 1);
    CHECK(cm.at(0, 2) == 4);
    CHECK(cm.total() == 5);
    CHECK(cm.trace() == 1);
    CHECK_THROWS(ConfusionMatrix::from_predictions(std::vector<std::size_t>{0},
                                                   std::vector<std::size_t>{0, 1}, 2));
}

TEST_CASE("metrics do not depend on example order") {
    std::mt19937_64 rng(4);
    std::vector<std::size_t> gold(300), pred(300);
    for (std::size_t i = 0; i < 300; ++i) {
        gold[i] = rng() % 5;
        pred[i] = rng() % 3 == 0 ? gold[i] : rng() % 5;
    }
    const MetricsReport base = score(gold, pred, 5);
    std::vector<std::size_t> order(300);
    std::iota(order.begin(), order.end(), 0);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> g, p;
        for (std::size_t i : order) {
            g.push_back(gold[i]);
            p.push_back(pred[i]);
        }
        const MetricsReport shuffled = score(g, p, 5);
        CHECK(shuffled.accuracy == Approx(base.accuracy));
        CHECK(shuffled.macro_f1 == Approx(base.macro_f1));
    }
    CHECK(base.macro_f1 >= 0.0);
    CHECK(base.macro_f1 <= 100.0);
}

TEST_CASE("mean and population standard deviation") {
    const double values[] = {60.0, 62.0, 64.0};
    const MeanStd m = mean_std(values);
    CHECK(m.mean == Approx(62.0));
    CHECK(m.std == Approx(1.63299).epsilon(1e-5));
    CHECK(format_mean_std(m) == "62.0 ± 1.6");
    const double single[] = {70.0};
    CHECK(mean_std(single).std == 0.0);
}

TEST_CASE("aggregate and json") {
    MetricsReport a, b;
    a.accuracy = 80;
    a.macro_f1 = 70;
    b.accuracy = 90;
    b.macro_f1 = 60;
    const MetricsReport both[] = {a, b};
    const AggregateReport agg = aggregate(both);
    CHECK(agg.accuracy.mean == Approx(85));
    CHECK(agg.macro_f1.std == Approx(5));

    const auto j = to_json(score({0, 1}, {0, 1}, 2), LabelSchema({"x", "y"}));
    CHECK(j["schema"] == kReportSchema);
    CHECK(j["accuracy"] == Approx(100.0));
}

TEST_CASE("evaluate checks its inputs") {
    ModelConfig mc;
    mc.vocab_size = 10;
    mc.dim = 8;
    mc.layers = 2;
    mc.classes = 3;
    const LayeredClassifier model(mc, 1);
    EncodedSplit empty;
    CHECK_THROWS_AS(evaluate(model, empty, 3), DataError);
    EncodedSplit one;
    one.texts.push_back({{2, 3}, 2});
    one.labels.push_back(1);
    CHECK_THROWS_AS(evaluate(model, one, 4), ConfigError);
    const MetricsReport r = evaluate(model, one, 3);
    CHECK(r.n_eval == 1);
    CHECK(predict_labels(model, one.texts).size() == 1);
}
