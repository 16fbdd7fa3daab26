#include "cmatch/evalkit.hpp"

#include "cmatch/errors.hpp"

#include <cmath>
#include <cstdio>

namespace cmatch {

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const std::size_t> gold,
                                                  std::span<const std::size_t> predicted,
                                                  std::size_t classes) {
    if (gold.size() != predicted.size()) {
        throw std::invalid_argument("confusion matrix: gold/prediction length mismatch");
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        cm.add(gold[i], predicted[i]);
    }
    return cm;
}

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted, std::size_t count) {
    if (gold >= classes_ || predicted >= classes_) {
        throw std::out_of_range("confusion matrix: class index out of range");
    }
    counts_[gold * classes_ + predicted] += count;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (std::size_t c : counts_) {
        n += c;
    }
    return n;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < classes_; ++c) {
        n += at(c, c);
    }
    return n;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    const std::size_t classes = cm.classes();
    MetricsReport report;
    report.n_eval = cm.total();
    report.per_class.resize(classes);
    std::vector<std::size_t> row_sum(classes, 0), col_sum(classes, 0);
    for (std::size_t g = 0; g < classes; ++g) {
        for (std::size_t p = 0; p < classes; ++p) {
            row_sum[g] += cm.at(g, p);
            col_sum[p] += cm.at(g, p);
        }
    }
    double f1_total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        ClassScores& s = report.per_class[c];
        const auto tp = static_cast<double>(cm.at(c, c));
        s.precision = col_sum[c] ? tp / static_cast<double>(col_sum[c]) : 0.0;
        s.recall = row_sum[c] ? tp / static_cast<double>(row_sum[c]) : 0.0;
        const double pr = s.precision + s.recall;
        s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
        f1_total += s.f1;
    }
    report.accuracy = report.n_eval
                          ? 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(report.n_eval)
                          : 0.0;
    report.macro_f1 = classes ? 100.0 * f1_total / static_cast<double>(classes) : 0.0;
    return report;
}

std::vector<std::size_t> predict_labels(const LayeredClassifier& model,
                                        std::span<const EncodedText> texts) {
    constexpr std::size_t kChunk = 512;
    std::vector<std::size_t> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += kChunk) {
        const auto chunk = texts.subspan(start, std::min(kChunk, texts.size() - start));
        const Tensor2D probs = model.predict(chunk);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            out.push_back(argmax(probs.row(r)));
        }
    }
    return out;
}

MetricsReport evaluate(const LayeredClassifier& model, const EncodedSplit& split,
                       std::size_t classes) {
    if (split.texts.empty()) {
        throw DataError("evaluate: empty split");
    }
    if (model.config().classes != classes) {
        throw ConfigError("evaluate: model has " + std::to_string(model.config().classes) +
                          " classes but the split's schema has " + std::to_string(classes));
    }
    const auto predicted = predict_labels(model, split.texts);
    return metrics_from_confusion(ConfusionMatrix::from_predictions(split.labels, predicted, classes));
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    for (double v : values) {
        out.mean += v;
    }
    out.mean /= static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        sq += (v - out.mean) * (v - out.mean);
    }
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

std::string format_mean_std(const MeanStd& v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f ± %.1f", v.mean, v.std);
    return buf;
}

AggregateReport aggregate(std::span<const MetricsReport> reports) {
    if (reports.empty()) {
        throw std::invalid_argument("aggregate: no reports");
    }
    AggregateReport agg;
    agg.runs.assign(reports.begin(), reports.end());
    std::vector<double> acc, f1;
    for (const MetricsReport& r : reports) {
        acc.push_back(r.accuracy);
        f1.push_back(r.macro_f1);
    }
    agg.accuracy = mean_std(acc);
    agg.macro_f1 = mean_std(f1);
    return agg;
}

nlohmann::ordered_json to_json(const MetricsReport& report, const LabelSchema& schema) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    j["n_eval"] = report.n_eval;
    auto& classes = j["per_class"];
    classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const ClassScores& s = report.per_class[c];
        classes.push_back({{"class", c < schema.size() ? schema.name(c) : std::to_string(c)},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1}});
    }
    return j;
}

nlohmann::ordered_json to_json(const AggregateReport& report, const LabelSchema& schema) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["accuracy"] = {{"mean", report.accuracy.mean}, {"std", report.accuracy.std},
                     {"formatted", format_mean_std(report.accuracy)}};
    j["macro_f1"] = {{"mean", report.macro_f1.mean}, {"std", report.macro_f1.std},
                     {"formatted", format_mean_std(report.macro_f1)}};
    auto& runs = j["runs"];
    runs = nlohmann::ordered_json::array();
    for (const MetricsReport& r : report.runs) {
        auto rj = to_json(r, schema);
        rj.erase("schema");
        runs.push_back(std::move(rj));
    }
    return j;
}

} // namespace cmatch
