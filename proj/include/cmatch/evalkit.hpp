#pragma once

#include "cmatch/dataio.hpp"
#include "cmatch/model.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace cmatch {

/// Rows are gold classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

    static ConfusionMatrix from_predictions(std::span<const std::size_t> gold,
                                            std::span<const std::size_t> predicted,
                                            std::size_t classes);

    void add(std::size_t gold, std::size_t predicted, std::size_t count = 1);
    std::size_t at(std::size_t gold, std::size_t predicted) const {
        return counts_[gold * classes_ + predicted];
    }
    std::size_t classes() const { return classes_; }
    std::size_t total() const;
    std::size_t trace() const;

private:
    std::size_t classes_;
    std::vector<std::size_t> counts_;
};

struct ClassScores {
    double precision = 0.0; // fractions in [0, 1]
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0; // percent
    double macro_f1 = 0.0; // percent
    std::vector<ClassScores> per_class;
    std::size_t n_eval = 0;
};

/// Per-class F1 is 2PR / (P + R), with 0 whenever a denominator is 0.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

/// Predicts every example of `split` and scores it. Throws DataError on an
/// empty split and ConfigError if the model's class count differs from the split's.
MetricsReport evaluate(const LayeredClassifier& model, const EncodedSplit& split,
                       std::size_t classes);
std::vector<std::size_t> predict_labels(const LayeredClassifier& model,
                                        std::span<const EncodedText> texts);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

MeanStd mean_std(std::span<const double> values);
/// "mean ± std" with one decimal.
std::string format_mean_std(const MeanStd& v);

struct AggregateReport {
    std::vector<MetricsReport> runs;
    MeanStd accuracy;
    MeanStd macro_f1;
};

AggregateReport aggregate(std::span<const MetricsReport> reports);

inline constexpr const char* kReportSchema = "cmatch.report/1";

nlohmann::ordered_json to_json(const MetricsReport& report, const LabelSchema& schema);
nlohmann::ordered_json to_json(const AggregateReport& report, const LabelSchema& schema);

} // namespace cmatch
