#pragma once

#include "cmatch/sslcore.hpp"
#include "cmatch/textprep.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cmatch {

class LabelSchema {
public:
    LabelSchema() = default;
    explicit LabelSchema(std::vector<std::string> names);

    /// The seven HumAID humanitarian categories.
    static LabelSchema humaid();
    /// One class name per line.
    static LabelSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> index_of(const std::string& name) const;

    friend bool operator==(const LabelSchema&, const LabelSchema&) = default;

private:
    std::vector<std::string> names_;
};

struct Example {
    std::string id;
    std::string text;
    std::size_t label = 0;
    std::uint64_t uid = 0; // stable numeric key, used to seed augmentation streams
};

enum class SplitTag { full, train, dev, test };

struct Dataset {
    std::string name;
    LabelSchema schema;
    std::vector<Example> examples;
    SplitTag tag = SplitTag::full;

    std::size_t size() const { return examples.size(); }
    std::vector<std::size_t> class_counts() const;
};

/// Reads `id<TAB>text<TAB>label` with that header line. Example uids are
/// `uid_base + row index`.
Dataset load_dataset(const std::filesystem::path& path, const LabelSchema& schema,
                     std::uint64_t uid_base = 0);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Largest-remainder apportionment of `total` by `fractions`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions);

struct DataSplits {
    Dataset train;
    Dataset dev;
    Dataset test;
};

/// Class-stratified 80/10/10 split. Split totals are the largest-remainder
/// apportionment of the dataset size; per-class cells are rounded so that both
/// class counts and split totals are exact.
DataSplits split(const Dataset& dataset, std::uint64_t seed);

struct LabeledExample {
    std::uint64_t uid = 0;
    Tokens tokens;
    std::size_t label = 0;
};

/// Carries no label: the training path cannot read ground truth for these.
struct UnlabeledExample {
    std::uint64_t uid = 0;
    Tokens tokens;
};

/// Few-shot view of a training split: n labeled examples per class, the rest unlabeled.
class FewShotView {
public:
    FewShotView() = default;
    FewShotView(LabelSchema schema, std::vector<LabeledExample> labeled,
                std::vector<UnlabeledExample> unlabeled,
                std::map<std::uint64_t, std::size_t> hidden_labels);

    const LabelSchema& schema() const { return schema_; }
    std::size_t classes() const { return schema_.size(); }
    const std::vector<LabeledExample>& labeled() const { return labeled_; }
    const std::vector<UnlabeledExample>& unlabeled() const { return unlabeled_; }

    /// Ground truth of an unlabeled example, for diagnostics only.
    std::optional<std::size_t> diagnostic_label(std::uint64_t uid) const;

private:
    LabelSchema schema_;
    std::vector<LabeledExample> labeled_;
    std::vector<UnlabeledExample> unlabeled_;
    std::map<std::uint64_t, std::size_t> hidden_labels_;
};

/// Samples exactly `per_class` labeled examples of every class uniformly.
/// Throws DataError naming the class if it has fewer examples.
FewShotView few_shot_sample(const Dataset& train, std::size_t per_class, std::uint64_t seed);

struct BatchPlan {
    std::vector<std::size_t> labeled;   // indices into view.labeled(), with replacement
    std::vector<std::size_t> unlabeled; // indices into view.unlabeled()
};

/// Per-step batch schedule. Labeled draws are with replacement; the unlabeled
/// stream is a sequence of per-epoch permutations of the pool consumed
/// mu * B at a time. `plan(step)` is a pure function of (seed, step).
class BatchPlanner {
public:
    BatchPlanner(std::size_t labeled_pool, std::size_t unlabeled_pool, std::size_t batch_size,
                 std::size_t unlabeled_batch, std::uint64_t seed);

    BatchPlan plan(std::size_t step) const;

private:
    const std::vector<std::size_t>& epoch_order(std::size_t epoch) const;

    std::size_t labeled_pool_;
    std::size_t unlabeled_pool_;
    std::size_t batch_size_;
    std::size_t unlabeled_batch_;
    std::uint64_t seed_;
    mutable std::map<std::size_t, std::vector<std::size_t>> epochs_;
};

struct EncodedSplit {
    std::vector<EncodedText> texts;
    std::vector<std::size_t> labels;
};

EncodedSplit encode_split(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_len);
/// Vocabulary over every tokenized text of a (training) dataset.
Vocabulary build_vocabulary(const Dataset& train);

} // namespace cmatch
