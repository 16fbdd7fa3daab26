#pragma once

#include "cmatch/dataio.hpp"
#include "cmatch/evalkit.hpp"
#include "cmatch/trainer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cmatch {

/// A split dataset with the training-split vocabulary and encoded eval splits.
struct PreparedCorpus {
    LabelSchema schema;
    Dataset train;
    Vocabulary vocab;
    EncodedSplit dev;
    EncodedSplit test;
    SynonymLexicon lexicon;
};

PreparedCorpus prepare_corpus(DataSplits splits, SynonymLexicon lexicon, std::size_t max_len);

struct RunRecord {
    std::uint64_t seed = 0;
    TrainResult result;
};

struct SeedRuns {
    std::vector<RunRecord> runs;
    AggregateReport aggregate;
};

/// Trains one run per seed on a fresh `per_class`-shot view of the corpus.
/// Up to `jobs` seeds run concurrently; results are ordered by seed position.
SeedRuns run_seeds(const PreparedCorpus& corpus, const VariantConfig& variant,
                   const HyperParams& hp, std::size_t per_class,
                   const std::vector<std::uint64_t>& seeds, const TrainOptions& options,
                   std::size_t jobs = 1);

/// Same, scoring every selected checkpoint on `target_test` instead of the
/// corpus's own test split.
SeedRuns run_seeds_on(const PreparedCorpus& corpus, const EncodedSplit& target_test,
                      const VariantConfig& variant, const HyperParams& hp, std::size_t per_class,
                      const std::vector<std::uint64_t>& seeds, const TrainOptions& options,
                      std::size_t jobs = 1);

struct SweepCell {
    Variant variant = Variant::supervised;
    std::size_t per_class = 0;
    AggregateReport report;
};

struct SweepTable {
    std::vector<Variant> variants;
    std::vector<std::size_t> counts;
    std::vector<SweepCell> cells; // variant-major
    std::vector<std::string> warnings;

    const SweepCell& cell(std::size_t variant_index, std::size_t count_index) const {
        return cells[variant_index * counts.size() + count_index];
    }
};

/// Mean-accuracy drops larger than this between consecutive counts are flagged.
inline constexpr double kMonotonicityTolerance = 2.0;

SweepTable sweep_labeled_counts(const PreparedCorpus& corpus, const std::vector<Variant>& variants,
                                const std::vector<std::size_t>& counts,
                                const std::vector<std::uint64_t>& seeds, const HyperParams& hp,
                                const TrainOptions& options, std::size_t jobs = 1);
std::string format_sweep_table(const SweepTable& table);
std::string sweep_csv(const SweepTable& table);

/// Trains on the source corpus and scores on a target test split of the same schema.
/// Throws ConfigError when the schemas differ.
AggregateReport evaluate_out_of_domain(const PreparedCorpus& source, const VariantConfig& variant,
                                       const HyperParams& hp, std::size_t per_class,
                                       const std::vector<std::uint64_t>& seeds,
                                       const Dataset& target_test, const TrainOptions& options,
                                       std::size_t jobs = 1);

struct AblationRow {
    std::string label;
    VariantConfig config;
    AggregateReport report;
};

/// Full CrisisMatch, each single-component removal and the supervised baseline.
std::vector<AblationRow> ablation_rows();
std::vector<AblationRow> run_ablation(const PreparedCorpus& corpus, const HyperParams& hp,
                                      std::size_t per_class,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainOptions& options, std::size_t jobs = 1);
std::string format_ablation_table(const std::vector<AblationRow>& rows);

} // namespace cmatch
