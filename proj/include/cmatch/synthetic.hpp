#pragma once

#include "cmatch/dataio.hpp"

#include <filesystem>
#include <vector>

namespace cmatch {

/// Parameters of the synthetic few-shot benchmark.
///
/// Every class owns `indicative_per_class` tokens that no other class uses,
/// arranged in a ring. An example has `example_length` tokens: `class_fraction`
/// of them drawn uniformly from a window of `topic_window` consecutive ring
/// tokens starting at a random position, the rest from a shared noise
/// vocabulary, in shuffled order. Neighbouring windows overlap, so a class is
/// a chain of related sub-topics that a handful of labeled examples cannot
/// cover. `label_noise` of the training examples carry text generated from a
/// different class than their label.
struct SyntheticSpec {
    std::size_t classes = 4;
    std::size_t train = 3000;
    std::size_t dev = 375;
    std::size_t test = 375;
    double label_noise = 0.1;
    std::uint64_t seed = 0;
    std::size_t indicative_per_class = 20;
    std::size_t example_length = 15;
    double class_fraction = 0.6;
    std::size_t shared_vocab = 100;
    /// 0 or >= indicative_per_class: draw from the whole set.
    std::size_t topic_window = 4;
    /// Fraction of each class's indicative tokens (and of the noise vocabulary)
    /// swapped for domain-specific variants. 0 = source domain.
    double domain_shift = 0.0;
    /// Class proportions; empty means balanced.
    std::vector<double> proportions;

    /// Throws ConfigError when these settings cannot be generated.
    void validate() const;
};

struct SyntheticData {
    LabelSchema schema;
    Dataset train;
    Dataset dev;
    Dataset test;
    /// Synonyms map each token to other tokens of the same class (or noise pool).
    SynonymLexicon lexicon;
    std::vector<std::vector<std::string>> indicative; // per class, in the generated domain
    std::vector<std::string> noise;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Writes train.tsv, dev.tsv, test.tsv, schema.txt and lexicon.tsv into `dir`.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

} // namespace cmatch
