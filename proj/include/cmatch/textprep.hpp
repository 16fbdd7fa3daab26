#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cmatch {

using Tokens = std::vector<std::string>;

/// Lowercases, maps URLs to "<url>" and @mentions to "<user>", drops the '#'
/// of hashtags and strips surrounding punctuation. Never returns an empty
/// list: text with no usable tokens becomes {"<empty>"}.
Tokens tokenize(std::string_view text);

class Vocabulary {
public:
    static constexpr std::int32_t kPadding = 0;
    static constexpr std::int32_t kUnknown = 1;

    Vocabulary();

    /// Builds from training token lists. Ids are assigned in order of first
    /// appearance so the result is independent of hash ordering.
    static Vocabulary build(std::span<const Tokens> corpus);

    std::int32_t id(const std::string& token) const;
    const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tokens_.size(); }
    std::span<const std::string> tokens() const { return tokens_; }

    void save(std::ostream& out) const;
    static Vocabulary load(std::istream& in);

private:
    void add(const std::string& token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct EncodedText {
    std::vector<std::int32_t> ids; // always max_len long, padding after `length`
    std::size_t length = 0;

    friend bool operator==(const EncodedText&, const EncodedText&) = default;
};

EncodedText encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::size_t max_len);

class SynonymLexicon {
public:
    SynonymLexicon() = default;

    /// `word<TAB>syn1,syn2,...` lines; '#' comments and blank lines ignored.
    static SynonymLexicon parse(std::istream& in);
    static SynonymLexicon load(const std::filesystem::path& path);

    void add(std::string word, std::vector<std::string> synonyms);
    /// Case-insensitive. Returns nullptr when the word has no entry.
    const std::vector<std::string>* lookup(std::string_view word) const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

/// The synonym lexicon that ships in data/lexicon.tsv.
const std::filesystem::path& bundled_lexicon_path();

/// Deterministic random stream keyed by (seed, example id, augmentation index).
class AugmenterRng {
public:
    AugmenterRng(std::uint64_t seed, std::uint64_t example_id, std::uint64_t k);

    std::size_t uniform_index(std::size_t n);
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Fraction of tokens touched by one augmentation.
inline constexpr double kAugmentStrength = 0.1;

/// max(1, round-half-up(strength * n)).
std::size_t edit_count(std::size_t n, double strength = kAugmentStrength);

Tokens synonym_replace(std::span<const std::string> tokens, const SynonymLexicon& lexicon,
                       AugmenterRng& rng, double strength = kAugmentStrength);
Tokens random_swap(std::span<const std::string> tokens, AugmenterRng& rng,
                   double strength = kAugmentStrength);

enum class AugmentKind { synonym_replace = 0, random_swap = 1 };

AugmentKind choose_augmentation(AugmenterRng& rng);
Tokens apply_augmentation(AugmentKind kind, std::span<const std::string> tokens,
                          const SynonymLexicon& lexicon, AugmenterRng& rng,
                          double strength = kAugmentStrength);
/// Picks one of the two augmentations uniformly, then applies it.
Tokens augment(std::span<const std::string> tokens, const SynonymLexicon& lexicon,
               AugmenterRng& rng, double strength = kAugmentStrength);

} // namespace cmatch
