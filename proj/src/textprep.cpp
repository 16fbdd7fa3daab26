#include "cmatch/textprep.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cmatch {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Strips punctuation from both ends, keeping a leading character in `keep`.
std::string_view strip_punct(std::string_view s, std::string_view keep = {}) {
    while (!s.empty() && is_punct(s.front()) && keep.find(s.front()) == std::string_view::npos) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_punct(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

bool is_url(std::string_view s) {
    return s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.");
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

} // namespace

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::istringstream words{lowercase(text)};
    std::string raw;
    while (words >> raw) {
        std::string_view word = strip_punct(raw, "@#");
        if (word.empty()) {
            continue;
        }
        if (is_url(word)) {
            out.emplace_back("<url>");
        } else if (word.front() == '@') {
            if (!strip_punct(word).empty()) {
                out.emplace_back("<user>");
            }
        } else {
            word = strip_punct(word);
            if (!word.empty()) {
                out.emplace_back(word);
            }
        }
    }
    if (out.empty()) {
        out.emplace_back("<empty>");
    }
    return out;
}

Vocabulary::Vocabulary() {
    add("<pad>");
    add("<unk>");
}

void Vocabulary::add(const std::string& token) {
    if (index_.contains(token)) {
        return;
    }
    index_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(token);
}

Vocabulary Vocabulary::build(std::span<const Tokens> corpus) {
    Vocabulary vocab;
    for (const Tokens& tokens : corpus) {
        for (const std::string& t : tokens) {
            vocab.add(t);
        }
    }
    return vocab;
}

std::int32_t Vocabulary::id(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
}

void Vocabulary::save(std::ostream& out) const {
    out << tokens_.size() << '\n';
    for (const std::string& t : tokens_) {
        out << t << '\n';
    }
}

Vocabulary Vocabulary::load(std::istream& in) {
    std::size_t n = 0;
    if (!(in >> n) || n < 2) {
        throw DataError("vocabulary: bad size header");
    }
    in.ignore(1);
    Vocabulary vocab;
    vocab.tokens_.clear();
    vocab.index_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        std::string t;
        if (!std::getline(in, t)) {
            throw DataError("vocabulary: truncated at entry " + std::to_string(i));
        }
        vocab.add(t);
    }
    if (vocab.size() != n) {
        throw DataError("vocabulary: duplicate tokens");
    }
    return vocab;
}

EncodedText encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::size_t max_len) {
    if (max_len < 1) {
        throw std::invalid_argument("encode: max_len must be at least 1");
    }
    if (tokens.empty()) {
        throw std::invalid_argument("encode: empty token list");
    }
    EncodedText out;
    out.length = std::min(tokens.size(), max_len);
    out.ids.assign(max_len, Vocabulary::kPadding);
    for (std::size_t i = 0; i < out.length; ++i) {
        out.ids[i] = vocab.id(tokens[i]);
    }
    return out;
}

void SynonymLexicon::add(std::string word, std::vector<std::string> synonyms) {
    word = lowercase(word);
    std::vector<std::string> kept;
    for (std::string& s : synonyms) {
        s = lowercase(trim(s));
        if (!s.empty() && s != word && std::find(kept.begin(), kept.end(), s) == kept.end()) {
            kept.push_back(std::move(s));
        }
    }
    if (kept.empty()) {
        return;
    }
    auto& slot = entries_[word];
    for (std::string& s : kept) {
        if (std::find(slot.begin(), slot.end(), s) == slot.end()) {
            slot.push_back(std::move(s));
        }
    }
}

SynonymLexicon SynonymLexicon::parse(std::istream& in) {
    SynonymLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("lexicon line " + std::to_string(line_no) + ": expected word<TAB>synonyms");
        }
        std::vector<std::string> synonyms;
        std::istringstream list(line.substr(tab + 1));
        std::string syn;
        while (std::getline(list, syn, ',')) {
            synonyms.push_back(syn);
        }
        lex.add(trim(line.substr(0, tab)), std::move(synonyms));
    }
    return lex;
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open lexicon " + path.string());
    }
    return parse(in);
}

const std::vector<std::string>* SynonymLexicon::lookup(std::string_view word) const {
    const auto it = entries_.find(lowercase(word));
    return it == entries_.end() ? nullptr : &it->second;
}

const std::filesystem::path& bundled_lexicon_path() {
    static const std::filesystem::path path = std::filesystem::path(CMATCH_DATA_DIR) / "lexicon.tsv";
    return path;
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ b); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b) ^ mix_seed(c + 0x632be59bd9b4e019ULL));
}

AugmenterRng::AugmenterRng(std::uint64_t seed, std::uint64_t example_id, std::uint64_t k)
    : engine_(mix_seed(seed, example_id, k)) {}

std::size_t AugmenterRng::uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::size_t edit_count(std::size_t n, double strength) {
    const auto rounded = static_cast<std::size_t>(std::floor(strength * static_cast<double>(n) + 0.5));
    return std::max<std::size_t>(1, rounded);
}

Tokens synonym_replace(std::span<const std::string> tokens, const SynonymLexicon& lexicon,
                       AugmenterRng& rng, double strength) {
    Tokens out(tokens.begin(), tokens.end());
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (lexicon.lookup(out[i]) != nullptr) {
            hits.push_back(i);
        }
    }
    const std::size_t n = std::min(edit_count(out.size(), strength), hits.size());
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_index(hits.size() - i);
        std::swap(hits[i], hits[j]);
        const auto& synonyms = *lexicon.lookup(out[hits[i]]);
        out[hits[i]] = synonyms[rng.uniform_index(synonyms.size())];
    }
    return out;
}

Tokens random_swap(std::span<const std::string> tokens, AugmenterRng& rng, double strength) {
    Tokens out(tokens.begin(), tokens.end());
    if (out.size() < 2) {
        return out;
    }
    const std::size_t swaps = edit_count(out.size(), strength);
    for (std::size_t s = 0; s < swaps; ++s) {
        const std::size_t i = rng.uniform_index(out.size());
        std::size_t j = rng.uniform_index(out.size() - 1);
        if (j >= i) {
            ++j;
        }
        std::swap(out[i], out[j]);
    }
    return out;
}

AugmentKind choose_augmentation(AugmenterRng& rng) {
    return rng.uniform_index(2) == 0 ? AugmentKind::synonym_replace : AugmentKind::random_swap;
}

Tokens apply_augmentation(AugmentKind kind, std::span<const std::string> tokens,
                          const SynonymLexicon& lexicon, AugmenterRng& rng, double strength) {
    switch (kind) {
    case AugmentKind::synonym_replace:
        return synonym_replace(tokens, lexicon, rng, strength);
    case AugmentKind::random_swap:
        return random_swap(tokens, rng, strength);
    }
    throw std::logic_error("unknown augmentation kind");
}

Tokens augment(std::span<const std::string> tokens, const SynonymLexicon& lexicon,
               AugmenterRng& rng, double strength) {
    const AugmentKind kind = choose_augmentation(rng);
    return apply_augmentation(kind, tokens, lexicon, rng, strength);
}

} // namespace cmatch
