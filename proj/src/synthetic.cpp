#include "cmatch/synthetic.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace cmatch {

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("synthetic: " + msg); };
    if (classes < 2) fail("classes must be >= 2");
    const std::size_t floor_size = classes * 10;
    if (train < floor_size || dev < floor_size || test < floor_size) {
        fail("every split needs at least classes x 10 = " + std::to_string(floor_size) + " examples");
    }
    if (!(label_noise >= 0.0 && label_noise < 1.0)) fail("label_noise must be in [0, 1)");
    if (indicative_per_class < 2) fail("indicative_per_class must be >= 2");
    if (example_length < 2) fail("example_length must be >= 2");
    if (!(class_fraction > 0.0 && class_fraction <= 1.0)) fail("class_fraction must be in (0, 1]");
    if (shared_vocab < 2) fail("shared_vocab must be >= 2");
    if (!(domain_shift >= 0.0 && domain_shift <= 1.0)) fail("domain_shift must be in [0, 1]");
    if (!proportions.empty()) {
        if (proportions.size() != classes) fail("proportions must list one value per class");
        double total = 0.0;
        for (double p : proportions) {
            if (!(p > 0.0)) fail("proportions must be positive");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) fail("proportions must sum to 1");
    }
}

namespace {

std::string indicative_token(std::size_t cls, std::size_t j, bool shifted) {
    return "k" + std::to_string(cls) + "t" + std::to_string(j) + (shifted ? "x" : "");
}

std::string noise_token(std::size_t j, bool shifted) {
    return "n" + std::to_string(j) + (shifted ? "x" : "");
}

struct Vocabularies {
    std::vector<std::vector<std::string>> indicative;
    std::vector<std::string> noise;
};

Vocabularies make_vocabularies(const SyntheticSpec& spec) {
    Vocabularies v;
    const auto shifted_per_class = static_cast<std::size_t>(
        std::floor(spec.domain_shift * static_cast<double>(spec.indicative_per_class) + 0.5));
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<std::string> tokens;
        for (std::size_t j = 0; j < spec.indicative_per_class; ++j) {
            tokens.push_back(indicative_token(c, j, j < shifted_per_class));
        }
        v.indicative.push_back(std::move(tokens));
    }
    const auto shifted_noise = static_cast<std::size_t>(
        std::floor(spec.domain_shift * static_cast<double>(spec.shared_vocab) + 0.5));
    for (std::size_t j = 0; j < spec.shared_vocab; ++j) {
        v.noise.push_back(noise_token(j, j < shifted_noise));
    }
    return v;
}

// Each token lists its two cyclic neighbours within the same pool.
void add_ring_synonyms(SynonymLexicon& lex, const std::vector<std::string>& pool) {
    const std::size_t n = pool.size();
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::string> syns{pool[(j + 1) % n]};
        if (n > 2) {
            syns.push_back(pool[(j + n - 1) % n]);
        }
        lex.add(pool[j], std::move(syns));
    }
}

class TextSampler {
public:
    TextSampler(const SyntheticSpec& spec, const Vocabularies& vocab) : spec_(spec), vocab_(vocab) {
        window_ = spec.topic_window == 0 ? spec.indicative_per_class
                                         : std::min(spec.topic_window, spec.indicative_per_class);
        class_tokens_ = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(spec.class_fraction *
                                                       static_cast<double>(spec.example_length) +
                                                   0.5)));
        class_tokens_ = std::min(class_tokens_, spec.example_length);
    }

    std::string sample(std::size_t cls, std::mt19937_64& rng) {
        const std::size_t ring = spec_.indicative_per_class;
        std::vector<std::string> words;
        words.reserve(spec_.example_length);
        const std::size_t start = window_ == ring ? 0 : std::uniform_int_distribution<std::size_t>(0, ring - 1)(rng);
        std::uniform_int_distribution<std::size_t> offset(0, window_ - 1);
        for (std::size_t i = 0; i < class_tokens_; ++i) {
            words.push_back(vocab_.indicative[cls][(start + offset(rng)) % ring]);
        }
        std::uniform_int_distribution<std::size_t> noise(0, vocab_.noise.size() - 1);
        while (words.size() < spec_.example_length) {
            words.push_back(vocab_.noise[noise(rng)]);
        }
        std::shuffle(words.begin(), words.end(), rng);
        std::string text;
        for (const std::string& w : words) {
            if (!text.empty()) {
                text += ' ';
            }
            text += w;
        }
        return text;
    }

private:
    const SyntheticSpec& spec_;
    const Vocabularies& vocab_;
    std::size_t window_ = 1;
    std::size_t class_tokens_ = 1;
};

Dataset make_split(const SyntheticSpec& spec, const LabelSchema& schema, TextSampler& sampler,
                   std::size_t size, double noise, SplitTag tag, const char* name,
                   std::uint64_t uid_base, std::uint64_t stream) {
    std::vector<double> proportions = spec.proportions;
    if (proportions.empty()) {
        proportions.assign(spec.classes, 1.0 / static_cast<double>(spec.classes));
    }
    const auto per_class = apportion(size, proportions);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        labels.insert(labels.end(), per_class[c], c);
    }
    std::mt19937_64 rng(mix_seed(spec.seed, stream));
    std::shuffle(labels.begin(), labels.end(), rng);

    // Exactly round(noise * size) examples get text from another class.
    const auto noisy = static_cast<std::size_t>(std::floor(noise * static_cast<double>(size) + 0.5));
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_noisy(size, false);
    for (std::size_t k = 0; k < noisy; ++k) {
        is_noisy[order[k]] = true;
    }

    Dataset ds;
    ds.name = name;
    ds.schema = schema;
    ds.tag = tag;
    std::uniform_int_distribution<std::size_t> other(1, spec.classes - 1);
    for (std::size_t i = 0; i < size; ++i) {
        std::size_t text_class = labels[i];
        if (is_noisy[i]) {
            text_class = (labels[i] + other(rng)) % spec.classes;
        }
        Example ex;
        ex.id = std::string(name) + "-" + std::to_string(i);
        ex.text = sampler.sample(text_class, rng);
        ex.label = labels[i];
        ex.uid = uid_base + i;
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

} // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<std::string> names;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        names.push_back("class_" + std::to_string(c));
    }
    SyntheticData data;
    data.schema = LabelSchema(std::move(names));
    const Vocabularies vocab = make_vocabularies(spec);
    TextSampler sampler(spec, vocab);
    data.train = make_split(spec, data.schema, sampler, spec.train, spec.label_noise,
                            SplitTag::train, "train", 0, 1);
    data.dev = make_split(spec, data.schema, sampler, spec.dev, 0.0, SplitTag::dev, "dev",
                          spec.train, 2);
    data.test = make_split(spec, data.schema, sampler, spec.test, 0.0, SplitTag::test, "test",
                           spec.train + spec.dev, 3);
    for (const auto& pool : vocab.indicative) {
        add_ring_synonyms(data.lexicon, pool);
    }
    add_ring_synonyms(data.lexicon, vocab.noise);
    data.indicative = vocab.indicative;
    data.noise = vocab.noise;
    return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_dataset(dir / "train.tsv", data.train);
    write_dataset(dir / "dev.tsv", data.dev);
    write_dataset(dir / "test.tsv", data.test);
    data.schema.save(dir / "schema.txt");
    std::ofstream lex(dir / "lexicon.tsv");
    if (!lex) {
        throw DataError("cannot write lexicon in " + dir.string());
    }
    lex << "# synthetic lexicon: word<TAB>synonyms\n";
    std::vector<std::string> words;
    for (const auto& pool : data.indicative) {
        words.insert(words.end(), pool.begin(), pool.end());
    }
    words.insert(words.end(), data.noise.begin(), data.noise.end());
    for (const std::string& w : words) {
        const auto* syns = data.lexicon.lookup(w);
        lex << w << '\t';
        for (std::size_t k = 0; k < syns->size(); ++k) {
            lex << (k ? "," : "") << (*syns)[k];
        }
        lex << '\n';
    }
}

} // namespace cmatch
