#include "cmatch/dataio.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace cmatch {

LabelSchema::LabelSchema(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const std::string& n : names_) {
        if (n.empty()) {
            throw DataError("label schema: empty class name");
        }
        if (!seen.insert(n).second) {
            throw DataError("label schema: duplicate class name '" + n + "'");
        }
    }
}

LabelSchema LabelSchema::humaid() {
    return LabelSchema({"caution_and_advice", "infrastructure_and_utility_damage",
                        "injured_or_dead_people", "not_humanitarian",
                        "other_relevant_information", "rescue_volunteering_or_donation_effort",
                        "sympathy_and_support"});
}

LabelSchema LabelSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open schema " + path.string());
    }
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty() && line.front() != '#') {
            names.push_back(line);
        }
    }
    if (names.size() < 2) {
        throw DataError("schema " + path.string() + ": need at least two classes");
    }
    return LabelSchema(std::move(names));
}

void LabelSchema::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write schema " + path.string());
    }
    for (const std::string& n : names_) {
        out << n << '\n';
    }
}

std::optional<std::size_t> LabelSchema::index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(schema.size(), 0);
    for (const Example& e : examples) {
        ++counts.at(e.label);
    }
    return counts;
}

Dataset load_dataset(const std::filesystem::path& path, const LabelSchema& schema,
                     std::uint64_t uid_base) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset " + path.string());
    }
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(where + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "id\ttext\tlabel") {
        throw DataError(where + ":1: expected header 'id<TAB>text<TAB>label'");
    }
    Dataset ds;
    ds.name = path.stem().string();
    ds.schema = schema;
    std::set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const std::string loc = where + ":" + std::to_string(line_no);
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError(loc + ": malformed row (expected 3 tab-separated fields)");
        }
        Example ex;
        ex.id = line.substr(0, t1);
        ex.text = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string label = line.substr(t2 + 1);
        if (ex.id.empty()) {
            throw DataError(loc + ": empty id");
        }
        if (ex.text.find_first_not_of(" \t") == std::string::npos) {
            throw DataError(loc + ": empty text");
        }
        const auto index = schema.index_of(label);
        if (!index) {
            throw DataError(loc + ": unknown label '" + label + "'");
        }
        if (!ids.insert(ex.id).second) {
            throw DataError(loc + ": duplicate id '" + ex.id + "'");
        }
        ex.label = *index;
        ex.uid = uid_base + ds.examples.size();
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write dataset " + path.string());
    }
    out << "id\ttext\tlabel\n";
    for (const Example& e : dataset.examples) {
        out << e.id << '\t' << e.text << '\t' << dataset.schema.name(e.label) << '\n';
    }
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions) {
    std::vector<std::size_t> out(fractions.size());
    std::vector<double> remainder(fractions.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double quota = fractions[i] * static_cast<double>(total);
        out[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<std::size_t> order(fractions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        ++out[order[k]];
        ++assigned;
    }
    return out;
}

DataSplits split(const Dataset& dataset, std::uint64_t seed) {
    constexpr std::array<double, 3> kFractions{0.8, 0.1, 0.1};
    const std::size_t classes = dataset.schema.size();
    const auto totals = apportion(dataset.size(), kFractions);
    const auto counts = dataset.class_counts();

    // Per-class cells: floor of the quota, then hand out the remaining units
    // by largest fractional part while both the class and the split still need them.
    std::vector<std::array<std::size_t, 3>> cells(classes);
    std::vector<std::size_t> class_need(classes);
    std::array<std::size_t, 3> split_need{totals[0], totals[1], totals[2]};
    struct Candidate {
        double frac;
        std::size_t cls;
        std::size_t part;
    };
    std::vector<Candidate> candidates;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t used = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            const double quota = kFractions[s] * static_cast<double>(counts[c]);
            cells[c][s] = static_cast<std::size_t>(std::floor(quota));
            used += cells[c][s];
            split_need[s] -= cells[c][s];
            candidates.push_back({quota - std::floor(quota), c, s});
        }
        class_need[c] = counts[c] - used;
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.frac > b.frac; });
    for (const Candidate& cand : candidates) {
        if (class_need[cand.cls] > 0 && split_need[cand.part] > 0) {
            ++cells[cand.cls][cand.part];
            --class_need[cand.cls];
            --split_need[cand.part];
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; class_need[c] > 0 && s < 3; ++s) {
            while (class_need[c] > 0 && split_need[s] > 0) {
                ++cells[c][s];
                --class_need[c];
                --split_need[s];
            }
        }
    }

    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class[dataset.examples[i].label].push_back(i);
    }
    std::array<std::vector<std::size_t>, 3> chosen;
    for (std::size_t c = 0; c < classes; ++c) {
        std::mt19937_64 rng(mix_seed(seed, 0x5b1d, c));
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t k = 0; k < cells[c][s]; ++k) {
                chosen[s].push_back(by_class[c][pos++]);
            }
        }
    }

    auto make = [&](std::size_t s, SplitTag tag, const char* suffix) {
        std::sort(chosen[s].begin(), chosen[s].end());
        Dataset part;
        part.name = dataset.name + suffix;
        part.schema = dataset.schema;
        part.tag = tag;
        for (std::size_t i : chosen[s]) {
            part.examples.push_back(dataset.examples[i]);
        }
        return part;
    };
    return {make(0, SplitTag::train, "-train"), make(1, SplitTag::dev, "-dev"),
            make(2, SplitTag::test, "-test")};
}

FewShotView::FewShotView(LabelSchema schema, std::vector<LabeledExample> labeled,
                         std::vector<UnlabeledExample> unlabeled,
                         std::map<std::uint64_t, std::size_t> hidden_labels)
    : schema_(std::move(schema)), labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)),
      hidden_labels_(std::move(hidden_labels)) {}

std::optional<std::size_t> FewShotView::diagnostic_label(std::uint64_t uid) const {
    const auto it = hidden_labels_.find(uid);
    if (it == hidden_labels_.end()) {
        return std::nullopt;
    }
    return it->second;
}

FewShotView few_shot_sample(const Dataset& train, std::size_t per_class, std::uint64_t seed) {
    const std::size_t classes = train.schema.size();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
        by_class[train.examples[i].label].push_back(i);
    }
    std::vector<bool> is_labeled(train.size(), false);
    std::vector<LabeledExample> labeled;
    for (std::size_t c = 0; c < classes; ++c) {
        if (by_class[c].size() < per_class) {
            throw DataError("few-shot sample: class '" + train.schema.name(c) + "' has " +
                            std::to_string(by_class[c].size()) + " training examples, need " +
                            std::to_string(per_class));
        }
        std::mt19937_64 rng(mix_seed(seed, 0xf5, c));
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (std::size_t k = 0; k < per_class; ++k) {
            const Example& e = train.examples[by_class[c][k]];
            is_labeled[by_class[c][k]] = true;
            labeled.push_back({e.uid, tokenize(e.text), e.label});
        }
    }
    std::vector<UnlabeledExample> unlabeled;
    std::map<std::uint64_t, std::size_t> hidden;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!is_labeled[i]) {
            const Example& e = train.examples[i];
            unlabeled.push_back({e.uid, tokenize(e.text)});
            hidden.emplace(e.uid, e.label);
        }
    }
    return FewShotView(train.schema, std::move(labeled), std::move(unlabeled), std::move(hidden));
}

BatchPlanner::BatchPlanner(std::size_t labeled_pool, std::size_t unlabeled_pool,
                           std::size_t batch_size, std::size_t unlabeled_batch, std::uint64_t seed)
    : labeled_pool_(labeled_pool), unlabeled_pool_(unlabeled_pool), batch_size_(batch_size),
      unlabeled_batch_(unlabeled_batch), seed_(seed) {
    if (labeled_pool_ == 0) {
        throw DataError("batch planner: labeled pool is empty");
    }
}

const std::vector<std::size_t>& BatchPlanner::epoch_order(std::size_t epoch) const {
    auto it = epochs_.find(epoch);
    if (it == epochs_.end()) {
        std::vector<std::size_t> order(unlabeled_pool_);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(mix_seed(seed_, 0xe90c, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        if (epochs_.size() > 4) {
            epochs_.erase(epochs_.begin());
        }
        it = epochs_.emplace(epoch, std::move(order)).first;
    }
    return it->second;
}

BatchPlan BatchPlanner::plan(std::size_t step) const {
    BatchPlan plan;
    std::mt19937_64 rng(mix_seed(seed_, 0x1abe1, step));
    std::uniform_int_distribution<std::size_t> pick(0, labeled_pool_ - 1);
    plan.labeled.reserve(batch_size_);
    for (std::size_t b = 0; b < batch_size_; ++b) {
        plan.labeled.push_back(pick(rng));
    }
    if (unlabeled_pool_ > 0) {
        plan.unlabeled.reserve(unlabeled_batch_);
        const std::size_t start = step * unlabeled_batch_;
        for (std::size_t k = 0; k < unlabeled_batch_; ++k) {
            const std::size_t pos = start + k;
            plan.unlabeled.push_back(epoch_order(pos / unlabeled_pool_)[pos % unlabeled_pool_]);
        }
    }
    return plan;
}

EncodedSplit encode_split(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_len) {
    EncodedSplit out;
    out.texts.reserve(dataset.size());
    out.labels.reserve(dataset.size());
    for (const Example& e : dataset.examples) {
        out.texts.push_back(encode(tokenize(e.text), vocab, max_len));
        out.labels.push_back(e.label);
    }
    return out;
}

Vocabulary build_vocabulary(const Dataset& train) {
    std::vector<Tokens> corpus;
    corpus.reserve(train.size());
    for (const Example& e : train.examples) {
        corpus.push_back(tokenize(e.text));
    }
    return Vocabulary::build(corpus);
}

} // namespace cmatch
