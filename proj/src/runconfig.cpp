#include "cmatch/runconfig.hpp"

#include "cmatch/errors.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace cmatch {

TrainOptions RunConfig::train_options() const {
    TrainOptions o;
    o.max_iters = max_iters;
    o.eval_every = eval_every;
    o.dim = dim;
    o.layers = layers;
    return o;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
        bad_value(key, value, "a non-negative integer");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) {
        bad_value(key, value, "a number");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, "a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

Variant parse_variant_or_throw(const std::string& key, const std::string& value) {
    if (auto v = parse_variant(value)) {
        return *v;
    }
    std::string valid;
    for (std::string_view n : variant_names()) {
        valid += (valid.empty() ? "" : ", ") + std::string(n);
    }
    throw ConfigError("config key '" + key + "': unknown variant '" + value + "' (valid: " + valid +
                      ")");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        char shorter[64];
        std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) {
            return shorter;
        }
    }
    return buf;
}

template <class T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (const T& v : values) {
        out += (out.empty() ? "" : ",") + f(v);
    }
    return out;
}

struct KeyHandler {
    std::string name;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Field>
KeyHandler size_key(std::string name, Field field) {
    return {name,
            [field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = static_cast<std::size_t>(parse_u64(k, v));
            },
            [field](const RunConfig& c) {
                return std::to_string(field(c));
            }};
}

template <class Field>
KeyHandler double_key(std::string name, Field field) {
    return {name,
            [field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_double(k, v);
            },
            [field](const RunConfig& c) { return fmt_double(field(c)); }};
}

template <class Field>
KeyHandler string_key(std::string name, Field field) {
    return {name, [field](RunConfig& c, const std::string&, const std::string& v) { field(c) = v; },
            [field](const RunConfig& c) { return field(c); }};
}

#define CM_FIELD(expr) [](auto& c) -> auto& { return expr; }

const std::vector<KeyHandler>& handlers() {
    static const std::vector<KeyHandler> table = [] {
        std::vector<KeyHandler> t;
        t.push_back(string_key("data", CM_FIELD(c.data)));
        t.push_back({"synthetic",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.synthetic = parse_bool(k, v);
                     },
                     [](const RunConfig& c) { return std::string(c.synthetic ? "true" : "false"); }});
        t.push_back(size_key("synthetic.classes", CM_FIELD(c.synthetic_spec.classes)));
        t.push_back(size_key("synthetic.train", CM_FIELD(c.synthetic_spec.train)));
        t.push_back(size_key("synthetic.dev", CM_FIELD(c.synthetic_spec.dev)));
        t.push_back(size_key("synthetic.test", CM_FIELD(c.synthetic_spec.test)));
        t.push_back(double_key("synthetic.label_noise", CM_FIELD(c.synthetic_spec.label_noise)));
        t.push_back({"synthetic.seed",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.synthetic_spec.seed = parse_u64(k, v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.synthetic_spec.seed); }});
        t.push_back(size_key("synthetic.indicative_per_class",
                             CM_FIELD(c.synthetic_spec.indicative_per_class)));
        t.push_back(size_key("synthetic.example_length", CM_FIELD(c.synthetic_spec.example_length)));
        t.push_back(double_key("synthetic.class_fraction", CM_FIELD(c.synthetic_spec.class_fraction)));
        t.push_back(size_key("synthetic.shared_vocab", CM_FIELD(c.synthetic_spec.shared_vocab)));
        t.push_back(size_key("synthetic.topic_window", CM_FIELD(c.synthetic_spec.topic_window)));
        t.push_back(double_key("synthetic.domain_shift", CM_FIELD(c.synthetic_spec.domain_shift)));
        t.push_back({"synthetic.proportions",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.synthetic_spec.proportions.clear();
                         for (const std::string& item : split_list(v)) {
                             c.synthetic_spec.proportions.push_back(parse_double(k, item));
                         }
                     },
                     [](const RunConfig& c) {
                         return join<double>(c.synthetic_spec.proportions, fmt_double);
                     }});
        t.push_back(string_key("schema", CM_FIELD(c.schema)));
        t.push_back(string_key("lexicon", CM_FIELD(c.lexicon)));
        t.push_back({"split_seed",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.split_seed = parse_u64(k, v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.split_seed); }});
        t.push_back({"variant",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.variant = parse_variant_or_throw(k, v);
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.variant)); }});
        t.push_back(size_key("batch_size", CM_FIELD(c.hp.batch_size)));
        t.push_back(size_key("mu", CM_FIELD(c.hp.mu)));
        t.push_back(size_key("num_augmentations", CM_FIELD(c.hp.num_augmentations)));
        t.push_back(double_key("threshold", CM_FIELD(c.hp.threshold)));
        t.push_back(double_key("temperature", CM_FIELD(c.hp.temperature)));
        t.push_back(double_key("alpha", CM_FIELD(c.hp.alpha)));
        t.push_back(double_key("unlabeled_weight", CM_FIELD(c.hp.unlabeled_weight)));
        t.push_back(size_key("rampup_length", CM_FIELD(c.hp.rampup_length)));
        t.push_back(double_key("lr", CM_FIELD(c.hp.lr)));
        t.push_back(double_key("weight_decay", CM_FIELD(c.hp.weight_decay)));
        t.push_back(size_key("max_seq_len", CM_FIELD(c.hp.max_seq_len)));
        t.push_back(double_key("augment_strength", CM_FIELD(c.hp.augment_strength)));
        t.push_back(double_key("consistency_weight", CM_FIELD(c.hp.consistency_weight)));
        t.push_back({"seeds",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.seeds.clear();
                         for (const std::string& item : split_list(v)) {
                             c.seeds.push_back(parse_u64(k, item));
                         }
                     },
                     [](const RunConfig& c) {
                         return join<std::uint64_t>(
                             c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
                     }});
        t.push_back(size_key("per_class", CM_FIELD(c.per_class)));
        t.push_back(size_key("max_iters", CM_FIELD(c.max_iters)));
        t.push_back(size_key("eval_every", CM_FIELD(c.eval_every)));
        t.push_back(size_key("dim", CM_FIELD(c.dim)));
        t.push_back(size_key("layers", CM_FIELD(c.layers)));
        t.push_back(string_key("outdir", CM_FIELD(c.outdir)));
        t.push_back(string_key("run_name", CM_FIELD(c.run_name)));
        t.push_back(size_key("jobs", CM_FIELD(c.jobs)));
        t.push_back({"counts",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.counts.clear();
                         for (const std::string& item : split_list(v)) {
                             c.counts.push_back(static_cast<std::size_t>(parse_u64(k, item)));
                         }
                     },
                     [](const RunConfig& c) {
                         return join<std::size_t>(
                             c.counts, [](const std::size_t& n) { return std::to_string(n); });
                     }});
        t.push_back({"sweep_variants",
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.sweep_variants.clear();
                         for (const std::string& item : split_list(v)) {
                             c.sweep_variants.push_back(parse_variant_or_throw(k, item));
                         }
                     },
                     [](const RunConfig& c) {
                         return join<Variant>(c.sweep_variants, [](const Variant& v) {
                             return std::string(to_string(v));
                         });
                     }});
        t.push_back(string_key("target", CM_FIELD(c.target)));
        t.push_back(double_key("target_shift", CM_FIELD(c.target_shift)));
        return t;
    }();
    return table;
}

#undef CM_FIELD

const KeyHandler& handler(const std::string& key) {
    for (const KeyHandler& h : handlers()) {
        if (h.name == key) {
            return h;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const KeyHandler& h : handlers()) {
        out.push_back(h.name);
    }
    return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    handler(key).set(config, key, trim(value));
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
    return handler(key).get(config);
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
    RunConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse_config(in, path.string());
}

std::string resolved_config(const RunConfig& config) {
    std::string out;
    for (const KeyHandler& h : handlers()) {
        out += h.name + " = " + h.get(config) + "\n";
    }
    return out;
}

void validate_config(const RunConfig& config) {
    if (config.synthetic == !config.data.empty()) {
        throw ConfigError(config.synthetic
                              ? "config: set either 'data' or 'synthetic = true', not both"
                              : "config: no dataset source; set 'data' or 'synthetic = true'");
    }
    if (config.synthetic) {
        config.synthetic_spec.validate();
    }
    if (config.seeds.empty()) throw ConfigError("config: 'seeds' must list at least one seed");
    if (config.per_class == 0) throw ConfigError("config: 'per_class' must be >= 1");
    if (config.eval_every == 0) throw ConfigError("config: 'eval_every' must be >= 1");
    if (config.jobs == 0) throw ConfigError("config: 'jobs' must be >= 1");
    if (config.counts.empty()) throw ConfigError("config: 'counts' must not be empty");
    if (!(config.hp.threshold <= 1.0)) {
        throw ConfigError("config: 'threshold' must be <= 1");
    }
    if (!(config.target_shift >= 0.0 && config.target_shift <= 1.0)) {
        throw ConfigError("config: 'target_shift' must be in [0, 1]");
    }
    ModelConfig model;
    model.vocab_size = 2;
    model.dim = config.dim;
    model.layers = config.layers;
    model.max_seq_len = config.hp.max_seq_len;
    model.validate();
}

LoadedData load_data(const RunConfig& config) {
    LoadedData out;
    if (config.synthetic) {
        SyntheticData data = generate_synthetic(config.synthetic_spec);
        out.splits = {std::move(data.train), std::move(data.dev), std::move(data.test)};
        out.lexicon = config.lexicon.empty() ? std::move(data.lexicon)
                                             : SynonymLexicon::load(config.lexicon);
        return out;
    }
    const std::filesystem::path source(config.data);
    if (!std::filesystem::exists(source)) {
        throw DataError("dataset not found: " + source.string());
    }
    const bool is_dir = std::filesystem::is_directory(source);
    const std::filesystem::path base = is_dir ? source : source.parent_path();

    LabelSchema schema = LabelSchema::humaid();
    if (!config.schema.empty()) {
        schema = LabelSchema::load(config.schema);
    } else if (std::filesystem::exists(base / "schema.txt")) {
        schema = LabelSchema::load(base / "schema.txt");
    }
    if (!config.lexicon.empty()) {
        out.lexicon = SynonymLexicon::load(config.lexicon);
    } else if (std::filesystem::exists(base / "lexicon.tsv")) {
        out.lexicon = SynonymLexicon::load(base / "lexicon.tsv");
    } else {
        out.lexicon = SynonymLexicon::load(bundled_lexicon_path());
    }

    if (is_dir) {
        out.splits.train = load_dataset(source / "train.tsv", schema, 0);
        out.splits.dev = load_dataset(source / "dev.tsv", schema, out.splits.train.size());
        out.splits.test = load_dataset(source / "test.tsv", schema,
                                       out.splits.train.size() + out.splits.dev.size());
        out.splits.train.tag = SplitTag::train;
        out.splits.dev.tag = SplitTag::dev;
        out.splits.test.tag = SplitTag::test;
    } else {
        out.splits = split(load_dataset(source, schema), config.split_seed);
    }
    return out;
}

} // namespace cmatch
