#pragma once

#include "cmatch/experiments.hpp"
#include "cmatch/synthetic.hpp"
#include "cmatch/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cmatch {

/// Everything a CLI run needs. The file format is flat `key = value` lines
/// with '#' comments; see config_keys() for the accepted keys.
struct RunConfig {
    // Dataset source: either `data` (a directory holding train/dev/test.tsv, or
    // one TSV that is split 80/10/10 with `split_seed`) or `synthetic = true`.
    std::string data;
    bool synthetic = false;
    SyntheticSpec synthetic_spec;
    std::string schema;  // empty: <data>/schema.txt if present, else the HumAID schema
    std::string lexicon; // empty: <data>/lexicon.tsv if present, else the bundled one
    std::uint64_t split_seed = 0;

    Variant variant = Variant::crisismatch;
    HyperParams hp;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t per_class = 5;
    std::size_t max_iters = 2000;
    std::size_t eval_every = 50;
    std::size_t dim = 64;
    std::size_t layers = 4;

    std::string outdir = "runs";
    std::string run_name; // empty: derived from the command and variant
    std::size_t jobs = 1;

    // sweep
    std::vector<std::size_t> counts{1, 3, 5, 10, 20, 50};
    std::vector<Variant> sweep_variants{Variant::supervised, Variant::psl, Variant::psl_plus,
                                        Variant::textmixup, Variant::crisismatch};
    // ood-eval: target test data (TSV file or directory with test.tsv); with a
    // synthetic source and no target, the target is the same generator with
    // `target_shift` domain shift.
    std::string target;
    double target_shift = 0.5;

    TrainOptions train_options() const;
};

/// Accepted keys, in resolved-file order.
std::vector<std::string> config_keys();

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

RunConfig parse_config(std::istream& in, const std::string& origin);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value; parsing it back yields the same config.
std::string resolved_config(const RunConfig& config);

/// Checks cross-field constraints that do not need the data.
void validate_config(const RunConfig& config);

struct LoadedData {
    DataSplits splits;
    SynonymLexicon lexicon;
};

/// Materializes the dataset source. Throws DataError on unreadable input.
LoadedData load_data(const RunConfig& config);

} // namespace cmatch
