#include "cmatch/cli.hpp"

#include "cmatch/errors.hpp"
#include "cmatch/experiments.hpp"
#include "cmatch/runconfig.hpp"
#include "cmatch/synthetic.hpp"
#include "cmatch/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace cmatch {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw DataError("cannot write " + path.string());
    }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// Collects `--key value` and `--key=value` pairs left over after CLI11 parsing.
std::vector<std::pair<std::string, std::string>> overrides(const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
            throw ConfigError("unexpected argument '" + arg + "'; overrides take the form --key value");
        }
        const auto eq = arg.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
        } else if (i + 1 < extras.size()) {
            out.emplace_back(arg.substr(2), extras[i + 1]);
            ++i;
        } else {
            throw ConfigError("missing value for --" + arg.substr(2));
        }
    }
    return out;
}

RunConfig resolve(const std::string& config_path, const std::vector<std::string>& extras) {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& [key, value] : overrides(extras)) {
        set_config_value(config, key, value);
    }
    return config;
}

fs::path run_dir(const RunConfig& config, const std::string& fallback) {
    const fs::path dir = fs::path(config.outdir) / (config.run_name.empty() ? fallback : config.run_name);
    fs::create_directories(dir);
    write_text(dir / "config.resolved", resolved_config(config));
    return dir;
}

PreparedCorpus prepare(const RunConfig& config) {
    LoadedData data = load_data(config);
    return prepare_corpus(std::move(data.splits), std::move(data.lexicon), config.hp.max_seq_len);
}

Json run_json(const RunRecord& run, const LabelSchema& schema) {
    Json j;
    j["schema"] = kReportSchema;
    j["seed"] = run.seed;
    j["best_iteration"] = run.result.best_iteration;
    auto dev = to_json(run.result.dev_report, schema);
    dev.erase("schema");
    auto test = to_json(run.result.test_report, schema);
    test.erase("schema");
    j["dev"] = std::move(dev);
    j["test"] = std::move(test);
    return j;
}

void write_seed_artifacts(const fs::path& dir, const RunRecord& run, const PreparedCorpus& corpus) {
    const fs::path seed_dir = dir / ("seed-" + std::to_string(run.seed));
    fs::create_directories(seed_dir);
    run.result.best_model.save(seed_dir / "checkpoint");
    {
        std::ofstream vocab(seed_dir / "vocab");
        corpus.vocab.save(vocab);
    }
    {
        std::ofstream trace(seed_dir / "trace.csv");
        write_trace_csv(trace, run.result.traces);
    }
    write_json(seed_dir / "metrics.json", run_json(run, corpus.schema));
}

std::string row(const std::string& label, const AggregateReport& report) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-30s | %-13s | %-13s\n", label.c_str(),
                  format_mean_std(report.accuracy).c_str(), format_mean_std(report.macro_f1).c_str());
    return buf;
}

std::string header() {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-30s | %-13s | %-13s\n", "Methods", "Accuracy", "Macro-F1");
    return buf;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
    validate_config(config);
    const PreparedCorpus corpus = prepare(config);
    const fs::path dir = run_dir(config, "train-" + std::string(to_string(config.variant)));
    const SeedRuns runs = run_seeds(corpus, VariantConfig::of(config.variant), config.hp,
                                    config.per_class, config.seeds, config.train_options(), config.jobs);
    for (const RunRecord& run : runs.runs) {
        write_seed_artifacts(dir, run, corpus);
    }
    Json agg = to_json(runs.aggregate, corpus.schema);
    agg["variant"] = to_string(config.variant);
    agg["per_class"] = config.per_class;
    agg["seeds"] = config.seeds;
    write_json(dir / "aggregate.json", agg);
    const std::string table = header() + row(std::string(to_string(config.variant)), runs.aggregate);
    write_text(dir / "table.txt", table);
    out << table << "artifacts: " << dir.string() << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& run_path, const std::string& split_name, std::ostream& out) {
    const fs::path dir(run_path);
    const RunConfig config = load_config(dir / "config.resolved");
    validate_config(config);
    if (split_name != "dev" && split_name != "test") {
        throw ConfigError("--split must be dev or test");
    }
    const LoadedData data = load_data(config);
    const Dataset& split = split_name == "dev" ? data.splits.dev : data.splits.test;
    std::vector<MetricsReport> reports;
    Json runs = Json::array();
    for (std::uint64_t seed : config.seeds) {
        const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
        std::ifstream vocab_in(seed_dir / "vocab");
        if (!vocab_in) {
            throw DataError("missing vocabulary in " + seed_dir.string());
        }
        const Vocabulary vocab = Vocabulary::load(vocab_in);
        const LayeredClassifier model = LayeredClassifier::load(seed_dir / "checkpoint");
        const EncodedSplit encoded = encode_split(split, vocab, config.hp.max_seq_len);
        reports.push_back(evaluate(model, encoded, split.schema.size()));
        Json j = to_json(reports.back(), split.schema);
        j.erase("schema");
        j["seed"] = seed;
        runs.push_back(std::move(j));
    }
    const AggregateReport agg = aggregate(reports);
    Json j = to_json(agg, split.schema);
    j["split"] = split_name;
    write_json(dir / ("eval-" + split_name + ".json"), j);
    out << header() << row(std::string(to_string(config.variant)) + " (" + split_name + ")", agg);
    return kExitOk;
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
    validate_config(config);
    const PreparedCorpus corpus = prepare(config);
    const fs::path dir = run_dir(config, "sweep");
    const SweepTable table = sweep_labeled_counts(corpus, config.sweep_variants, config.counts,
                                                  config.seeds, config.hp, config.train_options(),
                                                  config.jobs);
    Json j;
    j["schema"] = kReportSchema;
    j["cells"] = Json::array();
    for (const SweepCell& cell : table.cells) {
        Json c = to_json(cell.report, corpus.schema);
        c.erase("schema");
        c["variant"] = to_string(cell.variant);
        c["per_class"] = cell.per_class;
        j["cells"].push_back(std::move(c));
    }
    j["warnings"] = table.warnings;
    write_json(dir / "aggregate.json", j);
    write_text(dir / "sweep.csv", sweep_csv(table));
    const std::string text = format_sweep_table(table);
    write_text(dir / "table.txt", text);
    out << text << "artifacts: " << dir.string() << '\n';
    return kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
    validate_config(config);
    if (config.variant != Variant::crisismatch) {
        throw ConfigError("ablate needs variant = crisismatch");
    }
    const PreparedCorpus corpus = prepare(config);
    const fs::path dir = run_dir(config, "ablate");
    const auto rows = run_ablation(corpus, config.hp, config.per_class, config.seeds,
                                   config.train_options(), config.jobs);
    Json j;
    j["schema"] = kReportSchema;
    j["rows"] = Json::array();
    for (const AblationRow& r : rows) {
        Json row_json = to_json(r.report, corpus.schema);
        row_json.erase("schema");
        row_json["label"] = r.label;
        row_json["delta_accuracy"] = r.report.accuracy.mean - rows.front().report.accuracy.mean;
        j["rows"].push_back(std::move(row_json));
    }
    write_json(dir / "aggregate.json", j);
    const std::string text = format_ablation_table(rows);
    write_text(dir / "table.txt", text);
    out << text << "artifacts: " << dir.string() << '\n';
    return kExitOk;
}

Dataset load_target(const RunConfig& config, const LabelSchema& source_schema) {
    if (config.target.empty()) {
        if (!config.synthetic) {
            throw ConfigError("ood-eval needs 'target' unless the source is synthetic");
        }
        SyntheticSpec shifted = config.synthetic_spec;
        shifted.domain_shift = config.target_shift;
        return generate_synthetic(shifted).test;
    }
    fs::path path(config.target);
    if (fs::is_directory(path)) {
        if (fs::exists(path / "schema.txt") && !(LabelSchema::load(path / "schema.txt") == source_schema)) {
            throw ConfigError("ood-eval: target label schema differs from the source schema");
        }
        path /= "test.tsv";
    }
    Dataset target = load_dataset(path, source_schema, 1u << 30);
    target.tag = SplitTag::test;
    return target;
}

int cmd_ood(const RunConfig& config, std::ostream& out) {
    validate_config(config);
    const PreparedCorpus corpus = prepare(config);
    const Dataset target = load_target(config, corpus.schema);
    const fs::path dir = run_dir(config, "ood-" + std::string(to_string(config.variant)));
    const AggregateReport report =
        evaluate_out_of_domain(corpus, VariantConfig::of(config.variant), config.hp, config.per_class,
                               config.seeds, target, config.train_options(), config.jobs);
    Json j = to_json(report, corpus.schema);
    j["variant"] = to_string(config.variant);
    write_json(dir / "aggregate.json", j);
    const std::string text = header() + row(std::string(to_string(config.variant)) + " (target)", report);
    write_text(dir / "table.txt", text);
    out << text << "artifacts: " << dir.string() << '\n';
    return kExitOk;
}

int cmd_gen_synthetic(const RunConfig& config, const std::string& dir, std::ostream& out) {
    if (dir.empty()) {
        throw ConfigError("gen-synthetic needs --out DIR");
    }
    const SyntheticData data = generate_synthetic(config.synthetic_spec);
    write_synthetic(data, dir);
    out << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
        << " examples to " << dir << '\n';
    return kExitOk;
}

int cmd_augment_preview(const RunConfig& config, const std::string& text, std::size_t count,
                        std::uint64_t seed, std::ostream& out) {
    if (text.empty()) {
        throw ConfigError("augment-preview needs --text");
    }
    const SynonymLexicon lexicon = SynonymLexicon::load(
        config.lexicon.empty() ? bundled_lexicon_path() : fs::path(config.lexicon));
    const Tokens tokens = tokenize(text);
    out << "tokens: ";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out << (i ? " " : "") << tokens[i];
    }
    out << '\n';
    for (std::size_t k = 0; k < count; ++k) {
        AugmenterRng rng(seed, 0, k);
        const Tokens aug = augment(tokens, lexicon, rng, config.hp.augment_strength);
        out << k << ": ";
        for (std::size_t i = 0; i < aug.size(); ++i) {
            out << (i ? " " : "") << aug[i];
        }
        out << '\n';
    }
    return kExitOk;
}

int cmd_verify(const std::string& fault, std::ostream& out) {
    OperatorSet ops = OperatorSet::library();
    if (fault == "sharpen-ignores-temperature") {
        ops.sharpen = [](std::span<const double> p, double) { return sharpen(p, 1.0); };
    } else if (!fault.empty()) {
        throw ConfigError("unknown fault '" + fault + "' (known: sharpen-ignores-temperature)");
    }
    const VerifyReport report = run_verification(ops);
    print_report(out, report);
    return report.passed() ? kExitOk : kExitNumerical;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semi-supervised few-shot text classification experiments"};
    app.require_subcommand(1);
    std::string config_path;

    auto with_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key = value config file");
        sub->allow_extras();
        return sub;
    };
    auto* train = with_config(app.add_subcommand("train", "train one variant over every seed"));
    std::string run_path;
    std::string split_name = "test";
    auto* eval = app.add_subcommand("eval", "re-score the checkpoints of a train run");
    eval->add_option("--run", run_path, "run directory written by train")->required();
    eval->add_option("--split", split_name, "dev or test");
    auto* sweep = with_config(app.add_subcommand("sweep", "labeled-count sweep over variants"));
    auto* ablate = with_config(app.add_subcommand("ablate", "component ablation of CrisisMatch"));
    auto* ood = with_config(app.add_subcommand("ood-eval", "train on the source, test on a target domain"));
    std::string gen_dir;
    auto* gen = with_config(app.add_subcommand("gen-synthetic", "write a synthetic dataset"));
    gen->add_option("--out", gen_dir, "output directory");
    std::string preview_text;
    std::size_t preview_count = 5;
    std::uint64_t preview_seed = 0;
    auto* preview = with_config(app.add_subcommand("augment-preview", "show augmentations of a text"));
    preview->add_option("--text", preview_text, "input text");
    preview->add_option("--count", preview_count, "number of augmentations");
    preview->add_option("--seed", preview_seed, "augmentation seed");
    std::string fault;
    auto* verify = app.add_subcommand("verify", "run the self-check suite");
    verify->add_option("--inject-fault", fault, "corrupt an operator to exercise the suite");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        auto config_for = [&](CLI::App* sub) { return resolve(config_path, sub->remaining()); };
        if (train->parsed()) return cmd_train(config_for(train), out);
        if (eval->parsed()) return cmd_eval(run_path, split_name, out);
        if (sweep->parsed()) return cmd_sweep(config_for(sweep), out);
        if (ablate->parsed()) return cmd_ablate(config_for(ablate), out);
        if (ood->parsed()) return cmd_ood(config_for(ood), out);
        if (gen->parsed()) return cmd_gen_synthetic(config_for(gen), gen_dir, out);
        if (preview->parsed()) {
            return cmd_augment_preview(config_for(preview), preview_text, preview_count, preview_seed, out);
        }
        if (verify->parsed()) return cmd_verify(fault, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

} // namespace cmatch
