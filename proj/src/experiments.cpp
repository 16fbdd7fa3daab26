#include "cmatch/experiments.hpp"

#include "cmatch/errors.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace cmatch {

PreparedCorpus prepare_corpus(DataSplits splits, SynonymLexicon lexicon, std::size_t max_len) {
    PreparedCorpus corpus;
    corpus.schema = splits.train.schema;
    corpus.vocab = build_vocabulary(splits.train);
    corpus.dev = encode_split(splits.dev, corpus.vocab, max_len);
    corpus.test = encode_split(splits.test, corpus.vocab, max_len);
    corpus.train = std::move(splits.train);
    corpus.lexicon = std::move(lexicon);
    return corpus;
}

namespace {

// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

SeedRuns run_seeds_impl(const PreparedCorpus& corpus, const EncodedSplit& test,
                        const VariantConfig& variant, const HyperParams& hp,
                        std::size_t per_class, const std::vector<std::uint64_t>& seeds,
                        const TrainOptions& options, std::size_t jobs) {
    SeedRuns out;
    out.runs.resize(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        const FewShotView view = few_shot_sample(corpus.train, per_class, seeds[i]);
        out.runs[i] = {seeds[i], train(view, corpus.vocab, corpus.lexicon, corpus.dev, test,
                                       variant, hp, seeds[i], options)};
    });
    std::vector<MetricsReport> reports;
    for (const RunRecord& r : out.runs) {
        reports.push_back(r.result.test_report);
    }
    out.aggregate = aggregate(reports);
    return out;
}

} // namespace

SeedRuns run_seeds(const PreparedCorpus& corpus, const VariantConfig& variant,
                   const HyperParams& hp, std::size_t per_class,
                   const std::vector<std::uint64_t>& seeds, const TrainOptions& options,
                   std::size_t jobs) {
    return run_seeds_impl(corpus, corpus.test, variant, hp, per_class, seeds, options, jobs);
}

SeedRuns run_seeds_on(const PreparedCorpus& corpus, const EncodedSplit& target_test,
                      const VariantConfig& variant, const HyperParams& hp, std::size_t per_class,
                      const std::vector<std::uint64_t>& seeds, const TrainOptions& options,
                      std::size_t jobs) {
    return run_seeds_impl(corpus, target_test, variant, hp, per_class, seeds, options, jobs);
}

SweepTable sweep_labeled_counts(const PreparedCorpus& corpus, const std::vector<Variant>& variants,
                                const std::vector<std::size_t>& counts,
                                const std::vector<std::uint64_t>& seeds, const HyperParams& hp,
                                const TrainOptions& options, std::size_t jobs) {
    SweepTable table;
    table.variants = variants;
    table.counts = counts;
    for (Variant v : variants) {
        for (std::size_t n : counts) {
            SweepCell cell;
            cell.variant = v;
            cell.per_class = n;
            cell.report = run_seeds(corpus, VariantConfig::of(v), hp, n, seeds, options, jobs).aggregate;
            table.cells.push_back(std::move(cell));
        }
    }
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        for (std::size_t ci = 1; ci < counts.size(); ++ci) {
            const double before = table.cell(vi, ci - 1).report.accuracy.mean;
            const double after = table.cell(vi, ci).report.accuracy.mean;
            if (before - after > kMonotonicityTolerance) {
                char buf[200];
                std::snprintf(buf, sizeof buf,
                              "%s: mean accuracy drops from %.1f (n=%zu) to %.1f (n=%zu)",
                              std::string(to_string(variants[vi])).c_str(), before,
                              counts[ci - 1], after, counts[ci]);
                table.warnings.emplace_back(buf);
            }
        }
    }
    return table;
}

std::string format_sweep_table(const SweepTable& table) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s", "Methods");
    out << buf;
    for (std::size_t n : table.counts) {
        std::snprintf(buf, sizeof buf, " | %-27s", ("n=" + std::to_string(n) + " Acc / F1").c_str());
        out << buf;
    }
    out << '\n';
    for (std::size_t vi = 0; vi < table.variants.size(); ++vi) {
        std::snprintf(buf, sizeof buf, "%-22s", std::string(to_string(table.variants[vi])).c_str());
        out << buf;
        for (std::size_t ci = 0; ci < table.counts.size(); ++ci) {
            const auto& r = table.cell(vi, ci).report;
            const std::string acc_f1 = format_mean_std(r.accuracy) + " / " + format_mean_std(r.macro_f1);
            std::snprintf(buf, sizeof buf, " | %-27s", acc_f1.c_str());
            out << buf;
        }
        out << '\n';
    }
    for (const std::string& w : table.warnings) {
        out << "warning: " << w << '\n';
    }
    return out.str();
}

std::string sweep_csv(const SweepTable& table) {
    std::ostringstream out;
    out << "variant,per_class,acc_mean,acc_std,f1_mean,f1_std\n";
    for (const SweepCell& c : table.cells) {
        out << to_string(c.variant) << ',' << c.per_class << ',' << c.report.accuracy.mean << ','
            << c.report.accuracy.std << ',' << c.report.macro_f1.mean << ',' << c.report.macro_f1.std
            << '\n';
    }
    return out.str();
}

AggregateReport evaluate_out_of_domain(const PreparedCorpus& source, const VariantConfig& variant,
                                       const HyperParams& hp, std::size_t per_class,
                                       const std::vector<std::uint64_t>& seeds,
                                       const Dataset& target_test, const TrainOptions& options,
                                       std::size_t jobs) {
    if (!(target_test.schema == source.schema)) {
        throw ConfigError("out-of-domain: target label schema differs from the source schema");
    }
    const EncodedSplit target = encode_split(target_test, source.vocab, hp.max_seq_len);
    return run_seeds_on(source, target, variant, hp, per_class, seeds, options, jobs).aggregate;
}

std::vector<AblationRow> ablation_rows() {
    std::vector<AblationRow> rows;
    rows.push_back({"CrisisMatch", VariantConfig::of(Variant::crisismatch), {}});
    VariantConfig no_unlabeled = VariantConfig::of(Variant::crisismatch);
    no_unlabeled.use_unlabeled = false;
    rows.push_back({"- Unlabeled Data", no_unlabeled, {}});
    VariantConfig no_consistency = VariantConfig::of(Variant::crisismatch);
    no_consistency.use_consistency = false;
    rows.push_back({"- Consistency Regularization", no_consistency, {}});
    VariantConfig no_mixup = VariantConfig::of(Variant::crisismatch);
    no_mixup.use_textmixup = false;
    rows.push_back({"- TextMixUp", no_mixup, {}});
    rows.push_back({"- All (Supervised Baseline)", VariantConfig::of(Variant::supervised), {}});
    return rows;
}

std::vector<AblationRow> run_ablation(const PreparedCorpus& corpus, const HyperParams& hp,
                                      std::size_t per_class,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainOptions& options, std::size_t jobs) {
    std::vector<AblationRow> rows = ablation_rows();
    for (AblationRow& row : rows) {
        row.report = run_seeds(corpus, row.config, hp, per_class, seeds, options, jobs).aggregate;
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-30s | %-13s | %-13s\n", "Methods", "Accuracy", "Macro-F1");
    out << buf;
    for (const AblationRow& row : rows) {
        std::snprintf(buf, sizeof buf, "%-30s | %-13s | %-13s\n", row.label.c_str(),
                      format_mean_std(row.report.accuracy).c_str(),
                      format_mean_std(row.report.macro_f1).c_str());
        out << buf;
    }
    return out.str();
}

} // namespace cmatch
