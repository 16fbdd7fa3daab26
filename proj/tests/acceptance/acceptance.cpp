// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include "cmatch/cli.hpp"
#include "cmatch/experiments.hpp"
#include "cmatch/synthetic.hpp"
#include "cmatch/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace cmatch;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kOperatorBudgetSeconds = 10.0;
constexpr double kGradientBudgetSeconds = 30.0;
constexpr std::size_t kOperatorCases = 200;
constexpr std::size_t kEntropyCases = 1000;
constexpr std::size_t kDegeneracySteps = 20;
constexpr double kUnlabeledGainPoints = 5.0;
constexpr double kTextMixUpNonInferiority = 1.0;
constexpr double kAnalogBudgetSeconds = 600.0;
constexpr double kMonotoneTolerance = 2.0;
constexpr double kGapShrinkTolerance = 1.0;
constexpr double kAblationTieTolerance = 1.0;

const std::vector<std::uint64_t> kSeeds{0, 1, 2};
constexpr std::size_t kShots = 5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int failures = 0;

void report(int id, bool passed, const std::string& title, const std::string& detail) {
    failures += passed ? 0 : 1;
    std::cout << (passed ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " | "
              << detail << std::endl;
}

bool all_passed(const std::vector<PropertyResult>& results, std::string& detail) {
    bool ok = true;
    double worst_ratio = 0.0;
    for (const auto& r : results) {
        if (!r.passed) {
            ok = false;
            detail += "failed '" + r.name + "' (" + r.detail + "); ";
        }
        if (r.tolerance > 0.0) worst_ratio = std::max(worst_ratio, r.worst / r.tolerance);
    }
    detail += std::to_string(results.size()) + " checks, worst error/tolerance " + fmt(worst_ratio, 3);
    return ok;
}

// Lazily trained runs on the synthetic analog corpus, shared between criteria.
class Runs {
public:
    Runs() {
        SyntheticSpec spec; // C = 4, 3000 train, 10% label noise
        SyntheticData data = generate_synthetic(spec);
        corpus_ = prepare_corpus({data.train, data.dev, data.test}, data.lexicon, hp_.max_seq_len);
    }

    const AggregateReport& get(const std::string& key, const VariantConfig& variant,
                               std::size_t shots = kShots) {
        const std::string id = key + "@" + std::to_string(shots);
        auto it = cache_.find(id);
        if (it == cache_.end()) {
            const auto start = Clock::now();
            SeedRuns runs = run_seeds(corpus_, variant, hp_, shots, kSeeds, TrainOptions{});
            const double secs = seconds_since(start);
            seconds_[id] = secs;
            std::cout << "      trained " << id << ": acc " << format_mean_std(runs.aggregate.accuracy)
                      << ", macro-F1 " << format_mean_std(runs.aggregate.macro_f1) << " ("
                      << fmt(secs, 1) << " s)" << std::endl;
            it = cache_.emplace(id, std::move(runs.aggregate)).first;
        }
        return it->second;
    }

    double accuracy(const std::string& key, Variant v, std::size_t shots = kShots) {
        return get(key, VariantConfig::of(v), shots).accuracy.mean;
    }

    double seconds(const std::string& key, std::size_t shots = kShots) const {
        return seconds_.at(key + "@" + std::to_string(shots));
    }

private:
    HyperParams hp_;
    PreparedCorpus corpus_;
    std::map<std::string, AggregateReport> cache_;
    std::map<std::string, double> seconds_;
};

void criterion_operators() {
    const auto start = Clock::now();
    const auto results = verify_operators(OperatorSet::library(), 101, kOperatorCases);
    const double secs = seconds_since(start);
    std::string detail;
    const bool ok = all_passed(results, detail);
    report(1, ok && secs < kOperatorBudgetSeconds, "operator oracles",
           detail + ", " + std::to_string(kOperatorCases) + " inputs each, " + fmt(secs) + " s");
}

void criterion_gradients() {
    const auto start = Clock::now();
    const auto results = verify_gradients(202);
    const double secs = seconds_since(start);
    std::string detail;
    const bool ok = all_passed(results, detail);
    report(2, ok && secs < kGradientBudgetSeconds, "gradient fidelity", detail + ", " + fmt(secs) + " s");
}

void criterion_degeneracy() {
    const auto results = verify_degeneracy(303, kDegeneracySteps);
    std::string detail;
    const bool ok = all_passed(results, detail);
    report(3, ok, "degeneracy chain", detail);
}

void criterion_entropy() {
    const auto results = verify_entropy(OperatorSet::library(), 404, kEntropyCases);
    std::string detail;
    const bool ok = all_passed(results, detail);
    report(4, ok, "entropy minimisation", detail);
}

void criterion_unlabeled_gain(Runs& runs) {
    const double sup = runs.accuracy("supervised", Variant::supervised);
    const double tm = runs.accuracy("textmixup", Variant::textmixup);
    const double cm = runs.accuracy("crisismatch", Variant::crisismatch);
    const double secs = runs.seconds("supervised") + runs.seconds("textmixup") + runs.seconds("crisismatch");
    const bool ok = cm - sup >= kUnlabeledGainPoints && tm - sup >= -kTextMixUpNonInferiority &&
                    secs < kAnalogBudgetSeconds;
    report(5, ok, "unlabeled data beats supervised",
           "supervised " + fmt(sup) + ", textmixup " + fmt(tm) + ", crisismatch " + fmt(cm) +
               "; gain " + fmt(cm - sup) + " (need >= " + fmt(kUnlabeledGainPoints, 1) +
               "), textmixup - supervised " + fmt(tm - sup) + " (need >= -" +
               fmt(kTextMixUpNonInferiority, 1) + "); " + fmt(secs, 1) + " s");
}

void criterion_count_trend(Runs& runs) {
    const std::size_t counts[] = {5, 20, 50};
    double sup[3], cm[3];
    for (int i = 0; i < 3; ++i) {
        sup[i] = runs.accuracy("supervised", Variant::supervised, counts[i]);
        cm[i] = runs.accuracy("crisismatch", Variant::crisismatch, counts[i]);
    }
    bool monotone = true;
    for (int i = 1; i < 3; ++i) {
        monotone &= sup[i] >= sup[i - 1] - kMonotoneTolerance;
        monotone &= cm[i] >= cm[i - 1] - kMonotoneTolerance;
    }
    const double gap5 = cm[0] - sup[0];
    const double gap50 = cm[2] - sup[2];
    const bool shrinks = gap50 < gap5 + kGapShrinkTolerance;
    std::string detail = "supervised";
    for (double v : sup) detail += " " + fmt(v);
    detail += "; crisismatch";
    for (double v : cm) detail += " " + fmt(v);
    detail += "; gap@5 " + fmt(gap5) + ", gap@50 " + fmt(gap50);
    if (!monotone) detail += "; not monotone within " + fmt(kMonotoneTolerance, 1);
    report(6, monotone && shrinks, "labeled-count trend", detail);
}

void criterion_ablation(Runs& runs) {
    const auto rows = ablation_rows();
    double acc[5];
    const char* keys[] = {"crisismatch", "ablate-unlabeled", "ablate-consistency", "ablate-textmixup",
                          "supervised"};
    for (int i = 0; i < 5; ++i) acc[i] = runs.get(keys[i], rows[i].config).accuracy.mean;
    const double d_unl = acc[0] - acc[1];
    const double d_cons = acc[0] - acc[2];
    const double d_tm = acc[0] - acc[3];
    const double d_all = acc[0] - acc[4];
    const bool ok = d_unl >= std::max(d_cons, d_tm) - kAblationTieTolerance;
    report(7, ok, "removing unlabeled data hurts most",
           "deltas: unlabeled " + fmt(d_unl) + ", consistency " + fmt(d_cons) + ", textmixup " +
               fmt(d_tm) + ", all " + fmt(d_all));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void criterion_determinism() {
    const fs::path root = fs::path(CMATCH_ACCEPTANCE_TMP) / "determinism";
    fs::remove_all(root);
    const std::vector<std::string> common{
        "--synthetic", "true",       "--synthetic.classes", "3",   "--synthetic.train", "300",
        "--synthetic.dev", "60",     "--synthetic.test",    "60",  "--max_iters",       "40",
        "--eval_every", "10",        "--dim",               "16",  "--layers",          "3",
        "--batch_size", "8",         "--mu",                "3",   "--seeds",           "0,1",
        "--outdir", root.string()};
    const std::vector<std::vector<std::string>> commands{
        {"train", "--variant", "crisismatch"},
        {"train", "--variant", "psl_plus"},
        {"sweep", "--counts", "1,3", "--sweep_variants", "supervised,textmixup"},
        {"ablate"},
        {"ood-eval", "--variant", "crisismatch_sharpen"},
    };
    bool ok = true;
    std::size_t compared = 0;
    std::string detail;
    for (std::size_t c = 0; c < commands.size(); ++c) {
        for (const char* pass : {"a", "b"}) {
            std::vector<std::string> args = commands[c];
            args.insert(args.end(), common.begin(), common.end());
            args.push_back("--run_name=cmd" + std::to_string(c) + pass);
            std::ostringstream out, err;
            if (run_cli(args, out, err) != kExitOk) {
                ok = false;
                detail += commands[c][0] + " failed: " + err.str() + "; ";
            }
        }
        const fs::path a = root / ("cmd" + std::to_string(c) + "a");
        for (const auto& entry : fs::recursive_directory_iterator(a)) {
            if (!entry.is_regular_file() || entry.path().filename() == "config.resolved") continue;
            const fs::path rel = fs::relative(entry.path(), a);
            const fs::path b = root / ("cmd" + std::to_string(c) + "b") / rel;
            ++compared;
            if (slurp(entry.path()) != slurp(b)) {
                ok = false;
                detail += "differs: " + rel.string() + "; ";
            }
        }
    }
    report(8, ok && compared > 0, "byte-identical reruns",
           detail + std::to_string(compared) + " files compared across " +
               std::to_string(commands.size()) + " commands");
}

void criterion_sharpen(Runs& runs) {
    const double hard = runs.accuracy("crisismatch", Variant::crisismatch);
    const double soft = runs.accuracy("crisismatch_sharpen", Variant::crisismatch_sharpen);
    const bool ok = std::isfinite(hard) && std::isfinite(soft);
    report(9, ok, "hard vs sharpened pseudo-labels",
           "crisismatch " + fmt(hard) + ", crisismatch_sharpen " + fmt(soft) + ", hard - sharpen " +
               fmt(hard - soft) + " (reported only)");
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int id) { return wanted.empty() || wanted.contains(id); };

    const auto start = Clock::now();
    try {
        if (want(1)) criterion_operators();
        if (want(2)) criterion_gradients();
        if (want(3)) criterion_degeneracy();
        if (want(4)) criterion_entropy();
        if (want(8)) criterion_determinism();
        if (want(5) || want(6) || want(7) || want(9)) {
            Runs runs;
            if (want(5)) criterion_unlabeled_gain(runs);
            if (want(6)) criterion_count_trend(runs);
            if (want(7)) criterion_ablation(runs);
            if (want(9)) criterion_sharpen(runs);
        }
    } catch (const std::exception& e) {
        std::cout << "FAIL  aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures ? "FAILED " : "ALL PASSED ") << "(" << fmt(seconds_since(start), 1)
              << " s)" << std::endl;
    return failures ? 1 : 0;
}
