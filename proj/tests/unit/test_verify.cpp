#include "cmatch/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace cmatch;

namespace {

bool failed(const std::vector<PropertyResult>& results, const std::string& fragment) {
    return std::any_of(results.begin(), results.end(), [&](const PropertyResult& r) {
        return !r.passed && r.name.find(fragment) != std::string::npos;
    });
}

} // namespace

TEST_CASE("the library passes every check") {
    const VerifyReport report = run_verification();
    std::ostringstream out;
    print_report(out, report);
    INFO(out.str());
    CHECK(report.passed());
    CHECK(report.failures() == 0);
    CHECK(report.results.size() > 10);
}

TEST_CASE("corrupted operators are caught by name") {
    OperatorSet ops = OperatorSet::library();
    ops.sharpen = [](std::span<const double> p, double) { return sharpen(p, 1.0); };
    CHECK(failed(verify_operators(ops, 1), "sharpen"));

    ops = OperatorSet::library();
    ops.select_pseudo_label = [](std::span<const double> q, double t, SelectMode m) {
        return select_pseudo_label(q, t + 0.05, m);
    };
    CHECK(failed(verify_operators(ops, 1), "select"));

    ops = OperatorSet::library();
    ops.mix_targets = [](std::span<const double> a, std::span<const double> b, double l) {
        return mix_targets(b, a, l);
    };
    CHECK(failed(verify_operators(ops, 1), "mix"));

    ops = OperatorSet::library();
    ops.psl_unlabeled_loss = [](std::span<const PslTerm> batch, double t) {
        // Averaging over accepted terms only.
        std::size_t accepted = 0;
        for (const auto& term : batch) {
            accepted += *std::max_element(term.guess.begin(), term.guess.end()) > t;
        }
        const double total = psl_unlabeled_loss(batch, t) * static_cast<double>(batch.size());
        return accepted ? total / static_cast<double>(accepted) : 0.0;
    };
    CHECK(failed(verify_operators(ops, 1), "psl"));

    ops = OperatorSet::library();
    ops.rampup_weight = [](std::size_t, std::size_t, double w) { return w; };
    CHECK(failed(verify_operators(ops, 1), "ramp"));
}

TEST_CASE("the fault-injected report prints failures") {
    OperatorSet ops = OperatorSet::library();
    ops.sharpen = [](std::span<const double> p, double) { return sharpen(p, 1.0); };
    VerifyReport report;
    report.results = verify_entropy(ops, 2, 200);
    CHECK_FALSE(report.passed());
    std::ostringstream out;
    print_report(out, report);
    CHECK(out.str().find("FAIL") != std::string::npos);
}
