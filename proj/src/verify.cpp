#include "cmatch/verify.hpp"

#include "cmatch/evalkit.hpp"
#include "cmatch/layers.hpp"
#include "cmatch/model.hpp"
#include "cmatch/synthetic.hpp"
#include "cmatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

namespace cmatch {

OperatorSet OperatorSet::library() {
    OperatorSet ops;
    ops.sharpen = [](std::span<const double> p, double t) { return cmatch::sharpen(p, t); };
    ops.average_predictions = [](std::span<const ProbDist> preds) {
        return cmatch::average_predictions(preds);
    };
    ops.select_pseudo_label = [](std::span<const double> q, double tau, SelectMode mode) {
        return cmatch::select_pseudo_label(q, tau, mode);
    };
    ops.mix_targets = [](std::span<const double> a, std::span<const double> b, double lambda) {
        return cmatch::mix_targets(a, b, lambda);
    };
    ops.consistency_loss = [](std::span<const double> a, std::span<const double> b) {
        return cmatch::consistency_loss(a, b);
    };
    ops.psl_unlabeled_loss = [](std::span<const PslTerm> batch, double tau) {
        return cmatch::psl_unlabeled_loss(batch, tau);
    };
    ops.rampup_weight = [](std::size_t it, std::size_t ramp, double w) {
        return cmatch::rampup_weight(it, ramp, w);
    };
    return ops;
}

bool VerifyReport::passed() const { return failures() == 0; }

std::size_t VerifyReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; }));
}

namespace {

// Accumulates the worst error of one property and remembers the first failure.
class Tracker {
public:
    Tracker(std::string name, double tolerance) {
        result_.name = std::move(name);
        result_.tolerance = tolerance;
    }

    void error(double value, const std::string& where) {
        ++result_.cases;
        if (!(value <= result_.worst)) {
            result_.worst = std::isnan(value) ? INFINITY : value;
        }
        if (!(value <= result_.tolerance)) {
            fail(where + ": error " + std::to_string(value));
        }
    }

    void check(bool ok, const std::string& where) {
        ++result_.cases;
        if (!ok) {
            fail(where);
        }
    }

    PropertyResult done() { return result_; }

private:
    void fail(const std::string& what) {
        if (result_.passed) {
            result_.detail = what;
        }
        result_.passed = false;
    }

    PropertyResult result_;
};

std::string case_name(std::size_t i) { return "case " + std::to_string(i); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        return INFINITY;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

// A random distribution; `spread` scales the logits so both flat and peaked
// shapes appear.
ProbDist random_dist(std::size_t classes, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double spread = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    ProbDist p(classes);
    double total = 0.0;
    for (double& v : p) {
        v = std::exp(spread * normal(rng));
        total += v;
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

std::size_t random_classes(std::mt19937_64& rng) {
    return std::uniform_int_distribution<std::size_t>(2, 8)(rng);
}

// Brute-force oracles, written from the definitions.

ProbDist oracle_sharpen(std::span<const double> p, double t) {
    ProbDist out(p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = std::pow(p[i], 1.0 / t);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

std::size_t oracle_argmax(std::span<const double> q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (q[i] > q[best]) {
            best = i;
        }
    }
    return best;
}

double oracle_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) {
            h -= v * std::log(v);
        }
    }
    return h;
}

std::vector<PropertyResult> check_evaluate(std::mt19937_64& rng, std::size_t cases) {
    Tracker t("evaluate matches brute-force accuracy and macro-F1", kOracleTolerance);
    for (std::size_t i = 0; i < cases; ++i) {
        ModelConfig mc;
        mc.vocab_size = 12;
        mc.dim = 8;
        mc.layers = 2;
        mc.classes = random_classes(rng);
        mc.max_seq_len = 6;
        const LayeredClassifier model(mc, rng());
        EncodedSplit split;
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
        std::uniform_int_distribution<std::int32_t> token(2, 11);
        std::uniform_int_distribution<std::size_t> len(1, mc.max_seq_len);
        std::uniform_int_distribution<std::size_t> label(0, mc.classes - 1);
        for (std::size_t r = 0; r < n; ++r) {
            EncodedText text;
            text.length = len(rng);
            text.ids.assign(mc.max_seq_len, 0);
            for (std::size_t j = 0; j < text.length; ++j) {
                text.ids[j] = token(rng);
            }
            split.texts.push_back(text);
            split.labels.push_back(label(rng));
        }
        const MetricsReport got = evaluate(model, split, mc.classes);

        const Tensor2D probs = model.predict(split.texts);
        std::vector<double> tp(mc.classes), fp(mc.classes), fn(mc.classes);
        double correct = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t pred = oracle_argmax(probs.row(r));
            const std::size_t gold = split.labels[r];
            if (pred == gold) {
                correct += 1.0;
                tp[gold] += 1.0;
            } else {
                fp[pred] += 1.0;
                fn[gold] += 1.0;
            }
        }
        double f1_sum = 0.0;
        for (std::size_t c = 0; c < mc.classes; ++c) {
            const double prec = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
            const double rec = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
            f1_sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        }
        const double accuracy = 100.0 * correct / static_cast<double>(n);
        const double macro = 100.0 * f1_sum / static_cast<double>(mc.classes);
        t.error(std::max(std::abs(got.accuracy - accuracy), std::abs(got.macro_f1 - macro)),
                case_name(i));
    }
    return {t.done()};
}

} // namespace

std::vector<PropertyResult> verify_operators(const OperatorSet& ops, std::uint64_t seed,
                                             std::size_t cases) {
    std::mt19937_64 rng(mix_seed(seed, 0x0b5));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<PropertyResult> out;

    {
        Tracker t("sharpen matches p^(1/T) / sum p^(1/T)", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const ProbDist p = random_dist(random_classes(rng), rng);
            const double temp = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
            t.error(max_abs_diff(ops.sharpen(p, temp), oracle_sharpen(p, temp)), case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("average_predictions matches the elementwise mean", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t c = random_classes(rng);
            const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
            std::vector<ProbDist> preds;
            for (std::size_t j = 0; j < k; ++j) {
                preds.push_back(random_dist(c, rng));
            }
            ProbDist mean(c, 0.0);
            for (std::size_t cls = 0; cls < c; ++cls) {
                for (std::size_t j = 0; j < k; ++j) {
                    mean[cls] += preds[j][cls];
                }
                mean[cls] /= static_cast<double>(k);
            }
            t.error(max_abs_diff(ops.average_predictions(preds), mean), case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("select_pseudo_label matches threshold-then-target", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const ProbDist q = random_dist(random_classes(rng), rng);
            const std::size_t top = oracle_argmax(q);
            // Every third case puts the threshold exactly on max(q).
            const double tau = i % 3 == 0 ? q[top] : std::uniform_real_distribution<double>(0.3, 1.0)(rng);
            const bool sharpened = i % 2 == 1;
            const double temp = 0.5;
            const auto got = ops.select_pseudo_label(
                q, tau, sharpened ? SelectMode::sharpened(temp) : SelectMode::hard());
            if (q[top] < tau) {
                t.check(!got.has_value(), case_name(i) + ": accepted below threshold");
                continue;
            }
            if (!got) {
                t.check(false, case_name(i) + ": rejected at or above threshold");
                continue;
            }
            ProbDist expected(q.size(), 0.0);
            if (sharpened) {
                expected = oracle_sharpen(q, temp);
            } else {
                expected[top] = 1.0;
            }
            t.error(max_abs_diff(*got, expected), case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("mix_targets matches lambda*a + (1-lambda)*b", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t c = random_classes(rng);
            const ProbDist a = random_dist(c, rng);
            const ProbDist b = random_dist(c, rng);
            const double lambda = unit(rng);
            ProbDist expected(c);
            for (std::size_t j = 0; j < c; ++j) {
                expected[j] = lambda * a[j] + (1.0 - lambda) * b[j];
            }
            t.error(max_abs_diff(ops.mix_targets(a, b, lambda), expected), case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("consistency_loss matches the squared L2 distance", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t c = random_classes(rng);
            const ProbDist a = random_dist(c, rng);
            const ProbDist b = random_dist(c, rng);
            double expected = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                expected += (a[j] - b[j]) * (a[j] - b[j]);
            }
            t.error(std::abs(ops.consistency_loss(a, b) - expected), case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("psl_unlabeled_loss matches the masked mean cross-entropy", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t c = random_classes(rng);
            const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
            const double tau = std::uniform_real_distribution<double>(0.3, 0.9)(rng);
            std::vector<PslTerm> batch;
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                PslTerm term{random_dist(c, rng), random_dist(c, rng)};
                if (j % 4 == 0) {
                    // Maximum exactly at the threshold: excluded by the strict mask.
                    term.guess.assign(c, (1.0 - tau) / static_cast<double>(c - 1));
                    term.guess[j % c] = tau;
                }
                const std::size_t top = oracle_argmax(term.guess);
                if (term.guess[top] > tau) {
                    total += -std::log(std::max(term.prediction[top], 1e-12));
                }
                batch.push_back(std::move(term));
            }
            t.error(std::abs(ops.psl_unlabeled_loss(batch, tau) - total / static_cast<double>(n)),
                    case_name(i));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("rampup_weight matches w_u * min(1, t / ramp)", kOracleTolerance);
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t ramp = std::uniform_int_distribution<std::size_t>(1, 2000)(rng);
            const std::size_t it = std::uniform_int_distribution<std::size_t>(0, 3000)(rng);
            const double w = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
            const double expected = it >= ramp ? w : w * static_cast<double>(it) / static_cast<double>(ramp);
            t.error(std::abs(ops.rampup_weight(it, ramp, w) - expected), case_name(i));
        }
        t.check(ops.rampup_weight(0, 1000, 10.0) == 0.0, "rampup_weight(0) is not 0");
        out.push_back(t.done());
    }
    for (PropertyResult& r : check_evaluate(rng, cases)) {
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PropertyResult> verify_entropy(const OperatorSet& ops, std::uint64_t seed,
                                           std::size_t cases) {
    std::mt19937_64 rng(mix_seed(seed, 0xe7));
    Tracker sharpening("sharpen(T=0.5) lowers entropy and keeps argmax", 0.0);
    Tracker hard("hard selection is one-hot and threshold-monotone", 0.0);
    const double thresholds[] = {0.3, 0.5, 0.6, 0.75, 0.9, 0.99};
    for (std::size_t i = 0; i < cases; ++i) {
        const ProbDist p = random_dist(random_classes(rng), rng);
        const ProbDist s = ops.sharpen(p, 0.5);
        const std::size_t top = oracle_argmax(p);
        const bool uniform = std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; });
        if (!uniform) {
            sharpening.check(oracle_entropy(s) < oracle_entropy(p),
                             case_name(i) + ": entropy did not decrease");
        }
        sharpening.check(oracle_argmax(s) == top, case_name(i) + ": argmax changed");

        bool accepted_before = true;
        for (double tau : thresholds) {
            const auto sel = ops.select_pseudo_label(p, tau, SelectMode::hard());
            if (sel) {
                const bool one_hot_at_top =
                    (*sel)[top] == 1.0 &&
                    std::count(sel->begin(), sel->end(), 0.0) == static_cast<long>(sel->size() - 1);
                hard.check(one_hot_at_top, case_name(i) + ": selection is not one-hot at argmax");
            }
            // Once rejected at some threshold, every larger threshold rejects too.
            hard.check(accepted_before || !sel, case_name(i) + ": not monotone in threshold");
            accepted_before = sel.has_value();
        }
    }
    return {sharpening.done(), hard.done()};
}

namespace {

Tensor2D random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                       double hi = 1.0) {
    Tensor2D t(rows, cols);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.values()) {
        v = u(rng);
    }
    return t;
}

ParamSlot random_slot(const std::string& name, std::size_t rows, std::size_t cols,
                      std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    ParamSlot slot(name, rows, cols);
    slot.value = random_tensor(rows, cols, rng, lo, hi);
    return slot;
}

// Scalar probe: sum of r * y with fixed random weights r.
double probe(const Tensor2D& y, const Tensor2D& r) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        total += y.data()[i] * r.data()[i];
    }
    return total;
}

std::vector<std::size_t> random_offsets(std::size_t segments, std::size_t max_len,
                                        std::mt19937_64& rng) {
    std::vector<std::size_t> offsets{0};
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    for (std::size_t s = 0; s < segments; ++s) {
        offsets.push_back(offsets.back() + len(rng));
    }
    return offsets;
}

} // namespace

std::vector<PropertyResult> verify_gradients(std::uint64_t seed, std::size_t seeds) {
    std::vector<PropertyResult> out;
    auto run = [&](const std::string& name, double tolerance,
                   const std::function<double(std::mt19937_64&)>& check) {
        Tracker t(name, tolerance);
        for (std::size_t s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(mix_seed(seed, 0x9c, s));
            t.error(check(rng), "seed " + std::to_string(s));
        }
        out.push_back(t.done());
    };

    run("grad: affine", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        Affine layer("a", 5, 4);
        layer.weight.value = random_tensor(4, 5, rng);
        layer.bias.value = random_tensor(1, 4, rng);
        ParamSlot x = random_slot("x", 3, 5, rng);
        const Tensor2D r = random_tensor(3, 4, rng);
        ParamSlot* params[] = {&layer.weight, &layer.bias, &x};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = layer.forward(x.value);
            if (backward) {
                const Tensor2D dx = layer.backward(r);
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    x.grad.data()[i] += dx.data()[i];
                }
            }
            return probe(y, r);
        });
    });
    run("grad: tanh", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        TanhActivation act;
        ParamSlot x = random_slot("x", 4, 6, rng, -2.0, 2.0);
        const Tensor2D r = random_tensor(4, 6, rng);
        ParamSlot* params[] = {&x};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = act.forward(x.value);
            if (backward) {
                x.grad = act.backward(r);
            }
            return probe(y, r);
        });
    });
    run("grad: residual add", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        ResidualAdd add;
        ParamSlot a = random_slot("a", 3, 4, rng);
        ParamSlot b = random_slot("b", 3, 4, rng);
        const Tensor2D r = random_tensor(3, 4, rng);
        ParamSlot* params[] = {&a, &b};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = add.forward(a.value, b.value);
            if (backward) {
                auto [ga, gb] = add.backward(r);
                a.grad = ga;
                b.grad = gb;
            }
            return probe(y, r);
        });
    });
    run("grad: mean pool", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        MeanPool pool;
        const auto offsets = random_offsets(4, 5, rng);
        ParamSlot x = random_slot("x", offsets.back(), 3, rng);
        const Tensor2D r = random_tensor(4, 3, rng);
        ParamSlot* params[] = {&x};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = pool.forward(x.value, offsets);
            if (backward) {
                x.grad = pool.backward(r);
            }
            return probe(y, r);
        });
    });
    run("grad: embedding lookup", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        EmbeddingLookup emb("e", 10, 4);
        emb.table.value = random_tensor(10, 4, rng);
        std::vector<std::int32_t> ids(7);
        std::uniform_int_distribution<std::int32_t> id(0, 9);
        for (auto& v : ids) {
            v = id(rng);
        }
        const Tensor2D r = random_tensor(7, 4, rng);
        ParamSlot* params[] = {&emb.table};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = emb.forward(ids);
            if (backward) {
                emb.backward(r);
            }
            return probe(y, r);
        });
    });
    run("grad: softmax", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        SoftmaxHead head;
        ParamSlot z = random_slot("z", 3, 5, rng, -3.0, 3.0);
        const Tensor2D r = random_tensor(3, 5, rng);
        ParamSlot* params[] = {&z};
        return grad_check(params, [&](bool backward) {
            const Tensor2D p = head.forward(z.value);
            if (backward) {
                z.grad = head.backward(r);
            }
            return probe(p, r);
        });
    });
    run("grad: cross-entropy", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        ParamSlot p = random_slot("p", 4, 3, rng, 0.05, 1.0);
        const Tensor2D t = random_tensor(4, 3, rng, 0.0, 1.0);
        ParamSlot* params[] = {&p};
        return grad_check(params, [&](bool backward) {
            BatchLoss loss = cross_entropy_batch(t, p.value);
            if (backward) {
                p.grad = loss.grad;
            }
            return loss.value;
        });
    });
    run("grad: L2 probability loss", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        ParamSlot p = random_slot("p", 4, 3, rng, 0.0, 1.0);
        const Tensor2D t = random_tensor(4, 3, rng, 0.0, 1.0);
        ParamSlot* params[] = {&p};
        return grad_check(params, [&](bool backward) {
            BatchLoss loss = l2_prob_batch(t, p.value);
            if (backward) {
                p.grad = loss.grad;
            }
            return loss.value;
        });
    });
    run("grad: encoder block", kPrimitiveGradTolerance, [](std::mt19937_64& rng) {
        EncoderBlock block("b", 5);
        block.affine.weight.value = random_tensor(5, 5, rng);
        block.affine.bias.value = random_tensor(1, 5, rng);
        ParamSlot x = random_slot("x", 3, 5, rng);
        const Tensor2D r = random_tensor(3, 5, rng);
        ParamSlot* params[] = {&block.affine.weight, &block.affine.bias, &x};
        return grad_check(params, [&](bool backward) {
            const Tensor2D y = block.forward(x.value);
            if (backward) {
                const Tensor2D dx = block.backward(r);
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    x.grad.data()[i] += dx.data()[i];
                }
            }
            return probe(y, r);
        });
    });
    run("grad: full forward with interpolation at lambda 0.3", kModelGradTolerance,
        [](std::mt19937_64& rng) {
            ModelConfig mc;
            mc.vocab_size = 20;
            mc.dim = 8;
            mc.layers = 3;
            mc.classes = 3;
            mc.max_seq_len = 6;
            LayeredClassifier model(mc, rng());
            // Larger weights than the default init so every block matters.
            for (ParamSlot* slot : model.params()) {
                slot->value = random_tensor(slot->value.rows(), slot->value.cols(), rng, -0.5, 0.5);
            }
            std::vector<EncodedText> batch;
            std::uniform_int_distribution<std::int32_t> token(1, 19);
            std::uniform_int_distribution<std::size_t> len(1, mc.max_seq_len);
            for (std::size_t b = 0; b < 5; ++b) {
                EncodedText text;
                text.length = len(rng);
                text.ids.assign(mc.max_seq_len, 0);
                for (std::size_t j = 0; j < text.length; ++j) {
                    text.ids[j] = token(rng);
                }
                batch.push_back(text);
            }
            MixSpec mix;
            mix.layer = std::uniform_int_distribution<std::size_t>(1, mc.layers - 1)(rng);
            std::uniform_int_distribution<std::size_t> row(0, batch.size() - 1);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                mix.pairs.push_back({i, row(rng), 0.3});
            }
            Tensor2D targets(batch.size(), mc.classes);
            std::uniform_int_distribution<std::size_t> cls(0, mc.classes - 1);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const ProbDist t =
                    mix_targets(one_hot(cls(rng), mc.classes), one_hot(cls(rng), mc.classes), 0.3);
                std::copy(t.begin(), t.end(), targets.row(i).begin());
            }
            const auto params = model.params();
            return grad_check(params, [&](bool backward) {
                const Tensor2D probs = model.train_forward(batch, mix);
                BatchLoss loss = cross_entropy_batch(targets, probs);
                if (backward) {
                    model.backward(loss.grad);
                }
                return loss.value;
            });
        });
    return out;
}

namespace {

struct TinyWorld {
    SyntheticData data;
    Vocabulary vocab;
    FewShotView view;
    ModelConfig model;
};

TinyWorld tiny_world(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.train = 120;
    spec.dev = 30;
    spec.test = 30;
    spec.seed = seed;
    TinyWorld w{generate_synthetic(spec), {}, {}, {}};
    w.vocab = build_vocabulary(w.data.train);
    w.view = few_shot_sample(w.data.train, 4, seed);
    w.model.vocab_size = w.vocab.size();
    w.model.dim = 16;
    w.model.layers = 3;
    w.model.classes = spec.classes;
    return w;
}

} // namespace

std::vector<PropertyResult> verify_degeneracy(std::uint64_t seed, std::size_t steps) {
    const TinyWorld w = tiny_world(seed);
    HyperParams hp;
    hp.batch_size = 8;
    hp.mu = 2;
    hp.rampup_length = 5;
    StepContext ctx;
    ctx.vocab = &w.vocab;
    ctx.lexicon = &w.data.lexicon;
    BatchPlanner planner(w.view.labeled().size(), w.view.unlabeled().size(), hp.batch_size,
                         hp.unlabeled_batch(), seed);
    auto batch = [&](std::size_t step) {
        const BatchPlan plan = planner.plan(step);
        std::pair<std::vector<LabeledExample>, std::vector<UnlabeledExample>> out;
        for (std::size_t i : plan.labeled) out.first.push_back(w.view.labeled()[i]);
        for (std::size_t i : plan.unlabeled) out.second.push_back(w.view.unlabeled()[i]);
        return out;
    };
    std::vector<PropertyResult> out;

    {
        Tracker t("degenerate CrisisMatch equals supervised on augmented data",
                  kDegeneracyTolerance);
        HyperParams degenerate = hp;
        degenerate.threshold = 1.01;
        VariantConfig cm = VariantConfig::of(Variant::crisismatch);
        cm.use_consistency = false;
        cm.fixed_lambda = 1.0;
        VariantConfig sup = VariantConfig::of(Variant::supervised);
        sup.augment_labeled = true;
        TrainState a(LayeredClassifier(w.model, seed), seed);
        TrainState b(LayeredClassifier(w.model, seed), seed);
        for (std::size_t s = 0; s < steps; ++s) {
            const auto [xs, us] = batch(s);
            const StepResult ra = variant_step(a, xs, us, degenerate, cm, ctx);
            const StepResult rb = variant_step(b, xs, us, degenerate, sup, ctx);
            t.error(std::abs(ra.loss - rb.loss), "step " + std::to_string(s));
            t.check(ra.trace.pseudo_count == 0, "step " + std::to_string(s) + ": pseudo-labels accepted");
        }
        out.push_back(t.done());
    }
    {
        Tracker t("TextMixUp with lambda 1 equals supervised", kDegeneracyTolerance);
        VariantConfig tm = VariantConfig::of(Variant::textmixup);
        tm.fixed_lambda = 1.0;
        TrainState a(LayeredClassifier(w.model, seed), seed);
        TrainState b(LayeredClassifier(w.model, seed), seed);
        for (std::size_t s = 0; s < steps; ++s) {
            const auto [xs, us] = batch(s);
            const StepResult ra = variant_step(a, xs, {}, hp, tm, ctx);
            const StepResult rb = variant_step(b, xs, {}, hp, VariantConfig::of(Variant::supervised), ctx);
            t.error(std::abs(ra.loss - rb.loss), "step " + std::to_string(s));
        }
        out.push_back(t.done());
    }
    {
        Tracker t("PSL at iteration 0 equals supervised", kDegeneracyTolerance);
        for (std::size_t s = 0; s < steps; ++s) {
            TrainState a(LayeredClassifier(w.model, mix_seed(seed, s)), mix_seed(seed, s, 1));
            TrainState b = a;
            const auto [xs, us] = batch(s);
            HyperParams lenient = hp;
            lenient.threshold = 0.34; // accept plenty, so the zero weight is what matters
            const StepResult ra = variant_step(a, xs, us, lenient, VariantConfig::of(Variant::psl), ctx);
            const StepResult rb =
                variant_step(b, xs, us, lenient, VariantConfig::of(Variant::supervised), ctx);
            double diff = std::abs(ra.loss - rb.loss);
            const auto pa = a.model.params();
            const auto pb = b.model.params();
            for (std::size_t p = 0; p < pa.size(); ++p) {
                diff = std::max(diff, max_abs_diff(pa[p]->value.values(), pb[p]->value.values()));
            }
            t.error(diff, "draw " + std::to_string(s));
        }
        t.check(rampup_weight(0, hp.rampup_length, hp.unlabeled_weight) == 0.0,
                "rampup_weight(0) is not 0");
        out.push_back(t.done());
    }
    return out;
}

VerifyReport run_verification(const OperatorSet& ops, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    VerifyReport report;
    auto append = [&](std::vector<PropertyResult> rs) {
        for (PropertyResult& r : rs) {
            report.results.push_back(std::move(r));
        }
    };
    append(verify_operators(ops, seed));
    append(verify_entropy(ops, seed));
    append(verify_gradients(seed));
    append(verify_degeneracy(seed));
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void print_report(std::ostream& out, const VerifyReport& report) {
    for (const PropertyResult& r : report.results) {
        char line[256];
        std::snprintf(line, sizeof line, "%s  %-58s cases=%-5zu worst=%.3g", r.passed ? "ok  " : "FAIL",
                      r.name.c_str(), r.cases, r.worst);
        out << line;
        if (!r.passed) {
            out << "  (" << r.detail << ")";
        }
        out << '\n';
    }
    char summary[128];
    std::snprintf(summary, sizeof summary, "%zu properties, %zu failed, %.1f s\n",
                  report.results.size(), report.failures(), report.seconds);
    out << summary;
}

} // namespace cmatch
