#include "cmatch/numkit.hpp"

#include "cmatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmatch {

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor2D t(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw std::invalid_argument("Tensor2D::from_rows: ragged rows");
        }
        std::size_t j = 0;
        for (double v : row) {
            t(i, j++) = v;
        }
        ++i;
    }
    return t;
}

void Tensor2D::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2D::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ProbDist softmax(std::span<const double> logits) {
    if (logits.size() < 2) {
        throw std::invalid_argument("softmax: need at least two classes");
    }
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) {
            throw NumericalError("softmax: non-finite logit at index " + std::to_string(i));
        }
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    ProbDist out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(op) + ": length mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
}

} // namespace

double cross_entropy_soft(std::span<const double> target, std::span<const double> pred) {
    require_same_length(target, pred, "cross_entropy_soft");
    double loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] != 0.0) {
            loss -= target[i] * std::log(std::max(pred[i], kLogClamp));
        }
    }
    return loss;
}

double l2_prob_loss(std::span<const double> target, std::span<const double> pred) {
    require_same_length(target, pred, "l2_prob_loss");
    double loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - pred[i];
        loss += d * d;
    }
    return loss;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) {
            h -= v * std::log(v);
        }
    }
    return h;
}

std::size_t argmax(std::span<const double> p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] > p[best]) {
            best = i;
        }
    }
    return best;
}

ProbDist one_hot(std::size_t index, std::size_t classes) {
    ProbDist out(classes, 0.0);
    out.at(index) = 1.0;
    return out;
}

BatchLoss cross_entropy_batch(const Tensor2D& targets, const Tensor2D& probs) {
    if (!targets.same_shape(probs)) {
        throw std::invalid_argument("cross_entropy_batch: shape mismatch");
    }
    BatchLoss out{0.0, Tensor2D(probs.rows(), probs.cols())};
    if (probs.rows() == 0) {
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        out.value += cross_entropy_soft(targets.row(r), probs.row(r));
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            const double p = probs(r, c);
            // Derivative is zero where the clamp is active.
            out.grad(r, c) = p > kLogClamp ? -targets(r, c) / p * inv_n : 0.0;
        }
    }
    out.value *= inv_n;
    return out;
}

BatchLoss l2_prob_batch(const Tensor2D& targets, const Tensor2D& probs) {
    if (!targets.same_shape(probs)) {
        throw std::invalid_argument("l2_prob_batch: shape mismatch");
    }
    BatchLoss out{0.0, Tensor2D(probs.rows(), probs.cols())};
    if (probs.rows() == 0) {
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        out.value += l2_prob_loss(targets.row(r), probs.row(r));
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            out.grad(r, c) = 2.0 * (probs(r, c) - targets(r, c)) * inv_n;
        }
    }
    out.value *= inv_n;
    return out;
}

void optimizer_step(std::span<ParamSlot* const> params, const AdamWConfig& cfg) {
    for (const ParamSlot* slot : params) {
        for (double g : slot->grad.values()) {
            if (std::isnan(g)) {
                throw NumericalError("optimizer_step: NaN gradient in parameter '" + slot->name +
                                     "'");
            }
        }
    }
    for (ParamSlot* slot : params) {
        ++slot->step;
        const double t = static_cast<double>(slot->step);
        const double bias1 = 1.0 - std::pow(cfg.beta1, t);
        const double bias2 = 1.0 - std::pow(cfg.beta2, t);
        auto value = slot->value.values();
        auto grad = slot->grad.values();
        auto m1 = slot->first_moment.values();
        auto m2 = slot->second_moment.values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m1[i] / bias1;
            const double v_hat = m2[i] / bias2;
            value[i] -= cfg.lr * cfg.weight_decay * value[i];
            value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        slot->zero_grad();
    }
}

void optimizer_step(std::span<ParamSlot* const> params, double lr, double weight_decay) {
    AdamWConfig cfg;
    cfg.lr = lr;
    cfg.weight_decay = weight_decay;
    optimizer_step(params, cfg);
}

double grad_check(std::span<ParamSlot* const> params,
                  const std::function<double(bool)>& evaluate, double epsilon) {
    for (ParamSlot* slot : params) {
        slot->zero_grad();
    }
    evaluate(true);
    std::vector<Tensor2D> analytic;
    analytic.reserve(params.size());
    for (ParamSlot* slot : params) {
        analytic.push_back(slot->grad);
        slot->zero_grad();
    }

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto value = params[p]->value.values();
        const auto grad = analytic[p].values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + epsilon;
            const double up = evaluate(false);
            value[i] = saved - epsilon;
            const double down = evaluate(false);
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
        }
    }
    return worst;
}

} // namespace cmatch
