#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cmatch {

/// Dense row-major matrix of doubles. Rows are examples (or tokens), columns features.
class Tensor2D {
public:
    Tensor2D() = default;
    Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    void fill(double v);
    bool same_shape(const Tensor2D& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Class-probability vector of length C.
using ProbDist = std::vector<double>;

/// Clamp applied to predicted probabilities before taking a log.
inline constexpr double kLogClamp = 1e-12;

ProbDist softmax(std::span<const double> logits);
double cross_entropy_soft(std::span<const double> target, std::span<const double> pred);
double l2_prob_loss(std::span<const double> target, std::span<const double> pred);
double entropy(std::span<const double> p);
/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> p);
ProbDist one_hot(std::size_t index, std::size_t classes);

/// Mean loss over a batch together with its gradient w.r.t. the predictions.
/// The 1/N batch average is folded into the gradient.
struct BatchLoss {
    double value = 0.0;
    Tensor2D grad;
};

BatchLoss cross_entropy_batch(const Tensor2D& targets, const Tensor2D& probs);
BatchLoss l2_prob_batch(const Tensor2D& targets, const Tensor2D& probs);

/// A trainable tensor with its gradient and adaptive-moment state.
struct ParamSlot {
    ParamSlot() = default;
    ParamSlot(std::string slot_name, std::size_t rows, std::size_t cols)
        : name(std::move(slot_name)), value(rows, cols), grad(rows, cols),
          first_moment(rows, cols), second_moment(rows, cols) {}

    std::string name;
    Tensor2D value;
    Tensor2D grad;
    Tensor2D first_moment;
    Tensor2D second_moment;
    std::uint64_t step = 0;

    void zero_grad() { grad.fill(0.0); }
};

struct AdamWConfig {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam update over every slot, then zeroes the grads.
/// Throws NumericalError naming the slot if any gradient is NaN.
void optimizer_step(std::span<ParamSlot* const> params, const AdamWConfig& cfg);
void optimizer_step(std::span<ParamSlot* const> params, double lr, double weight_decay);

/// Central finite-difference gradient check.
///
/// `evaluate(true)` must run the fragment forward and backward, accumulating
/// analytic gradients into the slots' `grad` and returning the loss.
/// `evaluate(false)` must only return the loss. Inputs that need checking can
/// be wrapped as ParamSlots. Returns the maximum relative error
/// |a - n| / max(|a|, |n|, 1e-8) over every coordinate.
double grad_check(std::span<ParamSlot* const> params,
                  const std::function<double(bool)>& evaluate, double epsilon = 1e-5);

} // namespace cmatch
