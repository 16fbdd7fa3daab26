#pragma once

// Differentiable building blocks. Each primitive caches what its backward
// pass needs during `forward`; `apply` is the cache-free inference path.
// `backward` accumulates parameter gradients and returns the input gradient.
// Calling `backward` without a preceding `forward` throws std::logic_error.

#include "cmatch/numkit.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cmatch {

/// Row lookup into a (vocab x dim) table.
class EmbeddingLookup {
public:
    EmbeddingLookup() = default;
    EmbeddingLookup(std::string name, std::size_t vocab, std::size_t dim)
        : table(std::move(name), vocab, dim) {}

    Tensor2D forward(std::span<const std::int32_t> ids);
    Tensor2D apply(std::span<const std::int32_t> ids) const;
    void backward(const Tensor2D& grad_out);

    ParamSlot table;

private:
    std::optional<std::vector<std::int32_t>> ids_;
};

/// y = x W^T + b.
class Affine {
public:
    Affine() = default;
    Affine(const std::string& name, std::size_t in, std::size_t out)
        : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

    Tensor2D forward(const Tensor2D& x);
    Tensor2D apply(const Tensor2D& x) const;
    Tensor2D backward(const Tensor2D& grad_out);

    std::size_t in_dim() const { return weight.value.cols(); }
    std::size_t out_dim() const { return weight.value.rows(); }

    ParamSlot weight;
    ParamSlot bias;

private:
    std::optional<Tensor2D> input_;
};

class TanhActivation {
public:
    Tensor2D forward(const Tensor2D& x);
    static Tensor2D apply(const Tensor2D& x);
    Tensor2D backward(const Tensor2D& grad_out);

private:
    std::optional<Tensor2D> output_;
};

/// y = a + b. The gradient passes unchanged to both operands.
class ResidualAdd {
public:
    Tensor2D forward(const Tensor2D& a, const Tensor2D& b);
    static Tensor2D apply(const Tensor2D& a, const Tensor2D& b);
    std::pair<Tensor2D, Tensor2D> backward(const Tensor2D& grad_out);

private:
    bool armed_ = false;
};

/// Mean over consecutive row segments: segment s covers rows
/// [offsets[s], offsets[s+1]). Every segment must be nonempty.
class MeanPool {
public:
    Tensor2D forward(const Tensor2D& x, std::span<const std::size_t> offsets);
    static Tensor2D apply(const Tensor2D& x, std::span<const std::size_t> offsets);
    Tensor2D backward(const Tensor2D& grad_out);

private:
    std::optional<std::vector<std::size_t>> offsets_;
};

/// Row-wise softmax turning logits into class distributions.
class SoftmaxHead {
public:
    Tensor2D forward(const Tensor2D& logits);
    static Tensor2D apply(const Tensor2D& logits);
    Tensor2D backward(const Tensor2D& grad_probs);

private:
    std::optional<Tensor2D> probs_;
};

/// Fills a tensor with independent uniform(-range, range) draws.
void init_uniform(Tensor2D& t, double range, std::mt19937_64& rng);

} // namespace cmatch
