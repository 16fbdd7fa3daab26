#include "cmatch/layers.hpp"

#include "cmatch/kernels.hpp"

#include <stdexcept>

namespace cmatch {

namespace {

template <typename T>
const T& require_cache(const std::optional<T>& cache, const char* layer) {
    if (!cache) {
        throw std::logic_error(std::string(layer) + ": backward called without forward");
    }
    return *cache;
}

} // namespace

Tensor2D EmbeddingLookup::apply(std::span<const std::int32_t> ids) const {
    const auto vocab = static_cast<std::int64_t>(table.value.rows());
    for (std::int32_t id : ids) {
        if (id < 0 || id >= vocab) {
            throw std::out_of_range("embedding: token id " + std::to_string(id) +
                                    " outside vocabulary of size " + std::to_string(vocab));
        }
    }
    Tensor2D out;
    kernels::gather_rows(table.value, ids, out);
    return out;
}

Tensor2D EmbeddingLookup::forward(std::span<const std::int32_t> ids) {
    Tensor2D out = apply(ids);
    ids_.emplace(ids.begin(), ids.end());
    return out;
}

void EmbeddingLookup::backward(const Tensor2D& grad_out) {
    const auto& ids = require_cache(ids_, "embedding");
    kernels::scatter_add_rows(grad_out, ids, table.grad);
    ids_.reset();
}

Tensor2D Affine::apply(const Tensor2D& x) const {
    Tensor2D y;
    kernels::affine_forward(x, weight.value, bias.value, y);
    return y;
}

Tensor2D Affine::forward(const Tensor2D& x) {
    input_ = x;
    return apply(x);
}

Tensor2D Affine::backward(const Tensor2D& grad_out) {
    const Tensor2D& x = require_cache(input_, "affine");
    Tensor2D dx;
    kernels::affine_backward(x, weight.value, grad_out, &dx, weight.grad, bias.grad);
    input_.reset();
    return dx;
}

Tensor2D TanhActivation::apply(const Tensor2D& x) {
    Tensor2D y;
    kernels::tanh_forward(x, y);
    return y;
}

Tensor2D TanhActivation::forward(const Tensor2D& x) {
    output_ = apply(x);
    return *output_;
}

Tensor2D TanhActivation::backward(const Tensor2D& grad_out) {
    const Tensor2D& y = require_cache(output_, "tanh");
    Tensor2D dx;
    kernels::tanh_backward(y, grad_out, dx);
    output_.reset();
    return dx;
}

Tensor2D ResidualAdd::apply(const Tensor2D& a, const Tensor2D& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("residual add: shape mismatch");
    }
    Tensor2D y = a;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.data()[i] += b.data()[i];
    }
    return y;
}

Tensor2D ResidualAdd::forward(const Tensor2D& a, const Tensor2D& b) {
    armed_ = true;
    return apply(a, b);
}

std::pair<Tensor2D, Tensor2D> ResidualAdd::backward(const Tensor2D& grad_out) {
    if (!armed_) {
        throw std::logic_error("residual add: backward called without forward");
    }
    armed_ = false;
    return {grad_out, grad_out};
}

Tensor2D MeanPool::apply(const Tensor2D& x, std::span<const std::size_t> offsets) {
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x.rows()) {
        throw std::invalid_argument("mean pool: offsets do not cover the input");
    }
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        if (offsets[s + 1] <= offsets[s]) {
            throw std::invalid_argument("mean pool: empty segment " + std::to_string(s));
        }
    }
    Tensor2D out;
    kernels::segment_mean(x, offsets, out);
    return out;
}

Tensor2D MeanPool::forward(const Tensor2D& x, std::span<const std::size_t> offsets) {
    Tensor2D out = apply(x, offsets);
    offsets_.emplace(offsets.begin(), offsets.end());
    return out;
}

Tensor2D MeanPool::backward(const Tensor2D& grad_out) {
    const auto& offsets = require_cache(offsets_, "mean pool");
    Tensor2D dx;
    kernels::segment_mean_backward(grad_out, offsets, dx);
    offsets_.reset();
    return dx;
}

Tensor2D SoftmaxHead::apply(const Tensor2D& logits) {
    Tensor2D probs(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const ProbDist p = softmax(logits.row(r));
        std::copy(p.begin(), p.end(), probs.row(r).begin());
    }
    return probs;
}

Tensor2D SoftmaxHead::forward(const Tensor2D& logits) {
    probs_ = apply(logits);
    return *probs_;
}

Tensor2D SoftmaxHead::backward(const Tensor2D& grad_probs) {
    const Tensor2D& p = require_cache(probs_, "softmax head");
    Tensor2D dz(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) {
            dot += grad_probs(r, c) * p(r, c);
        }
        for (std::size_t c = 0; c < p.cols(); ++c) {
            dz(r, c) = p(r, c) * (grad_probs(r, c) - dot);
        }
    }
    probs_.reset();
    return dz;
}

void init_uniform(Tensor2D& t, double range, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-range, range);
    for (double& v : t.values()) {
        v = dist(rng);
    }
}

} // namespace cmatch
