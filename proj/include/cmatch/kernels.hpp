#pragma once

// Dense inner loops used by the layer primitives.
//
// Two implementations with identical signatures: `serial` is the plain
// reference, `parallel` splits the outer loop with OpenMP. Each output element
// is produced by exactly one thread with the same summation order as the
// serial code, so both produce bit-identical results. The unqualified
// functions in `cmatch::kernels` dispatch to the parallel version.

#include "cmatch/numkit.hpp"

#include <cstdint>
#include <span>

namespace cmatch::kernels {

namespace serial {

/// y = x * w^T + b; x is n x in, w is out x in, b is 1 x out.
void affine_forward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& b, Tensor2D& y);
/// dx = dy * w (skipped when dx is null); dw += dy^T * x; db += column sums of dy.
void affine_backward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& dy, Tensor2D* dx,
                     Tensor2D& dw, Tensor2D& db);
void tanh_forward(const Tensor2D& x, Tensor2D& y);
/// dx = dy * (1 - y^2) where y = tanh(x).
void tanh_backward(const Tensor2D& y, const Tensor2D& dy, Tensor2D& dx);
/// out.row(i) = table.row(ids[i]).
void gather_rows(const Tensor2D& table, std::span<const std::int32_t> ids, Tensor2D& out);
/// dtable.row(ids[i]) += dout.row(i), accumulated in increasing i.
void scatter_add_rows(const Tensor2D& dout, std::span<const std::int32_t> ids, Tensor2D& dtable);
/// out.row(s) = mean of rows [offsets[s], offsets[s+1]) of x.
void segment_mean(const Tensor2D& x, std::span<const std::size_t> offsets, Tensor2D& out);
void segment_mean_backward(const Tensor2D& dy, std::span<const std::size_t> offsets, Tensor2D& dx);

} // namespace serial

namespace parallel {

// Same contracts as serial.
// y = x * w^T + b; x is n x in, w is out x in, b is 1 x out.
void affine_forward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& b, Tensor2D& y);
// dx = dy * w (skipped when dx is null); dw += dy^T * x; db += column sums of dy.
void affine_backward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& dy, Tensor2D* dx,
                     Tensor2D& dw, Tensor2D& db);
void tanh_forward(const Tensor2D& x, Tensor2D& y);
// dx = dy * (1 - y^2) where y = tanh(x).
void tanh_backward(const Tensor2D& y, const Tensor2D& dy, Tensor2D& dx);
// out.row(i) = table.row(ids[i]).
void gather_rows(const Tensor2D& table, std::span<const std::int32_t> ids, Tensor2D& out);
// dtable.row(ids[i]) += dout.row(i), accumulated in increasing i.
void scatter_add_rows(const Tensor2D& dout, std::span<const std::int32_t> ids, Tensor2D& dtable);
// out.row(s) = mean of rows [offsets[s], offsets[s+1]) of x.
void segment_mean(const Tensor2D& x, std::span<const std::size_t> offsets, Tensor2D& out);
void segment_mean_backward(const Tensor2D& dy, std::span<const std::size_t> offsets, Tensor2D& dx);

} // namespace parallel

using parallel::affine_backward;
using parallel::affine_forward;
using parallel::gather_rows;
using parallel::scatter_add_rows;
using parallel::segment_mean;
using parallel::segment_mean_backward;
using parallel::tanh_backward;
using parallel::tanh_forward;

/// Number of threads the parallel kernels would use in the calling context.
int max_threads();

} // namespace cmatch::kernels
