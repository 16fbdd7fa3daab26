#include "cmatch/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace cmatch::kernels::serial {

namespace {

void ensure_shape(Tensor2D& t, std::size_t rows, std::size_t cols) {
    if (t.rows() != rows || t.cols() != cols) {
        t = Tensor2D(rows, cols);
    }
}

} // namespace

void affine_forward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& b, Tensor2D& y) {
    const std::size_t n = x.rows(), in = x.cols(), out = w.rows();
    if (w.cols() != in || b.cols() != out) {
        throw std::invalid_argument("affine_forward: shape mismatch");
    }
    ensure_shape(y, n, out);
    // Accumulate y[r][:] += x[r][i] * w[:][i] in increasing i via a transposed copy of w.
    Tensor2D wt(in, out);
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            wt(i, o) = w(o, i);
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        double* yr = y.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            yr[o] = b(0, o);
        }
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = x(r, i);
            const double* wti = wt.data() + i * out;
            for (std::size_t o = 0; o < out; ++o) {
                yr[o] += xi * wti[o];
            }
        }
    }
}

void affine_backward(const Tensor2D& x, const Tensor2D& w, const Tensor2D& dy, Tensor2D* dx,
                     Tensor2D& dw, Tensor2D& db) {
    const std::size_t n = x.rows(), in = x.cols(), out = w.rows();
    if (dy.rows() != n || dy.cols() != out || !dw.same_shape(w) || db.cols() != out) {
        throw std::invalid_argument("affine_backward: shape mismatch");
    }
    if (dx != nullptr) {
        ensure_shape(*dx, n, in);
        for (std::size_t r = 0; r < n; ++r) {
            double* dxr = dx->data() + r * in;
            for (std::size_t i = 0; i < in; ++i) {
                dxr[i] = 0.0;
            }
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dy(r, o);
                const double* wo = w.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    dxr[i] += g * wo[i];
                }
            }
        }
    }
    for (std::size_t o = 0; o < out; ++o) {
        double* dwo = dw.data() + o * in;
        double bias = db(0, o);
        for (std::size_t r = 0; r < n; ++r) {
            const double g = dy(r, o);
            bias += g;
            const double* xr = x.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) {
                dwo[i] += g * xr[i];
            }
        }
        db(0, o) = bias;
    }
}

void tanh_forward(const Tensor2D& x, Tensor2D& y) {
    ensure_shape(y, x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y.data()[i] = std::tanh(x.data()[i]);
    }
}

void tanh_backward(const Tensor2D& y, const Tensor2D& dy, Tensor2D& dx) {
    ensure_shape(dx, y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = y.data()[i];
        dx.data()[i] = dy.data()[i] * (1.0 - t * t);
    }
}

void gather_rows(const Tensor2D& table, std::span<const std::int32_t> ids, Tensor2D& out) {
    const std::size_t d = table.cols();
    ensure_shape(out, ids.size(), d);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const double* src = table.data() + static_cast<std::size_t>(ids[r]) * d;
        double* dst = out.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] = src[c];
        }
    }
}

void scatter_add_rows(const Tensor2D& dout, std::span<const std::int32_t> ids, Tensor2D& dtable) {
    const std::size_t d = dtable.cols();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const double* src = dout.data() + r * d;
        double* dst = dtable.data() + static_cast<std::size_t>(ids[r]) * d;
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] += src[c];
        }
    }
}

void segment_mean(const Tensor2D& x, std::span<const std::size_t> offsets, Tensor2D& out) {
    const std::size_t segments = offsets.size() - 1, d = x.cols();
    ensure_shape(out, segments, d);
    for (std::size_t s = 0; s < segments; ++s) {
        double* dst = out.data() + s * d;
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] = 0.0;
        }
        for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
            const double* src = x.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
                dst[c] += src[c];
            }
        }
        const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
        for (std::size_t c = 0; c < d; ++c) {
            dst[c] *= inv;
        }
    }
}

void segment_mean_backward(const Tensor2D& dy, std::span<const std::size_t> offsets,
                           Tensor2D& dx) {
    const std::size_t segments = offsets.size() - 1, d = dy.cols();
    ensure_shape(dx, offsets.back(), d);
    for (std::size_t s = 0; s < segments; ++s) {
        const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
        const double* src = dy.data() + s * d;
        for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
            double* dst = dx.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
                dst[c] = src[c] * inv;
            }
        }
    }
}

} // namespace cmatch::kernels::serial
