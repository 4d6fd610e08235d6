#include "ctsac/tensor.hpp"

#include <algorithm>
#include <cblas.h>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace ctsac::grad {
namespace {

thread_local bool g_grad_enabled = true;

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
    static const bool blas_ready = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)blas_ready;
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
                static_cast<int>(ldc));
}

std::shared_ptr<TensorNode> make_node(std::vector<std::size_t> shape,
                                      std::vector<double> value) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    return node;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
    }
}

// Wires parents/backprop onto `out` if grad mode is on and any parent needs it.
void attach(const std::shared_ptr<TensorNode>& out,
            std::vector<std::shared_ptr<TensorNode>> parents,
            std::function<void()> backprop) {
    if (!g_grad_enabled) return;
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    if (!any) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
}

// Rows/cols view of the trailing axis: (d0, ..., dk) -> (prod(leading), dk).
std::size_t last_dim(const Tensor& x) {
    if (x.ndim() == 0) {
        throw ShapeError("expected at least 1 axis, got shape " + shape_str(x.shape()));
    }
    return x.shape().back();
}

std::size_t lead_rows(const Tensor& x) { return x.numel() / last_dim(x); }

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    return constant(std::move(shape), 0.0);
}

Tensor Tensor::constant(std::vector<std::size_t> shape, double fill) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return Tensor(make_node(std::move(shape), std::vector<double>(n, fill)));
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    if (values.size() != n) {
        throw ShapeError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    }
    return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::parameter(std::vector<std::size_t> shape, std::vector<double> values) {
    Tensor t = from_values(std::move(shape), std::move(values));
    t.node()->requires_grad = true;
    return t;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item: tensor of shape " + shape_str(shape()) +
                         " is not a scalar");
    }
    return node_->value[0];
}

NoGrad::NoGrad() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto out = make_node(a.shape(), a.values());
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] += b.values()[i];
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] += o->grad[i];
        }
    });
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto out = make_node(a.shape(), a.values());
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] -= b.values()[i];
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] -= o->grad[i];
        }
    });
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto out = make_node(a.shape(), a.values());
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] *= b.values()[i];
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] += o->grad[i] * pa->value[i];
        }
    });
    return Tensor(out);
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "minimum");
    auto out = make_node(a.shape(), a.values());
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = std::min(a.values()[i], b.values()[i]);
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, n] {
        // Ties route the gradient to the first argument.
        for (std::size_t i = 0; i < n; ++i) {
            const bool first = pa->value[i] <= pb->value[i];
            if (first && pa->requires_grad) {
                pa->ensure_grad();
                pa->grad[i] += o->grad[i];
            } else if (!first && pb->requires_grad) {
                pb->ensure_grad();
                pb->grad[i] += o->grad[i];
            }
        }
    });
    return Tensor(out);
}

namespace {

// Builds a unary op from the forward map and the local derivative, which is
// given the input and output values.
Tensor unary(const Tensor& x, double (*f)(double), double (*df)(double, double)) {
    auto out = make_node(x.shape(), x.values());
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = f(out->value[i]);
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, df, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            px->grad[i] += o->grad[i] * df(px->value[i], o->value[i]);
        }
    });
    return Tensor(out);
}

double stable_softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Tensor scale(const Tensor& x, double s) {
    auto out = make_node(x.shape(), x.values());
    for (double& v : out->value) v *= s;
    auto px = x.node();
    TensorNode* o = out.get();
    const std::size_t n = out->value.size();
    attach(out, {px}, [o, px, s, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += o->grad[i] * s;
    });
    return Tensor(out);
}

Tensor add_scalar(const Tensor& x, double s) {
    auto out = make_node(x.shape(), x.values());
    for (double& v : out->value) v += s;
    auto px = x.node();
    TensorNode* o = out.get();
    const std::size_t n = out->value.size();
    attach(out, {px}, [o, px, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += o->grad[i];
    });
    return Tensor(out);
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp_op(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); },
                 [](double, double y) { return y; });
}

Tensor log_op(const Tensor& x) {
    return unary(x, [](double v) { return std::log(v); },
                 [](double v, double) { return 1.0 / v; });
}

Tensor tanh_op(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    // tanh approximation; derivative follows the same formula.
    return unary(
        x,
        [](double v) {
            const double c = std::sqrt(2.0 / kPi);
            return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
        },
        [](double v, double) {
            const double c = std::sqrt(2.0 / kPi);
            const double inner = c * (v + 0.044715 * v * v * v);
            const double t = std::tanh(inner);
            const double dinner = c * (1.0 + 3.0 * 0.044715 * v * v);
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner;
        });
}

Tensor softplus(const Tensor& x) {
    return unary(x, [](double v) { return stable_softplus(v); },
                 [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor square(const Tensor& x) {
    return unary(x, [](double v) { return v * v; },
                 [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (lo > hi) throw ShapeError("clamp: lo > hi");
    auto out = make_node(x.shape(), x.values());
    for (double& v : out->value) v = std::clamp(v, lo, hi);
    auto px = x.node();
    TensorNode* o = out.get();
    const std::size_t n = out->value.size();
    attach(out, {px}, [o, px, lo, hi, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            if (px->value[i] >= lo && px->value[i] <= hi) px->grad[i] += o->grad[i];
        }
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1) {
        throw ShapeError("affine: expected x (n,in) " + shape_str(x.shape()) +
                         ", w (in,out) " + shape_str(w.shape()) + ", b (out) " +
                         shape_str(b.shape()));
    }
    const std::size_t n = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
    if (w.dim(0) != in || b.dim(0) != out_dim) {
        throw ShapeError("affine: shapes " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()) + ", " + shape_str(b.shape()) +
                         " are inconsistent");
    }
    auto out = make_node({n, out_dim}, std::vector<double>(n * out_dim));
    for (std::size_t r = 0; r < n; ++r) {
        std::memcpy(out->value.data() + r * out_dim, b.values().data(),
                    out_dim * sizeof(double));
    }
    gemm(false, false, n, out_dim, in, 1.0, x.values().data(), in,
         w.values().data(), out_dim, 1.0, out->value.data(), out_dim);
    auto px = x.node();
    auto pw = w.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {px, pw, pb}, [o, px, pw, pb, n, in, out_dim] {
        if (px->requires_grad) {
            px->ensure_grad();
            gemm(false, true, n, in, out_dim, 1.0, o->grad.data(), out_dim,
                 pw->value.data(), out_dim, 1.0, px->grad.data(), in);
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            gemm(true, false, in, out_dim, n, 1.0, px->value.data(), in,
                 o->grad.data(), out_dim, 1.0, pw->grad.data(), out_dim);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < out_dim; ++c) {
                    pb->grad[c] += o->grad[r * out_dim + c];
                }
            }
        }
    });
    return Tensor(out);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " are incompatible");
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = make_node({m, n}, std::vector<double>(m * n, 0.0));
    gemm(false, false, m, n, k, 1.0, a.values().data(), k, b.values().data(), n,
         0.0, out->value.data(), n);
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, m, k, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            gemm(false, true, m, k, n, 1.0, o->grad.data(), n, pb->value.data(),
                 n, 1.0, pa->grad.data(), k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            gemm(true, false, k, n, m, 1.0, pa->value.data(), k, o->grad.data(),
                 n, 1.0, pb->grad.data(), n);
        }
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    if (n != x.numel()) {
        throw ShapeError("reshape: shapes " + shape_str(x.shape()) + " and " +
                         shape_str(shape) + " have different sizes");
    }
    auto out = make_node(std::move(shape), x.values());
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += o->grad[i];
    });
    return Tensor(out);
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.ndim() != b.ndim() || a.ndim() < 1) {
        throw ShapeError("concat_last: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " are incompatible");
    }
    for (std::size_t i = 0; i + 1 < a.ndim(); ++i) {
        if (a.dim(i) != b.dim(i)) {
            throw ShapeError("concat_last: shapes " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()) +
                             " differ on a leading axis");
        }
    }
    const std::size_t rows = lead_rows(a);
    const std::size_t da = last_dim(a), db = last_dim(b);
    std::vector<std::size_t> shape = a.shape();
    shape.back() = da + db;
    auto out = make_node(std::move(shape), std::vector<double>(rows * (da + db)));
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(out->value.data() + r * (da + db), a.values().data() + r * da,
                    da * sizeof(double));
        std::memcpy(out->value.data() + r * (da + db) + da,
                    b.values().data() + r * db, db * sizeof(double));
    }
    auto pa = a.node();
    auto pb = b.node();
    TensorNode* o = out.get();
    attach(out, {pa, pb}, [o, pa, pb, rows, da, db] {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = o->grad.data() + r * (da + db);
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t c = 0; c < da; ++c) pa->grad[r * da + c] += g[c];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t c = 0; c < db; ++c) pb->grad[r * db + c] += g[da + c];
            }
        }
    });
    return Tensor(out);
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t d = last_dim(x);
    if (begin >= end || end > d) {
        throw ShapeError("slice_last: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for shape " +
                         shape_str(x.shape()));
    }
    const std::size_t rows = lead_rows(x);
    const std::size_t width = end - begin;
    std::vector<std::size_t> shape = x.shape();
    shape.back() = width;
    auto out = make_node(std::move(shape), std::vector<double>(rows * width));
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(out->value.data() + r * width, x.values().data() + r * d + begin,
                    width * sizeof(double));
    }
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, rows, width, d, begin] {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                px->grad[r * d + begin + c] += o->grad[r * width + c];
            }
        }
    });
    return Tensor(out);
}

Tensor broadcast_rows(const Tensor& row, std::size_t n) {
    if (row.ndim() != 2 || row.dim(0) != 1) {
        throw ShapeError("broadcast_rows: expected shape (1, d), got " +
                         shape_str(row.shape()));
    }
    const std::size_t d = row.dim(1);
    auto out = make_node({n, d}, std::vector<double>(n * d));
    for (std::size_t r = 0; r < n; ++r) {
        std::memcpy(out->value.data() + r * d, row.values().data(), d * sizeof(double));
    }
    auto px = row.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, n, d] {
        px->ensure_grad();
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) px->grad[c] += o->grad[r * d + c];
        }
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum_all(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    auto out = make_node({1}, {total});
    auto px = x.node();
    TensorNode* o = out.get();
    const std::size_t n = x.numel();
    attach(out, {px}, [o, px, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += o->grad[0];
    });
    return Tensor(out);
}

Tensor mean_all(const Tensor& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_last(const Tensor& x) {
    const std::size_t d = last_dim(x);
    const std::size_t rows = lead_rows(x);
    std::vector<std::size_t> shape = x.shape();
    shape.back() = 1;
    auto out = make_node(std::move(shape), std::vector<double>(rows, 0.0));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) out->value[r] += x.values()[r * d + c];
    }
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, rows, d] {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) px->grad[r * d + c] += o->grad[r];
        }
    });
    return Tensor(out);
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
    if (x.ndim() != 3 || axis != 1) {
        throw ShapeError("mean_axis: only axis 1 of a 3-axis tensor is supported, got shape " +
                         shape_str(x.shape()) + " axis " + std::to_string(axis));
    }
    const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
    auto out = make_node({b, d}, std::vector<double>(b * d, 0.0));
    const double inv = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            for (std::size_t c = 0; c < d; ++c) {
                out->value[i * d + c] += x.values()[(i * t + j) * d + c] * inv;
            }
        }
    }
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, b, t, d, inv] {
        px->ensure_grad();
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < t; ++j) {
                for (std::size_t c = 0; c < d; ++c) {
                    px->grad[(i * t + j) * d + c] += o->grad[i * d + c] * inv;
                }
            }
        }
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Row-structured ops

Tensor softmax_last(const Tensor& x) {
    const std::size_t d = last_dim(x);
    const std::size_t rows = lead_rows(x);
    auto out = make_node(x.shape(), std::vector<double>(x.numel()));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.values().data() + r * d;
        double* y = out->value.data() + r * d;
        double mx = in[0];
        for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, in[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            y[c] = std::exp(in[c] - mx);
            z += y[c];
        }
        for (std::size_t c = 0; c < d; ++c) y[c] /= z;
    }
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, rows, d] {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = o->value.data() + r * d;
            const double* g = o->grad.data() + r * d;
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += y[c] * g[c];
            for (std::size_t c = 0; c < d; ++c) {
                px->grad[r * d + c] += y[c] * (g[c] - dot);
            }
        }
    });
    return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t d = last_dim(x);
    if (gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
        throw ShapeError("layer_norm: feature axis " + shape_str(x.shape()) +
                         " vs gamma " + shape_str(gamma.shape()) + ", beta " +
                         shape_str(beta.shape()));
    }
    const std::size_t rows = lead_rows(x);
    auto out = make_node(x.shape(), std::vector<double>(x.numel()));
    // xhat is needed by the backward pass; keep it alive in the closure.
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.values().data() + r * d;
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += in[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
        var /= static_cast<double>(d);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        for (std::size_t c = 0; c < d; ++c) {
            const double h = (in[c] - mean) * istd;
            (*xhat)[r * d + c] = h;
            out->value[r * d + c] = gamma.values()[c] * h + beta.values()[c];
        }
    }
    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    TensorNode* o = out.get();
    attach(out, {px, pg, pb}, [o, px, pg, pb, rows, d, xhat, inv_std] {
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = o->grad.data() + r * d;
            const double* h = xhat->data() + r * d;
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (std::size_t c = 0; c < d; ++c) pg->grad[c] += g[c] * h[c];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t c = 0; c < d; ++c) pb->grad[c] += g[c];
            }
            if (px->requires_grad) {
                px->ensure_grad();
                double sum_gh = 0.0, sum_ghh = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double gh = g[c] * pg->value[c];
                    sum_gh += gh;
                    sum_ghh += gh * h[c];
                }
                for (std::size_t c = 0; c < d; ++c) {
                    const double gh = g[c] * pg->value[c];
                    px->grad[r * d + c] += (*inv_std)[r] *
                        (gh - inv_d * sum_gh - h[c] * inv_d * sum_ghh);
                }
            }
        }
    });
    return Tensor(out);
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ShapeError("dropout: p must lie in [0, 1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) return x;
    const std::size_t n = x.numel();
    auto keep = std::make_shared<std::vector<double>>(n);
    const double inv_keep = 1.0 / (1.0 - p);
    auto out = make_node(x.shape(), x.values());
    for (std::size_t i = 0; i < n; ++i) {
        const double k = rng.uniform() < p ? 0.0 : inv_keep;
        (*keep)[i] = k;
        out->value[i] *= k;
    }
    auto px = x.node();
    TensorNode* o = out.get();
    attach(out, {px}, [o, px, keep, n] {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += o->grad[i] * (*keep)[i];
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Attention

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads) {
    if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3) {
        throw ShapeError("multi_head_attention: expected (B, T, E) inputs, got " +
                         shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " +
                         shape_str(v.shape()));
    }
    if (q.shape() != k.shape() || q.shape() != v.shape()) {
        throw ShapeError("multi_head_attention: shapes " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()) +
                         " differ");
    }
    const std::size_t b = q.dim(0), t = q.dim(1), e = q.dim(2);
    if (heads == 0 || e % heads != 0) {
        throw ShapeError("multi_head_attention: " + std::to_string(heads) +
                         " heads do not divide embedding width " + std::to_string(e));
    }
    const std::size_t dh = e / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto out = make_node(q.shape(), std::vector<double>(q.numel(), 0.0));
    // Softmax probabilities, kept for the backward pass: (b, heads, t, t).
    auto probs = std::make_shared<std::vector<double>>(b * heads * t * t);

    std::vector<double> qh(t * dh), kh(t * dh), vh(t * dh), oh(t * dh), s(t * t);
    auto load_head = [&](const std::vector<double>& src, std::size_t bi,
                         std::size_t hi, std::vector<double>& dst) {
        for (std::size_t ti = 0; ti < t; ++ti) {
            std::memcpy(dst.data() + ti * dh,
                        src.data() + ((bi * t + ti) * e + hi * dh),
                        dh * sizeof(double));
        }
    };
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t hi = 0; hi < heads; ++hi) {
            load_head(q.values(), bi, hi, qh);
            load_head(k.values(), bi, hi, kh);
            load_head(v.values(), bi, hi, vh);
            gemm(false, true, t, t, dh, inv_sqrt, qh.data(), dh, kh.data(), dh,
                 0.0, s.data(), t);
            double* p = probs->data() + (bi * heads + hi) * t * t;
            for (std::size_t r = 0; r < t; ++r) {
                double* row = s.data() + r * t;
                double mx = row[0];
                for (std::size_t c = 1; c < t; ++c) mx = std::max(mx, row[c]);
                double z = 0.0;
                for (std::size_t c = 0; c < t; ++c) {
                    row[c] = std::exp(row[c] - mx);
                    z += row[c];
                }
                for (std::size_t c = 0; c < t; ++c) p[r * t + c] = row[c] / z;
            }
            gemm(false, false, t, dh, t, 1.0, p, t, vh.data(), dh, 0.0, oh.data(), dh);
            for (std::size_t ti = 0; ti < t; ++ti) {
                std::memcpy(out->value.data() + ((bi * t + ti) * e + hi * dh),
                            oh.data() + ti * dh, dh * sizeof(double));
            }
        }
    }

    auto pq = q.node();
    auto pk = k.node();
    auto pv = v.node();
    TensorNode* o = out.get();
    attach(out, {pq, pk, pv}, [o, pq, pk, pv, probs, b, t, e, heads, dh, inv_sqrt] {
        std::vector<double> qh(t * dh), kh(t * dh), vh(t * dh), goh(t * dh);
        std::vector<double> dp(t * t), ds(t * t), dhh(t * dh);
        auto load = [&](const std::vector<double>& src, std::size_t bi,
                        std::size_t hi, std::vector<double>& dst) {
            for (std::size_t ti = 0; ti < t; ++ti) {
                std::memcpy(dst.data() + ti * dh,
                            src.data() + ((bi * t + ti) * e + hi * dh),
                            dh * sizeof(double));
            }
        };
        auto scatter = [&](TensorNode* node, std::size_t bi, std::size_t hi,
                           const std::vector<double>& src) {
            for (std::size_t ti = 0; ti < t; ++ti) {
                double* dst = node->grad.data() + ((bi * t + ti) * e + hi * dh);
                for (std::size_t c = 0; c < dh; ++c) dst[c] += src[ti * dh + c];
            }
        };
        if (pq->requires_grad) pq->ensure_grad();
        if (pk->requires_grad) pk->ensure_grad();
        if (pv->requires_grad) pv->ensure_grad();
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t hi = 0; hi < heads; ++hi) {
                load(o->grad, bi, hi, goh);
                const double* p = probs->data() + (bi * heads + hi) * t * t;
                if (pv->requires_grad) {
                    gemm(true, false, t, dh, t, 1.0, p, t, goh.data(), dh, 0.0,
                         dhh.data(), dh);
                    scatter(pv.get(), bi, hi, dhh);
                }
                if (pq->requires_grad || pk->requires_grad) {
                    load(pv->value, bi, hi, vh);
                    gemm(false, true, t, t, dh, 1.0, goh.data(), dh, vh.data(),
                         dh, 0.0, dp.data(), t);
                    for (std::size_t r = 0; r < t; ++r) {
                        double dot = 0.0;
                        for (std::size_t c = 0; c < t; ++c) {
                            dot += dp[r * t + c] * p[r * t + c];
                        }
                        for (std::size_t c = 0; c < t; ++c) {
                            ds[r * t + c] = p[r * t + c] * (dp[r * t + c] - dot);
                        }
                    }
                    if (pq->requires_grad) {
                        load(pk->value, bi, hi, kh);
                        gemm(false, false, t, dh, t, inv_sqrt, ds.data(), t,
                             kh.data(), dh, 0.0, dhh.data(), dh);
                        scatter(pq.get(), bi, hi, dhh);
                    }
                    if (pk->requires_grad) {
                        load(pq->value, bi, hi, qh);
                        gemm(true, false, t, dh, t, inv_sqrt, ds.data(), t,
                             qh.data(), dh, 0.0, dhh.data(), dh);
                        scatter(pk.get(), bi, hi, dhh);
                    }
                }
            }
        }
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Graph control

Tensor stop_grad(const Tensor& x) {
    return Tensor(make_node(x.shape(), x.values()));
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss has shape " + shape_str(loss.shape()) +
                         ", expected a scalar");
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order over parents (deep graphs would overflow a
    // recursive traversal).
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) {
            // A node may legitimately receive no contributions (e.g. the losing
            // side of a minimum); its backprop must still see an all-zero
            // buffer rather than an unallocated one.
            (*it)->ensure_grad();
            (*it)->backprop();
        }
    }
}

// ---------------------------------------------------------------------------
// Parameters & optimizer

Tensor ParamStore::add(std::string name, Tensor t, bool weight_decay) {
    for (const auto& e : entries_) {
        if (e.name == name) {
            throw ShapeError("parameter name already registered: " + name);
        }
    }
    t.node()->requires_grad = true;
    entries_.push_back({std::move(name), t, weight_decay});
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ShapeError("unknown parameter: " + name);
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

std::size_t ParamStore::total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

Adam::Adam(ParamStore& params, AdamConfig config)
    : params_(params), config_(config) {
    for (auto& e : params_.entries()) {
        m_.emplace_back(e.tensor.numel(), 0.0);
        v_.emplace_back(e.tensor.numel(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.entries().size(); ++pi) {
        auto& entry = params_.entries()[pi];
        auto& value = entry.tensor.values();
        auto& g = entry.tensor.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
            if (entry.weight_decay) {
                value[i] -= config_.learning_rate * config_.weight_decay * value[i];
            }
        }
    }
}

}  // namespace ctsac::grad
