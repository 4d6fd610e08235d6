#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ctsac/common.hpp"
#include "ctsac/rng.hpp"

namespace ctsac::grad {

// One record in the backward graph. Tensors are thin handles sharing these
// nodes, so graphs stay alive exactly as long as some tensor references them.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily; empty means "all zero"
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;  // accumulates this->grad into parents

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor constant(std::vector<std::size_t> shape, double fill);
    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values);
    // Leaf with requires_grad set: a trainable parameter.
    static Tensor parameter(std::vector<std::size_t> shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->numel(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& grad() { node_->ensure_grad(); return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void zero_grad() { if (node_) node_->grad.assign(node_->value.size(), 0.0); }
    double item() const;

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// While a NoGrad object is alive, newly built ops record no backward graph.
class NoGrad {
public:
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Elementwise / scalar ops -----------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Linear algebra -----------------------------------------------------------
// y = x·W + b, x: (n, in), W: (in, out), b: (out) broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);

// Shape ops ---------------------------------------------------------------
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
// Repeat a (1, d) row n times into (n, d).
Tensor broadcast_rows(const Tensor& row, std::size_t n);

// Reductions ----------------------------------------------------------------
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Sum over the last axis, keeping it with length 1.
Tensor sum_last(const Tensor& x);
// Mean over one axis of a 3-d tensor (the sequence axis of (B, T, D) inputs).
Tensor mean_axis(const Tensor& x, std::size_t axis);

// Row-structured ops (last axis is the feature axis) ------------------------
Tensor softmax_last(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);

// Attention core on (B, T, E) inputs already projected to Q/K/V. Splits E
// into `heads` slices, applies softmax(Q·Kᵀ/√d_head)·V per head, and
// concatenates head outputs; the caller owns the surrounding projections.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads);

// Graph control -------------------------------------------------------------
Tensor stop_grad(const Tensor& x);
void backward(const Tensor& loss);

// Parameters & optimizer ------------------------------------------------------
struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool weight_decay = false;  // decoupled decay applies only where set
};

class ParamStore {
public:
    Tensor add(std::string name, Tensor t, bool weight_decay = false);
    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }
    Tensor get(const std::string& name) const;
    void zero_grad();
    std::size_t total_params() const;

private:
    std::vector<ParamEntry> entries_;
};

struct AdamConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
};

class Adam {
public:
    Adam(ParamStore& params, AdamConfig config);
    void step();
    std::size_t step_count() const { return step_count_; }
    AdamConfig& config() { return config_; }

    // Checkpoint access: moments are stored per parameter, in store order.
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    void set_step_count(std::size_t n) { step_count_ = n; }

private:
    ParamStore& params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t step_count_ = 0;
};

// Formats "(a, b, c)" for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace ctsac::grad
