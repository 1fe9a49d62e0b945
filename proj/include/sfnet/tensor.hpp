#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sfnet/rng.hpp"

namespace sfnet {

using Shape = std::vector<int>;

namespace autograd {
struct Node;
}

// Dense float32 tensor with reverse-mode autodiff. Tensors are handles to
// shared storage; values are written once at construction and treated as
// immutable afterwards (mutable access to a tensor produced by an op throws,
// which is how in-place modification of recorded graphs is rejected).
struct TensorData {
    Shape shape;
    std::vector<float> values;
    bool requires_grad = false;
    bool retain_grad = false;
    std::vector<float> grad;  // allocated lazily during backward
    std::shared_ptr<autograd::Node> creator;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, float v);
    static Tensor from_vector(const Shape& s, std::vector<float> v);
    static Tensor scalar(float v);
    static Tensor randu(const Shape& s, Rng& rng, float lo, float hi);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return d_->numel(); }

    const float* data() const { return d_->values.data(); }
    // Mutable access is only legal on leaves (parameters, inputs).
    float* mutable_data();
    const std::vector<float>& values() const { return d_->values; }

    float at(const std::vector<int>& idx) const;
    float item() const;

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v);
    Tensor& retain_grad();

    bool has_grad() const { return d_ && !d_->grad.empty(); }
    const std::vector<float>& grad() const;
    void zero_grad();

    // Deep copy; the result is a detached leaf.
    Tensor clone() const;
    Tensor detach() const;

    std::shared_ptr<TensorData> ptr() const { return d_; }
    static Tensor wrap(std::shared_ptr<TensorData> d);

private:
    std::shared_ptr<TensorData> d_;
};

namespace autograd {

// One recorded operation. seq increases monotonically with creation order,
// so iterating reachable nodes by decreasing seq is a valid reverse
// topological order.
struct Node {
    std::string op;
    std::uint64_t seq = 0;
    bool consumed = false;
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::vector<std::weak_ptr<TensorData>> outputs;
    std::function<void(Node&)> backward;
};

bool grad_enabled();

// Disables graph recording in scope (evaluation / data paths).
struct NoGradGuard {
    explicit NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// True when a tensor either is a tracked leaf or was produced by the graph.
inline bool needs_grad(const TensorData& td) {
    return td.requires_grad || td.creator != nullptr;
}

// Records a node over inputs/outputs when grad mode is on and at least one
// input needs grad. Backward closures must reach outputs through the node's
// weak references (never by value) so graphs stay acyclic in ownership.
void record(std::string op, const std::vector<Tensor>& inputs,
            const std::vector<Tensor>& outputs,
            std::function<void(Node&)> backward);

// Grad buffer of an output, or nullptr when no gradient reached it.
const float* output_grad(Node& n, int idx);
// Values of an output if it is still alive (nullptr otherwise).
const std::shared_ptr<TensorData> output_data(Node& n, int idx);
bool input_needs_grad(Node& n, int idx);
// Zero-initialized grad buffer of an input, allocated on first use.
float* ensure_grad(const std::shared_ptr<TensorData>& td);

// Throws when any value is non-finite; called by every op on its outputs.
void check_finite(const char* op, const float* x, std::int64_t n);

}  // namespace autograd

// Runs reverse-mode accumulation from a scalar loss. Each recorded graph can
// be consumed once; a second backward without a fresh forward throws.
void backward(const Tensor& loss);

// ---- Operations -------------------------------------------------------------
// Binary elementwise ops broadcast the second operand over singleton axes
// (ranks must match).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);

// x: (N,C,H,W); w: (K,C,kh,kw); bias: (K) or undefined. Floor output
// arithmetic; empty outputs are rejected.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int pad);

Tensor maxpool2d(const Tensor& x, int window, int stride);

// Train mode uses batch statistics and updates running stats in place
// (momentum 0.1 by default); eval mode uses the running stats.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var, bool training,
                   float momentum = 0.1f, float eps = 1e-5f);

enum class PoolKind { Avg, Max };
enum class PoolAxes { Spatial, Channel };
// Spatial: (N,C,H,W) -> (N,C,1,1); Channel: (N,C,H,W) -> (N,1,H,W).
Tensor pool_global(const Tensor& x, PoolKind kind, PoolAxes axes);

Tensor reshape(const Tensor& x, const Shape& s);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor sum_all(const Tensor& x);   // -> shape {1}
Tensor mean_all(const Tensor& x);  // -> shape {1}

}  // namespace sfnet
