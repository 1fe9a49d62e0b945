#include "sfnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include "sfnet/kernels.hpp"

namespace sfnet {

using kernels::i64;

// ---- Tensor basics ----------------------------------------------------------

namespace {

std::shared_ptr<TensorData> make_data(const Shape& s) {
    for (int d : s)
        if (d <= 0) throw std::invalid_argument("tensor: non-positive dim");
    auto td = std::make_shared<TensorData>();
    td->shape = s;
    td->values.resize(static_cast<std::size_t>(td->numel()));
    return td;
}

i64 shape_numel(const Shape& s) {
    i64 n = 1;
    for (int d : s) n *= d;
    return n;
}

}  // namespace

Tensor Tensor::wrap(std::shared_ptr<TensorData> d) {
    Tensor t;
    t.d_ = std::move(d);
    return t;
}

Tensor Tensor::zeros(const Shape& s) { return wrap(make_data(s)); }

Tensor Tensor::full(const Shape& s, float v) {
    auto td = make_data(s);
    std::fill(td->values.begin(), td->values.end(), v);
    return wrap(td);
}

Tensor Tensor::from_vector(const Shape& s, std::vector<float> v) {
    auto td = make_data(s);
    if (static_cast<i64>(v.size()) != td->numel())
        throw std::invalid_argument("from_vector: size does not match shape");
    td->values = std::move(v);
    return wrap(td);
}

Tensor Tensor::scalar(float v) { return full({1}, v); }

Tensor Tensor::randu(const Shape& s, Rng& rng, float lo, float hi) {
    auto td = make_data(s);
    for (auto& x : td->values) x = rng.uniform(lo, hi);
    return wrap(td);
}

float* Tensor::mutable_data() {
    if (d_->creator)
        throw std::logic_error(
            "tensor: in-place modification of graph tensors is rejected");
    return d_->values.data();
}

float Tensor::at(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw std::invalid_argument("at: rank mismatch");
    i64 off = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        if (idx[a] < 0 || idx[a] >= d_->shape[a])
            throw std::out_of_range("at: index out of range");
        off = off * d_->shape[a] + idx[a];
    }
    return d_->values[static_cast<std::size_t>(off)];
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor not scalar");
    return d_->values[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
    if (v && d_->creator)
        throw std::logic_error("requires_grad: only leaves can be tracked");
    d_->requires_grad = v;
    return *this;
}

Tensor& Tensor::retain_grad() {
    d_->retain_grad = true;
    return *this;
}

const std::vector<float>& Tensor::grad() const {
    if (!has_grad())
        throw std::logic_error("grad: no gradient present (run backward)");
    return d_->grad;
}

void Tensor::zero_grad() {
    if (d_ && !d_->grad.empty())
        std::fill(d_->grad.begin(), d_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
    auto td = make_data(d_->shape);
    td->values = d_->values;
    return wrap(td);
}

Tensor Tensor::detach() const { return clone(); }

// ---- Autograd ----------------------------------------------------------------

namespace autograd {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{1};
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void record(std::string op, const std::vector<Tensor>& inputs,
            const std::vector<Tensor>& outputs,
            std::function<void(Node&)> backward) {
    if (!g_grad_enabled) return;
    bool any = false;
    for (const auto& t : inputs)
        if (t.defined() && needs_grad(*t.ptr())) any = true;
    if (!any) return;
    auto node = std::make_shared<Node>();
    node->op = std::move(op);
    node->seq = g_seq.fetch_add(1);
    for (const auto& t : inputs)
        if (t.defined()) node->inputs.push_back(t.ptr());
    node->backward = std::move(backward);
    for (const auto& t : outputs) {
        node->outputs.push_back(t.ptr());
        t.ptr()->creator = node;
    }
}

const float* output_grad(Node& n, int idx) {
    auto out = n.outputs[static_cast<std::size_t>(idx)].lock();
    if (!out || out->grad.empty()) return nullptr;
    return out->grad.data();
}

const std::shared_ptr<TensorData> output_data(Node& n, int idx) {
    return n.outputs[static_cast<std::size_t>(idx)].lock();
}

bool input_needs_grad(Node& n, int idx) {
    return needs_grad(*n.inputs[static_cast<std::size_t>(idx)]);
}

float* ensure_grad(const std::shared_ptr<TensorData>& td) {
    if (td->grad.empty())
        td->grad.assign(static_cast<std::size_t>(td->numel()), 0.0f);
    return td->grad.data();
}

void check_finite(const char* op, const float* x, std::int64_t n) {
    if (!kernels::all_finite(x, n))
        throw std::runtime_error(std::string("op '") + op +
                                 "': non-finite values in output");
}

}  // namespace autograd

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument(
            "backward: loss must be a one-element tensor");
    auto root = loss.ptr();
    if (!root->creator)
        throw std::invalid_argument(
            "backward: loss is not attached to a recorded graph");

    // The traversal owns the nodes it visits so no node can die mid-pass.
    std::vector<std::shared_ptr<autograd::Node>> order;
    std::unordered_set<autograd::Node*> seen;
    std::vector<std::shared_ptr<autograd::Node>> stack{root->creator};
    seen.insert(root->creator.get());
    while (!stack.empty()) {
        std::shared_ptr<autograd::Node> n = std::move(stack.back());
        stack.pop_back();
        if (n->consumed)
            throw std::runtime_error(
                "backward: graph already consumed; run a new forward pass");
        for (const auto& in : n->inputs) {
            const std::shared_ptr<autograd::Node>& c = in->creator;
            if (c && !seen.count(c.get())) {
                seen.insert(c.get());
                stack.push_back(c);
            }
        }
        order.push_back(std::move(n));
    }
    // Monotonic creation ids give a strict reverse topological order.
    std::sort(order.begin(), order.end(),
              [](const std::shared_ptr<autograd::Node>& a,
                 const std::shared_ptr<autograd::Node>& b) {
                  return a->seq > b->seq;
              });

    root->grad.assign(1, 1.0f);
    for (const std::shared_ptr<autograd::Node>& n : order) {
        n->backward(*n);
        n->consumed = true;
        for (auto& w : n->outputs) {
            if (auto o = w.lock()) {
                if (!o->requires_grad && !o->retain_grad)
                    std::vector<float>().swap(o->grad);
            }
        }
        // Release the closure (and whatever activations it captured). The
        // input references must stay: an input's grad buffer is read later
        // by the node that created it, and these references may be the only
        // thing keeping that tensor alive. Grad buffers still free
        // progressively through the output sweep above, one step after they
        // are consumed.
        n->backward = nullptr;
    }
}

// ---- Elementwise ops -----------------------------------------------------------

namespace {

// Same-rank broadcast: every axis must match or be 1 on one side.
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(op) +
                                    ": operand ranks differ");
    Shape out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i])
            out[i] = a[i];
        else if (a[i] == 1)
            out[i] = b[i];
        else if (b[i] == 1)
            out[i] = a[i];
        else
            throw std::invalid_argument(std::string(op) +
                                        ": incompatible shapes");
    }
    return out;
}

// Walks the full output index space in row-major order, maintaining the
// offsets of both (possibly broadcast) operands without div/mod.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b,
                        Fn&& fn) {
    const int rank = static_cast<int>(out.size());
    if (rank == 0) {
        fn(0, 0, 0);
        return;
    }
    std::vector<i64> sa(rank), sb(rank);
    i64 ra = 1, rb = 1;
    for (int i = rank - 1; i >= 0; --i) {
        sa[i] = (a[i] == 1) ? 0 : ra;
        sb[i] = (b[i] == 1) ? 0 : rb;
        ra *= a[i];
        rb *= b[i];
    }
    std::vector<int> idx(rank, 0);
    i64 aoff = 0, boff = 0;
    const i64 total = shape_numel(out);
    for (i64 lin = 0;; ++lin) {
        fn(lin, aoff, boff);
        if (lin + 1 == total) break;
        for (int d = rank - 1;; --d) {
            ++idx[d];
            aoff += sa[d];
            boff += sb[d];
            if (idx[d] < out[d]) break;
            aoff -= sa[d] * idx[d];
            boff -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
}

enum class BinOp { Add, Sub, Mul };

Tensor binary_op(const char* name, BinOp op, const Tensor& a,
                 const Tensor& b) {
    const Shape os = broadcast_shape(name, a.shape(), b.shape());
    Tensor y = Tensor::zeros(os);
    float* yd = y.ptr()->values.data();
    const float* ad = a.data();
    const float* bd = b.data();
    if (a.shape() == b.shape()) {
        const i64 n = y.numel();
        switch (op) {
            case BinOp::Add:
                for (i64 i = 0; i < n; ++i) yd[i] = ad[i] + bd[i];
                break;
            case BinOp::Sub:
                for (i64 i = 0; i < n; ++i) yd[i] = ad[i] - bd[i];
                break;
            case BinOp::Mul:
                for (i64 i = 0; i < n; ++i) yd[i] = ad[i] * bd[i];
                break;
        }
    } else {
        for_each_broadcast(os, a.shape(), b.shape(),
                           [&](i64 lin, i64 ao, i64 bo) {
                               switch (op) {
                                   case BinOp::Add:
                                       yd[lin] = ad[ao] + bd[bo];
                                       break;
                                   case BinOp::Sub:
                                       yd[lin] = ad[ao] - bd[bo];
                                       break;
                                   case BinOp::Mul:
                                       yd[lin] = ad[ao] * bd[bo];
                                       break;
                               }
                           });
    }
    autograd::check_finite(name, yd, y.numel());

    const Shape ashape = a.shape(), bshape = b.shape();
    autograd::record(
        name, {a, b}, {y}, [op, ashape, bshape, os](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            const bool wa = autograd::input_needs_grad(nd, 0);
            const bool wb = autograd::input_needs_grad(nd, 1);
            float* ga = wa ? autograd::ensure_grad(nd.inputs[0]) : nullptr;
            float* gb = wb ? autograd::ensure_grad(nd.inputs[1]) : nullptr;
            const float* av = nd.inputs[0]->values.data();
            const float* bv = nd.inputs[1]->values.data();
            for_each_broadcast(os, ashape, bshape,
                               [&](i64 lin, i64 ao, i64 bo) {
                                   const float gv = g[lin];
                                   switch (op) {
                                       case BinOp::Add:
                                           if (ga) ga[ao] += gv;
                                           if (gb) gb[bo] += gv;
                                           break;
                                       case BinOp::Sub:
                                           if (ga) ga[ao] += gv;
                                           if (gb) gb[bo] -= gv;
                                           break;
                                       case BinOp::Mul:
                                           if (ga) ga[ao] += gv * bv[bo];
                                           if (gb) gb[bo] += gv * av[ao];
                                           break;
                                   }
                               });
        });
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op("add", BinOp::Add, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op("sub", BinOp::Sub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op("mul", BinOp::Mul, a, b);
}

Tensor scale(const Tensor& a, float c) {
    if (!std::isfinite(c))
        throw std::invalid_argument("scale: non-finite constant");
    Tensor y = Tensor::zeros(a.shape());
    const float* ad = a.data();
    float* yd = y.ptr()->values.data();
    const i64 n = a.numel();
    for (i64 i = 0; i < n; ++i) yd[i] = c * ad[i];
    autograd::check_finite("scale", yd, n);
    autograd::record("scale", {a}, {y}, [c, n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* ga = autograd::ensure_grad(nd.inputs[0]);
        for (i64 i = 0; i < n; ++i) ga[i] += c * g[i];
    });
    return y;
}

Tensor neg(const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const float* ad = a.data();
    float* yd = y.ptr()->values.data();
    const i64 n = a.numel();
    for (i64 i = 0; i < n; ++i) yd[i] = -ad[i];
    autograd::check_finite("neg", yd, n);
    autograd::record("neg", {a}, {y}, [n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* ga = autograd::ensure_grad(nd.inputs[0]);
        for (i64 i = 0; i < n; ++i) ga[i] -= g[i];
    });
    return y;
}

Tensor relu(const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const float* ad = a.data();
    float* yd = y.ptr()->values.data();
    const i64 n = a.numel();
#pragma omp parallel for schedule(static) if (n > (1 << 14))
    for (i64 i = 0; i < n; ++i) yd[i] = ad[i] > 0.0f ? ad[i] : 0.0f;
    autograd::check_finite("relu", yd, n);
    autograd::record("relu", {a}, {y}, [n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* ga = autograd::ensure_grad(nd.inputs[0]);
        const float* av = nd.inputs[0]->values.data();
        for (i64 i = 0; i < n; ++i)
            if (av[i] > 0.0f) ga[i] += g[i];
    });
    return y;
}

Tensor sigmoid(const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const float* ad = a.data();
    float* yd = y.ptr()->values.data();
    const i64 n = a.numel();
#pragma omp parallel for schedule(static) if (n > (1 << 14))
    for (i64 i = 0; i < n; ++i) {
        const float x = ad[i];
        // Overflow-safe in both directions.
        yd[i] = x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                          : std::exp(x) / (1.0f + std::exp(x));
    }
    autograd::check_finite("sigmoid", yd, n);
    autograd::record("sigmoid", {a}, {y}, [n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        auto out = autograd::output_data(nd, 0);
        if (!out) return;
        const float* yv = out->values.data();
        float* ga = autograd::ensure_grad(nd.inputs[0]);
        for (i64 i = 0; i < n; ++i) ga[i] += g[i] * yv[i] * (1.0f - yv[i]);
    });
    return y;
}

// ---- Matmul ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: operands must be rank-2");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) throw std::invalid_argument("matmul: inner dims differ");
    Tensor y = Tensor::zeros({m, n});
    kernels::gemm_nn(m, k, n, a.data(), b.data(), y.ptr()->values.data());
    autograd::check_finite("matmul", y.data(), y.numel());
    autograd::record("matmul", {a, b}, {y}, [m, k, n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g) return;
        const float* av = nd.inputs[0]->values.data();
        const float* bv = nd.inputs[1]->values.data();
        if (autograd::input_needs_grad(nd, 0)) {
            float* ga = autograd::ensure_grad(nd.inputs[0]);
            kernels::gemm_nt(m, n, k, g, bv, ga, /*acc=*/true);
        }
        if (autograd::input_needs_grad(nd, 1)) {
            float* gb = autograd::ensure_grad(nd.inputs[1]);
            kernels::gemm_tn(k, m, n, av, g, gb, /*acc=*/true);
        }
    });
    return y;
}

// ---- Convolution ---------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw std::invalid_argument("conv2d: x and w must be rank-4");
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("conv2d: bad stride or padding");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != C)
        throw std::invalid_argument("conv2d: channel mismatch");
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != K))
        throw std::invalid_argument("conv2d: bias must have shape (K)");
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    if (H + 2 * pad - kh < 0 || W + 2 * pad - kw < 0 || OH < 1 || OW < 1)
        throw std::invalid_argument("conv2d: empty output extent");

    Tensor y = Tensor::zeros({N, K, OH, OW});
    kernels::conv2d_forward(x.data(), w.data(),
                            bias.defined() ? bias.data() : nullptr,
                            y.ptr()->values.data(), N, C, H, W, K, kh, kw,
                            stride, pad);
    autograd::check_finite("conv2d", y.data(), y.numel());

    std::vector<Tensor> ins = {x, w};
    if (bias.defined()) ins.push_back(bias);
    const bool has_bias = bias.defined();
    autograd::record(
        "conv2d", ins, {y},
        [N, C, H, W, K, kh, kw, stride, pad, OH, OW,
         has_bias](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            const float* xv = nd.inputs[0]->values.data();
            const float* wv = nd.inputs[1]->values.data();
            if (autograd::input_needs_grad(nd, 0)) {
                std::vector<float> tmp(static_cast<std::size_t>(
                    static_cast<i64>(N) * C * H * W));
                kernels::conv2d_backward_input(g, wv, tmp.data(), N, C, H, W,
                                               K, kh, kw, stride, pad);
                float* gx = autograd::ensure_grad(nd.inputs[0]);
                for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
            }
            if (autograd::input_needs_grad(nd, 1)) {
                std::vector<float> tmp(static_cast<std::size_t>(
                    static_cast<i64>(K) * C * kh * kw));
                kernels::conv2d_backward_weight(xv, g, tmp.data(), N, C, H, W,
                                                K, kh, kw, stride, pad);
                float* gw = autograd::ensure_grad(nd.inputs[1]);
                for (std::size_t i = 0; i < tmp.size(); ++i) gw[i] += tmp[i];
            }
            if (has_bias && autograd::input_needs_grad(nd, 2)) {
                std::vector<float> tmp(static_cast<std::size_t>(K));
                kernels::conv2d_backward_bias(g, tmp.data(), N, K, OH, OW);
                float* gb = autograd::ensure_grad(nd.inputs[2]);
                for (int i = 0; i < K; ++i) gb[i] += tmp[i];
            }
        });
    return y;
}

// ---- Max pooling -----------------------------------------------------------------

Tensor maxpool2d(const Tensor& x, int window, int stride) {
    if (x.rank() != 4) throw std::invalid_argument("maxpool2d: x must be rank-4");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (window < 1 || stride < 1)
        throw std::invalid_argument("maxpool2d: bad window or stride");
    if (window > H || window > W)
        throw std::invalid_argument("maxpool2d: window larger than input");
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;
    Tensor y = Tensor::zeros({N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(
        static_cast<std::size_t>(static_cast<i64>(N) * C * OH * OW));
    kernels::maxpool_forward(x.data(), y.ptr()->values.data(), argmax->data(),
                             N, C, H, W, window, stride);
    autograd::check_finite("maxpool2d", y.data(), y.numel());
    autograd::record("maxpool2d", {x}, {y},
                     [N, C, H, W, window, stride, argmax](autograd::Node& nd) {
                         const float* g = autograd::output_grad(nd, 0);
                         if (!g || !autograd::input_needs_grad(nd, 0)) return;
                         std::vector<float> tmp(static_cast<std::size_t>(
                             static_cast<i64>(N) * C * H * W));
                         kernels::maxpool_backward(g, argmax->data(),
                                                   tmp.data(), N, C, H, W,
                                                   window, stride);
                         float* gx = autograd::ensure_grad(nd.inputs[0]);
                         for (std::size_t i = 0; i < tmp.size(); ++i)
                             gx[i] += tmp[i];
                     });
    return y;
}

// ---- Batch normalization -----------------------------------------------------------

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var, bool training,
                   float momentum, float eps) {
    if (x.rank() != 4) throw std::invalid_argument("batchnorm2d: x must be rank-4");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto check_c = [&](const Tensor& t, const char* what) {
        if (!t.defined() || t.rank() != 1 || t.dim(0) != C)
            throw std::invalid_argument(
                std::string("batchnorm2d: ") + what +
                " must have shape (C)");
    };
    check_c(gamma, "gamma");
    check_c(beta, "beta");
    check_c(running_mean, "running_mean");
    check_c(running_var, "running_var");

    auto mean = std::make_shared<std::vector<float>>(C);
    auto invstd = std::make_shared<std::vector<float>>(C);
    if (training) {
        std::vector<float> var(C);
        kernels::bn_stats(x.data(), N, C, H, W, mean->data(), var.data());
        for (int c = 0; c < C; ++c)
            (*invstd)[c] = 1.0f / std::sqrt(var[c] + eps);
        // Update running statistics in place (they are plain leaf buffers,
        // not part of the recorded graph). Running variance is unbiased.
        const i64 m = static_cast<i64>(N) * H * W;
        const float unbias =
            m > 1 ? static_cast<float>(m) / static_cast<float>(m - 1) : 1.0f;
        float* rm = running_mean.mutable_data();
        float* rv = running_var.mutable_data();
        for (int c = 0; c < C; ++c) {
            rm[c] = (1.0f - momentum) * rm[c] + momentum * (*mean)[c];
            rv[c] = (1.0f - momentum) * rv[c] + momentum * var[c] * unbias;
        }
    } else {
        const float* rm = running_mean.data();
        const float* rv = running_var.data();
        for (int c = 0; c < C; ++c) {
            (*mean)[c] = rm[c];
            (*invstd)[c] = 1.0f / std::sqrt(rv[c] + eps);
        }
    }

    Tensor y = Tensor::zeros(x.shape());
    kernels::bn_forward(x.data(), mean->data(), invstd->data(), gamma.data(),
                        beta.data(), y.ptr()->values.data(), N, C, H, W);
    autograd::check_finite("batchnorm2d", y.data(), y.numel());

    autograd::record(
        "batchnorm2d", {x, gamma, beta}, {y},
        [N, C, H, W, mean, invstd, training](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            const float* xv = nd.inputs[0]->values.data();
            const float* gv = nd.inputs[1]->values.data();
            std::vector<float> gx(static_cast<std::size_t>(
                static_cast<i64>(N) * C * H * W));
            std::vector<float> gg(C), gb(C);
            kernels::bn_backward(xv, g, mean->data(), invstd->data(), gv,
                                 gx.data(), gg.data(), gb.data(), N, C, H, W,
                                 training);
            if (autograd::input_needs_grad(nd, 0)) {
                float* p = autograd::ensure_grad(nd.inputs[0]);
                for (std::size_t i = 0; i < gx.size(); ++i) p[i] += gx[i];
            }
            if (autograd::input_needs_grad(nd, 1)) {
                float* p = autograd::ensure_grad(nd.inputs[1]);
                for (int c = 0; c < C; ++c) p[c] += gg[c];
            }
            if (autograd::input_needs_grad(nd, 2)) {
                float* p = autograd::ensure_grad(nd.inputs[2]);
                for (int c = 0; c < C; ++c) p[c] += gb[c];
            }
        });
    return y;
}

// ---- Global pooling ------------------------------------------------------------------

Tensor pool_global(const Tensor& x, PoolKind kind, PoolAxes axes) {
    if (x.rank() != 4)
        throw std::invalid_argument("pool_global: x must be rank-4");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const i64 plane = static_cast<i64>(H) * W;

    if (axes == PoolAxes::Spatial) {
        Tensor y = Tensor::zeros({N, C, 1, 1});
        if (kind == PoolKind::Avg) {
            kernels::global_avg_spatial(x.data(), y.ptr()->values.data(), N,
                                        C, H, W);
            autograd::check_finite("pool_global", y.data(), y.numel());
            autograd::record(
                "pool_global", {x}, {y}, [N, C, plane](autograd::Node& nd) {
                    const float* g = autograd::output_grad(nd, 0);
                    if (!g || !autograd::input_needs_grad(nd, 0)) return;
                    float* gx = autograd::ensure_grad(nd.inputs[0]);
                    const float inv = 1.0f / static_cast<float>(plane);
                    for (i64 nc = 0; nc < static_cast<i64>(N) * C; ++nc) {
                        const float gv = g[nc] * inv;
                        float* p = gx + nc * plane;
                        for (i64 i = 0; i < plane; ++i) p[i] += gv;
                    }
                });
        } else {
            auto argmax = std::make_shared<std::vector<std::int32_t>>(
                static_cast<std::size_t>(static_cast<i64>(N) * C));
            kernels::global_max_spatial(x.data(), y.ptr()->values.data(),
                                        argmax->data(), N, C, H, W);
            autograd::check_finite("pool_global", y.data(), y.numel());
            autograd::record(
                "pool_global", {x}, {y},
                [N, C, plane, argmax](autograd::Node& nd) {
                    const float* g = autograd::output_grad(nd, 0);
                    if (!g || !autograd::input_needs_grad(nd, 0)) return;
                    float* gx = autograd::ensure_grad(nd.inputs[0]);
                    for (i64 nc = 0; nc < static_cast<i64>(N) * C; ++nc)
                        gx[nc * plane + (*argmax)[static_cast<std::size_t>(
                                            nc)]] += g[nc];
                });
        }
        return y;
    }

    Tensor y = Tensor::zeros({N, 1, H, W});
    if (kind == PoolKind::Avg) {
        kernels::global_avg_channel(x.data(), y.ptr()->values.data(), N, C, H,
                                    W);
        autograd::check_finite("pool_global", y.data(), y.numel());
        autograd::record(
            "pool_global", {x}, {y}, [N, C, plane](autograd::Node& nd) {
                const float* g = autograd::output_grad(nd, 0);
                if (!g || !autograd::input_needs_grad(nd, 0)) return;
                float* gx = autograd::ensure_grad(nd.inputs[0]);
                const float inv = 1.0f / static_cast<float>(C);
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        float* p = gx + (static_cast<i64>(n) * C + c) * plane;
                        const float* gq = g + static_cast<i64>(n) * plane;
                        for (i64 i = 0; i < plane; ++i) p[i] += gq[i] * inv;
                    }
            });
    } else {
        auto argmax = std::make_shared<std::vector<std::int32_t>>(
            static_cast<std::size_t>(static_cast<i64>(N) * plane));
        kernels::global_max_channel(x.data(), y.ptr()->values.data(),
                                    argmax->data(), N, C, H, W);
        autograd::check_finite("pool_global", y.data(), y.numel());
        autograd::record(
            "pool_global", {x}, {y}, [N, C, plane, argmax](autograd::Node& nd) {
                const float* g = autograd::output_grad(nd, 0);
                if (!g || !autograd::input_needs_grad(nd, 0)) return;
                float* gx = autograd::ensure_grad(nd.inputs[0]);
                for (int n = 0; n < N; ++n)
                    for (i64 s = 0; s < plane; ++s) {
                        const int c = (*argmax)[static_cast<std::size_t>(
                            static_cast<i64>(n) * plane + s)];
                        gx[(static_cast<i64>(n) * C + c) * plane + s] +=
                            g[static_cast<i64>(n) * plane + s];
                    }
            });
    }
    return y;
}

// ---- Shape ops -------------------------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& s) {
    if (shape_numel(s) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor y = Tensor::zeros(s);
    y.ptr()->values = x.ptr()->values;
    autograd::record("reshape", {x}, {y}, [](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* gx = autograd::ensure_grad(nd.inputs[0]);
        const i64 n = nd.inputs[0]->numel();
        for (i64 i = 0; i < n; ++i) gx[i] += g[i];
    });
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw std::invalid_argument("concat_channels: rank-4 required");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: shape mismatch");
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2),
              W = a.dim(3);
    const i64 plane = static_cast<i64>(H) * W;
    Tensor y = Tensor::zeros({N, Ca + Cb, H, W});
    float* yd = y.ptr()->values.data();
    for (int n = 0; n < N; ++n) {
        std::memcpy(yd + static_cast<i64>(n) * (Ca + Cb) * plane,
                    a.data() + static_cast<i64>(n) * Ca * plane,
                    sizeof(float) * Ca * plane);
        std::memcpy(yd + (static_cast<i64>(n) * (Ca + Cb) + Ca) * plane,
                    b.data() + static_cast<i64>(n) * Cb * plane,
                    sizeof(float) * Cb * plane);
    }
    autograd::check_finite("concat_channels", yd, y.numel());
    autograd::record(
        "concat_channels", {a, b}, {y},
        [N, Ca, Cb, plane](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            if (autograd::input_needs_grad(nd, 0)) {
                float* ga = autograd::ensure_grad(nd.inputs[0]);
                for (int n = 0; n < N; ++n) {
                    const float* gs =
                        g + static_cast<i64>(n) * (Ca + Cb) * plane;
                    float* p = ga + static_cast<i64>(n) * Ca * plane;
                    for (i64 i = 0; i < Ca * plane; ++i) p[i] += gs[i];
                }
            }
            if (autograd::input_needs_grad(nd, 1)) {
                float* gb = autograd::ensure_grad(nd.inputs[1]);
                for (int n = 0; n < N; ++n) {
                    const float* gs =
                        g + (static_cast<i64>(n) * (Ca + Cb) + Ca) * plane;
                    float* p = gb + static_cast<i64>(n) * Cb * plane;
                    for (i64 i = 0; i < Cb * plane; ++i) p[i] += gs[i];
                }
            }
        });
    return y;
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    const float* xd = x.data();
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) s += xd[i];
    Tensor y = Tensor::from_vector({1}, {static_cast<float>(s)});
    autograd::check_finite("sum", y.data(), 1);
    autograd::record("sum", {x}, {y}, [n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* gx = autograd::ensure_grad(nd.inputs[0]);
        for (i64 i = 0; i < n; ++i) gx[i] += g[0];
    });
    return y;
}

Tensor mean_all(const Tensor& x) {
    double s = 0.0;
    const float* xd = x.data();
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) s += xd[i];
    Tensor y =
        Tensor::from_vector({1}, {static_cast<float>(s / static_cast<double>(n))});
    autograd::check_finite("mean", y.data(), 1);
    autograd::record("mean", {x}, {y}, [n](autograd::Node& nd) {
        const float* g = autograd::output_grad(nd, 0);
        if (!g || !autograd::input_needs_grad(nd, 0)) return;
        float* gx = autograd::ensure_grad(nd.inputs[0]);
        const float gv = g[0] / static_cast<float>(n);
        for (i64 i = 0; i < n; ++i) gx[i] += gv;
    });
    return y;
}

}  // namespace sfnet
