#include "sfnet/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "sfnet/data.hpp"

namespace sfnet {

// ---- Loss ----------------------------------------------------------------------

namespace {

// Row-stable softmax of (N,C) into out (same layout).
void softmax_into(const float* logits, int n, int c, float* out) {
    for (int i = 0; i < n; ++i) {
        const float* row = logits + static_cast<std::size_t>(i) * c;
        float* orow = out + static_cast<std::size_t>(i) * c;
        float mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int j = 0; j < c; ++j) orow[j] *= inv;
    }
}

}  // namespace

Tensor cross_entropy_soft(const Tensor& logits, const Tensor& targets) {
    if (!logits.defined() || logits.rank() != 2)
        throw std::invalid_argument("cross_entropy: logits must be rank-2");
    if (!targets.defined() || targets.shape() != logits.shape())
        throw std::invalid_argument(
            "cross_entropy: targets must match logits shape");
    const int n = logits.dim(0), c = logits.dim(1);

    auto probs = std::make_shared<std::vector<float>>(
        static_cast<std::size_t>(n) * c);
    softmax_into(logits.data(), n, c, probs->data());

    // loss_i = sum_c t_c * (logsumexp - z_c); computed from the stabilized
    // probabilities as -sum_c t_c * log p_c.
    double total = 0.0;
    const float* t = targets.data();
    for (std::size_t i = 0; i < probs->size(); ++i) {
        if (t[i] != 0.0f)
            total -= static_cast<double>(t[i]) *
                     std::log(std::max(static_cast<double>((*probs)[i]),
                                       1e-30));
    }
    Tensor out = Tensor::scalar(static_cast<float>(total / n));
    autograd::check_finite("cross_entropy", out.data(), 1);

    Tensor tgt = targets;
    autograd::record(
        "cross_entropy", {logits, targets}, {out},
        [n, c, probs, tgt](autograd::Node& node) {
            const float* g = autograd::output_grad(node, 0);
            if (!g || !autograd::input_needs_grad(node, 0)) return;
            float* gl = autograd::ensure_grad(node.inputs[0]);
            const float* tv = tgt.data();
            const float scale = g[0] / static_cast<float>(n);
            for (int i = 0; i < n; ++i) {
                // d loss_i / d z_j = p_j * (sum_c t_c) - t_j
                double tsum = 0.0;
                for (int j = 0; j < c; ++j)
                    tsum += tv[static_cast<std::size_t>(i) * c + j];
                for (int j = 0; j < c; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * c + j;
                    gl[k] += scale * ((*probs)[k] *
                                          static_cast<float>(tsum) -
                                      tv[k]);
                }
            }
        });
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (!logits.defined() || logits.rank() != 2)
        throw std::invalid_argument("cross_entropy: logits must be rank-2");
    const int n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument(
            "cross_entropy: label count must match batch size");
    std::vector<float> onehot(static_cast<std::size_t>(n) * c, 0.0f);
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            throw std::out_of_range("cross_entropy: label out of range");
        onehot[static_cast<std::size_t>(i) * c + labels[i]] = 1.0f;
    }
    return cross_entropy_soft(logits,
                              Tensor::from_vector({n, c}, std::move(onehot)));
}

Tensor softmax_rows(const Tensor& logits) {
    if (!logits.defined() || logits.rank() != 2)
        throw std::invalid_argument("softmax: input must be rank-2");
    autograd::NoGradGuard guard;
    std::vector<float> out(static_cast<std::size_t>(logits.numel()));
    softmax_into(logits.data(), logits.dim(0), logits.dim(1), out.data());
    return Tensor::from_vector(logits.shape(), std::move(out));
}

// ---- Optimizer -----------------------------------------------------------------

void adam_step(ParamSet& params, OptimState& state, float lr) {
    const std::size_t n = params.entries.size();
    if (state.m.empty()) {
        state.m.resize(n);
        state.v.resize(n);
    }
    if (state.m.size() != n)
        throw std::logic_error("adam: optimizer state does not match params");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1),
                                      static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2),
                                      static_cast<double>(state.t));
    for (std::size_t i = 0; i < n; ++i) {
        Tensor& p = params.entries[i].second;
        if (!p.requires_grad() || !p.has_grad()) continue;
        const std::size_t len = static_cast<std::size_t>(p.numel());
        if (state.m[i].empty()) {
            state.m[i].assign(len, 0.0f);
            state.v[i].assign(len, 0.0f);
        }
        if (state.m[i].size() != len)
            throw std::logic_error("adam: moment shape mismatch for " +
                                   params.entries[i].first);
        const float* g = p.grad().data();
        float* w = p.mutable_data();
        float* m = state.m[i].data();
        float* v = state.v[i].data();
        for (std::size_t j = 0; j < len; ++j) {
            m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= static_cast<float>(lr * mhat /
                                       (std::sqrt(vhat) + state.eps));
        }
    }
}

float cosine_lr(std::int64_t t, std::int64_t T, float lr0) {
    if (T <= 0)
        throw std::invalid_argument("cosine_lr: total steps must be positive");
    if (t < 0 || t > T)
        throw std::invalid_argument("cosine_lr: step out of range");
    const double x = M_PI * static_cast<double>(t) / static_cast<double>(T);
    return static_cast<float>(lr0 * 0.5 * (1.0 + std::cos(x)));
}

// ---- Augmentation --------------------------------------------------------------

AugmentationPolicy AugmentationPolicy::all() {
    AugmentationPolicy p;
    p.random_crop = p.horizontal_flip = p.color_jitter = p.invert =
        p.random_erase = p.mixup = true;
    return p;
}

const std::vector<std::string>& AugmentationPolicy::policy_names() {
    static const std::vector<std::string> names = {
        "none",   "random_crop",  "horizontal_flip", "color_jitter",
        "invert", "random_erase", "mixup"};
    return names;
}

AugmentationPolicy AugmentationPolicy::named(const std::string& name) {
    AugmentationPolicy p;
    if (name == "none") return p;
    if (name == "random_crop")
        p.random_crop = true;
    else if (name == "horizontal_flip")
        p.horizontal_flip = true;
    else if (name == "color_jitter")
        p.color_jitter = true;
    else if (name == "invert")
        p.invert = true;
    else if (name == "random_erase")
        p.random_erase = true;
    else if (name == "mixup")
        p.mixup = true;
    else if (name == "all")
        p = all();
    else
        throw std::invalid_argument("unknown augmentation policy: " + name);
    return p;
}

namespace {
inline void clamp01(std::vector<float>& img) {
    for (float& v : img) v = std::min(1.0f, std::max(0.0f, v));
}
}  // namespace

void aug_random_crop(std::vector<float>& img, int H, int W, int padding,
                     Rng& rng) {
    const int PH = H + 2 * padding, PW = W + 2 * padding;
    const int r0 = static_cast<int>(rng.uniform_int(2 * padding + 1));
    const int c0 = static_cast<int>(rng.uniform_int(2 * padding + 1));
    std::vector<float> out(img.size());
    for (int ch = 0; ch < 3; ++ch) {
        const float* src = img.data() + static_cast<std::size_t>(ch) * H * W;
        float* dst = out.data() + static_cast<std::size_t>(ch) * H * W;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const int pr = r + r0, pc = c + c0;  // position in padded canvas
                const int sr = pr - padding, sc = pc - padding;
                dst[r * W + c] =
                    (sr >= 0 && sr < H && sc >= 0 && sc < W)
                        ? src[sr * W + sc]
                        : 0.0f;
            }
    }
    (void)PH;
    (void)PW;
    img = std::move(out);
}

void aug_hflip(std::vector<float>& img, int H, int W) {
    for (int ch = 0; ch < 3; ++ch) {
        float* p = img.data() + static_cast<std::size_t>(ch) * H * W;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W / 2; ++c)
                std::swap(p[r * W + c], p[r * W + (W - 1 - c)]);
    }
}

void aug_color_jitter(std::vector<float>& img, float scale) {
    for (float& v : img) v *= scale;
    clamp01(img);
}

void aug_invert(std::vector<float>& img) {
    for (float& v : img) v = 1.0f - v;
}

std::array<int, 4> aug_random_erase(std::vector<float>& img, int H, int W,
                                    float max_area, Rng& rng) {
    const std::int64_t budget =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                      max_area * static_cast<float>(H) * W));
    const int eh = 1 + static_cast<int>(rng.uniform_int(
                           std::min<std::int64_t>(H, budget)));
    const int max_w = std::max<std::int64_t>(
        1, std::min<std::int64_t>(W, budget / eh));
    const int ew = 1 + static_cast<int>(rng.uniform_int(max_w));
    const int r0 = static_cast<int>(rng.uniform_int(H - eh + 1));
    const int c0 = static_cast<int>(rng.uniform_int(W - ew + 1));
    for (int ch = 0; ch < 3; ++ch) {
        float* p = img.data() + static_cast<std::size_t>(ch) * H * W;
        double mean = 0.0;
        for (int i = 0; i < H * W; ++i) mean += p[i];
        const float fill = static_cast<float>(mean / (H * W));
        for (int r = r0; r < r0 + eh; ++r)
            for (int c = c0; c < c0 + ew; ++c) p[r * W + c] = fill;
    }
    return {r0, c0, eh, ew};
}

void augment_image(std::vector<float>& img, int H, int W,
                   const AugmentationPolicy& policy, Rng& rng) {
    if (policy.random_crop)
        aug_random_crop(img, H, W, policy.crop_padding, rng);
    if (policy.horizontal_flip && rng.uniform() < 0.5) aug_hflip(img, H, W);
    if (policy.color_jitter)
        aug_color_jitter(
            img, static_cast<float>(
                     rng.uniform(policy.jitter_lo, policy.jitter_hi)));
    if (policy.invert && rng.uniform() < 0.5) aug_invert(img);
    if (policy.random_erase && rng.uniform() < 0.5)
        aug_random_erase(img, H, W, policy.erase_max_area, rng);
    clamp01(img);
}

void mixup_batch(std::vector<float>& batch, int N, std::int64_t stride,
                 std::vector<float>& soft_targets, int num_classes, float alpha,
                 Rng& rng, float forced_lambda) {
    if (N < 2)
        throw std::invalid_argument("mixup: batch must hold at least 2 samples");
    const float lam = forced_lambda >= 0.0f
                          ? forced_lambda
                          : static_cast<float>(rng.beta(alpha, alpha));
    std::vector<std::size_t> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    const std::vector<float> x0 = batch;
    const std::vector<float> t0 = soft_targets;
    for (int i = 0; i < N; ++i) {
        const std::size_t a = static_cast<std::size_t>(i) * stride;
        const std::size_t b = perm[static_cast<std::size_t>(i)] * stride;
        for (std::int64_t j = 0; j < stride; ++j)
            batch[a + j] = lam * x0[a + j] + (1.0f - lam) * x0[b + j];
        const std::size_t ta = static_cast<std::size_t>(i) * num_classes;
        const std::size_t tb = perm[static_cast<std::size_t>(i)] * num_classes;
        for (int j = 0; j < num_classes; ++j)
            soft_targets[ta + j] =
                lam * t0[ta + j] + (1.0f - lam) * t0[tb + j];
    }
}

// ---- Metrics -------------------------------------------------------------------

Metrics Metrics::from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                             std::int64_t tn) {
    if (tp < 0 || fp < 0 || fn < 0 || tn < 0)
        throw std::invalid_argument("metrics: counts must be non-negative");
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    const std::int64_t total = tp + fp + fn + tn;
    if (total > 0)
        m.oa = static_cast<double>(tp + tn) / static_cast<double>(total);
    else
        m.oa_defined = false;
    if (tp + fp > 0)
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
        m.precision_defined = false;
    if (tp + fn > 0)
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else
        m.recall_defined = false;
    if (m.precision + m.recall > 0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
        m.f1_defined = false;
    return m;
}

// ---- Loops ---------------------------------------------------------------------

namespace {

Batch assemble_batch(const DatasetView& data,
                     const std::vector<std::size_t>& order, std::size_t begin,
                     std::size_t count, const AugmentationPolicy& policy,
                     Rng& rng, int num_classes, bool train) {
    const int E = data.extent();
    const std::int64_t stride = 3LL * E * E;
    std::vector<float> flat(count * static_cast<std::size_t>(stride));
    std::vector<float> targets(count * static_cast<std::size_t>(num_classes),
                               0.0f);
    Batch b;
    b.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<float> img = data.image(order[begin + i]);
        const int label = data.label(order[begin + i]);
        if (train && policy.any_per_image()) augment_image(img, E, E, policy, rng);
        std::copy(img.begin(), img.end(),
                  flat.begin() + static_cast<std::ptrdiff_t>(i * stride));
        targets[i * static_cast<std::size_t>(num_classes) +
                static_cast<std::size_t>(label)] = 1.0f;
        b.labels.push_back(label);
    }
    if (train && policy.mixup && count >= 2) {
        mixup_batch(flat, static_cast<int>(count), stride, targets,
                    num_classes, policy.mixup_alpha, rng);
    }
    b.images = Tensor::from_vector(
        {static_cast<int>(count), 3, E, E}, std::move(flat));
    b.soft_targets = Tensor::from_vector(
        {static_cast<int>(count), num_classes}, std::move(targets));
    return b;
}

}  // namespace

EpochStats train_epoch(SFNet& model, const DatasetView& train,
                       const TrainOptions& opts, OptimState& optim, int epoch,
                       Rng& rng) {
    if (train.size() == 0)
        throw std::invalid_argument("train_epoch: empty dataset");
    const auto t0 = std::chrono::steady_clock::now();
    const int num_classes = model.config().num_classes;
    const float lr = cosine_lr(epoch, opts.epochs, opts.lr0);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    EpochStats stats;
    stats.lr = lr;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(opts.batch_size)) {
        const std::size_t count = std::min<std::size_t>(
            static_cast<std::size_t>(opts.batch_size), order.size() - begin);
        Batch batch = assemble_batch(train, order, begin, count, opts.policy,
                                     rng, num_classes, /*train=*/true);
        model.params().zero_grads();
        Tensor logits = batch.images;
        logits = model.forward(logits, RunMode::Train);
        Tensor loss = cross_entropy_soft(logits, batch.soft_targets);
        const double loss_val = loss.item();
        backward(loss);
        adam_step(model.params(), optim, lr);
        loss_sum += loss_val;
        stats.steps += 1;
        if (opts.on_step) opts.on_step(epoch, stats.steps, loss_val, lr);
    }
    stats.mean_loss = loss_sum / static_cast<double>(stats.steps);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return stats;
}

Metrics evaluate(SFNet& model, const DatasetView& data, int batch_size) {
    if (data.size() == 0)
        throw std::invalid_argument("evaluate: empty dataset");
    autograd::NoGradGuard guard;
    const int E = data.extent();
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t begin = 0; begin < data.size();
         begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(
            static_cast<std::size_t>(batch_size), data.size() - begin);
        const std::int64_t stride = 3LL * E * E;
        std::vector<float> flat(count * static_cast<std::size_t>(stride));
        for (std::size_t i = 0; i < count; ++i) {
            const auto& img = data.image(begin + i);
            std::copy(img.begin(), img.end(),
                      flat.begin() + static_cast<std::ptrdiff_t>(
                                         i * static_cast<std::size_t>(stride)));
        }
        Tensor x = Tensor::from_vector({static_cast<int>(count), 3, E, E},
                                       std::move(flat));
        Tensor logits = model.forward(x, RunMode::Eval);
        const float* lv = logits.data();
        const int c = logits.dim(1);
        for (std::size_t i = 0; i < count; ++i) {
            // Argmax with ties resolved toward class 0.
            int pred = 0;
            float best = lv[i * static_cast<std::size_t>(c)];
            for (int j = 1; j < c; ++j) {
                const float v = lv[i * static_cast<std::size_t>(c) + j];
                if (v > best) {
                    best = v;
                    pred = j;
                }
            }
            const int label = data.label(begin + i);
            if (pred == 1 && label == 1) ++tp;
            else if (pred == 1 && label == 0) ++fp;
            else if (pred == 0 && label == 1) ++fn;
            else ++tn;
        }
    }
    return Metrics::from_counts(tp, fp, fn, tn);
}

}  // namespace sfnet
