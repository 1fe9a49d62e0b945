#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfnet/model.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/tensor.hpp"

namespace sfnet {

// ---- Loss ----------------------------------------------------------------------

// Mean softmax cross-entropy against per-row soft targets (N x C both).
// Stabilized by per-row max subtraction; differentiable w.r.t. logits.
Tensor cross_entropy_soft(const Tensor& logits, const Tensor& targets);

// Hard-label convenience wrapper; labels in [0, num_classes).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Row-wise softmax probabilities; plain forward helper (records no graph).
Tensor softmax_rows(const Tensor& logits);

// ---- Optimizer -----------------------------------------------------------------

struct OptimState {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    std::int64_t t = 0;  // completed steps
    // Moment buffers keyed by parameter entry order; sized lazily.
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

// One bias-corrected Adam update over every trainable entry that holds a
// gradient; entries without grads are skipped. Increments state.t.
void adam_step(ParamSet& params, OptimState& state, float lr);

// lr0 * (1 + cos(pi * t / T)) / 2; throws if t > T or T <= 0.
float cosine_lr(std::int64_t t, std::int64_t T, float lr0);

// ---- Augmentation --------------------------------------------------------------

struct AugmentationPolicy {
    bool random_crop = false;
    bool horizontal_flip = false;
    bool color_jitter = false;
    bool invert = false;
    bool random_erase = false;
    bool mixup = false;
    int crop_padding = 4;
    float jitter_lo = 0.8f, jitter_hi = 1.2f;
    float erase_max_area = 0.25f;
    float mixup_alpha = 0.2f;

    static AugmentationPolicy none() { return {}; }
    static AugmentationPolicy all();
    // Named single-transform policies plus "none"; throws on unknown name.
    static AugmentationPolicy named(const std::string& name);
    static const std::vector<std::string>& policy_names();
    bool any_per_image() const {
        return random_crop || horizontal_flip || color_jitter || invert ||
               random_erase;
    }
};

// Per-image transforms on a (3,H,W) buffer in [0,1]; values stay clamped.
// Deterministic given the rng state; forced_* bypass the coin flips (tests).
void aug_random_crop(std::vector<float>& img, int H, int W, int padding,
                     Rng& rng);
void aug_hflip(std::vector<float>& img, int H, int W);
void aug_color_jitter(std::vector<float>& img, float scale);
void aug_invert(std::vector<float>& img);
// Erases a rectangle of at most max_area of the image to the per-channel
// mean; returns the chosen rectangle (r0, c0, h, w).
std::array<int, 4> aug_random_erase(std::vector<float>& img, int H, int W,
                                    float max_area, Rng& rng);

// Applies the per-image part of the policy in a fixed order:
// crop, flip(p=.5), jitter, invert(p=.5), erase(p=.5).
void augment_image(std::vector<float>& img, int H, int W,
                   const AugmentationPolicy& policy, Rng& rng);

// Batch-level mixup: x <- lam*x + (1-lam)*x[perm], soft targets blended the
// same way. lam ~ Beta(alpha, alpha), one draw per batch. Throws if N < 2.
// forced_lambda >= 0 bypasses the Beta draw (tests).
void mixup_batch(std::vector<float>& batch, int N, std::int64_t stride,
                 std::vector<float>& soft_targets, int num_classes, float alpha,
                 Rng& rng, float forced_lambda = -1.0f);

// ---- Metrics -------------------------------------------------------------------

struct Metrics {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double oa = 0, precision = 0, recall = 0, f1 = 0;
    // Set when the corresponding denominator was zero (value forced to 0).
    bool oa_defined = true, precision_defined = true, recall_defined = true,
         f1_defined = true;

    static Metrics from_counts(std::int64_t tp, std::int64_t fp,
                               std::int64_t fn, std::int64_t tn);
    std::int64_t total() const { return tp + fp + fn + tn; }
};

// ---- Loops ---------------------------------------------------------------------

struct Batch {
    Tensor images;            // (N,3,H,W)
    std::vector<int> labels;  // hard labels, pre-mixup
    Tensor soft_targets;      // (N,num_classes)
};

struct EpochStats {
    double mean_loss = 0;
    float lr = 0;
    double wall_seconds = 0;
    std::int64_t steps = 0;
};

struct TrainOptions {
    int epochs = 50;
    int batch_size = 16;
    float lr0 = 1e-4f;
    std::uint64_t seed = 0;
    AugmentationPolicy policy;
    // Called once per step with (epoch, step, loss, lr).
    std::function<void(int, std::int64_t, double, float)> on_step;
};

class DatasetView;  // defined in data.hpp

// One pass over the training set: shuffled batching, augmentation, forward,
// soft-target cross-entropy, backward, Adam. lr is cosine_lr(epoch, epochs).
EpochStats train_epoch(SFNet& model, const DatasetView& train,
                       const TrainOptions& opts, OptimState& optim, int epoch,
                       Rng& rng);

// Eval-mode forward over the dataset; argmax predictions (ties -> class 0),
// fake (label 1) is the positive class. Throws on an empty dataset.
Metrics evaluate(SFNet& model, const DatasetView& data, int batch_size = 16);

}  // namespace sfnet
