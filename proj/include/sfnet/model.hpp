#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfnet/spectral.hpp"
#include "sfnet/tensor.hpp"

namespace sfnet {

enum class BranchMode { Both, SpatialOnly, FrequencyOnly };
enum class RunMode { Train, Eval };

const char* to_string(BranchMode m);
BranchMode branch_mode_from_string(const std::string& s);

struct SFNetConfig {
    int base_channels = 32;
    int input_extent = 64;
    BranchMode branch_mode = BranchMode::Both;
    bool attention_enabled = true;
    double highpass_scale = 4.0;
    int mlp_reduction_ratio = 16;
    int refine_groups = 3;
    int blocks_per_group = 2;
    int num_classes = 2;

    static SFNetConfig desk();   // 64x64 inputs, 32 base channels
    static SFNetConfig paper();  // 256x256 inputs

    void validate() const;

    // Ablation-table row label for this branch/attention combination.
    std::string variant_name() const;

    std::string to_json_string() const;  // canonical (sorted keys)
    static SFNetConfig from_json_string(const std::string& s);
};

// Ordered, named parameter registry. Iteration follows registration order,
// which is fixed by model construction, so optimizer state and checkpoints
// line up deterministically. Batchnorm running statistics are registered too
// (requires_grad = false).
struct ParamSet {
    std::vector<std::pair<std::string, Tensor>> entries;

    Tensor add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor* find(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::int64_t trainable_count() const;
    void zero_grads();

private:
    std::map<std::string, std::size_t> index_;
};

// ---- Layers -------------------------------------------------------------------

struct Conv2dLayer {
    Tensor w;  // (K, C, kh, kw)
    Tensor b;  // (K) or undefined
    int stride = 1;
    int pad = 0;
    Tensor forward(const Tensor& x) const;
};

struct BatchNorm2d {
    Tensor gamma, beta, running_mean, running_var;
    Tensor forward(const Tensor& x, bool training);
};

struct LinearLayer {
    Tensor w;  // (in, out)
    Tensor b;  // (1, out)
    Tensor forward(const Tensor& x) const;  // x: (N, in)
};

// conv3x3 -> relu -> conv1x1 with an identity shortcut.
struct ProjBlock {
    Conv2dLayer conv3, conv1;
    Tensor forward(const Tensor& x) const;
};

// Domain-mapping unit: three shortcut blocks, channel-preserving.
struct ProjectionUnit {
    std::vector<ProjBlock> blocks;
    Tensor forward(const Tensor& x) const;
};

// Channel attention: shared two-layer MLP over the average- and max-pooled
// descriptors, sigmoid-gated. Returns the (N,C,1,1) map.
Tensor channel_attention(const Tensor& f, const Tensor& w0, const Tensor& w1);

// Spatial attention: 7x7 conv over stacked channel-avg/max planes. Returns
// the (N,1,H,W) map.
Tensor spatial_attention(const Tensor& f, const Conv2dLayer& conv);

struct Cbam {
    Tensor w0, w1;      // channel MLP (C, C/r), (C/r, C)
    Conv2dLayer conv7;  // spatial 7x7, 2 -> 1, pad 3
    // Sequential gating; optionally exposes the two maps.
    Tensor forward(const Tensor& f, Tensor* channel_map = nullptr,
                   Tensor* spatial_map = nullptr) const;
};

struct ResidualBlock {
    Conv2dLayer conv1, conv2;
    BatchNorm2d bn1, bn2;
    bool has_proj = false;
    Conv2dLayer proj;
    BatchNorm2d bn_proj;
    Tensor forward(const Tensor& x, bool training);
};

struct RefineGroup {
    std::vector<ResidualBlock> blocks;
    std::optional<Cbam> cbam;
    Tensor forward(const Tensor& x, bool training, Tensor* channel_map,
                   Tensor* spatial_map);
};

// Frequency-domain cross-layer: conv, FFT, amplitude/phase convs,
// recombination, inverse FFT, conv.
struct Fcl {
    Conv2dLayer conv1, conv_amp, conv_phase, conv2;
    Tensor forward(const Tensor& x) const;
};

// High-frequency refinement: spectral high-pass along spatial or channel
// axes followed by a 3x3 conv. `filtered` exposes the pre-conv intermediate.
struct Hfrf {
    SpectrumAxes dim = SpectrumAxes::Spatial;
    HighPassSpec spec;
    Conv2dLayer conv;
    Tensor filtered(const Tensor& x) const;
    Tensor forward(const Tensor& x) const;
};

struct ImageExtractor {
    Conv2dLayer conv;
    BatchNorm2d bn;
    Tensor forward(const Tensor& x, bool training);
};

struct FrequencyExtractor {
    HighPassSpec hfri_spec;
    Conv2dLayer conv;
    BatchNorm2d bn;
    Fcl fcl;
    Hfrf hfrf_channel, hfrf_spatial;
    Tensor forward(const Tensor& x, bool training);
};

// Named intermediate activations captured during forward (Grad-CAM /
// diagnostics). Keys: extract.image, extract.freq, proj.image, proj.freq,
// fused, refine.<g>, att.<g>.channel, att.<g>.spatial.
using TapMap = std::map<std::string, Tensor>;

class SFNet {
public:
    SFNet(const SFNetConfig& cfg, std::uint64_t seed);
    SFNet(const SFNet&) = delete;
    SFNet& operator=(const SFNet&) = delete;

    Tensor forward(const Tensor& x, RunMode mode, TapMap* taps = nullptr);

    const SFNetConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::int64_t trainable_param_count() const {
        return params_.trainable_count();
    }
    int head_channels() const { return head_channels_; }

    // Component access for tests and analysis.
    ImageExtractor& image_extractor() { return *image_; }
    FrequencyExtractor& frequency_extractor() { return *freq_; }
    ProjectionUnit& projection_image() { return *proj_image_; }
    ProjectionUnit& projection_freq() { return *proj_freq_; }
    std::vector<RefineGroup>& refine_groups() { return refine_; }
    LinearLayer& head() { return head_; }

private:
    SFNetConfig cfg_;
    ParamSet params_;
    std::optional<ImageExtractor> image_;
    std::optional<FrequencyExtractor> freq_;
    std::optional<ProjectionUnit> proj_image_, proj_freq_;
    std::vector<RefineGroup> refine_;
    LinearLayer head_;
    int head_channels_ = 0;
};

}  // namespace sfnet
