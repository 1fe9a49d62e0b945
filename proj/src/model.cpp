#include "sfnet/model.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace sfnet {

using nlohmann::json;

// ---- Config -------------------------------------------------------------------

const char* to_string(BranchMode m) {
    switch (m) {
        case BranchMode::Both: return "both";
        case BranchMode::SpatialOnly: return "spatial_only";
        case BranchMode::FrequencyOnly: return "frequency_only";
    }
    return "both";
}

BranchMode branch_mode_from_string(const std::string& s) {
    if (s == "both") return BranchMode::Both;
    if (s == "spatial_only" || s == "spatial") return BranchMode::SpatialOnly;
    if (s == "frequency_only" || s == "frequency")
        return BranchMode::FrequencyOnly;
    throw std::invalid_argument("unknown branch mode: " + s);
}

SFNetConfig SFNetConfig::desk() { return SFNetConfig{}; }

SFNetConfig SFNetConfig::paper() {
    SFNetConfig c;
    c.input_extent = 256;
    return c;
}

void SFNetConfig::validate() const {
    auto fail = [](const std::string& msg) {
        throw std::invalid_argument("config: " + msg);
    };
    if (base_channels < 1) fail("base_channels must be positive");
    if (input_extent < 2 || (input_extent & (input_extent - 1)) != 0)
        fail("input_extent must be a power of two");
    if (refine_groups < 1) fail("refine_groups must be positive");
    if (blocks_per_group < 1) fail("blocks_per_group must be positive");
    if (num_classes != 2) fail("num_classes is fixed at 2");
    if (input_extent < (1 << (refine_groups + 1)))
        fail("input_extent too small for the refine pyramid");
    if (!(highpass_scale >= 2.0)) fail("highpass_scale must be >= 2");
    if (attention_enabled) {
        if (mlp_reduction_ratio < 1) fail("mlp_reduction_ratio must be >= 1");
        if (base_channels % mlp_reduction_ratio != 0)
            fail("base_channels must be divisible by mlp_reduction_ratio");
    }
}

std::string SFNetConfig::variant_name() const {
    switch (branch_mode) {
        case BranchMode::Both:
            return attention_enabled ? "SFNet" : "SFNet w/o att";
        case BranchMode::SpatialOnly:
            return attention_enabled ? "SFNet-Image with att"
                                     : "SFNet-Image w/o att";
        case BranchMode::FrequencyOnly:
            return attention_enabled ? "SFNet-Frequency with att"
                                     : "SFNet-Frequency w/o att";
    }
    return "SFNet";
}

std::string SFNetConfig::to_json_string() const {
    json j;
    j["base_channels"] = base_channels;
    j["input_extent"] = input_extent;
    j["branch_mode"] = to_string(branch_mode);
    j["attention_enabled"] = attention_enabled;
    j["highpass_scale"] = highpass_scale;
    j["mlp_reduction_ratio"] = mlp_reduction_ratio;
    j["refine_groups"] = refine_groups;
    j["blocks_per_group"] = blocks_per_group;
    j["num_classes"] = num_classes;
    return j.dump();
}

SFNetConfig SFNetConfig::from_json_string(const std::string& s) {
    json j = json::parse(s);
    SFNetConfig c;
    c.base_channels = j.at("base_channels").get<int>();
    c.input_extent = j.at("input_extent").get<int>();
    c.branch_mode =
        branch_mode_from_string(j.at("branch_mode").get<std::string>());
    c.attention_enabled = j.at("attention_enabled").get<bool>();
    c.highpass_scale = j.at("highpass_scale").get<double>();
    c.mlp_reduction_ratio = j.at("mlp_reduction_ratio").get<int>();
    c.refine_groups = j.at("refine_groups").get<int>();
    c.blocks_per_group = j.at("blocks_per_group").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    return c;
}

// ---- ParamSet ------------------------------------------------------------------

Tensor ParamSet::add(const std::string& name, Tensor t) {
    if (index_.count(name))
        throw std::logic_error("param registered twice: " + name);
    index_[name] = entries.size();
    entries.emplace_back(name, t);
    return t;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("no such param: " + name);
    return entries[it->second].second;
}

const Tensor* ParamSet::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries[it->second].second;
}

bool ParamSet::contains(const std::string& name) const {
    return index_.count(name) != 0;
}

std::int64_t ParamSet::trainable_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : entries)
        if (t.requires_grad()) n += t.numel();
    return n;
}

void ParamSet::zero_grads() {
    for (auto& [name, t] : entries)
        if (t.requires_grad()) t.zero_grad();
}

// ---- Layer forwards ---------------------------------------------------------------

Tensor Conv2dLayer::forward(const Tensor& x) const {
    return conv2d(x, w, b, stride, pad);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    return batchnorm2d(x, gamma, beta, running_mean, running_var, training);
}

Tensor LinearLayer::forward(const Tensor& x) const {
    return add(matmul(x, w), b);
}

Tensor ProjBlock::forward(const Tensor& x) const {
    return add(x, conv1.forward(relu(conv3.forward(x))));
}

Tensor ProjectionUnit::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& blk : blocks) h = blk.forward(h);
    return h;
}

namespace {

// Attention gates must stay strictly inside (0,1), but a 32-bit sigmoid
// saturates to exactly 0 or 1 once |logit| exceeds ~17/~88. The affine
// squeeze y -> eps + (1-2eps)*y keeps both endpoints unattainable while
// moving any value by at most eps; 0.5 still maps to exactly 0.5.
Tensor open_unit_interval(const Tensor& y) {
    const float eps = 1e-7f;
    return add(scale(y, 1.0f - 2.0f * eps), Tensor::full(y.shape(), eps));
}

}  // namespace

Tensor channel_attention(const Tensor& f, const Tensor& w0,
                         const Tensor& w1) {
    const int N = f.dim(0), C = f.dim(1);
    Tensor davg = reshape(pool_global(f, PoolKind::Avg, PoolAxes::Spatial),
                          {N, C});
    Tensor dmax = reshape(pool_global(f, PoolKind::Max, PoolAxes::Spatial),
                          {N, C});
    Tensor savg = matmul(relu(matmul(davg, w0)), w1);
    Tensor smax = matmul(relu(matmul(dmax, w0)), w1);
    return reshape(open_unit_interval(sigmoid(add(savg, smax))),
                   {N, C, 1, 1});
}

Tensor spatial_attention(const Tensor& f, const Conv2dLayer& conv) {
    Tensor avg = pool_global(f, PoolKind::Avg, PoolAxes::Channel);
    Tensor mx = pool_global(f, PoolKind::Max, PoolAxes::Channel);
    return open_unit_interval(sigmoid(conv.forward(concat_channels(avg, mx))));
}

Tensor Cbam::forward(const Tensor& f, Tensor* channel_map,
                     Tensor* spatial_map) const {
    Tensor mc = channel_attention(f, w0, w1);
    Tensor f1 = mul(f, mc);
    Tensor ms = spatial_attention(f1, conv7);
    Tensor f2 = mul(f1, ms);
    if (channel_map) *channel_map = mc;
    if (spatial_map) *spatial_map = ms;
    return f2;
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
    Tensor h = relu(bn1.forward(conv1.forward(x), training));
    h = bn2.forward(conv2.forward(h), training);
    Tensor sc =
        has_proj ? bn_proj.forward(proj.forward(x), training) : x;
    return relu(add(h, sc));
}

Tensor RefineGroup::forward(const Tensor& x, bool training,
                            Tensor* channel_map, Tensor* spatial_map) {
    Tensor h = x;
    for (auto& blk : blocks) h = blk.forward(h, training);
    if (cbam) h = cbam->forward(h, channel_map, spatial_map);
    return h;
}

Tensor Fcl::forward(const Tensor& x) const {
    Tensor h = conv1.forward(x);
    ComplexSpectrum s = fft2(h);
    auto [amp, phase] = amp_phase(s);
    Tensor amp2 = conv_amp.forward(amp);
    Tensor phase2 = conv_phase.forward(phase);
    ComplexSpectrum s2 =
        recombine(amp2, phase2, s.centered, SpectrumAxes::Spatial);
    // Convolved amplitude/phase recombine to a generically non-symmetric
    // spectrum; keep the real projection of the inverse.
    Tensor h2 = ifft2(s2, std::numeric_limits<float>::infinity());
    return conv2.forward(h2);
}

Tensor Hfrf::filtered(const Tensor& x) const {
    if (dim == SpectrumAxes::Spatial) {
        ComplexSpectrum s = fft2(x);
        ComplexSpectrum c = fftshift(s);
        ComplexSpectrum m = high_pass(c, spec);
        ComplexSpectrum u = ifftshift(m);
        return ifft2(u, std::numeric_limits<float>::infinity());
    }
    ComplexSpectrum s = fft_channel(x);
    ComplexSpectrum c = fftshift(s);
    ComplexSpectrum m = high_pass(c, spec);
    ComplexSpectrum u = ifftshift(m);
    return ifft_channel(u, x.dim(1),
                        std::numeric_limits<float>::infinity());
}

Tensor Hfrf::forward(const Tensor& x) const {
    return conv.forward(filtered(x));
}

Tensor ImageExtractor::forward(const Tensor& x, bool training) {
    return maxpool2d(relu(bn.forward(conv.forward(x), training)), 2, 2);
}

Tensor FrequencyExtractor::forward(const Tensor& x, bool training) {
    Tensor h = hfri(x, hfri_spec);
    h = maxpool2d(relu(bn.forward(conv.forward(h), training)), 2, 2);
    h = fcl.forward(h);
    h = hfrf_channel.forward(h);
    h = hfrf_spatial.forward(h);
    return h;
}

// ---- SFNet ---------------------------------------------------------------------

namespace {

struct Builder {
    ParamSet& ps;
    Rng& rng;

    Tensor kaiming(const Shape& shape, int fan_in) {
        const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
        Tensor t = Tensor::randu(shape, rng, -bound, bound);
        t.set_requires_grad(true);
        return t;
    }

    Tensor zeros_grad(const Shape& shape) {
        Tensor t = Tensor::zeros(shape);
        t.set_requires_grad(true);
        return t;
    }

    Conv2dLayer conv(const std::string& prefix, int K, int Cin, int k,
                     int stride, int pad, bool bias) {
        Conv2dLayer L;
        L.stride = stride;
        L.pad = pad;
        L.w = ps.add(prefix + ".w", kaiming({K, Cin, k, k}, Cin * k * k));
        if (bias) L.b = ps.add(prefix + ".b", zeros_grad({K}));
        return L;
    }

    BatchNorm2d bn(const std::string& prefix, int C) {
        BatchNorm2d L;
        Tensor gamma = Tensor::full({C}, 1.0f);
        gamma.set_requires_grad(true);
        L.gamma = ps.add(prefix + ".gamma", gamma);
        L.beta = ps.add(prefix + ".beta", zeros_grad({C}));
        L.running_mean = ps.add(prefix + ".running_mean", Tensor::zeros({C}));
        L.running_var = ps.add(prefix + ".running_var", Tensor::full({C}, 1.0f));
        return L;
    }

    LinearLayer linear(const std::string& prefix, int in, int out) {
        LinearLayer L;
        L.w = ps.add(prefix + ".w", kaiming({in, out}, in));
        L.b = ps.add(prefix + ".b", zeros_grad({1, out}));
        return L;
    }

    ProjectionUnit projection(const std::string& prefix, int C) {
        ProjectionUnit u;
        for (int i = 1; i <= 3; ++i) {
            ProjBlock blk;
            const std::string p = prefix + ".b" + std::to_string(i);
            blk.conv3 = conv(p + ".conv3", C, C, 3, 1, 1, true);
            blk.conv1 = conv(p + ".conv1", C, C, 1, 1, 0, true);
            u.blocks.push_back(blk);
        }
        return u;
    }

    Cbam cbam(const std::string& prefix, int C, int r) {
        Cbam a;
        a.w0 = ps.add(prefix + ".channel.w0", kaiming({C, C / r}, C));
        a.w1 = ps.add(prefix + ".channel.w1", kaiming({C / r, C}, C / r));
        a.conv7 = conv(prefix + ".spatial.conv", 1, 2, 7, 1, 3, true);
        return a;
    }
};

}  // namespace

SFNet::SFNet(const SFNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(splitmix64(seed));
    Builder b{params_, rng};

    const int C = cfg_.base_channels;
    const int E = cfg_.input_extent;
    const bool want_img = cfg_.branch_mode != BranchMode::FrequencyOnly;
    const bool want_freq = cfg_.branch_mode != BranchMode::SpatialOnly;

    if (want_img) {
        ImageExtractor ie;
        ie.conv = b.conv("image.conv", C, 3, 3, 1, 1, true);
        ie.bn = b.bn("image.bn", C);
        image_ = std::move(ie);
    }
    if (want_freq) {
        FrequencyExtractor fe;
        fe.hfri_spec = HighPassSpec::make(E, E, cfg_.highpass_scale);
        fe.conv = b.conv("freq.stem.conv", C, 3, 3, 1, 1, true);
        fe.bn = b.bn("freq.stem.bn", C);
        fe.fcl.conv1 = b.conv("freq.fcl.conv1", C, C, 3, 1, 1, true);
        fe.fcl.conv_amp = b.conv("freq.fcl.amp", C, C, 3, 1, 1, true);
        fe.fcl.conv_phase = b.conv("freq.fcl.phase", C, C, 3, 1, 1, true);
        fe.fcl.conv2 = b.conv("freq.fcl.conv2", C, C, 3, 1, 1, true);
        fe.hfrf_channel.dim = SpectrumAxes::Channel;
        fe.hfrf_channel.spec =
            HighPassSpec::for_length(next_pow2(C), cfg_.highpass_scale);
        fe.hfrf_channel.conv =
            b.conv("freq.hfrf_c.conv", C, C, 1, 1, 0, true);
        fe.hfrf_spatial.dim = SpectrumAxes::Spatial;
        fe.hfrf_spatial.spec =
            HighPassSpec::make(E / 2, E / 2, cfg_.highpass_scale);
        fe.hfrf_spatial.conv =
            b.conv("freq.hfrf_s.conv", C, C, 3, 1, 1, true);
        freq_ = std::move(fe);
    }
    if (want_img) proj_image_ = b.projection("proj.image", C);
    if (want_freq) proj_freq_ = b.projection("proj.freq", C);

    int in_ch = C;
    for (int g = 1; g <= cfg_.refine_groups; ++g) {
        RefineGroup grp;
        const int out_ch = in_ch * 2;
        const std::string gp = "refine.g" + std::to_string(g);
        for (int i = 1; i <= cfg_.blocks_per_group; ++i) {
            ResidualBlock blk;
            const std::string bp = gp + ".b" + std::to_string(i);
            const int bin = i == 1 ? in_ch : out_ch;
            const int stride = i == 1 ? 2 : 1;
            blk.conv1 = b.conv(bp + ".conv1", out_ch, bin, 3, stride, 1,
                               /*bias=*/false);
            blk.bn1 = b.bn(bp + ".bn1", out_ch);
            blk.conv2 = b.conv(bp + ".conv2", out_ch, out_ch, 3, 1, 1,
                               /*bias=*/false);
            blk.bn2 = b.bn(bp + ".bn2", out_ch);
            if (i == 1) {
                blk.has_proj = true;
                blk.proj = b.conv(bp + ".proj", out_ch, bin, 1, stride, 0,
                                  /*bias=*/false);
                blk.bn_proj = b.bn(bp + ".bn_proj", out_ch);
            }
            grp.blocks.push_back(blk);
        }
        if (cfg_.attention_enabled)
            grp.cbam = b.cbam(gp + ".att", out_ch, cfg_.mlp_reduction_ratio);
        refine_.push_back(std::move(grp));
        in_ch = out_ch;
    }

    head_channels_ = in_ch;
    head_ = b.linear("head.linear", in_ch, cfg_.num_classes);
}

Tensor SFNet::forward(const Tensor& x, RunMode mode, TapMap* taps) {
    if (!x.defined() || x.rank() != 4)
        throw std::invalid_argument("forward: input must be rank-4");
    if (x.dim(1) != 3)
        throw std::invalid_argument("forward: input must have 3 channels");
    if (x.dim(2) != cfg_.input_extent || x.dim(3) != cfg_.input_extent)
        throw std::invalid_argument(
            "forward: input extent does not match config");
    const bool training = mode == RunMode::Train;
    auto tap = [taps](const std::string& name, Tensor t) {
        if (taps) {
            t.retain_grad();
            (*taps)[name] = t;
        }
    };

    Tensor fused;
    if (image_) {
        Tensor fi = image_->forward(x, training);
        tap("extract.image", fi);
        fi = proj_image_->forward(fi);
        tap("proj.image", fi);
        fused = fi;
    }
    if (freq_) {
        Tensor ff = freq_->forward(x, training);
        tap("extract.freq", ff);
        ff = proj_freq_->forward(ff);
        tap("proj.freq", ff);
        fused = fused.defined() ? add(fused, ff) : ff;
    }
    tap("fused", fused);

    Tensor h = fused;
    for (std::size_t g = 0; g < refine_.size(); ++g) {
        Tensor cm, sm;
        h = refine_[g].forward(h, training, taps ? &cm : nullptr,
                               taps ? &sm : nullptr);
        const std::string gi = std::to_string(g + 1);
        tap("refine." + gi, h);
        if (taps && cm.defined()) tap("att." + gi + ".channel", cm);
        if (taps && sm.defined()) tap("att." + gi + ".spatial", sm);
    }

    Tensor gap = pool_global(h, PoolKind::Avg, PoolAxes::Spatial);
    Tensor flat = reshape(gap, {x.dim(0), head_channels_});
    return head_.forward(flat);
}

}  // namespace sfnet
