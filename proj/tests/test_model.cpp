#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "sfnet/model.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/spectral.hpp"
#include "sfnet/tensor.hpp"
#include "sfnet/training.hpp"
#include "test_util.hpp"

using namespace sfnet;
using testutil::check_gradient;
using testutil::max_abs_diff;

namespace {

// Small config that exercises every module cheaply.
SFNetConfig small_config() {
    SFNetConfig c = SFNetConfig::desk();
    c.input_extent = 32;
    c.base_channels = 16;
    c.mlp_reduction_ratio = 8;
    return c;
}

Tensor grad_leaf(const Shape& shape, Rng& rng, float lo = -1.0f,
                 float hi = 1.0f) {
    Tensor t = Tensor::randu(shape, rng, lo, hi);
    t.set_requires_grad(true);
    return t;
}

Conv2dLayer random_conv(int K, int Cin, int k, int stride, int pad, Rng& rng,
                        float scale = 0.3f) {
    Conv2dLayer L;
    L.stride = stride;
    L.pad = pad;
    L.w = Tensor::randu({K, Cin, k, k}, rng, -scale, scale);
    L.b = Tensor::randu({K}, rng, -0.1f, 0.1f);
    return L;
}

// 1x1 convolution that is exactly the identity map on channels.
Conv2dLayer identity_conv(int C) {
    Conv2dLayer L;
    L.stride = 1;
    L.pad = 0;
    std::vector<float> w(static_cast<std::size_t>(C) * C, 0.0f);
    for (int i = 0; i < C; ++i)
        w[static_cast<std::size_t>(i) * C + i] = 1.0f;
    L.w = Tensor::from_vector({C, C, 1, 1}, w);
    return L;
}

BatchNorm2d fresh_bn(int C) {
    BatchNorm2d bn;
    bn.gamma = Tensor::full({C}, 1.0f);
    bn.beta = Tensor::zeros({C});
    bn.running_mean = Tensor::zeros({C});
    bn.running_var = Tensor::full({C}, 1.0f);
    return bn;
}

bool all_finite_vec(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

// ---- Config ---------------------------------------------------------------------

TEST_CASE("config: presets validate") {
    CHECK_NOTHROW(SFNetConfig::desk().validate());
    CHECK_NOTHROW(SFNetConfig::paper().validate());
    CHECK(SFNetConfig::desk().input_extent == 64);
    CHECK(SFNetConfig::desk().base_channels == 32);
    CHECK(SFNetConfig::paper().input_extent == 256);
}

TEST_CASE("config: validation rejects bad fields") {
    auto expect_fail = [](SFNetConfig c, const char* needle) {
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains(needle),
                             std::invalid_argument);
    };
    SFNetConfig c = SFNetConfig::desk();
    c.base_channels = 0;
    expect_fail(c, "base_channels");

    c = SFNetConfig::desk();
    c.input_extent = 48;
    expect_fail(c, "power of two");

    c = SFNetConfig::desk();
    c.input_extent = 8;  // < 2^(groups+1) = 16
    expect_fail(c, "refine pyramid");

    c = SFNetConfig::desk();
    c.highpass_scale = 1.5;
    expect_fail(c, "highpass_scale");

    c = SFNetConfig::desk();
    c.num_classes = 3;
    expect_fail(c, "num_classes");

    c = SFNetConfig::desk();
    c.refine_groups = 0;
    expect_fail(c, "refine_groups");

    c = SFNetConfig::desk();
    c.base_channels = 24;  // not divisible by reduction 16
    expect_fail(c, "divisible");

    // ... but divisibility only matters when attention is built at all.
    c.attention_enabled = false;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config: six ablation variant names") {
    SFNetConfig c = SFNetConfig::desk();
    auto name = [&](BranchMode m, bool att) {
        c.branch_mode = m;
        c.attention_enabled = att;
        return c.variant_name();
    };
    CHECK(name(BranchMode::Both, true) == "SFNet");
    CHECK(name(BranchMode::Both, false) == "SFNet w/o att");
    CHECK(name(BranchMode::SpatialOnly, true) == "SFNet-Image with att");
    CHECK(name(BranchMode::SpatialOnly, false) == "SFNet-Image w/o att");
    CHECK(name(BranchMode::FrequencyOnly, true) == "SFNet-Frequency with att");
    CHECK(name(BranchMode::FrequencyOnly, false) ==
          "SFNet-Frequency w/o att");
}

TEST_CASE("config: JSON roundtrip preserves every field") {
    SFNetConfig c;
    c.base_channels = 48;
    c.input_extent = 128;
    c.branch_mode = BranchMode::FrequencyOnly;
    c.attention_enabled = false;
    c.highpass_scale = 8.0;
    c.mlp_reduction_ratio = 12;
    c.refine_groups = 4;
    c.blocks_per_group = 3;
    const SFNetConfig r = SFNetConfig::from_json_string(c.to_json_string());
    CHECK(r.base_channels == 48);
    CHECK(r.input_extent == 128);
    CHECK(r.branch_mode == BranchMode::FrequencyOnly);
    CHECK(r.attention_enabled == false);
    CHECK(r.highpass_scale == 8.0);
    CHECK(r.mlp_reduction_ratio == 12);
    CHECK(r.refine_groups == 4);
    CHECK(r.blocks_per_group == 3);
    CHECK(r.num_classes == 2);
}

TEST_CASE("config: branch mode string roundtrip") {
    for (BranchMode m : {BranchMode::Both, BranchMode::SpatialOnly,
                         BranchMode::FrequencyOnly})
        CHECK(branch_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(branch_mode_from_string("sideways"),
                    std::invalid_argument);
}

// ---- Whole-model forward ----------------------------------------------------------

TEST_CASE("forward: all six variants produce finite 2x2 logits") {
    Rng rng(404);
    Tensor x = Tensor::randu({2, 3, 32, 32}, rng, 0.0f, 1.0f);
    for (BranchMode m : {BranchMode::Both, BranchMode::SpatialOnly,
                         BranchMode::FrequencyOnly}) {
        for (bool att : {true, false}) {
            SFNetConfig c = small_config();
            c.branch_mode = m;
            c.attention_enabled = att;
            SFNet model(c, 11);
            Tensor logits = model.forward(x, RunMode::Eval);
            INFO("variant " << c.variant_name());
            REQUIRE(logits.rank() == 2);
            CHECK(logits.dim(0) == 2);
            CHECK(logits.dim(1) == 2);
            const std::vector<float> v(logits.data(),
                                       logits.data() + logits.numel());
            CHECK(all_finite_vec(v));

            Tensor probs = softmax_rows(logits);
            for (int i = 0; i < 2; ++i) {
                const float s = probs.at({i, 0}) + probs.at({i, 1});
                CHECK(s == doctest::Approx(1.0f).epsilon(1e-6));
                CHECK(probs.at({i, 0}) >= 0.0f);
                CHECK(probs.at({i, 1}) >= 0.0f);
            }
        }
    }
}

TEST_CASE("forward: taps expose aligned branches, pyramid, attention maps") {
    Rng rng(405);
    Tensor x = Tensor::randu({2, 3, 32, 32}, rng, 0.0f, 1.0f);
    SFNet model(small_config(), 3);
    TapMap taps;
    Tensor logits = model.forward(x, RunMode::Eval, &taps);
    REQUIRE(logits.defined());

    const std::set<std::string> want = {
        "extract.image", "extract.freq", "proj.image",     "proj.freq",
        "fused",         "refine.1",     "refine.2",       "refine.3",
        "att.1.channel", "att.1.spatial", "att.2.channel", "att.2.spatial",
        "att.3.channel", "att.3.spatial"};
    std::set<std::string> got;
    for (const auto& kv : taps) got.insert(kv.first);
    CHECK(got == want);

    // Both branch outputs and their projections agree in shape: (N,C,E/2,E/2).
    const Shape branch_shape = {2, 16, 16, 16};
    CHECK(taps.at("extract.image").shape() == branch_shape);
    CHECK(taps.at("extract.freq").shape() == branch_shape);
    CHECK(taps.at("proj.image").shape() == branch_shape);
    CHECK(taps.at("proj.freq").shape() == branch_shape);
    CHECK(taps.at("fused").shape() == branch_shape);

    // Refinement halves the extent and doubles the channels per group.
    CHECK(taps.at("refine.1").shape() == Shape{2, 32, 8, 8});
    CHECK(taps.at("refine.2").shape() == Shape{2, 64, 4, 4});
    CHECK(taps.at("refine.3").shape() == Shape{2, 128, 2, 2});
    CHECK(model.head_channels() == 128);

    // Attention maps are sigmoid outputs: strictly inside (0,1).
    for (int g = 1; g <= 3; ++g) {
        const Tensor& cm = taps.at("att." + std::to_string(g) + ".channel");
        const Tensor& sm = taps.at("att." + std::to_string(g) + ".spatial");
        CHECK(cm.dim(1) == taps.at("refine." + std::to_string(g)).dim(1));
        CHECK(cm.dim(2) == 1);
        CHECK(cm.dim(3) == 1);
        CHECK(sm.dim(1) == 1);
        for (const Tensor* t : {&cm, &sm})
            for (const float* p = t->data(); p != t->data() + t->numel(); ++p) {
                CHECK(*p > 0.0f);
                CHECK(*p < 1.0f);
            }
    }
}

TEST_CASE("forward: input validation") {
    SFNet model(small_config(), 1);
    Rng rng(7);
    CHECK_THROWS_WITH_AS(
        model.forward(Tensor::randu({3, 32, 32}, rng, 0.0f, 1.0f),
                      RunMode::Eval),
        doctest::Contains("rank-4"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        model.forward(Tensor::randu({1, 4, 32, 32}, rng, 0.0f, 1.0f),
                      RunMode::Eval),
        doctest::Contains("3 channels"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        model.forward(Tensor::randu({1, 3, 16, 16}, rng, 0.0f, 1.0f),
                      RunMode::Eval),
        doctest::Contains("extent"), std::invalid_argument);
}

TEST_CASE("forward: eval mode treats batch rows independently") {
    Rng rng(406);
    Tensor x = Tensor::randu({2, 3, 32, 32}, rng, 0.0f, 1.0f);
    SFNet model(small_config(), 5);
    Tensor y = model.forward(x, RunMode::Eval);

    // Swap the two samples and re-run: logits must swap bit-exactly.
    const std::int64_t stride = 3 * 32 * 32;
    std::vector<float> swapped(x.data(), x.data() + x.numel());
    std::memcpy(swapped.data(), x.data() + stride, stride * sizeof(float));
    std::memcpy(swapped.data() + stride, x.data(), stride * sizeof(float));
    Tensor xs = Tensor::from_vector({2, 3, 32, 32}, swapped);
    Tensor ys = model.forward(xs, RunMode::Eval);

    CHECK(std::memcmp(y.data(), ys.data() + 2, 2 * sizeof(float)) == 0);
    CHECK(std::memcmp(y.data() + 2, ys.data(), 2 * sizeof(float)) == 0);
}

TEST_CASE("forward: zero input flows to zero logits") {
    SFNet model(small_config(), 9);
    Tensor x = Tensor::zeros({2, 3, 32, 32});
    for (RunMode mode : {RunMode::Train, RunMode::Eval}) {
        Tensor logits = model.forward(x, mode);
        for (const float* p = logits.data();
             p != logits.data() + logits.numel(); ++p)
            CHECK(std::abs(*p) <= 1e-6f);
    }
}

// ---- Parameter registry ------------------------------------------------------------

TEST_CASE("params: registry is ordered, named, and branch-scoped") {
    SFNetConfig c = small_config();
    SFNet both(c, 1);
    CHECK(both.trainable_param_count() > 0);
    CHECK(both.params().contains("image.conv.w"));
    CHECK(both.params().contains("freq.fcl.amp.w"));
    CHECK(both.params().contains("head.linear.w"));
    CHECK(both.params().contains("refine.g1.att.channel.w0"));

    // Running statistics are registered but not trainable.
    const Tensor* rm = both.params().find("image.bn.running_mean");
    REQUIRE(rm != nullptr);
    CHECK_FALSE(rm->requires_grad());

    c.branch_mode = BranchMode::SpatialOnly;
    SFNet spatial(c, 1);
    c.branch_mode = BranchMode::FrequencyOnly;
    SFNet freq(c, 1);
    c.branch_mode = BranchMode::Both;
    c.attention_enabled = false;
    SFNet noatt(c, 1);
    for (const auto& kv : spatial.params().entries)
        CHECK(kv.first.rfind("freq.", 0) != 0);
    for (const auto& kv : freq.params().entries)
        CHECK(kv.first.rfind("image.", 0) != 0);
    for (const auto& kv : noatt.params().entries)
        CHECK(kv.first.find(".att.") == std::string::npos);

    CHECK_THROWS_AS(both.params().at("nope.w"), std::out_of_range);
}

TEST_CASE("params: duplicate registration is rejected") {
    ParamSet ps;
    ps.add("a", Tensor::zeros({1}));
    CHECK_THROWS_WITH_AS(ps.add("a", Tensor::zeros({1})),
                         doctest::Contains("registered twice"),
                         std::logic_error);
}

TEST_CASE("backward: loss gradient reaches the whole parameter set") {
    SFNetConfig c = SFNetConfig::desk();
    c.input_extent = 16;
    c.base_channels = 8;
    c.mlp_reduction_ratio = 4;
    SFNet model(c, 21);
    Rng rng(22);
    Tensor x = Tensor::randu({2, 3, 16, 16}, rng, 0.0f, 1.0f);
    Tensor logits = model.forward(x, RunMode::Train);
    Tensor loss = cross_entropy(logits, {0, 1});
    backward(loss);

    int zero_grads = 0;
    for (const auto& kv : model.params().entries) {
        const Tensor& t = kv.second;
        if (!t.requires_grad()) continue;
        INFO("param " << kv.first);
        REQUIRE(t.has_grad());
        REQUIRE(t.grad().size() == static_cast<std::size_t>(t.numel()));
        float g = 0.0f;
        for (float v : t.grad()) g = std::max(g, std::abs(v));
        CHECK(std::isfinite(g));
        if (g == 0.0f) ++zero_grads;
    }
    // A stem-conv bias followed by batchnorm gets a vanishing gradient by
    // construction; anything beyond that means a disconnected subgraph.
    CHECK(zero_grads <= 2);
}

// ---- Attention ----------------------------------------------------------------------

TEST_CASE("cbam: zero-initialized gates pass exactly a quarter of the input") {
    const int C = 8, r = 4;
    Cbam cb;
    cb.w0 = Tensor::zeros({C, C / r});
    cb.w1 = Tensor::zeros({C / r, C});
    cb.conv7.stride = 1;
    cb.conv7.pad = 3;
    cb.conv7.w = Tensor::zeros({1, 2, 7, 7});
    cb.conv7.b = Tensor::zeros({1});

    Rng rng(31);
    Tensor f = Tensor::randu({2, C, 6, 6}, rng, -2.0f, 2.0f);
    Tensor cm, sm;
    Tensor out = cb.forward(f, &cm, &sm);

    for (const float* p = cm.data(); p != cm.data() + cm.numel(); ++p)
        CHECK(*p == 0.5f);
    for (const float* p = sm.data(); p != sm.data() + sm.numel(); ++p)
        CHECK(*p == 0.5f);
    REQUIRE(out.shape() == f.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i)
        CHECK(out.data()[i] == 0.25f * f.data()[i]);
}

TEST_CASE("cbam: maps have the documented shapes and open range") {
    const int C = 8, r = 2;
    Rng rng(33);
    Cbam cb;
    cb.w0 = Tensor::randu({C, C / r}, rng, -0.5f, 0.5f);
    cb.w1 = Tensor::randu({C / r, C}, rng, -0.5f, 0.5f);
    cb.conv7 = random_conv(1, 2, 7, 1, 3, rng);

    Tensor f = Tensor::randu({3, C, 5, 5}, rng, -1.0f, 1.0f);
    Tensor cm, sm;
    Tensor out = cb.forward(f, &cm, &sm);
    CHECK(out.shape() == f.shape());
    CHECK(cm.shape() == Shape{3, C, 1, 1});
    CHECK(sm.shape() == Shape{3, 1, 5, 5});
    for (const Tensor* t : {&cm, &sm})
        for (const float* p = t->data(); p != t->data() + t->numel(); ++p) {
            CHECK(*p > 0.0f);
            CHECK(*p < 1.0f);
        }
}

// ---- Domain mapping ------------------------------------------------------------------

TEST_CASE("projection block: zero weights collapse to the identity") {
    const int C = 4;
    ProjBlock blk;
    blk.conv3.stride = 1;
    blk.conv3.pad = 1;
    blk.conv3.w = Tensor::zeros({C, C, 3, 3});
    blk.conv3.b = Tensor::zeros({C});
    blk.conv1.stride = 1;
    blk.conv1.pad = 0;
    blk.conv1.w = Tensor::zeros({C, C, 1, 1});
    blk.conv1.b = Tensor::zeros({C});

    Rng rng(41);
    Tensor x = grad_leaf({1, C, 6, 6}, rng);
    Tensor y = blk.forward(x);
    for (std::int64_t i = 0; i < y.numel(); ++i)
        CHECK(y.data()[i] == x.data()[i]);

    // The shortcut keeps gradient flowing even with dead conv weights.
    backward(sum_all(y));
    REQUIRE(x.has_grad());
    for (float g : x.grad()) CHECK(g == 1.0f);
}

TEST_CASE("projection unit: three blocks, channel preserving, differentiable") {
    const int C = 3;
    Rng rng(43);
    ProjectionUnit unit;
    for (int i = 0; i < 3; ++i) {
        ProjBlock blk;
        blk.conv3 = random_conv(C, C, 3, 1, 1, rng, 0.2f);
        blk.conv1 = random_conv(C, C, 1, 1, 0, rng, 0.2f);
        unit.blocks.push_back(blk);
    }
    Tensor x = grad_leaf({1, C, 8, 8}, rng, 0.1f, 1.0f);
    Tensor y = unit.forward(x);
    CHECK(y.shape() == x.shape());

    Rng fd(44);
    check_gradient(
        x, [&] { return mean_all(unit.forward(x)); }, fd, 1e-3f, 8);
}

// ---- Frequency branch ------------------------------------------------------------------

TEST_CASE("fcl: identity convolutions collapse to a spectral roundtrip") {
    const int C = 2, E = 8;
    Fcl fcl;
    fcl.conv1 = identity_conv(C);
    fcl.conv_amp = identity_conv(C);
    fcl.conv_phase = identity_conv(C);
    fcl.conv2 = identity_conv(C);

    Rng rng(51);
    Tensor x = Tensor::randu({1, C, E, E}, rng, -1.0f, 1.0f);
    Tensor y = fcl.forward(x);
    REQUIRE(y.shape() == x.shape());
    const std::vector<float> xv(x.data(), x.data() + x.numel());
    const std::vector<float> yv(y.data(), y.data() + y.numel());
    CHECK(max_abs_diff(xv, yv) < 1e-4f);
}

TEST_CASE("fcl: finite-difference gradient through the spectral core") {
    const int C = 2, E = 8;
    Rng rng(53);
    Fcl fcl;
    fcl.conv1 = random_conv(C, C, 3, 1, 1, rng, 0.3f);
    fcl.conv_amp = random_conv(C, C, 3, 1, 1, rng, 0.3f);
    fcl.conv_phase = random_conv(C, C, 3, 1, 1, rng, 0.3f);
    fcl.conv2 = random_conv(C, C, 3, 1, 1, rng, 0.3f);

    Tensor x = grad_leaf({1, C, E, E}, rng, 0.2f, 1.2f);
    Rng fd(54);
    check_gradient(
        x, [&] { return mean_all(fcl.forward(x)); }, fd, 1e-3f, 6);
}

TEST_CASE("hfrf: spatial filtering matches the standalone high-pass") {
    const int C = 3, E = 16;
    Rng rng(55);
    Hfrf h;
    h.dim = SpectrumAxes::Spatial;
    h.spec = HighPassSpec::make(E, E, 4.0);
    h.conv = random_conv(C, C, 3, 1, 1, rng);

    Tensor x = Tensor::randu({2, C, E, E}, rng, 0.0f, 1.0f);
    Tensor a = h.filtered(x);
    Tensor b = hfri(x, h.spec);
    REQUIRE(a.shape() == b.shape());
    CHECK(std::memcmp(a.data(), b.data(),
                      static_cast<std::size_t>(a.numel()) * sizeof(float)) ==
          0);
}

TEST_CASE("hfrf: channel-axis filtering keeps shape and stays finite") {
    const int C = 6, E = 8;  // non-power-of-two channel count pads internally
    Rng rng(57);
    Hfrf h;
    h.dim = SpectrumAxes::Channel;
    h.spec = HighPassSpec::for_length(next_pow2(C), 4.0);
    h.conv = random_conv(C, C, 1, 1, 0, rng);

    Tensor x = Tensor::randu({2, C, E, E}, rng, 0.0f, 1.0f);
    Tensor y = h.forward(x);
    CHECK(y.shape() == x.shape());
    const std::vector<float> yv(y.data(), y.data() + y.numel());
    CHECK(all_finite_vec(yv));

    // The channel mask is linear: doubling the input doubles the filtrate.
    Tensor y2 = h.filtered(scale(x, 2.0f));
    Tensor y1 = h.filtered(x);
    for (std::int64_t i = 0; i < y1.numel(); ++i)
        CHECK(y2.data()[i] ==
              doctest::Approx(2.0f * y1.data()[i]).epsilon(1e-4));
}

TEST_CASE("extractors: both branches land on the same grid") {
    const int C = 8, E = 16;
    Rng rng(61);
    ImageExtractor ie;
    ie.conv = random_conv(C, 3, 3, 1, 1, rng);
    ie.bn = fresh_bn(C);

    FrequencyExtractor fe;
    fe.hfri_spec = HighPassSpec::make(E, E, 4.0);
    fe.conv = random_conv(C, 3, 3, 1, 1, rng);
    fe.bn = fresh_bn(C);
    fe.fcl.conv1 = random_conv(C, C, 3, 1, 1, rng);
    fe.fcl.conv_amp = random_conv(C, C, 3, 1, 1, rng);
    fe.fcl.conv_phase = random_conv(C, C, 3, 1, 1, rng);
    fe.fcl.conv2 = random_conv(C, C, 3, 1, 1, rng);
    fe.hfrf_channel.dim = SpectrumAxes::Channel;
    fe.hfrf_channel.spec = HighPassSpec::for_length(next_pow2(C), 4.0);
    fe.hfrf_channel.conv = random_conv(C, C, 1, 1, 0, rng);
    fe.hfrf_spatial.dim = SpectrumAxes::Spatial;
    fe.hfrf_spatial.spec = HighPassSpec::make(E / 2, E / 2, 4.0);
    fe.hfrf_spatial.conv = random_conv(C, C, 3, 1, 1, rng);

    Tensor x = Tensor::randu({2, 3, E, E}, rng, 0.0f, 1.0f);
    Tensor fi = ie.forward(x, false);
    Tensor ff = fe.forward(x, false);
    CHECK(fi.shape() == Shape{2, C, E / 2, E / 2});
    CHECK(ff.shape() == fi.shape());
}

TEST_CASE("refine group: finite-difference gradient through residual+cbam") {
    const int Cin = 4, Cout = 8, E = 8;
    Rng rng(63);
    ResidualBlock blk;
    blk.conv1 = random_conv(Cout, Cin, 3, 2, 1, rng, 0.25f);
    blk.conv1.b = Tensor();  // residual convs carry no bias
    blk.bn1 = fresh_bn(Cout);
    blk.conv2 = random_conv(Cout, Cout, 3, 1, 1, rng, 0.25f);
    blk.conv2.b = Tensor();
    blk.bn2 = fresh_bn(Cout);
    blk.has_proj = true;
    blk.proj = random_conv(Cout, Cin, 1, 2, 0, rng, 0.25f);
    blk.proj.b = Tensor();
    blk.bn_proj = fresh_bn(Cout);

    RefineGroup grp;
    grp.blocks.push_back(blk);
    Cbam cb;
    cb.w0 = Tensor::randu({Cout, 2}, rng, -0.4f, 0.4f);
    cb.w1 = Tensor::randu({2, Cout}, rng, -0.4f, 0.4f);
    cb.conv7 = random_conv(1, 2, 7, 1, 3, rng, 0.2f);
    grp.cbam = cb;

    Tensor x = grad_leaf({1, Cin, E, E}, rng, 0.2f, 1.0f);
    Rng fd(64);
    check_gradient(
        x,
        [&] {
            return mean_all(grp.forward(x, false, nullptr, nullptr));
        },
        fd, 1e-3f, 6);
}

TEST_CASE("cbam: finite-difference gradient through both gates") {
    const int C = 4, E = 4;
    Rng rng(65);
    Cbam cb;
    cb.w0 = Tensor::randu({C, 2}, rng, 0.1f, 0.5f);
    cb.w1 = Tensor::randu({2, C}, rng, 0.1f, 0.5f);
    cb.conv7 = random_conv(1, 2, 7, 1, 3, rng, 0.2f);

    Tensor f = grad_leaf({1, C, E, E}, rng, 0.3f, 1.3f);
    Rng fd(66);
    check_gradient(
        f, [&] { return mean_all(cb.forward(f)); }, fd, 1e-3f, 8);
}

TEST_CASE("channel attention: bit-identical under spatial permutation") {
    const int C = 4;
    Rng rng(71);
    Tensor w0 = Tensor::randu({C, 2}, rng, -0.5f, 0.5f);
    Tensor w1 = Tensor::randu({2, C}, rng, -0.5f, 0.5f);
    Tensor f = Tensor::randu({2, C, 3, 3}, rng, -1.0f, 1.0f);
    Tensor a = channel_attention(f, w0, w1);

    // Reverse every channel plane: the pooled descriptors see the same
    // multiset of values.
    std::vector<float> perm(f.data(), f.data() + f.numel());
    for (int nc = 0; nc < 2 * C; ++nc)
        std::reverse(perm.begin() + nc * 9, perm.begin() + (nc + 1) * 9);
    Tensor b = channel_attention(Tensor::from_vector({2, C, 3, 3}, perm),
                                 w0, w1);
    CHECK(std::memcmp(a.data(), b.data(),
                      static_cast<std::size_t>(a.numel()) * sizeof(float)) ==
          0);
}

TEST_CASE("spatial attention: bit-identical under channel permutation") {
    const int C = 5, H = 8, W = 8;
    Rng rng(73);
    Conv2dLayer conv = random_conv(1, 2, 7, 1, 3, rng);
    Tensor f = Tensor::randu({1, C, H, W}, rng, -1.0f, 1.0f);
    Tensor a = spatial_attention(f, conv);

    // Rotate the channel order; per-position avg/max over channels is the
    // same multiset reduction.
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<float> perm(f.numel());
    for (int c = 0; c < C; ++c)
        std::memcpy(perm.data() + static_cast<std::size_t>(c) * plane,
                    f.data() + (static_cast<std::size_t>((c + 1) % C)) * plane,
                    plane * sizeof(float));
    Tensor b = spatial_attention(Tensor::from_vector({1, C, H, W}, perm),
                                 conv);
    CHECK(std::memcmp(a.data(), b.data(),
                      static_cast<std::size_t>(a.numel()) * sizeof(float)) ==
          0);
}

TEST_CASE("cbam: gates strictly shrink every nonzero feature") {
    const int C = 8, r = 2;
    Rng rng(75);
    Cbam cb;
    cb.w0 = Tensor::randu({C, C / r}, rng, -1.0f, 1.0f);
    cb.w1 = Tensor::randu({C / r, C}, rng, -1.0f, 1.0f);
    cb.conv7 = random_conv(1, 2, 7, 1, 3, rng, 0.5f);

    Tensor f = Tensor::randu({2, C, 6, 6}, rng, 0.2f, 2.0f);
    Tensor out = cb.forward(f);
    for (std::int64_t i = 0; i < f.numel(); ++i)
        CHECK(std::abs(out.data()[i]) < std::abs(f.data()[i]));
}
