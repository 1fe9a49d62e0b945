#include "sfnet/viz.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "sfnet/image_io.hpp"
#include "sfnet/spectral.hpp"
#include "sfnet/tensor.hpp"

namespace sfnet {

namespace fs = std::filesystem;

// ---- DCT visualization -----------------------------------------------------------

DctVizResult dct_viz(const DatasetView& data) {
    if (data.size() == 0) throw std::invalid_argument("dct_viz: empty dataset");
    autograd::NoGradGuard guard;
    const int E = data.extent();
    const std::size_t plane = static_cast<std::size_t>(E) * E;

    std::vector<double> acc[2] = {std::vector<double>(plane, 0.0),
                                  std::vector<double>(plane, 0.0)};
    std::size_t count[2] = {0, 0};
    std::vector<float> gray(plane);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<float>& img = data.image(i);
        for (std::size_t p = 0; p < plane; ++p)
            gray[p] = 0.299f * img[p] + 0.587f * img[plane + p] +
                      0.114f * img[2 * plane + p];
        Tensor coeffs = dct2(Tensor::from_vector({E, E}, gray));
        const int cls = data.label(i) == 1 ? 1 : 0;
        const float* c = coeffs.data();
        for (std::size_t p = 0; p < plane; ++p)
            acc[cls][p] += std::abs(static_cast<double>(c[p]));
        count[cls] += 1;
    }
    if (count[0] == 0 || count[1] == 0)
        throw std::invalid_argument("dct_viz: both classes must be present");

    DctVizResult out;
    out.extent = E;
    out.real_map.resize(plane);
    out.fake_map.resize(plane);
    out.diff_map.resize(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        out.real_map[p] = static_cast<float>(
            std::log1p(acc[0][p] / static_cast<double>(count[0])));
        out.fake_map[p] = static_cast<float>(
            std::log1p(acc[1][p] / static_cast<double>(count[1])));
        out.diff_map[p] = out.real_map[p] - out.fake_map[p];
    }
    return out;
}

namespace {

std::vector<unsigned char> quantize_minmax(const std::vector<float>& m) {
    float lo = m[0], hi = m[0];
    for (float v : m) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<unsigned char> out(m.size(), 0);
    if (hi > lo) {
        const float s = 255.0f / (hi - lo);
        for (std::size_t i = 0; i < m.size(); ++i)
            out[i] = static_cast<unsigned char>(
                std::lround((m[i] - lo) * s));
    }
    return out;
}

std::vector<unsigned char> quantize_signed(const std::vector<float>& m) {
    float amax = 0.0f;
    for (float v : m) amax = std::max(amax, std::abs(v));
    std::vector<unsigned char> out(m.size(), 128);
    if (amax > 0.0f) {
        const float s = 127.0f / amax;
        for (std::size_t i = 0; i < m.size(); ++i)
            out[i] = static_cast<unsigned char>(
                std::clamp(128L + std::lround(m[i] * s), 0L, 255L));
    }
    return out;
}

}  // namespace

void write_dct_viz(const DctVizResult& viz, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const int E = viz.extent;
    write_png_gray((fs::path(out_dir) / "real.png").string(), E, E,
                   quantize_minmax(viz.real_map).data());
    write_png_gray((fs::path(out_dir) / "fake.png").string(), E, E,
                   quantize_minmax(viz.fake_map).data());
    write_png_gray((fs::path(out_dir) / "diff.png").string(), E, E,
                   quantize_signed(viz.diff_map).data());
}

// ---- Grad-CAM -------------------------------------------------------------------

namespace {

// align_corners=false bilinear resample of a (h,w) plane to (H,W).
std::vector<float> upsample_bilinear(const std::vector<float>& src, int h,
                                     int w, int H, int W) {
    std::vector<float> dst(static_cast<std::size_t>(H) * W);
    const float sy = static_cast<float>(h) / static_cast<float>(H);
    const float sx = static_cast<float>(w) / static_cast<float>(W);
    for (int r = 0; r < H; ++r) {
        float fy = (static_cast<float>(r) + 0.5f) * sy - 0.5f;
        fy = std::max(0.0f, std::min(fy, static_cast<float>(h - 1)));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - static_cast<float>(y0);
        for (int c = 0; c < W; ++c) {
            float fx = (static_cast<float>(c) + 0.5f) * sx - 0.5f;
            fx = std::max(0.0f, std::min(fx, static_cast<float>(w - 1)));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const float wx = fx - static_cast<float>(x0);
            const float top = src[static_cast<std::size_t>(y0) * w + x0] *
                                  (1.0f - wx) +
                              src[static_cast<std::size_t>(y0) * w + x1] * wx;
            const float bot = src[static_cast<std::size_t>(y1) * w + x0] *
                                  (1.0f - wx) +
                              src[static_cast<std::size_t>(y1) * w + x1] * wx;
            dst[static_cast<std::size_t>(r) * W + c] =
                top * (1.0f - wy) + bot * wy;
        }
    }
    return dst;
}

}  // namespace

GradCamResult gradcam(SFNet& model, const Tensor& image, int target_class,
                      const std::string& layer_tag) {
    if (!image.defined() || image.rank() != 4 || image.dim(0) != 1)
        throw std::invalid_argument("gradcam: image must be (1,3,H,W)");
    if (target_class < 0 || target_class >= model.config().num_classes)
        throw std::invalid_argument("gradcam: target class out of range");

    TapMap taps;
    Tensor logits = model.forward(image, RunMode::Eval, &taps);
    auto it = taps.find(layer_tag);
    if (it == taps.end())
        throw std::invalid_argument("gradcam: unknown layer tag '" +
                                    layer_tag + "'");
    Tensor act = it->second;

    // Select the target logit and run backward from it.
    std::vector<float> sel(static_cast<std::size_t>(logits.numel()), 0.0f);
    sel[static_cast<std::size_t>(target_class)] = 1.0f;
    Tensor loss = sum_all(mul(logits, Tensor::from_vector(logits.shape(),
                                                          std::move(sel))));
    backward(loss);

    const int C = act.dim(1), h = act.dim(2), w = act.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> cam(plane, 0.0f);
    if (act.has_grad()) {
        const float* g = act.grad().data();
        const float* a = act.data();
        for (int ch = 0; ch < C; ++ch) {
            double wsum = 0.0;
            for (std::size_t p = 0; p < plane; ++p)
                wsum += g[static_cast<std::size_t>(ch) * plane + p];
            const float weight =
                static_cast<float>(wsum / static_cast<double>(plane));
            for (std::size_t p = 0; p < plane; ++p)
                cam[p] += weight * a[static_cast<std::size_t>(ch) * plane + p];
        }
    }
    for (float& v : cam) v = std::max(0.0f, v);

    const int E = image.dim(2);
    GradCamResult out;
    out.extent = E;
    out.heatmap = upsample_bilinear(cam, h, w, E, image.dim(3));
    float lo = out.heatmap[0], hi = out.heatmap[0];
    for (float v : out.heatmap) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi > lo)
        for (float& v : out.heatmap) v = (v - lo) / (hi - lo);
    else
        std::fill(out.heatmap.begin(), out.heatmap.end(), 0.0f);

    // Overlay: red channel carries the heatmap, blended over the input.
    const std::size_t iplane = static_cast<std::size_t>(E) * image.dim(3);
    out.overlay_rgb.resize(3 * iplane);
    const float* img = image.data();
    for (std::size_t p = 0; p < iplane; ++p) {
        const float heat = out.heatmap[p];
        const float r = 0.5f * img[p] + 0.5f * heat;
        const float g = 0.5f * img[iplane + p];
        const float b = 0.5f * img[2 * iplane + p] + 0.5f * (1.0f - heat);
        out.overlay_rgb[3 * p + 0] =
            static_cast<unsigned char>(std::lround(255.0f * std::clamp(r, 0.0f, 1.0f)));
        out.overlay_rgb[3 * p + 1] =
            static_cast<unsigned char>(std::lround(255.0f * std::clamp(g, 0.0f, 1.0f)));
        out.overlay_rgb[3 * p + 2] =
            static_cast<unsigned char>(std::lround(255.0f * std::clamp(b, 0.0f, 1.0f)));
    }
    return out;
}

void write_gradcam_png(const GradCamResult& cam, const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_png_rgb(path, cam.extent, cam.extent, cam.overlay_rgb.data());
}

}  // namespace sfnet
