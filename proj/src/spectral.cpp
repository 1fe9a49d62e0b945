#include "sfnet/spectral.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfnet/kernels.hpp"

namespace sfnet {

using kernels::i64;

namespace {

thread_local float g_last_residue = 0.0f;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

struct PlaneDims {
    i64 planes;
    int H, W;
};

PlaneDims plane_dims(const Tensor& x, const char* op) {
    if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
    if (x.rank() == 4)
        return {static_cast<i64>(x.dim(0)) * x.dim(1), x.dim(2), x.dim(3)};
    throw std::invalid_argument(std::string(op) +
                                ": tensor must be rank-2 or rank-4");
}

// In-place batched 2-D FFT over contiguous (planes x H x W) planar storage.
void fft2_inplace(float* re, float* im, i64 planes, int H, int W,
                  bool inverse) {
#pragma omp parallel for collapse(2) schedule(static) if (planes * H > 4)
    for (i64 p = 0; p < planes; ++p)
        for (i64 h = 0; h < H; ++h)
            kernels::fft_line(re + (p * H + h) * W, im + (p * H + h) * W, W,
                              1, inverse);
#pragma omp parallel for collapse(2) schedule(static) if (planes * W > 4)
    for (i64 p = 0; p < planes; ++p)
        for (i64 w = 0; w < W; ++w)
            kernels::fft_line(re + p * H * W + w, im + p * H * W + w, H, W,
                              inverse);
}

void fft_channel_inplace(float* re, float* im, int N, int P, i64 plane,
                         bool inverse) {
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<i64>(N) * plane > 4)
    for (i64 n = 0; n < N; ++n)
        for (i64 s = 0; s < plane; ++s)
            kernels::fft_line(re + n * P * plane + s, im + n * P * plane + s,
                              P, plane, inverse);
}

float max_abs(const float* x, i64 n) {
    float m = 0.0f;
    for (i64 i = 0; i < n; ++i) {
        const float a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

// Cyclic roll of the spatial axes of every plane.
void roll2d(const float* src, float* dst, i64 planes, int H, int W, int sh,
            int sw) {
#pragma omp parallel for schedule(static) if (planes * H * W > (1 << 14))
    for (i64 p = 0; p < planes; ++p) {
        const float* s = src + p * H * W;
        float* d = dst + p * H * W;
        for (int i = 0; i < H; ++i) {
            const int di = (i + sh) % H;
            for (int j = 0; j < W; ++j) d[di * W + (j + sw) % W] = s[i * W + j];
        }
    }
}

void roll_channel(const float* src, float* dst, int N, int P, i64 plane,
                  int shift) {
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < P; ++c)
            std::memcpy(dst + (static_cast<i64>(n) * P + (c + shift) % P) *
                                  plane,
                        src + (static_cast<i64>(n) * P + c) * plane,
                        sizeof(float) * plane);
}

}  // namespace

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// ---- HighPassSpec ------------------------------------------------------------

HighPassSpec HighPassSpec::make(int height, int width, double scale) {
    require(height >= 1 && width >= 1, "high_pass: bad mask extents");
    require(scale >= 2.0,
            "high_pass: scale must be >= 2 (smaller scales would zero more "
            "than the whole spectrum)");
    HighPassSpec s;
    s.height = height;
    s.width = width;
    s.scale = scale;
    s.phi = 4.0 / (scale * scale);
    return s;
}

HighPassSpec HighPassSpec::for_length(int len, double scale) {
    HighPassSpec s = make(1, len, scale);
    return s;
}

// ---- fft2 / ifft2 ---------------------------------------------------------------

ComplexSpectrum fft2(const Tensor& x) {
    const PlaneDims d = plane_dims(x, "fft2");
    require(kernels::is_pow2(d.H) && kernels::is_pow2(d.W),
            "fft2: spatial extents must be powers of two (crop upstream)");
    Tensor re = Tensor::zeros(x.shape());
    Tensor im = Tensor::zeros(x.shape());
    re.ptr()->values = x.ptr()->values;
    fft2_inplace(re.ptr()->values.data(), im.ptr()->values.data(), d.planes,
                 d.H, d.W, false);
    autograd::check_finite("fft2", re.data(), re.numel());
    autograd::check_finite("fft2", im.data(), im.numel());

    const i64 planes = d.planes;
    const int H = d.H, W = d.W;
    autograd::record("fft2", {x}, {re, im}, [planes, H, W](autograd::Node& nd) {
        const float* gre = autograd::output_grad(nd, 0);
        const float* gim = autograd::output_grad(nd, 1);
        if ((!gre && !gim) || !autograd::input_needs_grad(nd, 0)) return;
        const i64 n = planes * H * W;
        std::vector<float> br(static_cast<std::size_t>(n), 0.0f);
        std::vector<float> bi(static_cast<std::size_t>(n), 0.0f);
        if (gre) std::memcpy(br.data(), gre, sizeof(float) * n);
        if (gim) std::memcpy(bi.data(), gim, sizeof(float) * n);
        // Adjoint of the unnormalized forward FFT of a real signal:
        // H*W * Re(normalized inverse FFT of the output gradient).
        fft2_inplace(br.data(), bi.data(), planes, H, W, true);
        float* gx = autograd::ensure_grad(nd.inputs[0]);
        const float s = static_cast<float>(H) * static_cast<float>(W);
        for (i64 i = 0; i < n; ++i) gx[i] += s * br[i];
    });
    return {re, im, false, SpectrumAxes::Spatial, 0};
}

Tensor ifft2(const ComplexSpectrum& s, float residue_tol) {
    require(s.axes == SpectrumAxes::Spatial,
            "ifft2: expected a spatial spectrum");
    require(s.real.defined() && s.imag.defined() &&
                s.real.shape() == s.imag.shape(),
            "ifft2: malformed spectrum");
    const PlaneDims d = plane_dims(s.real, "ifft2");
    require(kernels::is_pow2(d.H) && kernels::is_pow2(d.W),
            "ifft2: spatial extents must be powers of two");
    const i64 n = d.planes * d.H * d.W;
    std::vector<float> br(s.real.values());
    std::vector<float> bi(s.imag.values());
    fft2_inplace(br.data(), bi.data(), d.planes, d.H, d.W, true);
    const float residue = max_abs(bi.data(), n);
    g_last_residue = residue;
    if (!(residue <= residue_tol))
        throw std::runtime_error(
            "ifft2: imaginary residue " + std::to_string(residue) +
            " above tolerance " + std::to_string(residue_tol) +
            " (spectrum is not conjugate-symmetric)");
    Tensor y = Tensor::from_vector(s.real.shape(), std::move(br));
    autograd::check_finite("ifft2", y.data(), n);

    const i64 planes = d.planes;
    const int H = d.H, W = d.W;
    autograd::record(
        "ifft2", {s.real, s.imag}, {y}, [planes, H, W](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            const i64 n2 = planes * H * W;
            std::vector<float> br2(static_cast<std::size_t>(n2));
            std::vector<float> bi2(static_cast<std::size_t>(n2), 0.0f);
            std::memcpy(br2.data(), g, sizeof(float) * n2);
            // Adjoint of Re(normalized inverse FFT): (1/(H*W)) * forward FFT.
            fft2_inplace(br2.data(), bi2.data(), planes, H, W, false);
            const float sc = 1.0f / (static_cast<float>(H) * W);
            if (autograd::input_needs_grad(nd, 0)) {
                float* gr = autograd::ensure_grad(nd.inputs[0]);
                for (i64 i = 0; i < n2; ++i) gr[i] += sc * br2[i];
            }
            if (autograd::input_needs_grad(nd, 1)) {
                float* gi = autograd::ensure_grad(nd.inputs[1]);
                for (i64 i = 0; i < n2; ++i) gi[i] += sc * bi2[i];
            }
        });
    return y;
}

float last_ifft_residue() { return g_last_residue; }

// ---- fftshift / ifftshift ---------------------------------------------------------

namespace {

ComplexSpectrum shift_impl(const ComplexSpectrum& s, bool forward_shift,
                           const char* op) {
    require(s.centered != forward_shift,
            std::string(op) + ": centered flag must flip");
    Tensor re = Tensor::zeros(s.real.shape());
    Tensor im = Tensor::zeros(s.imag.shape());
    int sh = 0, sw = 0, sc = 0;
    if (s.axes == SpectrumAxes::Spatial) {
        const PlaneDims d = plane_dims(s.real, op);
        sh = forward_shift ? d.H / 2 : d.H - d.H / 2;
        sw = forward_shift ? d.W / 2 : d.W - d.W / 2;
        roll2d(s.real.data(), re.ptr()->values.data(), d.planes, d.H, d.W, sh,
               sw);
        roll2d(s.imag.data(), im.ptr()->values.data(), d.planes, d.H, d.W, sh,
               sw);
        const i64 planes = d.planes;
        const int H = d.H, W = d.W;
        autograd::record(
            op, {s.real, s.imag}, {re, im},
            [planes, H, W, sh, sw](autograd::Node& nd) {
                const int bh = (H - sh) % H, bw = (W - sw) % W;
                for (int k = 0; k < 2; ++k) {
                    const float* g = autograd::output_grad(nd, k);
                    if (!g || !autograd::input_needs_grad(nd, k)) continue;
                    std::vector<float> tmp(
                        static_cast<std::size_t>(planes * H * W));
                    roll2d(g, tmp.data(), planes, H, W, bh, bw);
                    float* gi = autograd::ensure_grad(nd.inputs[k]);
                    for (std::size_t i = 0; i < tmp.size(); ++i)
                        gi[i] += tmp[i];
                }
            });
    } else {
        const int N = s.real.dim(0), P = s.real.dim(1);
        const i64 plane = static_cast<i64>(s.real.dim(2)) * s.real.dim(3);
        sc = forward_shift ? P / 2 : P - P / 2;
        roll_channel(s.real.data(), re.ptr()->values.data(), N, P, plane, sc);
        roll_channel(s.imag.data(), im.ptr()->values.data(), N, P, plane, sc);
        autograd::record(
            op, {s.real, s.imag}, {re, im},
            [N, P, plane, sc](autograd::Node& nd) {
                const int back = (P - sc) % P;
                for (int k = 0; k < 2; ++k) {
                    const float* g = autograd::output_grad(nd, k);
                    if (!g || !autograd::input_needs_grad(nd, k)) continue;
                    std::vector<float> tmp(
                        static_cast<std::size_t>(static_cast<i64>(N) * P *
                                                 plane));
                    roll_channel(g, tmp.data(), N, P, plane, back);
                    float* gi = autograd::ensure_grad(nd.inputs[k]);
                    for (std::size_t i = 0; i < tmp.size(); ++i)
                        gi[i] += tmp[i];
                }
            });
    }
    ComplexSpectrum out;
    out.real = re;
    out.imag = im;
    out.centered = forward_shift;
    out.axes = s.axes;
    out.orig_channels = s.orig_channels;
    return out;
}

}  // namespace

ComplexSpectrum fftshift(const ComplexSpectrum& s) {
    return shift_impl(s, true, "fftshift");
}

ComplexSpectrum ifftshift(const ComplexSpectrum& s) {
    return shift_impl(s, false, "ifftshift");
}

// ---- high_pass -----------------------------------------------------------------------

ComplexSpectrum high_pass(const ComplexSpectrum& s, const HighPassSpec& spec) {
    require(s.centered, "high_pass: spectrum must be centered (fftshift first)");
    int r0, r1, c0, c1;  // zeroed half-open ranges
    i64 planes, plane_h, plane_w;
    if (spec.is_1d()) {
        require(s.axes == SpectrumAxes::Channel,
                "high_pass: 1-D spec requires a channel spectrum");
        const int P = s.real.dim(1);
        require(spec.width == P, "high_pass: spec length mismatch");
        const int b = static_cast<int>(std::floor(P / spec.scale));
        // Treat each sample as a (P x H*W) plane; masked rows are channels.
        planes = s.real.dim(0);
        plane_h = P;
        plane_w = static_cast<i64>(s.real.dim(2)) * s.real.dim(3);
        r0 = P / 2 - b;
        r1 = P / 2 + b;
        c0 = 0;
        c1 = static_cast<int>(plane_w);
    } else {
        require(s.axes == SpectrumAxes::Spatial,
                "high_pass: 2-D spec requires a spatial spectrum");
        const PlaneDims d = plane_dims(s.real, "high_pass");
        require(spec.height == d.H && spec.width == d.W,
                "high_pass: spec extents do not match spectrum");
        const int bh = static_cast<int>(std::floor(d.H / spec.scale));
        const int bw = static_cast<int>(std::floor(d.W / spec.scale));
        r0 = d.H / 2 - bh;
        r1 = d.H / 2 + bh;
        c0 = d.W / 2 - bw;
        c1 = d.W / 2 + bw;
        planes = d.planes;
        plane_h = d.H;
        plane_w = d.W;
    }

    auto apply_mask = [=](const float* src, float* dst) {
        std::memcpy(dst, src,
                    sizeof(float) * static_cast<std::size_t>(
                                        planes * plane_h * plane_w));
        for (i64 p = 0; p < planes; ++p) {
            float* base = dst + p * plane_h * plane_w;
            for (int i = r0; i < r1; ++i)
                std::memset(base + static_cast<i64>(i) * plane_w + c0, 0,
                            sizeof(float) * static_cast<std::size_t>(c1 - c0));
        }
    };

    Tensor re = Tensor::zeros(s.real.shape());
    Tensor im = Tensor::zeros(s.imag.shape());
    apply_mask(s.real.data(), re.ptr()->values.data());
    apply_mask(s.imag.data(), im.ptr()->values.data());

    autograd::record("high_pass", {s.real, s.imag}, {re, im},
                     [apply_mask, planes, plane_h,
                      plane_w](autograd::Node& nd) {
                         const i64 n = planes * plane_h * plane_w;
                         for (int k = 0; k < 2; ++k) {
                             const float* g = autograd::output_grad(nd, k);
                             if (!g || !autograd::input_needs_grad(nd, k))
                                 continue;
                             std::vector<float> tmp(
                                 static_cast<std::size_t>(n));
                             apply_mask(g, tmp.data());
                             float* gi = autograd::ensure_grad(nd.inputs[k]);
                             for (i64 i = 0; i < n; ++i) gi[i] += tmp[i];
                         }
                     });

    ComplexSpectrum out;
    out.real = re;
    out.imag = im;
    out.centered = true;
    out.axes = s.axes;
    out.orig_channels = s.orig_channels;
    return out;
}

// ---- hfri -----------------------------------------------------------------------------

Tensor hfri(const Tensor& x, const HighPassSpec& spec) {
    require(x.defined() && x.rank() == 4, "hfri: input must be rank-4");
    require(!spec.is_1d(), "hfri: needs a 2-D spatial mask spec");
    require(spec.height == x.dim(2) && spec.width == x.dim(3),
            "hfri: mask extents do not match image extents");
    ComplexSpectrum s = fft2(x);
    ComplexSpectrum c = fftshift(s);
    ComplexSpectrum m = high_pass(c, spec);
    ComplexSpectrum u = ifftshift(m);
    // The exact-phi half-open mask is conjugate-asymmetric, so the inverse
    // carries a structural imaginary part; keep the real projection.
    return ifft2(u, std::numeric_limits<float>::infinity());
}

// ---- amp / phase ------------------------------------------------------------------------

std::pair<Tensor, Tensor> amp_phase(const ComplexSpectrum& s) {
    require(s.real.defined() && s.imag.defined() &&
                s.real.shape() == s.imag.shape(),
            "amp_phase: malformed spectrum");
    const i64 n = s.real.numel();
    Tensor amp = Tensor::zeros(s.real.shape());
    Tensor phase = Tensor::zeros(s.real.shape());
    const float* re = s.real.data();
    const float* im = s.imag.data();
    float* av = amp.ptr()->values.data();
    float* pv = phase.ptr()->values.data();
#pragma omp parallel for schedule(static) if (n > (1 << 14))
    for (i64 i = 0; i < n; ++i) {
        const double r = re[i], m = im[i];
        av[i] = static_cast<float>(std::sqrt(r * r + m * m));
        pv[i] = static_cast<float>(std::atan2(m, r));
    }
    autograd::check_finite("amp_phase", av, n);
    autograd::check_finite("amp_phase", pv, n);

    autograd::record(
        "amp_phase", {s.real, s.imag}, {amp, phase},
        [n](autograd::Node& nd) {
            const float* ga = autograd::output_grad(nd, 0);
            const float* gp = autograd::output_grad(nd, 1);
            if (!ga && !gp) return;
            const float* re2 = nd.inputs[0]->values.data();
            const float* im2 = nd.inputs[1]->values.data();
            const bool wr = autograd::input_needs_grad(nd, 0);
            const bool wi = autograd::input_needs_grad(nd, 1);
            float* gr = wr ? autograd::ensure_grad(nd.inputs[0]) : nullptr;
            float* gi = wi ? autograd::ensure_grad(nd.inputs[1]) : nullptr;
            for (i64 i = 0; i < n; ++i) {
                const double r = re2[i], m = im2[i];
                const double a = std::sqrt(r * r + m * m);
                if (a < 1e-8) continue;  // gradient guard at the singularity
                const double a2 = a * a;
                double dre = 0.0, dim = 0.0;
                if (ga) {
                    dre += ga[i] * r / a;
                    dim += ga[i] * m / a;
                }
                if (gp) {
                    dre += gp[i] * (-m / a2);
                    dim += gp[i] * (r / a2);
                }
                if (gr) gr[i] += static_cast<float>(dre);
                if (gi) gi[i] += static_cast<float>(dim);
            }
        });
    return {amp, phase};
}

ComplexSpectrum recombine(const Tensor& amp, const Tensor& phase,
                          bool centered, SpectrumAxes axes,
                          int orig_channels) {
    require(amp.defined() && phase.defined() && amp.shape() == phase.shape(),
            "recombine: amplitude/phase shape mismatch");
    const i64 n = amp.numel();
    Tensor re = Tensor::zeros(amp.shape());
    Tensor im = Tensor::zeros(amp.shape());
    const float* av = amp.data();
    const float* pv = phase.data();
    float* rv = re.ptr()->values.data();
    float* iv = im.ptr()->values.data();
#pragma omp parallel for schedule(static) if (n > (1 << 14))
    for (i64 i = 0; i < n; ++i) {
        rv[i] = av[i] * std::cos(pv[i]);
        iv[i] = av[i] * std::sin(pv[i]);
    }
    autograd::check_finite("recombine", rv, n);
    autograd::check_finite("recombine", iv, n);

    autograd::record(
        "recombine", {amp, phase}, {re, im}, [n](autograd::Node& nd) {
            const float* gre = autograd::output_grad(nd, 0);
            const float* gim = autograd::output_grad(nd, 1);
            if (!gre && !gim) return;
            const float* av2 = nd.inputs[0]->values.data();
            const float* pv2 = nd.inputs[1]->values.data();
            const bool wa = autograd::input_needs_grad(nd, 0);
            const bool wp = autograd::input_needs_grad(nd, 1);
            float* ga = wa ? autograd::ensure_grad(nd.inputs[0]) : nullptr;
            float* gp = wp ? autograd::ensure_grad(nd.inputs[1]) : nullptr;
            for (i64 i = 0; i < n; ++i) {
                const float cp = std::cos(pv2[i]), sp = std::sin(pv2[i]);
                const float gr = gre ? gre[i] : 0.0f;
                const float gm = gim ? gim[i] : 0.0f;
                if (ga) ga[i] += gr * cp + gm * sp;
                if (gp) gp[i] += av2[i] * (gm * cp - gr * sp);
            }
        });

    ComplexSpectrum out;
    out.real = re;
    out.imag = im;
    out.centered = centered;
    out.axes = axes;
    out.orig_channels = orig_channels;
    return out;
}

// ---- Channel-axis FFT ----------------------------------------------------------------------

ComplexSpectrum fft_channel(const Tensor& x) {
    require(x.defined() && x.rank() == 4, "fft_channel: input must be rank-4");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int P = next_pow2(C);
    const i64 plane = static_cast<i64>(H) * W;
    Tensor re = Tensor::zeros({N, P, H, W});
    Tensor im = Tensor::zeros({N, P, H, W});
    float* rv = re.ptr()->values.data();
    for (int n = 0; n < N; ++n)
        std::memcpy(rv + static_cast<i64>(n) * P * plane,
                    x.data() + static_cast<i64>(n) * C * plane,
                    sizeof(float) * static_cast<std::size_t>(C * plane));
    fft_channel_inplace(rv, im.ptr()->values.data(), N, P, plane, false);
    autograd::check_finite("fft_channel", re.data(), re.numel());
    autograd::check_finite("fft_channel", im.data(), im.numel());

    autograd::record(
        "fft_channel", {x}, {re, im}, [N, C, P, plane](autograd::Node& nd) {
            const float* gre = autograd::output_grad(nd, 0);
            const float* gim = autograd::output_grad(nd, 1);
            if ((!gre && !gim) || !autograd::input_needs_grad(nd, 0)) return;
            const i64 n2 = static_cast<i64>(N) * P * plane;
            std::vector<float> br(static_cast<std::size_t>(n2), 0.0f);
            std::vector<float> bi(static_cast<std::size_t>(n2), 0.0f);
            if (gre) std::memcpy(br.data(), gre, sizeof(float) * n2);
            if (gim) std::memcpy(bi.data(), gim, sizeof(float) * n2);
            fft_channel_inplace(br.data(), bi.data(), N, P, plane, true);
            float* gx = autograd::ensure_grad(nd.inputs[0]);
            const float s = static_cast<float>(P);
            // Adjoint of zero-padding is truncation back to C channels.
            for (int n = 0; n < N; ++n) {
                const float* src = br.data() + static_cast<i64>(n) * P * plane;
                float* dst = gx + static_cast<i64>(n) * C * plane;
                for (i64 i = 0; i < static_cast<i64>(C) * plane; ++i)
                    dst[i] += s * src[i];
            }
        });

    ComplexSpectrum out;
    out.real = re;
    out.imag = im;
    out.centered = false;
    out.axes = SpectrumAxes::Channel;
    out.orig_channels = C;
    return out;
}

Tensor ifft_channel(const ComplexSpectrum& s, int out_channels,
                    float residue_tol) {
    require(s.axes == SpectrumAxes::Channel,
            "ifft_channel: expected a channel spectrum");
    require(s.real.defined() && s.real.rank() == 4 &&
                s.real.shape() == s.imag.shape(),
            "ifft_channel: malformed spectrum");
    const int N = s.real.dim(0), P = s.real.dim(1);
    const int H = s.real.dim(2), W = s.real.dim(3);
    const i64 plane = static_cast<i64>(H) * W;
    require(out_channels >= 1 && out_channels <= P,
            "ifft_channel: bad output channel count");
    std::vector<float> br(s.real.values());
    std::vector<float> bi(s.imag.values());
    fft_channel_inplace(br.data(), bi.data(), N, P, plane, true);
    const float residue = max_abs(bi.data(), static_cast<i64>(N) * P * plane);
    g_last_residue = residue;
    if (!(residue <= residue_tol))
        throw std::runtime_error(
            "ifft_channel: imaginary residue " + std::to_string(residue) +
            " above tolerance " + std::to_string(residue_tol));
    Tensor y = Tensor::zeros({N, out_channels, H, W});
    float* yv = y.ptr()->values.data();
    for (int n = 0; n < N; ++n)
        std::memcpy(yv + static_cast<i64>(n) * out_channels * plane,
                    br.data() + static_cast<i64>(n) * P * plane,
                    sizeof(float) *
                        static_cast<std::size_t>(out_channels * plane));
    autograd::check_finite("ifft_channel", y.data(), y.numel());

    const int OC = out_channels;
    autograd::record(
        "ifft_channel", {s.real, s.imag}, {y},
        [N, P, OC, plane](autograd::Node& nd) {
            const float* g = autograd::output_grad(nd, 0);
            if (!g) return;
            const i64 n2 = static_cast<i64>(N) * P * plane;
            std::vector<float> br2(static_cast<std::size_t>(n2), 0.0f);
            std::vector<float> bi2(static_cast<std::size_t>(n2), 0.0f);
            for (int n = 0; n < N; ++n)
                std::memcpy(br2.data() + static_cast<i64>(n) * P * plane,
                            g + static_cast<i64>(n) * OC * plane,
                            sizeof(float) *
                                static_cast<std::size_t>(OC * plane));
            fft_channel_inplace(br2.data(), bi2.data(), N, P, plane, false);
            const float sc = 1.0f / static_cast<float>(P);
            if (autograd::input_needs_grad(nd, 0)) {
                float* gr = autograd::ensure_grad(nd.inputs[0]);
                for (i64 i = 0; i < n2; ++i) gr[i] += sc * br2[i];
            }
            if (autograd::input_needs_grad(nd, 1)) {
                float* gi = autograd::ensure_grad(nd.inputs[1]);
                for (i64 i = 0; i < n2; ++i) gi[i] += sc * bi2[i];
            }
        });
    return y;
}

// ---- DCT ------------------------------------------------------------------------------------

namespace {

const std::vector<double>& dct_basis(int n) {
    static std::map<int, std::vector<double>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> b(static_cast<std::size_t>(n) * n);
    for (int u = 0; u < n; ++u) {
        const double a = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int j = 0; j < n; ++j)
            b[static_cast<i64>(u) * n + j] =
                a * std::cos(M_PI * (2 * j + 1) * u / (2.0 * n));
    }
    return cache.emplace(n, std::move(b)).first->second;
}

}  // namespace

Tensor dct2(const Tensor& x) {
    const PlaneDims d = plane_dims(x, "dct2");
    const std::vector<double>& bh = dct_basis(d.H);
    const std::vector<double>& bw = dct_basis(d.W);
    Tensor y = Tensor::zeros(x.shape());
    float* yv = y.ptr()->values.data();
    const float* xv = x.data();
    std::vector<double> tmp(static_cast<std::size_t>(d.H) * d.W);
    for (i64 p = 0; p < d.planes; ++p) {
        const float* xp = xv + p * d.H * d.W;
        float* yp = yv + p * d.H * d.W;
        // tmp = B_H * X
        for (int u = 0; u < d.H; ++u)
            for (int j = 0; j < d.W; ++j) {
                double s = 0.0;
                for (int i = 0; i < d.H; ++i)
                    s += bh[static_cast<i64>(u) * d.H + i] *
                         xp[static_cast<i64>(i) * d.W + j];
                tmp[static_cast<i64>(u) * d.W + j] = s;
            }
        // Y = tmp * B_W^T
        for (int u = 0; u < d.H; ++u)
            for (int v = 0; v < d.W; ++v) {
                double s = 0.0;
                for (int j = 0; j < d.W; ++j)
                    s += tmp[static_cast<i64>(u) * d.W + j] *
                         bw[static_cast<i64>(v) * d.W + j];
                yp[static_cast<i64>(u) * d.W + v] = static_cast<float>(s);
            }
    }
    autograd::check_finite("dct2", yv, y.numel());
    return y;
}

}  // namespace sfnet
