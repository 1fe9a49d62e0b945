#include "sfnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sfnet/image_io.hpp"

namespace sfnet {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- Synthetic generator --------------------------------------------------------

namespace {

// Separable box blur with clamped edges; cheap at desk extents.
void box_blur(std::vector<float>& plane, int E, int radius, int passes) {
    std::vector<float> tmp(plane.size());
    for (int pass = 0; pass < passes; ++pass) {
        for (int r = 0; r < E; ++r) {
            for (int c = 0; c < E; ++c) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    const int cc = std::clamp(c + d, 0, E - 1);
                    acc += plane[static_cast<std::size_t>(r) * E + cc];
                }
                tmp[static_cast<std::size_t>(r) * E + c] =
                    static_cast<float>(acc / (2 * radius + 1));
            }
        }
        for (int c = 0; c < E; ++c) {
            for (int r = 0; r < E; ++r) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    const int rr = std::clamp(r + d, 0, E - 1);
                    acc += tmp[static_cast<std::size_t>(rr) * E + c];
                }
                plane[static_cast<std::size_t>(r) * E + c] =
                    static_cast<float>(acc / (2 * radius + 1));
            }
        }
    }
}

// Factor-2 nearest down-then-up resample: every 2x2 block collapses to its
// top-left value, suppressing the upper half of the spectrum.
void down_up_2x(std::vector<float>& img, int E) {
    for (int ch = 0; ch < 3; ++ch) {
        float* p = img.data() + static_cast<std::size_t>(ch) * E * E;
        for (int r = 0; r < E; ++r)
            for (int c = 0; c < E; ++c)
                p[r * E + c] = p[(r / 2) * 2 * E + (c / 2) * 2];
    }
}

}  // namespace

std::vector<float> synth_image(int extent, int label, std::uint64_t seed,
                               std::size_t index) {
    const int E = extent;
    Rng rng = Rng::fork(seed, static_cast<std::uint64_t>(index) * 2 +
                                  static_cast<std::uint64_t>(label));
    const std::size_t plane = static_cast<std::size_t>(E) * E;
    std::vector<float> img(3 * plane);

    // Smooth background field per channel, contrast-restored after blurring.
    for (int ch = 0; ch < 3; ++ch) {
        float* p = img.data() + static_cast<std::size_t>(ch) * plane;
        const float base = static_cast<float>(rng.uniform(0.3, 0.7));
        std::vector<float> noise(plane);
        for (float& v : noise) v = static_cast<float>(rng.uniform());
        box_blur(noise, E, std::max(1, E / 16), 2);
        double mean = 0.0;
        for (float v : noise) mean += v;
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i)
            p[i] = base + 1.2f * (noise[i] - static_cast<float>(mean));
    }

    // Rectangles and discs; their edges are softened below so that shape
    // count and size (which vary per sample) do not dominate the top band.
    const int nshapes = 3 + static_cast<int>(rng.uniform_int(3));
    for (int s = 0; s < nshapes; ++s) {
        const bool disc = rng.uniform() < 0.5;
        const int cy = static_cast<int>(rng.uniform_int(E));
        const int cx = static_cast<int>(rng.uniform_int(E));
        const int half = E / 10 + static_cast<int>(rng.uniform_int(E / 6));
        float color[3];
        for (float& c : color) c = static_cast<float>(rng.uniform(0.25, 0.75));
        for (int r = std::max(0, cy - half); r <= std::min(E - 1, cy + half);
             ++r) {
            for (int c = std::max(0, cx - half);
                 c <= std::min(E - 1, cx + half); ++c) {
                if (disc) {
                    const int dy = r - cy, dx = c - cx;
                    if (dy * dy + dx * dx > half * half) continue;
                }
                for (int ch = 0; ch < 3; ++ch)
                    img[static_cast<std::size_t>(ch) * plane +
                        static_cast<std::size_t>(r) * E + c] = color[ch];
            }
        }
    }

    // Clamp with headroom for the speckle so the noise added below never
    // clips: clipping in saturated regions would erase exactly the top-band
    // energy the real class needs to carry. Clamping happens before the
    // softening blur so the clamp's derivative kinks are smoothed away too.
    for (float& v : img) v = std::min(0.90f, std::max(0.10f, v));

    // Soften the composite. Two radius-1 box passes tame the 1/f tails of the
    // shape edges by roughly two orders of magnitude in the outer band, so
    // the per-sample spread in edge content stays well below the speckle
    // signal that separates the classes. A box average of in-range values
    // stays in range, so the speckle headroom survives the blur.
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<float> chan(img.begin() + static_cast<std::ptrdiff_t>(ch) * plane,
                                img.begin() + static_cast<std::ptrdiff_t>(ch + 1) * plane);
        box_blur(chan, E, 1, 2);
        std::copy(chan.begin(), chan.end(),
                  img.begin() + static_cast<std::ptrdiff_t>(ch) * plane);
    }

    // Fine-grained speckle: full-bandwidth noise. The real class keeps ~3/4
    // of its energy outside the centered quarter-extent block; the block
    // resample below collapses it to 2x2-constant noise, which holds only
    // ~1/3 there. That gap is the detectable forgery signal.
    for (float& v : img) v += static_cast<float>(rng.uniform(-0.10, 0.10));
    for (float& v : img) v = std::min(1.0f, std::max(0.0f, v));

    if (label == 1) down_up_2x(img, E);
    return img;
}

// ---- Dataset -------------------------------------------------------------------

const std::vector<float>& Dataset::image(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("dataset: sample index");
    if (!loaded_[i]) {
        cache_[i] = loader_(i);
        loaded_[i] = 1;
    }
    return cache_[i];
}

Dataset Dataset::synthetic(int n_per_class, int extent, std::uint64_t seed) {
    if (extent < 2 || (extent & (extent - 1)) != 0)
        throw std::invalid_argument(
            "synthetic dataset: extent must be a power of two");
    if (n_per_class < 1)
        throw std::invalid_argument(
            "synthetic dataset: n_per_class must be positive");
    Dataset ds;
    ds.mani_.source = "synthetic";
    ds.mani_.extent = extent;
    ds.mani_.seed = seed;
    const std::size_t total = 2 * static_cast<std::size_t>(n_per_class);
    char buf[64];
    for (std::size_t i = 0; i < total; ++i) {
        const int label = i < static_cast<std::size_t>(n_per_class) ? 0 : 1;
        std::snprintf(buf, sizeof(buf), "synthetic/%s/%04zu",
                      label == 0 ? "real" : "fake", i);
        ds.mani_.ids.emplace_back(buf);
        ds.mani_.labels.push_back(label);
    }
    const int n = n_per_class;
    ds.loader_ = [extent, seed, n](std::size_t i) {
        const int label = i < static_cast<std::size_t>(n) ? 0 : 1;
        return synth_image(extent, label, seed, i);
    };
    ds.cache_.resize(total);
    ds.loaded_.assign(total, 0);
    return ds;
}

Dataset Dataset::from_directory(const std::string& root, int extent) {
    Dataset ds;
    ds.mani_.source = root;
    ds.mani_.extent = extent;
    for (const char* cls : {"real", "fake"}) {
        const fs::path dir = fs::path(root) / cls;
        if (!fs::is_directory(dir))
            throw std::runtime_error("dataset: missing subdirectory " +
                                     dir.string());
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".png" || ext == ".ppm")
                files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        std::size_t usable = 0;
        for (const std::string& path : files) {
            ImageU8 raw;
            std::string err;
            if (!read_image(path, raw, &err)) {
                std::cerr << "warning: skipping " << path << " (" << err
                          << ")\n";
                ds.mani_.skipped += 1;
                continue;
            }
            ImageU8 sized = raw.width == extent && raw.height == extent
                                ? std::move(raw)
                                : resize_nearest(raw, extent, extent);
            ds.cache_.push_back(to_float_chw(sized));
            ds.loaded_.push_back(1);
            ds.mani_.ids.push_back(path);
            ds.mani_.labels.push_back(cls[0] == 'f' ? 1 : 0);
            ++usable;
        }
        if (usable == 0)
            throw std::runtime_error("dataset: no usable images under " +
                                     dir.string());
    }
    ds.loader_ = [](std::size_t) -> std::vector<float> {
        throw std::logic_error("dataset: directory images are pre-decoded");
    };
    return ds;
}

// ---- Split ---------------------------------------------------------------------

void split_manifest(DatasetManifest& m, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split: ratio must be in (0,1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < m.size(); ++i)
        by_class[m.labels[i] == 1 ? 1 : 0].push_back(i);
    for (const auto& cls : by_class)
        if (cls.size() < 2)
            throw std::invalid_argument(
                "split: every class needs at least 2 samples");
    Rng rng(splitmix64(seed));
    m.train_idx.clear();
    m.val_idx.clear();
    for (auto& cls : by_class) {
        rng.shuffle(cls);
        const auto n = static_cast<std::int64_t>(cls.size());
        std::int64_t ntrain =
            std::llround(ratio * static_cast<double>(n));
        ntrain = std::clamp<std::int64_t>(ntrain, 1, n - 1);
        for (std::int64_t i = 0; i < n; ++i)
            (i < ntrain ? m.train_idx : m.val_idx).push_back(cls[i]);
    }
    std::sort(m.train_idx.begin(), m.train_idx.end());
    std::sort(m.val_idx.begin(), m.val_idx.end());
    m.split_seed = seed;
    m.split_ratio = ratio;
}

std::string DatasetManifest::to_json_string() const {
    json j;
    j["source"] = source;
    j["extent"] = extent;
    j["seed"] = seed;
    j["labels"] = labels;
    j["ids"] = ids;
    j["train_idx"] = train_idx;
    j["val_idx"] = val_idx;
    j["split_seed"] = split_seed;
    j["split_ratio"] = split_ratio;
    j["skipped"] = skipped;
    return j.dump(2);
}

// ---- DatasetView ---------------------------------------------------------------

DatasetView DatasetView::whole(const Dataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    return DatasetView(ds, std::move(idx));
}

DatasetView DatasetView::train_split(const Dataset& ds) {
    return DatasetView(ds, ds.manifest().train_idx);
}

DatasetView DatasetView::val_split(const Dataset& ds) {
    return DatasetView(ds, ds.manifest().val_idx);
}

int DatasetView::extent() const { return ds_->extent(); }

int DatasetView::label(std::size_t i) const { return ds_->label(idx_[i]); }

const std::vector<float>& DatasetView::image(std::size_t i) const {
    return ds_->image(idx_[i]);
}

}  // namespace sfnet
