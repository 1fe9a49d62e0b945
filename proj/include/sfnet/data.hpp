#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfnet/rng.hpp"

namespace sfnet {

// Per-sample record: images live in the owning Dataset, decoded on demand.
struct DatasetManifest {
    std::string source;  // directory root, or "synthetic"
    int extent = 0;
    std::uint64_t seed = 0;  // generator seed (synthetic) / informational
    std::vector<std::string> ids;
    std::vector<int> labels;  // 0 = real, 1 = fake
    std::vector<std::size_t> train_idx, val_idx;
    std::uint64_t split_seed = 0;
    double split_ratio = 0.0;
    int skipped = 0;  // undecodable files skipped during a directory scan

    std::size_t size() const { return labels.size(); }
    std::string to_json_string() const;  // split cache / reproducibility record
};

// Stratified per-class shuffle split; train gets round(ratio * n) of each
// class. Throws if ratio is not in (0,1) or any class has < 2 samples.
void split_manifest(DatasetManifest& m, double ratio, std::uint64_t seed);

class Dataset {
  public:
    // Smooth synthetic fields + shapes; fake class additionally passes
    // through a factor-2 nearest down/up resample (spectral artifact).
    // Samples are ordered all-real then all-fake. Throws unless extent is a
    // power of two.
    static Dataset synthetic(int n_per_class, int extent, std::uint64_t seed);

    // root/{real,fake}/*.png|*.ppm, nearest-resized to extent. Throws if a
    // class subdirectory is missing or decodes to zero usable samples;
    // undecodable files are skipped and counted in manifest().skipped.
    static Dataset from_directory(const std::string& root, int extent);

    const DatasetManifest& manifest() const { return mani_; }
    DatasetManifest& manifest() { return mani_; }
    std::size_t size() const { return mani_.size(); }
    int extent() const { return mani_.extent; }
    int label(std::size_t i) const { return mani_.labels[i]; }
    // Planar (3, extent, extent) floats in [0,1]; decoded once, then cached.
    const std::vector<float>& image(std::size_t i) const;

  private:
    DatasetManifest mani_;
    std::function<std::vector<float>(std::size_t)> loader_;
    mutable std::vector<std::vector<float>> cache_;
    mutable std::vector<char> loaded_;
};

// Index view over a Dataset (train/val split or the whole set).
class DatasetView {
  public:
    DatasetView() = default;
    DatasetView(const Dataset& ds, std::vector<std::size_t> idx)
        : ds_(&ds), idx_(std::move(idx)) {}
    static DatasetView whole(const Dataset& ds);
    static DatasetView train_split(const Dataset& ds);
    static DatasetView val_split(const Dataset& ds);

    std::size_t size() const { return idx_.size(); }
    int extent() const;
    int label(std::size_t i) const;
    const std::vector<float>& image(std::size_t i) const;

  private:
    const Dataset* ds_ = nullptr;
    std::vector<std::size_t> idx_;
};

// Single synthetic sample (3*extent*extent floats); label 1 applies the
// down/up forgery artifact. Deterministic in (seed, index).
std::vector<float> synth_image(int extent, int label, std::uint64_t seed,
                               std::size_t index);

}  // namespace sfnet
