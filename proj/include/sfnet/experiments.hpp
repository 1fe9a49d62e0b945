#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfnet/data.hpp"
#include "sfnet/model.hpp"
#include "sfnet/training.hpp"

namespace sfnet {

// Everything one experiment run needs; serialized to run_config.json in the
// output directory before any training starts.
struct RunConfig {
    std::string dataset = "synthetic";  // "synthetic" | "directory"
    std::string data_dir;               // for dataset == "directory"
    int n_per_class = 256;              // synthetic only
    std::string preset = "desk";        // "desk" | "paper"
    SFNetConfig model;                  // preset + overrides, validated
    std::string augment = "none";       // comma list of policy names / "all"
    int epochs = 50;
    int batch_size = 16;
    float lr0 = 1e-4f;
    double split_ratio = 0.5;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool verbose_steps = false;

    AugmentationPolicy policy() const;  // parsed from `augment`
    std::string to_json_string() const;
    // FNV-1a over the canonical JSON; stamped into every emitted CSV.
    std::uint64_t config_hash() const;
};

// Prefixes relative paths with $SFNET_OUT_ROOT when that is set.
std::string resolve_out_dir(const std::string& dir);

// Builds the configured dataset and applies the stratified split.
Dataset build_dataset(const RunConfig& cfg);

struct TrainOutcome {
    Metrics final_val;     // metrics of the last epoch (or initial weights)
    std::string checkpoint_path;
    std::string history_path;
    int epochs_run = 0;
};

// Full training run: run_config.json + manifest.json snapshots, per-epoch
// history CSV (epoch, loss, lr, val metrics), final checkpoint. History
// bytes are deterministic for a fixed seed.
TrainOutcome run_train(const RunConfig& cfg);

// Loads a checkpoint, rebuilds the dataset/split, evaluates one side of it
// ("val", "train", or "all") and writes metrics JSON next to stdout output.
Metrics run_eval(const std::string& checkpoint_path, const RunConfig& cfg,
                 const std::string& which_split,
                 const std::string& out_json_path);

// Trains all six branch/attention variants with identical seed and data;
// writes one CSV row per variant (name, metrics, trainable param count).
void run_ablate_branches(const RunConfig& cfg, const std::string& csv_path);

// Re-trains with highpass scale swept over `scales`; rejects scale <= 2.
void run_sweep_lowfreq(const RunConfig& cfg, const std::vector<double>& scales,
                       const std::string& csv_path);

// One training run per named augmentation policy (none + each transform).
void run_ablate_augment(const RunConfig& cfg, const std::string& csv_path);

}  // namespace sfnet
