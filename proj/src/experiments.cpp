#include "sfnet/experiments.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sfnet/checkpoint.hpp"
#include "sfnet/spectral.hpp"

namespace sfnet {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- RunConfig -----------------------------------------------------------------

AugmentationPolicy RunConfig::policy() const {
    AugmentationPolicy p;
    std::stringstream ss(augment);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const AugmentationPolicy one = AugmentationPolicy::named(item);
        p.random_crop |= one.random_crop;
        p.horizontal_flip |= one.horizontal_flip;
        p.color_jitter |= one.color_jitter;
        p.invert |= one.invert;
        p.random_erase |= one.random_erase;
        p.mixup |= one.mixup;
    }
    return p;
}

std::string RunConfig::to_json_string() const {
    json j;
    j["dataset"] = dataset;
    j["data_dir"] = data_dir;
    j["n_per_class"] = n_per_class;
    j["preset"] = preset;
    j["model"] = json::parse(model.to_json_string());
    j["augment"] = augment;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr0"] = lr0;
    j["split_ratio"] = split_ratio;
    j["seed"] = seed;
    return j.dump(2);
}

std::uint64_t RunConfig::config_hash() const {
    const std::string s = to_json_string();
    return fnv1a64(s.data(), s.size());
}

std::string resolve_out_dir(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("output directory is empty");
    if (fs::path(dir).is_absolute()) return dir;
    if (const char* root = std::getenv("SFNET_OUT_ROOT"))
        return (fs::path(root) / dir).string();
    return dir;
}

Dataset build_dataset(const RunConfig& cfg) {
    Dataset ds = cfg.dataset == "directory"
                     ? Dataset::from_directory(cfg.data_dir,
                                               cfg.model.input_extent)
                     : Dataset::synthetic(cfg.n_per_class,
                                          cfg.model.input_extent, cfg.seed);
    split_manifest(ds.manifest(), cfg.split_ratio, cfg.seed);
    return ds;
}

// ---- Emission helpers ------------------------------------------------------------

namespace {

std::string f6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string hash_line(const RunConfig& cfg) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    return buf;
}

std::ofstream open_out(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

json metrics_json(const Metrics& m) {
    json j;
    j["oa"] = m.oa;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["tn"] = m.tn;
    j["oa_defined"] = m.oa_defined;
    j["precision_defined"] = m.precision_defined;
    j["recall_defined"] = m.recall_defined;
    j["f1_defined"] = m.f1_defined;
    return j;
}

// Shared trainer for the ablation commands: trains one configuration in a
// subdirectory and returns the final validation metrics.
Metrics train_variant(RunConfig cfg, const std::string& subdir,
                      std::int64_t* param_count = nullptr) {
    cfg.out_dir = (fs::path(cfg.out_dir) / subdir).string();
    const TrainOutcome outcome = run_train(cfg);
    if (param_count) {
        LoadedCheckpoint ckpt = load_checkpoint(outcome.checkpoint_path);
        *param_count = ckpt.model->params().trainable_count();
    }
    return outcome.final_val;
}

}  // namespace

// ---- Train ---------------------------------------------------------------------

TrainOutcome run_train(const RunConfig& cfg) {
    cfg.model.validate();
    const std::string out_dir = resolve_out_dir(cfg.out_dir);
    fs::create_directories(out_dir);

    {
        std::ofstream f = open_out((fs::path(out_dir) / "run_config.json").string());
        f << cfg.to_json_string() << "\n";
    }

    Dataset ds = build_dataset(cfg);
    {
        std::ofstream f = open_out((fs::path(out_dir) / "manifest.json").string());
        f << ds.manifest().to_json_string() << "\n";
    }
    const DatasetView train = DatasetView::train_split(ds);
    const DatasetView val = DatasetView::val_split(ds);

    SFNet model(cfg.model, cfg.seed);
    OptimState optim;
    Rng rng = Rng::fork(cfg.seed, 2);

    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.lr0 = cfg.lr0;
    opts.seed = cfg.seed;
    opts.policy = cfg.policy();
    if (cfg.verbose_steps) {
        opts.on_step = [](int epoch, std::int64_t step, double loss, float lr) {
            std::printf("epoch=%d step=%lld loss=%.6f lr=%.6f\n", epoch + 1,
                        static_cast<long long>(step), loss,
                        static_cast<double>(lr));
        };
    }

    const std::string history_path =
        (fs::path(out_dir) / "history.csv").string();
    std::ofstream hist = open_out(history_path);
    hist << hash_line(cfg) << "\n";
    hist << "epoch,loss,lr,val_oa,val_precision,val_recall,val_f1\n";

    TrainOutcome outcome;
    for (int e = 0; e < cfg.epochs; ++e) {
        const EpochStats stats = train_epoch(model, train, opts, optim, e, rng);
        const Metrics m = evaluate(model, val, cfg.batch_size);
        hist << (e + 1) << "," << f6(stats.mean_loss) << "," << f6(stats.lr)
             << "," << f6(m.oa) << "," << f6(m.precision) << ","
             << f6(m.recall) << "," << f6(m.f1) << "\n";
        std::printf(
            "epoch=%d steps=%lld loss=%.6f lr=%.6f wall=%.2fs val_oa=%.4f\n",
            e + 1, static_cast<long long>(stats.steps), stats.mean_loss,
            static_cast<double>(stats.lr), stats.wall_seconds, m.oa);
        std::fflush(stdout);
        outcome.final_val = m;
        outcome.epochs_run = e + 1;
    }
    hist.close();
    if (cfg.epochs == 0) outcome.final_val = evaluate(model, val, cfg.batch_size);

    outcome.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
    save_checkpoint(outcome.checkpoint_path, model, cfg.epochs, cfg.seed);
    outcome.history_path = history_path;
    return outcome;
}

// ---- Eval ----------------------------------------------------------------------

Metrics run_eval(const std::string& checkpoint_path, const RunConfig& cfg,
                 const std::string& which_split,
                 const std::string& out_json_path) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    if (cfg.model.input_extent != 0 &&
        cfg.model.input_extent != ckpt.config.input_extent)
        throw std::runtime_error(
            "eval: dataset extent does not match the checkpoint config");

    RunConfig data_cfg = cfg;
    data_cfg.model = ckpt.config;
    Dataset ds = build_dataset(data_cfg);
    DatasetView view;
    if (which_split == "val")
        view = DatasetView::val_split(ds);
    else if (which_split == "train")
        view = DatasetView::train_split(ds);
    else if (which_split == "all")
        view = DatasetView::whole(ds);
    else
        throw std::invalid_argument("eval: unknown split '" + which_split +
                                    "'");

    const Metrics m = evaluate(*ckpt.model, view, cfg.batch_size);
    json j = metrics_json(m);
    j["checkpoint"] = checkpoint_path;
    j["split"] = which_split;
    j["samples"] = m.total();
    const std::string text = j.dump(2);
    if (!out_json_path.empty()) {
        std::ofstream f = open_out(out_json_path);
        f << text << "\n";
    }
    std::printf("%s\n", text.c_str());
    return m;
}

// ---- Ablations -----------------------------------------------------------------

void run_ablate_branches(const RunConfig& cfg, const std::string& csv_path) {
    struct Variant {
        BranchMode branch;
        bool attention;
    };
    // Table ordering: full model first, then the attention/branch matrix.
    const Variant variants[6] = {
        {BranchMode::Both, true},          {BranchMode::Both, false},
        {BranchMode::SpatialOnly, false},  {BranchMode::SpatialOnly, true},
        {BranchMode::FrequencyOnly, false}, {BranchMode::FrequencyOnly, true},
    };

    std::ofstream csv = open_out(resolve_out_dir(csv_path));
    csv << hash_line(cfg) << "\n";
    csv << "variant,oa,precision,recall,f1,params\n";
    for (const Variant& v : variants) {
        RunConfig vcfg = cfg;
        vcfg.model.branch_mode = v.branch;
        vcfg.model.attention_enabled = v.attention;
        std::string sub = to_string(v.branch);
        sub += v.attention ? "_att" : "_noatt";
        std::int64_t params = 0;
        const Metrics m = train_variant(vcfg, sub, &params);
        csv << vcfg.model.variant_name() << "," << f6(m.oa) << ","
            << f6(m.precision) << "," << f6(m.recall) << "," << f6(m.f1) << ","
            << params << "\n";
    }
}

void run_sweep_lowfreq(const RunConfig& cfg, const std::vector<double>& scales,
                       const std::string& csv_path) {
    for (double s : scales) {
        if (s <= 2.0)
            throw std::invalid_argument(
                "sweep: scale " + std::to_string(s) +
                " applies an extremely high-pass filter that loses almost "
                "all image structure; use scale > 2");
    }
    std::ofstream csv = open_out(resolve_out_dir(csv_path));
    csv << hash_line(cfg) << "\n";
    csv << "scale,phi,oa,precision,recall,f1\n";
    for (double s : scales) {
        RunConfig vcfg = cfg;
        vcfg.model.highpass_scale = s;
        const HighPassSpec spec = HighPassSpec::make(
            vcfg.model.input_extent, vcfg.model.input_extent, s);
        char sub[32];
        std::snprintf(sub, sizeof(sub), "scale_%g", s);
        const Metrics m = train_variant(vcfg, sub);
        char scale_str[32];
        std::snprintf(scale_str, sizeof(scale_str), "%g", s);
        csv << scale_str << "," << f6(spec.phi) << "," << f6(m.oa) << ","
            << f6(m.precision) << "," << f6(m.recall) << "," << f6(m.f1)
            << "\n";
    }
}

void run_ablate_augment(const RunConfig& cfg, const std::string& csv_path) {
    std::ofstream csv = open_out(resolve_out_dir(csv_path));
    csv << hash_line(cfg) << "\n";
    csv << "policy,oa,precision,recall,f1\n";
    for (const std::string& name : AugmentationPolicy::policy_names()) {
        RunConfig vcfg = cfg;
        vcfg.augment = name;
        const Metrics m = train_variant(vcfg, "augment_" + name);
        csv << name << "," << f6(m.oa) << "," << f6(m.precision) << ","
            << f6(m.recall) << "," << f6(m.f1) << "\n";
    }
}

}  // namespace sfnet
