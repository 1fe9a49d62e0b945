#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfnet/checkpoint.hpp"
#include "sfnet/experiments.hpp"
#include "sfnet/image_io.hpp"
#include "sfnet/viz.hpp"

namespace fs = std::filesystem;
using namespace sfnet;

namespace {

// Flag bundle shared by every training-flavored subcommand. Sentinels mark
// "not set on the command line" so presets keep their defaults.
struct CommonArgs {
    std::string dataset = "synthetic";
    std::string data_dir;
    int n_per_class = 256;
    std::string preset = "desk";
    int extent = -1;
    int channels = -1;
    int reduction = -1;
    std::string branch;
    int attention = -1;
    double scale = -1.0;
    int groups = -1;
    int blocks = -1;
    std::string augment = "none";
    int epochs = -1;
    int batch = 16;
    double lr = 1e-4;
    double split_ratio = 0.5;
    std::uint64_t seed = 0;
    std::string out;
    bool verbose_steps = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_training) {
    cmd->add_option("--dataset", a.dataset, "Data source: synthetic|directory")
        ->check(CLI::IsMember({"synthetic", "directory"}));
    cmd->add_option("--data-dir", a.data_dir,
                    "Directory with real/ and fake/ subdirectories");
    cmd->add_option("--n-per-class", a.n_per_class,
                    "Synthetic samples per class");
    cmd->add_option("--preset", a.preset, "Model preset: desk|paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--extent", a.extent, "Input extent (power of two)");
    cmd->add_option("--channels", a.channels, "Base channel count");
    cmd->add_option("--reduction", a.reduction,
                    "Channel-attention MLP reduction ratio");
    cmd->add_option("--branch", a.branch,
                    "Branch mode: both|spatial_only|frequency_only");
    cmd->add_option("--attention", a.attention, "Enable attention (0|1)");
    cmd->add_option("--scale", a.scale, "High-pass filter scale");
    cmd->add_option("--groups", a.groups, "Refine group count");
    cmd->add_option("--blocks", a.blocks, "Residual blocks per group");
    cmd->add_option("--seed", a.seed, "Run seed");
    cmd->add_option("--out", a.out, "Output directory")->required();
    if (with_training) {
        cmd->add_option("--augment", a.augment,
                        "Comma list of augmentations (or none|all)");
        cmd->add_option("--epochs", a.epochs, "Training epochs");
        cmd->add_option("--batch", a.batch, "Batch size");
        cmd->add_option("--lr", a.lr, "Initial learning rate");
        cmd->add_option("--split-ratio", a.split_ratio,
                        "Train fraction of the stratified split");
        cmd->add_flag("--verbose-steps", a.verbose_steps,
                      "Print one line per optimizer step");
    }
    cmd->set_config("--config", "", "TOML config file with these keys");
}

RunConfig to_run_config(const CommonArgs& a) {
    RunConfig rc;
    rc.dataset = a.dataset;
    rc.data_dir = a.data_dir;
    rc.n_per_class = a.n_per_class;
    rc.preset = a.preset;
    rc.model = a.preset == "paper" ? SFNetConfig::paper() : SFNetConfig::desk();
    if (a.extent > 0) rc.model.input_extent = a.extent;
    if (a.channels > 0) rc.model.base_channels = a.channels;
    if (a.reduction > 0) rc.model.mlp_reduction_ratio = a.reduction;
    if (!a.branch.empty())
        rc.model.branch_mode = branch_mode_from_string(a.branch);
    if (a.attention >= 0) rc.model.attention_enabled = a.attention != 0;
    if (a.scale > 0) rc.model.highpass_scale = a.scale;
    if (a.groups > 0) rc.model.refine_groups = a.groups;
    if (a.blocks > 0) rc.model.blocks_per_group = a.blocks;
    rc.augment = a.augment;
    if (a.epochs >= 0) rc.epochs = a.epochs;
    rc.batch_size = a.batch;
    rc.lr0 = static_cast<float>(a.lr);
    rc.split_ratio = a.split_ratio;
    rc.seed = a.seed;
    rc.out_dir = a.out;
    rc.verbose_steps = a.verbose_steps;
    return rc;
}

std::vector<double> parse_scales(const std::string& text) {
    std::vector<double> scales;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) scales.push_back(std::stod(item));
    if (scales.empty()) throw std::invalid_argument("sweep: empty scale list");
    return scales;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial+frequency forgery detector: training and experiments"};
    app.require_subcommand(1);

    CommonArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model");
    add_common(train, train_args, true);

    CommonArgs eval_args;
    std::string eval_ckpt, eval_split = "val";
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(eval, eval_args, false);
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval->add_option("--split", eval_split, "Split to score: val|train|all")
        ->check(CLI::IsMember({"val", "train", "all"}));

    CommonArgs ablate_args;
    CLI::App* ablate =
        app.add_subcommand("ablate-branches", "Train all six model variants");
    add_common(ablate, ablate_args, true);

    CommonArgs sweep_args;
    std::string sweep_scales = "3,4,5,8,64";
    CLI::App* sweep = app.add_subcommand(
        "sweep-lowfreq", "Sweep the high-pass filter scale");
    add_common(sweep, sweep_args, true);
    sweep->add_option("--scales", sweep_scales, "Comma list of scales");

    CommonArgs aug_args;
    CLI::App* aug = app.add_subcommand("ablate-augment",
                                       "Train once per augmentation policy");
    add_common(aug, aug_args, true);

    CommonArgs dct_args;
    CLI::App* dct =
        app.add_subcommand("dct-viz", "Per-class mean DCT spectrum images");
    add_common(dct, dct_args, false);

    CommonArgs cam_args;
    std::string cam_ckpt, cam_image, cam_layer;
    int cam_target = 1;
    std::size_t cam_index = 0;
    CLI::App* cam = app.add_subcommand("gradcam", "Class activation heatmap");
    add_common(cam, cam_args, false);
    cam->add_option("--checkpoint", cam_ckpt, "Checkpoint file")->required();
    cam->add_option("--image", cam_image, "Input image (PNG/PPM); otherwise a "
                                          "synthetic sample is used");
    cam->add_option("--index", cam_index, "Synthetic sample index");
    cam->add_option("--target-class", cam_target, "Logit to explain (0|1)");
    cam->add_option("--layer", cam_layer,
                    "Tap name, e.g. refine.3 (default: last group)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            run_train(to_run_config(train_args));
        } else if (*eval) {
            RunConfig rc = to_run_config(eval_args);
            // Only a user-supplied extent participates in the compatibility
            // check; otherwise the checkpoint's extent is adopted.
            rc.model.input_extent = eval_args.extent > 0 ? eval_args.extent : 0;
            const std::string out_json =
                (fs::path(resolve_out_dir(eval_args.out)) / "eval.json")
                    .string();
            run_eval(eval_ckpt, rc, eval_split, out_json);
        } else if (*ablate) {
            RunConfig rc = to_run_config(ablate_args);
            run_ablate_branches(
                rc, (fs::path(rc.out_dir) / "ablate_branches.csv").string());
        } else if (*sweep) {
            RunConfig rc = to_run_config(sweep_args);
            run_sweep_lowfreq(
                rc, parse_scales(sweep_scales),
                (fs::path(rc.out_dir) / "sweep_lowfreq.csv").string());
        } else if (*aug) {
            RunConfig rc = to_run_config(aug_args);
            run_ablate_augment(
                rc, (fs::path(rc.out_dir) / "ablate_augment.csv").string());
        } else if (*dct) {
            RunConfig rc = to_run_config(dct_args);
            Dataset ds = rc.dataset == "directory"
                             ? Dataset::from_directory(rc.data_dir,
                                                       rc.model.input_extent)
                             : Dataset::synthetic(rc.n_per_class,
                                                  rc.model.input_extent,
                                                  rc.seed);
            const DctVizResult viz = dct_viz(DatasetView::whole(ds));
            write_dct_viz(viz, resolve_out_dir(rc.out_dir));
            std::printf("wrote real.png, fake.png, diff.png to %s\n",
                        resolve_out_dir(rc.out_dir).c_str());
        } else if (*cam) {
            LoadedCheckpoint ckpt = load_checkpoint(cam_ckpt);
            const int E = ckpt.config.input_extent;
            Tensor image;
            if (!cam_image.empty()) {
                ImageU8 raw;
                std::string err;
                if (!read_image(cam_image, raw, &err))
                    throw std::runtime_error("gradcam: " + err);
                const ImageU8 sized = resize_nearest(raw, E, E);
                image = Tensor::from_vector({1, 3, E, E}, to_float_chw(sized));
            } else {
                RunConfig rc = to_run_config(cam_args);
                Dataset ds = Dataset::synthetic(rc.n_per_class, E, rc.seed);
                if (cam_index >= ds.size())
                    throw std::invalid_argument(
                        "gradcam: sample index out of range");
                image = Tensor::from_vector({1, 3, E, E}, ds.image(cam_index));
            }
            const std::string layer =
                cam_layer.empty()
                    ? "refine." + std::to_string(ckpt.config.refine_groups)
                    : cam_layer;
            const GradCamResult result =
                gradcam(*ckpt.model, image, cam_target, layer);
            const std::string out_dir = resolve_out_dir(cam_args.out);
            write_gradcam_png(result,
                              (fs::path(out_dir) / "gradcam.png").string());
            std::printf("wrote gradcam.png (layer %s, class %d) to %s\n",
                        layer.c_str(), cam_target, out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
