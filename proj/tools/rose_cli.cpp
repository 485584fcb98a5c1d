// Command-line front end: synthesize data, train, detect, evaluate.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rose/cli.hpp"

namespace {

std::string multiple_of_16(const std::string& s) {
    try {
        if (std::stoi(s) % 16 == 0) return {};
    } catch (...) {
    }
    return "must be a positive multiple of 16";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ROSE fingerprint singular-point detector"};
    app.require_subcommand(1);

    rose::cli::SynthOptions synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic fingerprint dataset");
    synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
    synth_cmd->add_option("--count", synth.count, "Number of images")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--size", synth.size, "Image side in pixels")->check(multiple_of_16);
    synth_cmd->add_option("--cores", synth.cores, "Cores per image")->check(CLI::Range(0, 2));
    synth_cmd->add_option("--deltas", synth.deltas, "Deltas per image")->check(CLI::Range(0, 2));
    synth_cmd->add_option("--seed", synth.seed, "Base seed");
    synth_cmd->add_option("--ridge-freq", synth.ridge_frequency, "Ridge frequency, cycles/pixel");
    synth_cmd->add_option("--noise", synth.noise, "Additive noise level")
        ->check(CLI::Range(0.0, 1.0));

    rose::cli::TrainOptions train;
    CLI::App* train_cmd = app.add_subcommand("train", "Train on an annotated dataset");
    train_cmd->add_option("--data", train.data_dir, "Image root directory")->required();
    train_cmd->add_option("--ann", train.annotations, "Annotation JSON file")->required();
    train_cmd->add_option("--out", train.out_weights, "Output weights file")->required();
    train_cmd->add_option("--epochs", train.epochs, "Training epochs")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", train.batch, "Batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train.lr, "Adam learning rate");
    train_cmd->add_option("--sigma", train.sigma, "Heatmap Gaussian std dev");
    train_cmd->add_option("--seed", train.seed, "Seed for init and shuffling");
    train_cmd->add_option("--max-steps", train.max_steps, "Stop after this many optimizer steps");
    train_cmd->add_option("--checkpoint-interval", train.checkpoint_interval,
                          "Checkpoint every N batches");
    train_cmd->add_option("--loss-log", train.loss_log, "Loss CSV path");

    rose::cli::DetectOptions detect;
    CLI::App* detect_cmd = app.add_subcommand("detect", "Detect singular points in one image");
    detect_cmd->add_option("--weights", detect.weights, "Weights file")->required();
    detect_cmd->add_option("--image", detect.image, "Input PGM image")->required();
    detect_cmd->add_option("--overlay", detect.overlay, "Write an overlay PGM here");
    detect_cmd->add_option("--json", detect.json_out, "Write the detection JSON here");
    detect_cmd->add_option("--nms-radius", detect.nms_radius, "NMS suppression radius")
        ->check(CLI::NonNegativeNumber);
    detect_cmd->add_option("--nms-min", detect.nms_min, "NMS minimum peak value")
        ->check(CLI::Range(0.0, 1.0));

    rose::cli::EvalOptions eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate on an annotated dataset");
    eval_cmd->add_option("--weights", eval.weights, "Weights file")->required();
    eval_cmd->add_option("--data", eval.data_dir, "Image root directory")->required();
    eval_cmd->add_option("--ann", eval.annotations, "Annotation JSON file")->required();
    eval_cmd->add_option("--match-radius", eval.match_radius, "Matching radius in pixels")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--nms-radius", eval.nms_radius, "NMS suppression radius")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--nms-min", eval.nms_min, "NMS minimum peak value")
        ->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (synth_cmd->parsed()) return rose::cli::run_synth(synth);
    if (train_cmd->parsed()) return rose::cli::run_train(train);
    if (detect_cmd->parsed()) return rose::cli::run_detect(detect);
    return rose::cli::run_eval(eval);
}
