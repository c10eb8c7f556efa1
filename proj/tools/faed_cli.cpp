// faed: train the dropout autoencoder, sample Monte Carlo embeddings, and
// report FAED with its uncertainty measures.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "faed/binary_io.hpp"
#include "faed/data.hpp"
#include "faed/error.hpp"
#include "faed/harness.hpp"
#include "faed/metrics.hpp"
#include "faed/nn.hpp"

namespace {

using namespace faed;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

/// Flags that map onto ExperimentConfig keys. Each is applied only when given,
/// after --config has been loaded.
struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        options[key] = app->add_option(flag, values[key], help);
    }

    harness::ExperimentConfig resolve() const {
        harness::ExperimentConfig cfg = config_path.empty() ? harness::ExperimentConfig{} : harness::load_config(config_path);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) cfg.set(key, values.at(key));
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
    o.add(app, "--seed", "seed", "Base seed for every random stream");
}

void add_arch(CLI::App* app, Overrides& o) {
    o.add(app, "--input-side", "input_side", "Image side in pixels");
    o.add(app, "--encoder-channels", "encoder_channels", "Comma-separated encoder conv channels");
    o.add(app, "--latent-dim", "latent_dim", "Bottleneck length");
    o.add(app, "--dropout", "dropout", "Encoder dropout rate in [0, 1)");
    o.add(app, "--dropout-placement", "dropout_placement", "encoder-hidden | encoder-hidden-and-latent");
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        io::write_text_file(path, text);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAED with Monte Carlo dropout uncertainty"};
    app.require_subcommand(1);

    // synth
    Overrides synth_o;
    std::string synth_family = "blobs", synth_out;
    std::size_t synth_n = 256, synth_side = 32;
    auto* synth = app.add_subcommand("synth", "Generate a procedural dataset of PPM images");
    add_common(synth, synth_o);
    synth->add_option("--family", synth_family, "blobs | stripes")->capture_default_str();
    synth->add_option("--n", synth_n, "Number of images")->capture_default_str();
    synth->add_option("--side", synth_side, "Image side in pixels")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();

    // augment
    Overrides aug_o;
    std::string aug_in, aug_out, aug_kind = "noise", aug_sources;
    std::size_t aug_count = 5;
    bool aug_no_clamp = false;
    auto* augment = app.add_subcommand("augment", "Apply one augmentation rung to a directory of images");
    add_common(augment, aug_o);
    augment->add_option("--in", aug_in, "Input directory")->required()->check(CLI::ExistingDirectory);
    augment->add_option("--out", aug_out, "Output directory")->required();
    augment->add_option("--kind", aug_kind, "none | noise | self-overlay | foreign-overlay")->capture_default_str();
    augment->add_option("--count", aug_count, "Number of overlaid patches")->capture_default_str();
    aug_o.add(augment, "--patch-side", "patch_side", "Overlay patch side in pixels");
    augment->add_option("--sources", aug_sources, "Directory of foreign overlay sources")->check(CLI::ExistingDirectory);
    augment->add_flag("--no-clamp", aug_no_clamp, "Do not clamp noisy pixels to [0, 1]");

    // train
    Overrides train_o;
    std::string train_dir, val_dir, train_out, train_history;
    auto* train = app.add_subcommand("train", "Train the autoencoder and keep the best-validation parameters");
    add_common(train, train_o);
    add_arch(train, train_o);
    train_o.add(train, "--epochs", "epochs", "Training epochs");
    train_o.add(train, "--batch-size", "batch_size", "Minibatch size");
    train_o.add(train, "--learning-rate", "learning_rate", "Adam learning rate");
    train->add_option("--train", train_dir, "Training image directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--val", val_dir, "Validation image directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", train_out, "Checkpoint path")->required();
    train->add_option("--history", train_history, "Loss history CSV (default: <out>.history.csv)");

    // embed
    Overrides embed_o;
    std::string embed_ckpt, embed_data, embed_out;
    auto* embed = app.add_subcommand("embed", "Sample Monte Carlo dropout embeddings");
    add_common(embed, embed_o);
    embed_o.add(embed, "--j-samples", "j_samples", "Monte Carlo draws per image");
    embed_o.add(embed, "--batch-size", "batch_size", "Images per encoder batch");
    embed->add_option("--checkpoint", embed_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
    embed->add_option("--data", embed_data, "Image directory")->required()->check(CLI::ExistingDirectory);
    embed->add_option("--out", embed_out, "Embedding file")->required();

    // metrics
    Overrides metrics_o;
    std::string metrics_test, metrics_ref, metrics_out;
    auto* metrics_cmd = app.add_subcommand("metrics", "Mean FAED, sigma_FAED and pVar of a test embedding file");
    add_common(metrics_cmd, metrics_o);
    metrics_o.add(metrics_cmd, "--ref-mode", "ref_mode", "fixed-j0 | paired-j");
    metrics_cmd->add_option("--test", metrics_test, "Test embedding file")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--ref", metrics_ref, "Reference embedding file")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--out", metrics_out, "Report path (default: stdout)");

    // sweep
    Overrides sweep_o;
    std::string sweep_ckpt, sweep_base, sweep_sources, sweep_ref, sweep_out, sweep_counts = "0,1,2,3,4,5";
    auto* sweep = app.add_subcommand("sweep", "Metrics versus the number of foreign overlay patches");
    add_common(sweep, sweep_o);
    sweep_o.add(sweep, "--j-samples", "j_samples", "Monte Carlo draws per image");
    sweep_o.add(sweep, "--patch-side", "patch_side", "Overlay patch side in pixels");
    sweep_o.add(sweep, "--ref-mode", "ref_mode", "fixed-j0 | paired-j");
    sweep->add_option("--checkpoint", sweep_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
    sweep->add_option("--base", sweep_base, "Base image directory")->required()->check(CLI::ExistingDirectory);
    sweep->add_option("--sources", sweep_sources, "Foreign overlay sources")->required()->check(CLI::ExistingDirectory);
    sweep->add_option("--ref", sweep_ref, "Reference embedding file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--counts", sweep_counts, "Ascending comma-separated overlay counts")->capture_default_str();
    sweep->add_option("--out", sweep_out, "CSV path (default: stdout)");

    // ladder
    Overrides ladder_o;
    std::string ladder_ckpt, ladder_test, ladder_ref, ladder_foreign, ladder_disjoint, ladder_out;
    auto* ladder = app.add_subcommand("ladder", "Metrics for the baseline and the four distribution-shift rungs");
    add_common(ladder, ladder_o);
    ladder_o.add(ladder, "--j-samples", "j_samples", "Monte Carlo draws per image");
    ladder_o.add(ladder, "--patch-side", "patch_side", "Overlay patch side in pixels");
    ladder_o.add(ladder, "--count", "overlay_count", "Patches per overlay rung");
    ladder_o.add(ladder, "--ref-mode", "ref_mode", "fixed-j0 | paired-j");
    ladder->add_option("--checkpoint", ladder_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
    ladder->add_option("--test", ladder_test, "In-distribution test images")->required()->check(CLI::ExistingDirectory);
    ladder->add_option("--ref", ladder_ref, "Reference images")->required()->check(CLI::ExistingDirectory);
    ladder->add_option("--foreign", ladder_foreign, "Foreign overlay sources")->required()->check(CLI::ExistingDirectory);
    ladder->add_option("--disjoint", ladder_disjoint, "Out-of-family images")->required()->check(CLI::ExistingDirectory);
    ladder->add_option("--out", ladder_out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) {
            const auto cfg = synth_o.resolve();
            const auto ds = data::synth_dataset(data::parse_family(synth_family), synth_n, synth_side, cfg.seed);
            data::save_dataset_dir(ds, synth_out);
        } else if (*augment) {
            auto cfg = aug_o.resolve();
            const auto ds = data::load_dataset_dir(aug_in);
            data::Dataset sources;
            if (!aug_sources.empty()) sources = data::load_dataset_dir(aug_sources);
            const data::AugmentSpec spec{data::parse_augment_kind(aug_kind), aug_count, cfg.patch_side, !aug_no_clamp};
            data::save_dataset_dir(data::augment_dataset(ds, spec, sources.images, cfg.seed), aug_out);
        } else if (*train) {
            const auto cfg = train_o.resolve();
            const auto train_ds = data::load_dataset_dir(train_dir);
            const auto val_ds = data::load_dataset_dir(val_dir);
            auto tc = cfg.train;
            tc.seed = cfg.seed;
            const auto out = harness::train_model(cfg.arch, tc, train_ds, val_ds);
            io::write_file(train_out, out.checkpoint_bytes);
            io::write_text_file(train_history.empty() ? train_out + ".history.csv" : train_history, out.history_csv);
            std::cerr << "best epoch " << out.fit.best_epoch << ", validation loss "
                      << harness::format_double(out.fit.history[out.fit.best_epoch - 1].val_loss) << '\n';
        } else if (*embed) {
            const auto cfg = embed_o.resolve();
            const auto model = nn::load_checkpoint(embed_ckpt);
            const auto ds = data::load_dataset_dir(embed_data);
            const auto tensor = nn::encode_mc(model, ds.images, cfg.j_samples, cfg.seed, cfg.train.batch_size);
            harness::save_embeddings(tensor, cfg.seed, embed_out);
        } else if (*metrics_cmd) {
            const auto cfg = metrics_o.resolve();
            const auto test = harness::load_embeddings(metrics_test);
            const auto ref = harness::load_embeddings(metrics_ref);
            const std::uint64_t seed = metrics_o.options.at("seed")->count() > 0 ? cfg.seed : test.seed;
            const auto report = metrics::metric_report(test.tensor, ref.tensor, seed, cfg.ref_mode);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            write_or_print(metrics_out, harness::format_report(report));
        } else if (*sweep) {
            const auto cfg = sweep_o.resolve();
            harness::SweepSpec spec;
            spec.overlay_counts = harness::parse_count_list("--counts", sweep_counts);
            spec.foreign_source = data::load_dataset_dir(sweep_sources);
            const auto model = nn::load_checkpoint(sweep_ckpt);
            const auto base = data::load_dataset_dir(sweep_base);
            const auto ref = harness::load_embeddings(sweep_ref);
            const auto rows = harness::run_sweep(model, base, spec, ref.tensor, cfg.seed, cfg.j_samples, cfg.patch_side,
                                                 cfg.ref_mode);
            write_or_print(sweep_out, harness::format_sweep_csv(rows));
        } else if (*ladder) {
            const auto cfg = ladder_o.resolve();
            const auto model = nn::load_checkpoint(ladder_ckpt);
            harness::LadderInputs in{data::load_dataset_dir(ladder_test), data::load_dataset_dir(ladder_ref),
                                     data::load_dataset_dir(ladder_foreign), data::load_dataset_dir(ladder_disjoint)};
            const auto rows = harness::run_ladder(model, in, cfg.seed, cfg.j_samples, cfg.overlay_count, cfg.patch_side,
                                                  cfg.ref_mode, cfg.clamp_noise);
            write_or_print(ladder_out, harness::format_ladder_csv(rows));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::Config: return kExitUsage;
            case ErrorKind::Data: return kExitData;
            case ErrorKind::Numerical: return kExitNumerical;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}
