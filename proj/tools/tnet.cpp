#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "transnet/experiments.hpp"

// tnet: train / evaluate / prune / ensemble / probe invariance / aggregate
// reports / generate synthetic data. TNET_THREADS caps worker parallelism.

namespace fs = std::filesystem;
using namespace transnet;

namespace {

/// Reads meta.json written by synth-data so binary pair directories carry
/// their own image size and class count.
void apply_dataset_meta(const std::string& path, DataConfig& dc) {
    const std::string meta = path + "/meta.json";
    if (!fs::is_directory(path) || !fs::exists(meta)) return;
    std::ifstream is(meta);
    const nlohmann::json j = nlohmann::json::parse(is);
    dc.image_size = j.value("image_size", dc.image_size);
    dc.num_classes = j.value("classes", dc.num_classes);
}

Dataset load_cli_dataset(const std::string& path, int classes, int image_size, int subsample,
                         int test_subsample, std::uint64_t seed) {
    DataConfig dc;
    dc.kind = "cifar";
    dc.path = path;
    dc.num_classes = classes;
    dc.image_size = image_size;
    dc.subsample = subsample;
    dc.test_subsample = test_subsample;
    dc.data_seed = seed;
    apply_dataset_meta(path, dc);
    return load_experiment_data(dc);
}

int run_train(const std::string& config_path, const std::string& data_path, std::uint64_t seed,
              bool seed_set, const std::string& mode, int heads, int subsample,
              const std::string& out) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        ConfigReader r = ConfigReader::from_file(config_path);
        cfg = experiment_from_reader(r);
    }
    if (!data_path.empty()) {
        cfg.data.kind = "cifar";
        cfg.data.path = data_path;
        cfg.data.num_classes = 10;
        cfg.data.image_size = 32;
        apply_dataset_meta(data_path, cfg.data);
    }
    if (seed_set) cfg.train.seed = seed;
    if (!mode.empty()) cfg.train.mode = parse_mode(mode);
    if (heads > 0) cfg.train.heads = heads;
    if (subsample > 0) cfg.data.subsample = subsample;
    if (!out.empty()) cfg.out_dir = out;

    const ExperimentResult r = run_experiment(cfg);
    std::cout << std::setprecision(6) << "experiment '" << cfg.name << "' ("
              << mode_name(cfg.train.mode) << ", m=" << cfg.train.heads << ", "
              << r.seeds_ok << "/" << cfg.repetitions << " seeds)\n"
              << "  pruned (identity head): acc " << r.pruned_acc.mean << " +- "
              << r.pruned_acc.std_error << "\n"
              << "  full model:             acc " << r.full_acc.mean << " +- "
              << r.full_acc.std_error << "\n"
              << "  gen ratio (pruned):     " << r.pruned_ratio.mean << " +- "
              << r.pruned_ratio.std_error << "\n"
              << "  last-layer IS (C4):     " << r.last_layer_is.mean << " +- "
              << r.last_layer_is.std_error << "\n"
              << "  outputs in " << cfg.out_dir << "\n";
    return r.seeds_ok > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TransNet multi-head CNN experiments"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, mode, metric = "norm", group = "c4";
    std::uint64_t seed = 1;
    int heads = 0, subsample = 0;

    // train
    auto* train_cmd = app.add_subcommand("train", "train per config/flags and evaluate");
    bool train_seed_set = false;
    train_cmd->add_option("--config", config_path, "experiment config file");
    train_cmd->add_option("--data", data_path, "CIFAR-format binary file or directory");
    train_cmd->add_option("--seed", seed, "root seed")->each([&](const std::string&) { train_seed_set = true; });
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--mode", mode, "base|transnet|single-head|arch-only");
    train_cmd->add_option("--heads", heads, "head count m");
    train_cmd->add_option("--subsample", subsample, "stratified train subsample size");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string model_path;
    int classes = 10, image_size = 32;
    bool no_flip = false, avg_probs = false;
    eval_cmd->add_option("--model", model_path, "checkpoint path")->required();
    eval_cmd->add_option("--data", data_path, "dataset path")->required();
    eval_cmd->add_option("--classes", classes, "class count for raw binary files");
    eval_cmd->add_option("--image-size", image_size, "image size for raw binary files");
    eval_cmd->add_option("--subsample", subsample, "stratified test subsample size");
    eval_cmd->add_option("--seed", seed, "subsample seed");
    eval_cmd->add_flag("--no-flip", no_flip, "disable test-time flip averaging");
    eval_cmd->add_flag("--avg-probs", avg_probs, "average probabilities over heads, not logits");

    // prune
    auto* prune_cmd = app.add_subcommand("prune", "reduce a checkpoint to one head");
    std::string out_model;
    int keep_head = 0;
    bool no_compile = false;
    std::string export_json;
    prune_cmd->add_option("--model", model_path, "checkpoint path")->required();
    prune_cmd->add_option("--out-model", out_model, "pruned checkpoint path")->required();
    prune_cmd->add_option("--head", keep_head, "head to keep (default 0, the identity head)");
    prune_cmd->add_flag("--no-compile", no_compile, "keep the head's transformation uncompiled");
    prune_cmd->add_option("--export-json", export_json, "also export the pruned model as JSON");

    // ensemble
    auto* ens_cmd = app.add_subcommand("ensemble", "accuracy curve over prediction instances");
    std::vector<std::string> model_paths;
    int ensemble_size = 0;
    ens_cmd->add_option("--models", model_paths, "checkpoints (one multi-head model gives its head curve)")
        ->required();
    ens_cmd->add_option("--data", data_path, "dataset path")->required();
    ens_cmd->add_option("--classes", classes, "class count for raw binary files");
    ens_cmd->add_option("--image-size", image_size, "image size for raw binary files");
    ens_cmd->add_option("--size", ensemble_size, "ensemble size (default: all models)");
    ens_cmd->add_option("--out", out_dir, "output directory for CSV/SVG");
    ens_cmd->add_option("--seed", seed, "subsample seed");
    ens_cmd->add_option("--subsample", subsample, "stratified test subsample size");
    ens_cmd->add_flag("--no-flip", no_flip, "disable test-time flip averaging");

    // invariance
    auto* inv_cmd = app.add_subcommand("invariance", "per-kernel invariance report");
    bool normalized = false;
    inv_cmd->add_option("--model", model_path, "checkpoint path")->required();
    inv_cmd->add_option("--group", group, "c4|d4")->check(CLI::IsMember({"c4", "d4"}));
    inv_cmd->add_option("--metric", metric, "norm|pearson|cosine")
        ->check(CLI::IsMember({"norm", "pearson", "cosine"}));
    inv_cmd->add_flag("--normalized", normalized, "divide scores by the kernel norm");
    inv_cmd->add_option("--out", out_dir, "output directory");
    inv_cmd->add_option("--export-json", export_json, "also export the model as JSON");

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate experiment summaries");
    std::vector<std::string> run_dirs;
    report_cmd->add_option("--runs", run_dirs, "experiment output directories")->required();
    report_cmd->add_option("--out", out_dir, "output directory")->required();

    // synth-data
    auto* synth_cmd = app.add_subcommand("synth-data", "generate a planted-transformation dataset");
    int n_train = 2000, n_test = 1000, size = 16, n_classes = 4;
    double noise = 0.18;
    synth_cmd->add_option("--out", out_dir, "output directory")->required();
    synth_cmd->add_option("--n", n_train, "train samples");
    synth_cmd->add_option("--test", n_test, "test samples");
    synth_cmd->add_option("--size", size, "image size");
    synth_cmd->add_option("--classes", n_classes, "class count (even)");
    synth_cmd->add_option("--noise", noise, "pixel noise sigma");
    synth_cmd->add_option("--seed", seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train_cmd))
            return run_train(config_path, data_path, seed, train_seed_set, mode, heads, subsample,
                             out_dir);

        if (app.got_subcommand(eval_cmd)) {
            const TransNetModel m = load_checkpoint(model_path);
            const Dataset d = load_cli_dataset(data_path, classes, image_size, 0, subsample, seed);
            const LabeledData& split = d.test.size() > 0 ? d.test : d.train;
            const EvalResult r = evaluate(m, split, !no_flip, avg_probs);
            std::cout << std::setprecision(6) << "samples " << split.size() << "  accuracy "
                      << r.accuracy << "  cross-entropy " << r.mean_ce << "\n";
            return 0;
        }

        if (app.got_subcommand(prune_cmd)) {
            const TransNetModel m = load_checkpoint(model_path);
            const TransNetModel pruned = prune(m, keep_head, !no_compile);
            save_checkpoint(out_model, pruned);
            if (!export_json.empty()) export_checkpoint_json(export_json, pruned);
            std::cout << "kept head " << keep_head << " (" << element_name(m.transforms[static_cast<std::size_t>(keep_head)])
                      << (no_compile ? ", not compiled" : ", compiled") << "), "
                      << count_parameters(pruned) << " parameters -> " << out_model << "\n";
            return 0;
        }

        if (app.got_subcommand(ens_cmd)) {
            std::vector<TransNetModel> models;
            for (const std::string& p : model_paths) models.push_back(load_checkpoint(p));
            const Dataset d = load_cli_dataset(data_path, classes, image_size, 0, subsample, seed);
            const LabeledData& split = d.test.size() > 0 ? d.test : d.train;
            if (ensemble_size <= 0)
                ensemble_size = models.size() == 1
                                    ? static_cast<int>(models.front().params.heads.size())
                                    : static_cast<int>(models.size());
            const auto curve = evaluate_ensemble(models, split, ensemble_size, !no_flip);
            PlotSeries series{"accuracy", {}, {}, {}};
            std::cout << "instances,accuracy\n";
            for (const EnsemblePoint& p : curve) {
                std::cout << p.instances << "," << std::setprecision(6) << p.accuracy << "\n";
                series.x.push_back(p.instances);
                series.y.push_back(p.accuracy);
            }
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream os(out_dir + "/ensemble.csv");
                os << "instances,accuracy\n" << std::setprecision(10);
                for (const EnsemblePoint& p : curve) os << p.instances << "," << p.accuracy << "\n";
                write_line_chart_svg(out_dir + "/ensemble.svg", "ensemble accuracy",
                                     "instances processed", "accuracy", {series});
            }
            return 0;
        }

        if (app.got_subcommand(inv_cmd)) {
            const TransNetModel m = load_checkpoint(model_path);
            const InvarianceReport rep =
                layer_report(m.params, parse_group(group), parse_metric(metric), normalized);
            std::cout << "layer,kernels,undefined,mean,std,min,max\n" << std::setprecision(6);
            for (std::size_t l = 0; l < rep.layers.size(); ++l) {
                const LayerScores& ls = rep.layers[l];
                std::cout << l << "," << ls.scores.size() << "," << ls.undefined_count << ","
                          << ls.mean << "," << ls.stddev << "," << ls.min << "," << ls.max << "\n";
            }
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_report_csv(out_dir + "/invariance.csv", rep);
                std::vector<HistogramSeries> hist;
                hist.push_back({"layer " + std::to_string(rep.layers.size() - 1),
                                rep.layers.back().scores});
                write_histogram_svg(out_dir + "/is_last_layer.svg",
                                    "last-layer invariance scores (" + rep.metric + ", " + rep.group + ")",
                                    rep.metric, hist);
                PlotSeries means{"mean IS", {}, {}, {}};
                for (std::size_t l = 0; l < rep.layers.size(); ++l) {
                    means.x.push_back(static_cast<double>(l));
                    means.y.push_back(rep.layers[l].mean);
                    means.yerr.push_back(rep.layers[l].stddev);
                }
                write_line_chart_svg(out_dir + "/is_layers.svg", "invariance by layer", "layer",
                                     rep.metric, {means});
            }
            if (!export_json.empty()) export_checkpoint_json(export_json, m);
            return 0;
        }

        if (app.got_subcommand(report_cmd)) {
            fs::create_directories(out_dir);
            std::ofstream os(out_dir + "/report.csv");
            std::string header;
            std::vector<std::string> rows;
            for (const std::string& dir : run_dirs) {
                std::ifstream is(dir + "/summary.csv");
                if (!is) throw format_error("no summary.csv under " + dir);
                std::string line;
                std::getline(is, line);
                if (header.empty()) header = line;
                while (std::getline(is, line))
                    if (!line.empty()) rows.push_back(line);
            }
            os << header << "\n";
            for (const std::string& r : rows) os << r << "\n";
            std::cout << "aggregated " << rows.size() << " experiment rows -> " << out_dir
                      << "/report.csv\n";
            return 0;
        }

        if (app.got_subcommand(synth_cmd)) {
            const Dataset d = generate_synthetic(n_train, n_test, size, n_classes, noise, seed);
            fs::create_directories(out_dir);
            write_cifar_binary(out_dir + "/train.bin", d.train);
            if (d.test.size() > 0) write_cifar_binary(out_dir + "/test.bin", d.test);
            nlohmann::json meta;
            meta["image_size"] = size;
            meta["classes"] = n_classes;
            meta["noise"] = noise;
            meta["seed"] = seed;
            meta["planted_transform"] = d.planted_transform;
            std::ofstream os(out_dir + "/meta.json");
            os << meta.dump(2) << "\n";
            std::cout << "wrote " << n_train << " train / " << n_test << " test samples ("
                      << size << "x" << size << ", " << n_classes << " classes, planted "
                      << d.planted_transform << ") -> " << out_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
