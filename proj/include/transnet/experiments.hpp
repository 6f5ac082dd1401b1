#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "transnet/checkpoint.hpp"
#include "transnet/config.hpp"
#include "transnet/dataset.hpp"
#include "transnet/invariance.hpp"
#include "transnet/svg.hpp"
#include "transnet/training.hpp"

// Experiment orchestration: dataset preparation, per-seed training runs for
// the base / PTm / Tm / ablation grid, metric collection (pruned and full
// accuracy, generalization ratio, last-layer invariance), and CSV/SVG/
// checkpoint emission.

namespace transnet {

struct DataConfig {
    std::string kind = "synthetic";  // synthetic | cifar
    std::string path;                // cifar file or directory
    int image_size = 16;             // synthetic image size (cifar: 32)
    int num_classes = 4;             // synthetic classes (cifar: 10)
    int synthetic_train = 2000;
    int synthetic_test = 1000;
    double noise = 0.18;
    int subsample = 0;       // 0 keeps the whole train split
    int test_subsample = 0;  // 0 keeps the whole test split
    std::uint64_t data_seed = 77;  // shared across repetitions
};

struct ExperimentConfig {
    std::string name = "experiment";
    DataConfig data;
    std::vector<int> channels = {32, 64, 128, 128};
    int kernel_size = 3;
    std::vector<int> pool_after = {1, 2};  // 1-based conv layer indices
    TrainingConfig train;
    int repetitions = 3;
    std::string out_dir = "runs/experiment";
    bool write_figures = true;
    bool write_checkpoints = true;

    void validate() const {
        if (repetitions < 1) throw input_error("repetitions must be >= 1");
        if (channels.empty()) throw input_error("model needs at least one conv layer");
        train.validate();
    }
};

inline ArchSpec arch_from_experiment(const ExperimentConfig& cfg, int in_channels,
                                     int num_classes) {
    ArchSpec arch;
    arch.in_channels = in_channels;
    arch.num_classes = num_classes;
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
        ArchSpec::Layer layer;
        layer.out_channels = cfg.channels[l];
        layer.kernel_size = cfg.kernel_size;
        layer.relu_after = true;
        layer.pool_after = false;
        for (int p : cfg.pool_after)
            if (p == static_cast<int>(l) + 1) layer.pool_after = true;
        arch.layers.push_back(layer);
    }
    return arch;
}

/// Reads the [experiment]/[data]/[model]/[train] sections; unknown keys are
/// errors.
inline ExperimentConfig experiment_from_reader(ConfigReader& r) {
    ExperimentConfig cfg;
    cfg.name = r.get_string("experiment", "name", cfg.name);
    cfg.repetitions = r.get_int("experiment", "repetitions", cfg.repetitions);
    cfg.out_dir = r.get_string("experiment", "out", cfg.out_dir);
    cfg.train.seed = r.get_u64("experiment", "seed", cfg.train.seed);
    cfg.write_figures = r.get_bool("experiment", "figures", cfg.write_figures);
    cfg.write_checkpoints = r.get_bool("experiment", "checkpoints", cfg.write_checkpoints);

    cfg.data.kind = r.get_string("data", "kind", cfg.data.kind);
    cfg.data.path = r.get_string("data", "path", cfg.data.path);
    const bool is_cifar = cfg.data.kind == "cifar";
    cfg.data.image_size = r.get_int("data", "image_size", is_cifar ? 32 : cfg.data.image_size);
    cfg.data.num_classes = r.get_int("data", "classes", is_cifar ? 10 : cfg.data.num_classes);
    cfg.data.synthetic_train = r.get_int("data", "synthetic_train", cfg.data.synthetic_train);
    cfg.data.synthetic_test = r.get_int("data", "synthetic_test", cfg.data.synthetic_test);
    cfg.data.noise = r.get_double("data", "noise", cfg.data.noise);
    cfg.data.subsample = r.get_int("data", "subsample", cfg.data.subsample);
    cfg.data.test_subsample = r.get_int("data", "test_subsample", cfg.data.test_subsample);
    cfg.data.data_seed = r.get_u64("data", "seed", cfg.data.data_seed);

    cfg.channels = r.get_int_list("model", "channels", cfg.channels);
    cfg.kernel_size = r.get_int("model", "kernel_size", cfg.kernel_size);
    cfg.pool_after = r.get_int_list("model", "pool_after", cfg.pool_after);

    cfg.train.mode = parse_mode(r.get_string("train", "mode", mode_name(cfg.train.mode)));
    cfg.train.heads = r.get_int("train", "heads", cfg.train.heads);
    cfg.train.batch_size = r.get_int("train", "batch_size", cfg.train.batch_size);
    cfg.train.epochs = r.get_int("train", "epochs", cfg.train.epochs);
    cfg.train.learning_rate = r.get_double("train", "learning_rate", cfg.train.learning_rate);
    cfg.train.lr_milestones = r.get_int_list("train", "lr_milestones", cfg.train.lr_milestones);
    cfg.train.lr_decay = r.get_double("train", "lr_decay", cfg.train.lr_decay);
    cfg.train.momentum = r.get_double("train", "momentum", cfg.train.momentum);
    cfg.train.weight_decay = r.get_double("train", "weight_decay", cfg.train.weight_decay);
    cfg.train.decay_biases = r.get_bool("train", "decay_biases", cfg.train.decay_biases);
    cfg.train.augment.horizontal_flip_prob =
        r.get_double("train", "flip_prob", cfg.train.augment.horizontal_flip_prob);
    cfg.train.augment.pad_crop = r.get_int("train", "pad_crop", cfg.train.augment.pad_crop);
    cfg.train.average_probabilities =
        r.get_bool("train", "average_probabilities", cfg.train.average_probabilities);
    cfg.train.flip_eval = r.get_bool("train", "flip_eval", cfg.train.flip_eval);
    r.finish();
    cfg.validate();
    return cfg;
}

/// Loads and prepares the experiment dataset: CIFAR binary or synthetic,
/// optional stratified subsampling, per-channel train-split normalization.
inline Dataset load_experiment_data(const DataConfig& dc) {
    Dataset d;
    if (dc.kind == "cifar") {
        if (dc.path.empty()) throw input_error("cifar data needs a path");
        d = load_cifar_binary(dc.path, dc.num_classes, dc.image_size);
    } else if (dc.kind == "synthetic") {
        d = generate_synthetic(dc.synthetic_train, dc.synthetic_test, dc.image_size,
                               dc.num_classes, dc.noise, dc.data_seed);
    } else if (dc.kind == "synthetic-prototypes") {
        d = generate_synthetic_prototypes(dc.synthetic_train, dc.synthetic_test, dc.image_size,
                                          dc.num_classes, dc.noise, dc.data_seed);
    } else {
        throw input_error("unknown data kind: '" + dc.kind + "'");
    }
    Rng rng = Rng(dc.data_seed).substream("subsample");
    if (dc.subsample > 0 && dc.subsample < d.train.size())
        d.train = subsample_stratified(d.train, dc.subsample, d.num_classes, rng);
    if (dc.test_subsample > 0 && d.test.size() > dc.test_subsample)
        d.test = subsample_stratified(d.test, dc.test_subsample, d.num_classes, rng);
    normalize_channels(d);
    return d;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string fail_reason;
    double pruned_acc = 0.0, full_acc = 0.0;
    double pruned_ratio = 0.0, full_ratio = 0.0;
    double last_layer_is = 0.0;
    std::vector<double> layer_is_means;
    double final_train_loss = 0.0, final_test_loss = 0.0;
    std::string checkpoint_path, log_path;
};

struct MetricSummary {
    double mean = 0.0;
    double std_error = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SeedOutcome> seeds;
    int seeds_ok = 0;
    MetricSummary pruned_acc, full_acc, pruned_ratio, full_ratio, last_layer_is;
};

namespace detail {

inline MetricSummary summarize(const std::vector<double>& v) {
    MetricSummary s;
    if (v.empty()) return s;
    s.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double sq = 0.0;
        for (double x : v) sq += (x - s.mean) * (x - s.mean);
        s.std_error = std::sqrt(sq / static_cast<double>(v.size() - 1)) /
                      std::sqrt(static_cast<double>(v.size()));
    }
    return s;
}

inline void write_learning_curves(const std::string& path, const std::vector<EpochRow>& history) {
    PlotSeries train_loss{"train loss", {}, {}, {}}, test_loss{"test loss", {}, {}, {}};
    PlotSeries train_acc{"train acc", {}, {}, {}}, test_acc{"test acc", {}, {}, {}};
    for (const EpochRow& r : history) {
        train_loss.x.push_back(r.epoch);
        train_loss.y.push_back(r.train_loss);
        test_loss.x.push_back(r.epoch);
        test_loss.y.push_back(r.test_loss);
        train_acc.x.push_back(r.epoch);
        train_acc.y.push_back(r.train_acc);
        test_acc.x.push_back(r.epoch);
        test_acc.y.push_back(r.test_acc);
    }
    write_line_chart_svg(path, "learning curves", "epoch", "loss / accuracy",
                         {train_loss, test_loss, train_acc, test_acc});
}

}  // namespace detail

/// Trains `repetitions` seeds of the configured mode and evaluates, per seed:
/// the pruned identity head (PTm), the full model (Tm), both generalization
/// ratios, and the last-layer invariance summary. Checkpoints, per-epoch CSV
/// logs, figures, and a summary CSV land in out_dir. A diverged seed is
/// recorded as failed and the run continues.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const Dataset data = load_experiment_data(cfg.data);
    const int in_channels = data.train.inputs.dim(1);
    const ArchSpec arch = arch_from_experiment(cfg, in_channels, data.num_classes);

    ExperimentResult result;
    result.config = cfg;
    std::vector<double> pruned_accs, full_accs, pruned_ratios, full_ratios, last_is;

    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        SeedOutcome out;
        TrainingConfig tc = cfg.train;
        tc.seed = cfg.train.seed + static_cast<std::uint64_t>(rep);
        out.seed = tc.seed;

        const std::string seed_dir = cfg.out_dir + "/seed" + std::to_string(tc.seed);
        fs::create_directories(seed_dir);
        out.log_path = seed_dir + "/train_log.csv";

        TrainResult tr = train(arch, data.train, data.test, tc, out.log_path);
        if (tr.diverged) {
            out.failed = true;
            out.fail_reason = tr.divergence_reason;
            result.seeds.push_back(std::move(out));
            continue;
        }

        const TransNetModel& model = tr.model;
        const TransNetModel pruned = prune(model, 0, true);

        // complexity audit: the pruned model must match the base CNN exactly
        Rng probe_rng(0);
        const TransNetModel base_probe = make_model(arch, {kIdentity}, probe_rng);
        if (count_parameters(pruned) != count_parameters(base_probe) ||
            count_forward_macs(pruned.params, data.train.inputs.dim(2)) !=
                count_forward_macs(base_probe.params, data.train.inputs.dim(2)))
            throw std::logic_error("pruned model complexity deviates from the base CNN");

        const EvalResult pruned_eval =
            evaluate(pruned, data.test, tc.flip_eval, tc.average_probabilities);
        const EvalResult full_eval =
            evaluate(model, data.test, tc.flip_eval, tc.average_probabilities);
        out.pruned_acc = pruned_eval.accuracy;
        out.full_acc = full_eval.accuracy;

        out.pruned_ratio =
            generalization_ratio(pruned, data.train, data.test, PredictorKind::identity_head).ratio;
        out.full_ratio = generalization_ratio(model, data.train, data.test,
                                              PredictorKind::full_model, tc.average_probabilities)
                             .ratio;

        const InvarianceReport rep_is =
            layer_report(model.params, c4_group(), SimilarityMetric::norm);
        for (const LayerScores& ls : rep_is.layers) out.layer_is_means.push_back(ls.mean);
        out.last_layer_is = rep_is.layers.back().mean;
        write_report_csv(seed_dir + "/invariance.csv", rep_is);

        if (!tr.history.empty()) {
            out.final_train_loss = tr.history.back().train_loss;
            out.final_test_loss = tr.history.back().test_loss;
        }
        if (cfg.write_checkpoints) {
            out.checkpoint_path = seed_dir + "/model.tnet";
            save_checkpoint(out.checkpoint_path, model);
        }
        if (cfg.write_figures) {
            detail::write_learning_curves(seed_dir + "/learning_curves.svg", tr.history);
            write_histogram_svg(seed_dir + "/is_last_layer.svg", "last-layer invariance scores",
                                "IS", {{mode_name(tc.mode), rep_is.layers.back().scores}});
        }

        pruned_accs.push_back(out.pruned_acc);
        full_accs.push_back(out.full_acc);
        pruned_ratios.push_back(out.pruned_ratio);
        full_ratios.push_back(out.full_ratio);
        last_is.push_back(out.last_layer_is);
        ++result.seeds_ok;
        result.seeds.push_back(std::move(out));
    }

    result.pruned_acc = detail::summarize(pruned_accs);
    result.full_acc = detail::summarize(full_accs);
    result.pruned_ratio = detail::summarize(pruned_ratios);
    result.full_ratio = detail::summarize(full_ratios);
    result.last_layer_is = detail::summarize(last_is);

    std::ofstream os(cfg.out_dir + "/summary.csv");
    if (!os) throw format_error("cannot write experiment summary");
    os << "name,mode,heads,seeds_ok,pruned_acc_mean,pruned_acc_se,full_acc_mean,full_acc_se,"
          "pruned_ratio_mean,pruned_ratio_se,full_ratio_mean,full_ratio_se,last_layer_is_mean,"
          "last_layer_is_se\n";
    os << std::setprecision(10) << cfg.name << "," << mode_name(cfg.train.mode) << ","
       << cfg.train.heads << "," << result.seeds_ok << "," << result.pruned_acc.mean << ","
       << result.pruned_acc.std_error << "," << result.full_acc.mean << ","
       << result.full_acc.std_error << "," << result.pruned_ratio.mean << ","
       << result.pruned_ratio.std_error << "," << result.full_ratio.mean << ","
       << result.full_ratio.std_error << "," << result.last_layer_is.mean << ","
       << result.last_layer_is.std_error << "\n";
    return result;
}

struct EnsemblePoint {
    int instances = 0;  // backbone passes needed for this prediction
    double accuracy = 0.0;
};

/// Mean-logit ensembling. One multi-head model yields its head-prefix curve
/// (a single Tm model is a space-efficient ensemble of m); several models
/// yield the model-prefix curve.
inline std::vector<EnsemblePoint> evaluate_ensemble(const std::vector<TransNetModel>& models,
                                                    const LabeledData& data, int ensemble_size,
                                                    bool flip_averaging = false) {
    if (models.empty()) throw input_error("evaluate_ensemble: no models");
    const int k = models.front().params.heads.front().weight.dim(0);
    for (const TransNetModel& m : models)
        if (m.params.heads.front().weight.dim(0) != k)
            throw input_error("evaluate_ensemble: incompatible class counts");

    const bool head_curve = models.size() == 1 && models.front().params.heads.size() > 1;
    const int points =
        head_curve ? std::min<int>(ensemble_size, static_cast<int>(models.front().params.heads.size()))
                   : ensemble_size;
    if (!head_curve && ensemble_size > static_cast<int>(models.size()))
        throw input_error("evaluate_ensemble: need at least " + std::to_string(ensemble_size) +
                          " checkpoints, got " + std::to_string(models.size()));

    const int n = data.size();
    std::vector<int> hits(static_cast<std::size_t>(points), 0);
    std::vector<std::vector<char>> correct(static_cast<std::size_t>(points),
                                           std::vector<char>(static_cast<std::size_t>(n), 0));
    parallel_for(n, [&](int s) {
        const Tensor x = data.sample(s);
        Tensor acc({k});
        for (int p = 0; p < points; ++p) {
            Tensor logits;
            if (head_curve) {
                const TransNetModel& m = models.front();
                logits = forward_head(m, p, apply_spatial(m.transforms[static_cast<std::size_t>(p)], x));
                if (flip_averaging) {
                    const Tensor flipped = apply_spatial(kHorizontalFlip, x);
                    const Tensor l2 = forward_head(
                        m, p, apply_spatial(m.transforms[static_cast<std::size_t>(p)], flipped));
                    for (int i = 0; i < logits.dim(0); ++i) logits(i) = 0.5 * (logits(i) + l2(i));
                }
            } else {
                logits = flip_averaging
                             ? predict_with_flip_averaging(models[static_cast<std::size_t>(p)], x)
                             : forward_full(models[static_cast<std::size_t>(p)], x);
            }
            for (int i = 0; i < k; ++i) acc(i) += logits(i);
            int best = 0;
            for (int i = 1; i < k; ++i)
                if (acc(i) > acc(best)) best = i;
            correct[static_cast<std::size_t>(p)][static_cast<std::size_t>(s)] =
                best == data.labels[static_cast<std::size_t>(s)] ? 1 : 0;
        }
    });

    std::vector<EnsemblePoint> curve;
    int instances = 0;
    for (int p = 0; p < points; ++p) {
        for (char c : correct[static_cast<std::size_t>(p)]) hits[static_cast<std::size_t>(p)] += c;
        instances += head_curve ? 1 : static_cast<int>(models[static_cast<std::size_t>(p)].params.heads.size());
        curve.push_back({instances, static_cast<double>(hits[static_cast<std::size_t>(p)]) / n});
    }
    return curve;
}

}  // namespace transnet
