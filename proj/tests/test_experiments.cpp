#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "test_helpers.hpp"
#include "transnet/experiments.hpp"

using namespace transnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    std::string path;
    explicit TempDir(std::string p) : path(std::move(p)) { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig tiny_experiment(const std::string& out) {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.data.kind = "synthetic";
    cfg.data.image_size = 8;
    cfg.data.num_classes = 2;
    cfg.data.synthetic_train = 32;
    cfg.data.synthetic_test = 16;
    cfg.data.noise = 0.15;
    cfg.channels = {4, 6};
    cfg.pool_after = {1};
    cfg.train.mode = TrainMode::transnet;
    cfg.train.heads = 2;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 8;
    cfg.train.learning_rate = 0.05;
    cfg.train.lr_milestones = {};
    cfg.train.augment.pad_crop = 1;
    cfg.train.seed = 21;
    cfg.repetitions = 2;
    cfg.out_dir = out;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing: sections, types, and fail-fast unknown keys") {
    const std::string text = R"(
# comment
[experiment]
name = demo
repetitions = 3
seed = 42

[data]
kind = synthetic
classes = 4
noise = 0.25

[model]
channels = 8, 16, 32
pool_after = 1, 2

[train]
mode = transnet
heads = 2
lr_milestones = 10, 15
decay_biases = false
)";
    ConfigReader r = ConfigReader::from_string(text);
    const ExperimentConfig cfg = experiment_from_reader(r);
    REQUIRE(cfg.name == "demo");
    REQUIRE(cfg.repetitions == 3);
    REQUIRE(cfg.train.seed == 42);
    REQUIRE(cfg.data.noise == 0.25);
    REQUIRE(cfg.channels == std::vector<int>{8, 16, 32});
    REQUIRE(cfg.pool_after == std::vector<int>{1, 2});
    REQUIRE(cfg.train.mode == TrainMode::transnet);
    REQUIRE(cfg.train.heads == 2);
    REQUIRE(cfg.train.lr_milestones == std::vector<int>{10, 15});
    REQUIRE_FALSE(cfg.train.decay_biases);

    ConfigReader bad = ConfigReader::from_string("[train]\nmoed = transnet\n");
    REQUIRE_THROWS_AS(experiment_from_reader(bad), input_error);

    REQUIRE_THROWS_AS(ConfigReader::from_string("[a]\nx = 1\nx = 2\n"), format_error);
    REQUIRE_THROWS_AS(ConfigReader::from_string("just a line\n"), format_error);

    ConfigReader badbool = ConfigReader::from_string("[train]\ndecay_biases = maybe\n");
    REQUIRE_THROWS_AS(experiment_from_reader(badbool), input_error);
}

TEST_CASE("tiny experiment run: artifacts, schema, and reproducibility") {
    TempDir dir_a("exp_out_a");
    const ExperimentResult a = run_experiment(tiny_experiment(dir_a.path));
    REQUIRE(a.seeds_ok == 2);
    REQUIRE(a.seeds.size() == 2);

    // summary schema is stable (golden header)
    const std::string summary = read_file(dir_a.path + "/summary.csv");
    REQUIRE(summary.rfind("name,mode,heads,seeds_ok,pruned_acc_mean,pruned_acc_se,"
                          "full_acc_mean,full_acc_se,pruned_ratio_mean,pruned_ratio_se,"
                          "full_ratio_mean,full_ratio_se,last_layer_is_mean,last_layer_is_se\n",
                          0) == 0);

    // per-seed artifacts exist
    for (const SeedOutcome& s : a.seeds) {
        REQUIRE(fs::exists(s.log_path));
        REQUIRE(fs::exists(s.checkpoint_path));
        REQUIRE(fs::exists(dir_a.path + "/seed" + std::to_string(s.seed) + "/invariance.csv"));
        REQUIRE(fs::exists(dir_a.path + "/seed" + std::to_string(s.seed) + "/learning_curves.svg"));
        const std::string log = read_file(s.log_path);
        REQUIRE(log.rfind("epoch,lr,train_loss,test_loss,train_acc,test_acc,head0_train_loss,"
                          "head1_train_loss,head0_test_loss,head1_test_loss,wall_time_s\n",
                          0) == 0);
        REQUIRE(std::count(log.begin(), log.end(), '\n') == 3);  // header + 2 epochs
    }

    // bitwise reproducibility of the trained checkpoints
    TempDir dir_b("exp_out_b");
    const ExperimentResult b = run_experiment(tiny_experiment(dir_b.path));
    for (std::size_t i = 0; i < a.seeds.size(); ++i)
        REQUIRE(read_file(a.seeds[i].checkpoint_path) == read_file(b.seeds[i].checkpoint_path));
    REQUIRE(a.pruned_acc.mean == b.pruned_acc.mean);
    REQUIRE(a.last_layer_is.mean == b.last_layer_is.mean);

    // summary aggregates: standard error = sample std / sqrt(n)
    std::vector<double> accs;
    for (const SeedOutcome& s : a.seeds) accs.push_back(s.pruned_acc);
    const double mean = (accs[0] + accs[1]) / 2.0;
    const double sd = std::sqrt(((accs[0] - mean) * (accs[0] - mean) +
                                 (accs[1] - mean) * (accs[1] - mean)) / 1.0);
    REQUIRE(a.pruned_acc.mean == Catch::Approx(mean).margin(1e-15));
    REQUIRE(a.pruned_acc.std_error == Catch::Approx(sd / std::sqrt(2.0)).margin(1e-15));
}

TEST_CASE("base-mode experiments share the output schema") {
    TempDir dir("exp_out_base");
    ExperimentConfig cfg = tiny_experiment(dir.path);
    cfg.train.mode = TrainMode::base;
    cfg.train.heads = 1;
    cfg.repetitions = 1;
    const ExperimentResult r = run_experiment(cfg);
    REQUIRE(r.seeds_ok == 1);
    const std::string summary = read_file(dir.path + "/summary.csv");
    REQUIRE(summary.find("base,1,1") != std::string::npos);

    // ablation modes run from the same grid
    cfg.train.mode = TrainMode::arch_only;
    cfg.train.heads = 2;
    cfg.out_dir = dir.path + "/arch";
    REQUIRE(run_experiment(cfg).seeds_ok == 1);
    cfg.train.mode = TrainMode::single_head;
    cfg.train.heads = 2;
    cfg.out_dir = dir.path + "/alg";
    REQUIRE(run_experiment(cfg).seeds_ok == 1);
}

TEST_CASE("ensemble evaluation: prefix curves and degenerate cases") {
    Rng rng(601);
    const Dataset d = generate_synthetic(0, 24, 8, 2, 0.2, 71);
    ArchSpec arch = default_arch(3, 2);
    arch.layers = {{4, 3, true, false}};

    const TransNetModel m1 = make_model(arch, {kIdentity}, rng);
    const TransNetModel m2 = make_model(arch, {kIdentity}, rng);

    const auto single = evaluate_ensemble({m1}, d.test, 1);
    REQUIRE(single.size() == 1);
    REQUIRE(single[0].instances == 1);
    REQUIRE(single[0].accuracy == evaluate(m1, d.test, false).accuracy);

    // mean of identical logits changes nothing
    const auto copies = evaluate_ensemble({m1, m1, m1}, d.test, 3);
    REQUIRE(copies.back().accuracy == single[0].accuracy);

    // a two-model ensemble reports cumulative instance counts
    const auto pair = evaluate_ensemble({m1, m2}, d.test, 2);
    REQUIRE(pair.size() == 2);
    REQUIRE(pair[0].instances == 1);
    REQUIRE(pair[1].instances == 2);

    // one T2 model yields its head-prefix curve
    const TransNetModel t2 = make_model(arch, rotations_prefix(2), rng);
    const auto heads = evaluate_ensemble({t2}, d.test, 4);
    REQUIRE(heads.size() == 2);
    REQUIRE(heads[0].instances == 1);
    REQUIRE(heads[1].instances == 2);

    // incompatible class counts are rejected
    ArchSpec other = arch;
    other.num_classes = 3;
    const TransNetModel m3 = make_model(other, {kIdentity}, rng);
    REQUIRE_THROWS_AS(evaluate_ensemble({m1, m3}, d.test, 2), input_error);
    REQUIRE_THROWS_AS(evaluate_ensemble({m1, m2}, d.test, 3), input_error);
}
