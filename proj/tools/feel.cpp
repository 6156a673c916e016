#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feel/config.hpp"
#include "feel/dataset.hpp"
#include "feel/engine.hpp"
#include "feel/metrics.hpp"
#include "feel/scheduler.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitInternal = 3;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            const std::string& out_dir) {
    feel::SimulationConfig cfg = feel::load_config(config_path);
    std::vector<std::uint64_t> seeds =
        seed_override ? std::vector<std::uint64_t>{*seed_override} : cfg.run_seeds();
    for (std::uint64_t s : seeds) {
        const std::string dir =
            (std::filesystem::path(out_dir) / ("seed_" + std::to_string(s))).string();
        const feel::RunSummary sum = feel::run_simulation(cfg, s, dir);
        std::cout << "seed " << sum.seed << ": final_acc=" << sum.final_global_acc;
        if (sum.has_attack)
            std::cout << " source_recall_last3=" << sum.mean_source_recall_last3;
        if (sum.skipped_rounds > 0) std::cout << " skipped=" << sum.skipped_rounds;
        std::cout << " -> " << dir << '\n';
    }
    return kExitOk;
}

int cmd_aggregate(const std::vector<std::string>& run_dirs, const std::string& out_file,
                  std::optional<int> source_class) {
    const feel::AggregateResult agg = feel::aggregate_runs(run_dirs, source_class);
    feel::write_aggregate_csv(agg, out_file);
    const std::size_t last = agg.acc_mean.size() - 1;
    std::cout << "aggregated " << agg.n_runs << " runs, " << agg.acc_mean.size()
              << " rounds; final acc " << agg.acc_mean[last] << " +/- " << agg.acc_std[last]
              << ", source(" << agg.source_label << ") recall " << agg.recall_mean[last]
              << " +/- " << agg.recall_std[last] << " -> " << out_file << '\n';
    return kExitOk;
}

void print_decision(const char* name, const feel::ScheduleDecision& d) {
    std::cout << name << ": objective=" << d.objective << " selected=[";
    for (std::size_t i = 0; i < d.selected.size(); ++i)
        std::cout << (i ? "," : "") << d.selected[i];
    std::cout << "] alpha=[";
    for (std::size_t i = 0; i < d.alpha.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", d.alpha[i]);
        std::cout << (i ? "," : "") << buf;
    }
    std::cout << "]\n";
}

int cmd_schedule_bench(const std::string& instance_file) {
    const feel::SchedulingInstance inst = feel::load_instance_file(instance_file);
    const feel::ScheduleDecision greedy = feel::greedy_schedule(inst);
    const feel::ScheduleDecision exact = feel::exact_schedule(inst);
    print_decision("greedy", greedy);
    print_decision("exact", exact);
    const double ratio = exact.objective > 0.0 ? greedy.objective / exact.objective : 1.0;
    std::cout << "ratio: " << ratio << '\n';
    return kExitOk;
}

int cmd_gen_synthetic(const std::string& out_dir, int classes, int per_class, int rows, int cols,
                      std::uint64_t seed, double test_fraction) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw feel::IoError("cannot create " + out_dir + ": " + ec.message());

    auto rng = feel::derive_stream(seed, "synth_data");
    const feel::Dataset train =
        feel::generate_synthetic(classes, per_class, rows * cols, rng);
    feel::write_idx(train, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                    (fs::path(out_dir) / "train-images-idx3-ubyte").string(),
                    (fs::path(out_dir) / "train-labels-idx1-ubyte").string());

    const int test_per_class =
        std::max(1, static_cast<int>(static_cast<double>(per_class) * test_fraction));
    auto test_rng = feel::derive_stream(seed, "synth_test");
    const feel::Dataset test =
        feel::generate_synthetic(classes, test_per_class, rows * cols, test_rng);
    feel::write_idx(test, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                    (fs::path(out_dir) / "t10k-images-idx3-ubyte").string(),
                    (fs::path(out_dir) / "t10k-labels-idx1-ubyte").string());

    std::cout << "wrote " << train.size() << " train / " << test.size() << " test samples ("
              << rows << "x" << cols << ", " << classes << " classes) to " << out_dir << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feelsim: data-quality based scheduling simulator for federated edge learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    auto* run = app.add_subcommand("run", "run simulations from a config file");
    run->add_option("--config", config_path, "config file (JSON)")->required();
    run->add_option("--seed", seed_override, "override the config seed (single run)");
    run->add_option("--out", out_dir, "output directory (per-seed subdirs)");

    std::vector<std::string> run_dirs;
    std::string agg_out = "aggregate.csv";
    std::optional<int> source_class;
    auto* agg = app.add_subcommand("aggregate", "average metrics of several finished runs");
    agg->add_option("dirs", run_dirs, "run directories (each with round_metrics.csv)")
        ->required();
    agg->add_option("--out", agg_out, "output CSV file");
    agg->add_option("--source-class", source_class, "class whose recall is tracked");

    std::string instance_file;
    auto* bench = app.add_subcommand("schedule-bench",
                                     "compare the greedy and exact schedulers on an instance");
    bench->add_option("instance", instance_file, "instance file: 'id value min_alpha' per line")
        ->required();

    std::string gen_dir = "data";
    int gen_classes = 10;
    int gen_per_class = 6000;
    int gen_rows = 8;
    int gen_cols = 8;
    std::uint64_t gen_seed = 42;
    double gen_test_fraction = 0.1;
    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset in IDX format");
    gen->add_option("--out-dir", gen_dir, "target directory");
    gen->add_option("--classes", gen_classes, "number of classes");
    gen->add_option("--per-class", gen_per_class, "training samples per class");
    gen->add_option("--rows", gen_rows, "image rows");
    gen->add_option("--cols", gen_cols, "image columns");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--test-fraction", gen_test_fraction, "test set size relative to train");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed_override, out_dir);
        if (agg->parsed()) return cmd_aggregate(run_dirs, agg_out, source_class);
        if (bench->parsed()) return cmd_schedule_bench(instance_file);
        if (gen->parsed())
            return cmd_gen_synthetic(gen_dir, gen_classes, gen_per_class, gen_rows, gen_cols,
                                     gen_seed, gen_test_fraction);
    } catch (const feel::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const feel::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const feel::InstanceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const feel::IdxFormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const feel::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitOk;
}
