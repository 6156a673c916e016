#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feel/channel.hpp"
#include "feel/config.hpp"
#include "feel/dataset.hpp"
#include "feel/mlp.hpp"
#include "feel/partition.hpp"
#include "feel/quality.hpp"
#include "feel/rng.hpp"
#include "feel/scheduler.hpp"
#include "feel/ue.hpp"

namespace feel {

// Everything observed in one communication round.
struct RoundRecord {
    int round = 0;
    bool skipped = false;
    std::vector<int> selected;       // ascending UE id
    std::vector<double> alpha;       // aligned with selected
    std::vector<double> acc_local;   // aligned with selected (as reported)
    std::vector<double> acc_test;    // aligned with selected
    std::vector<double> train_time;  // aligned with selected
    std::vector<double> upload_time; // aligned with selected, at assigned alpha
    double objective = 0.0;
    double global_acc = 0.0;
    std::vector<double> recall;      // per class, global model
    // per UE (whole population), the values the scheduler acted on
    std::vector<double> reputation;
    std::vector<double> diversity;
    std::vector<double> value;
    double sim_time = 0.0;           // max over selected of t_train + t_up
};

// One deterministic simulation run: fixed dataset, population and streams.
struct Simulation {
    SimulationConfig cfg;
    std::uint64_t seed = 0;
    Dataset train;
    Dataset test;
    Partition partition;
    std::vector<UEProfile> ues;
    std::vector<std::vector<int>> local_labels;          // per UE, flipped if malicious
    std::vector<std::vector<std::size_t>> label_counts;  // as reported to the server
    QualityState quality;
    ModelParams global;
    std::vector<RoundRecord> records;
};

namespace detail {

inline std::string dataset_dir(const DatasetConfig& d) {
    if (const char* env = std::getenv("FEEL_DATA_DIR"); env && *env) return env;
    return d.data_dir;
}

inline Dataset load_source(const SimulationConfig& cfg) {
    const auto& d = cfg.dataset;
    if (d.source == "synthetic") {
        auto rng = derive_stream(d.seed, "synth_data");
        return generate_synthetic(d.synthetic.classes, d.synthetic.per_class, d.synthetic.dim,
                                  rng);
    }
    const std::filesystem::path dir = dataset_dir(d);
    return load_mnist_idx((dir / d.images_file).string(), (dir / d.labels_file).string());
}

} // namespace detail

inline Simulation make_simulation(const SimulationConfig& cfg, std::uint64_t seed) {
    Simulation sim;
    sim.cfg = cfg;
    sim.seed = seed;

    Dataset full = detail::load_source(cfg);
    if (cfg.dataset.train_pool > 0 &&
        static_cast<std::size_t>(cfg.dataset.train_pool) < full.size()) {
        auto rng = derive_stream(cfg.dataset.seed, "pool");
        full = subsample(full, static_cast<std::size_t>(cfg.dataset.train_pool), rng);
    }
    {
        auto rng = derive_stream(cfg.dataset.seed, "split");
        auto [train, test] = split_test(full, cfg.dataset.test_fraction, rng);
        sim.train = std::move(train);
        sim.test = std::move(test);
    }

    {
        auto rng = derive_stream(seed, "partition");
        sim.partition = partition_sorted_groups(sim.train, cfg.topology.num_ues,
                                                cfg.dataset.group_size, cfg.dataset.min_groups,
                                                cfg.dataset.max_groups, rng);
    }

    sim.ues = make_population(cfg, seed);

    const auto num_ues = static_cast<std::size_t>(cfg.topology.num_ues);
    sim.local_labels.resize(num_ues);
    sim.label_counts.resize(num_ues);
    for (std::size_t k = 0; k < num_ues; ++k) {
        const auto& idx = sim.partition.index_lists[k];
        if (sim.ues[k].attack) {
            auto rng = derive_stream(seed, "flip", 0, k);
            sim.local_labels[k] = apply_label_flip(sim.train, idx, *sim.ues[k].attack, rng);
        } else {
            sim.local_labels[k].reserve(idx.size());
            for (std::size_t i : idx) sim.local_labels[k].push_back(sim.train.labels[i]);
        }
        auto& counts = sim.label_counts[k];
        counts.assign(static_cast<std::size_t>(sim.train.num_classes), 0);
        for (int l : sim.local_labels[k]) ++counts[static_cast<std::size_t>(l)];
    }

    sim.quality = QualityState(num_ues); // reputations initialized to 1

    {
        auto rng = derive_stream(seed, "model_init");
        sim.global = init_params(static_cast<int>(sim.train.dim), cfg.learner.hidden_width,
                                 sim.train.num_classes, rng);
    }
    return sim;
}

// One pass of the training procedure: score, schedule, train, aggregate,
// update reputations, evaluate.
inline RoundRecord run_round(Simulation& sim, int round) {
    const auto& cfg = sim.cfg;
    const auto num_ues = static_cast<std::size_t>(cfg.topology.num_ues);
    RoundRecord rec;
    rec.round = round;

    // channel + feasibility
    std::vector<ChannelRealization> channel(num_ues);
    std::vector<Feasibility> feas(num_ues);
    for (std::size_t k = 0; k < num_ues; ++k) {
        auto rng = derive_stream(sim.seed, "fading", static_cast<std::uint64_t>(round), k);
        channel[k] = draw_channel(sim.ues[k], cfg.topology, rng);
        const double units =
            dataset_units(sim.partition.index_lists[k].size(), cfg.topology);
        feas[k] = min_bandwidth_fraction(sim.ues[k], units, channel[k], cfg);
    }

    // data-quality scores entering this round
    PopulationStats stats;
    for (std::size_t k = 0; k < num_ues; ++k) {
        stats.max_dataset_size =
            std::max(stats.max_dataset_size, sim.partition.index_lists[k].size());
        stats.max_participation =
            std::max(stats.max_participation, sim.partition.participation_count[k]);
    }
    const auto omega = cfg.omega_at(round);
    SchedulingInstance inst;
    inst.min_selected = cfg.min_selected_N;
    for (std::size_t k = 0; k < num_ues; ++k) {
        auto& q = sim.quality;
        q.metrics[k] = diversity_metrics(sim.label_counts[k], sim.partition.index_lists[k].size(),
                                         sim.partition.participation_count[k], stats,
                                         sim.train.num_classes);
        q.diversity[k] = diversity_index(q.metrics[k], cfg.gamma_weights);
        q.value[k] = quality_value(q.reputation[k], q.diversity[k], omega[0], omega[1]);
        inst.ues.push_back({static_cast<int>(k), q.value[k], feas[k].min_alpha, feas[k].feasible});
    }
    rec.reputation = sim.quality.reputation;
    rec.diversity = sim.quality.diversity;
    rec.value = sim.quality.value;

    ScheduleDecision decision;
    switch (cfg.selection_mode) {
    case SelectionMode::dqs:
        decision = greedy_schedule(inst);
        break;
    case SelectionMode::random: {
        auto rng = derive_stream(sim.seed, "sched_random", static_cast<std::uint64_t>(round));
        decision = random_schedule(inst, rng);
        break;
    }
    case SelectionMode::top_k:
        decision = top_k_schedule(inst, cfg.min_selected_N);
        break;
    }

    if (decision.empty()) {
        rec.skipped = true;
        const EvalResult ev = evaluate(sim.global, sim.test);
        rec.global_acc = ev.accuracy;
        rec.recall = ev.per_class_recall;
        return rec;
    }

    rec.selected = decision.selected;
    rec.alpha = decision.alpha;
    rec.objective = decision.objective;

    // local training on the selected UEs, ascending id
    std::vector<ModelParams> updates;
    updates.reserve(decision.selected.size());
    for (std::size_t s = 0; s < decision.selected.size(); ++s) {
        const auto k = static_cast<std::size_t>(decision.selected[s]);
        auto rng = derive_stream(sim.seed, "train", static_cast<std::uint64_t>(round), k);
        LocalTrainResult r =
            local_train(sim.global, sim.train, sim.partition.index_lists[k],
                        sim.local_labels[k], cfg.local_epochs, cfg.learner.learning_rate,
                        cfg.learner.batch_size, rng);
        double reported = r.acc_local;
        if (sim.ues[k].malicious && cfg.attack.lying)
            reported = std::min(1.0, reported + cfg.attack.lying_margin);
        rec.acc_local.push_back(reported);
        rec.acc_test.push_back(evaluate(r.params, sim.test).accuracy);
        updates.push_back(std::move(r.params));

        rec.train_time.push_back(feas[k].training_time);
        const double r_up = rate(decision.alpha[s], cfg.bandwidth_B, channel[k].g_sq,
                                 sim.ues[k].tx_power_w, cfg.noise_psd_N0);
        rec.upload_time.push_back(cfg.model_size_s / r_up);
        rec.sim_time = std::max(rec.sim_time, rec.train_time.back() + rec.upload_time.back());
    }

    // weighted aggregation
    {
        std::vector<std::pair<const ModelParams*, double>> weighted;
        for (std::size_t s = 0; s < updates.size(); ++s) {
            const auto k = static_cast<std::size_t>(decision.selected[s]);
            weighted.emplace_back(&updates[s],
                                  static_cast<double>(sim.partition.index_lists[k].size()));
        }
        sim.global = fedavg(weighted);
    }

    // reputation update from the round's reports
    double avg_acc = 0.0;
    for (double a : rec.acc_local) avg_acc += a;
    avg_acc /= static_cast<double>(rec.acc_local.size());
    for (std::size_t s = 0; s < decision.selected.size(); ++s) {
        const auto k = static_cast<std::size_t>(decision.selected[s]);
        sim.quality.reputation[k] =
            update_reputation(sim.quality.reputation[k], rec.acc_local[s], avg_acc,
                              rec.acc_test[s], cfg.reputation_rate, cfg.beta1, cfg.beta2);
        sim.partition.participation_count[k] += 1;
    }

    const EvalResult ev = evaluate(sim.global, sim.test);
    rec.global_acc = ev.accuracy;
    rec.recall = ev.per_class_recall;
    return rec;
}

struct RunSummary {
    std::uint64_t seed = 0;
    int rounds = 0;
    int skipped_rounds = 0;
    double final_global_acc = 0.0;
    double mean_source_recall_last3 = 0.0;
    bool has_attack = false;
    int source_label = -1;
};

namespace detail {

inline void write_double(std::ofstream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

inline void write_ue_metrics(const Simulation& sim, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "round,ue_id,selected,alpha,R,I,V,acc_local,acc_test\n";
    for (const auto& rec : sim.records) {
        std::vector<int> slot(sim.ues.size(), -1);
        for (std::size_t s = 0; s < rec.selected.size(); ++s)
            slot[static_cast<std::size_t>(rec.selected[s])] = static_cast<int>(s);
        for (std::size_t k = 0; k < sim.ues.size(); ++k) {
            const int s = slot[k];
            out << rec.round << ',' << k << ',' << (s >= 0 ? 1 : 0) << ',';
            write_double(out, s >= 0 ? rec.alpha[static_cast<std::size_t>(s)] : 0.0);
            out << ',';
            write_double(out, rec.reputation[k]);
            out << ',';
            write_double(out, rec.diversity[k]);
            out << ',';
            write_double(out, rec.value[k]);
            out << ',';
            if (s >= 0) write_double(out, rec.acc_local[static_cast<std::size_t>(s)]);
            out << ',';
            if (s >= 0) write_double(out, rec.acc_test[static_cast<std::size_t>(s)]);
            out << '\n';
        }
    }
}

inline void write_round_metrics(const Simulation& sim, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const int classes = sim.train.num_classes;
    out << "round,global_acc";
    for (int c = 0; c < classes; ++c) out << ",recall_" << c;
    out << ",objective,skipped\n";
    for (const auto& rec : sim.records) {
        out << rec.round << ',';
        write_double(out, rec.global_acc);
        for (int c = 0; c < classes; ++c) {
            out << ',';
            write_double(out, rec.recall[static_cast<std::size_t>(c)]);
        }
        out << ',';
        write_double(out, rec.objective);
        out << ',' << (rec.skipped ? 1 : 0) << '\n';
    }
}

inline RunSummary summarize(const Simulation& sim) {
    RunSummary s;
    s.seed = sim.seed;
    s.rounds = static_cast<int>(sim.records.size());
    for (const auto& r : sim.records)
        if (r.skipped) ++s.skipped_rounds;
    if (!sim.records.empty()) s.final_global_acc = sim.records.back().global_acc;
    s.has_attack = sim.cfg.attack.enabled;
    if (s.has_attack) {
        s.source_label = sim.cfg.attack.source_label;
        const std::size_t n = sim.records.size();
        const std::size_t take = std::min<std::size_t>(3, n);
        double sum = 0.0;
        for (std::size_t i = n - take; i < n; ++i)
            sum += sim.records[i].recall[static_cast<std::size_t>(s.source_label)];
        if (take > 0) s.mean_source_recall_last3 = sum / static_cast<double>(take);
    }
    return s;
}

inline void write_summary(const Simulation& sim, const RunSummary& s, const std::string& path) {
    nlohmann::json j;
    j["seed"] = s.seed;
    j["rounds"] = s.rounds;
    j["skipped_rounds"] = s.skipped_rounds;
    j["final_global_acc"] = s.final_global_acc;
    if (s.has_attack) {
        j["source_label"] = s.source_label;
        j["mean_source_recall_last3"] = s.mean_source_recall_last3;
    } else {
        j["source_label"] = nullptr;
    }
    switch (sim.cfg.selection_mode) {
    case SelectionMode::dqs: j["selection_mode"] = "dqs"; break;
    case SelectionMode::top_k: j["selection_mode"] = "top_k"; break;
    case SelectionMode::random: j["selection_mode"] = "random"; break;
    }
    j["omega1"] = sim.cfg.omega_at(1)[0];
    j["omega2"] = sim.cfg.omega_at(1)[1];
    j["final_reputation"] = sim.quality.reputation;
    std::vector<int> malicious;
    for (const auto& ue : sim.ues)
        if (ue.malicious) malicious.push_back(ue.id);
    j["malicious_ues"] = malicious;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace detail

// Run all rounds for one seed and drop ue_metrics.csv, round_metrics.csv and
// summary.json into out_dir.
inline RunSummary run_simulation(const SimulationConfig& cfg, std::uint64_t seed,
                                 const std::string& out_dir) {
    Simulation sim = make_simulation(cfg, seed);
    for (int t = 1; t <= cfg.rounds_max; ++t) sim.records.push_back(run_round(sim, t));

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    const std::filesystem::path dir(out_dir);
    detail::write_ue_metrics(sim, (dir / "ue_metrics.csv").string());
    detail::write_round_metrics(sim, (dir / "round_metrics.csv").string());
    const RunSummary s = detail::summarize(sim);
    detail::write_summary(sim, s, (dir / "summary.json").string());
    return s;
}

} // namespace feel
