#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace feel {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SelectionMode { dqs, top_k, random };

struct LearnerConfig {
    int hidden_width = 64;
    double learning_rate = 0.05;
    int batch_size = 32;
};

struct AttackConfig {
    bool enabled = false;
    int num_malicious = 0;
    int source_label = 6;
    int target_label = 2;
    double flip_fraction = 1.0;
    bool lying = false;          // report acc_local inflated by lying_margin
    double lying_margin = 0.3;
};

struct TopologyConfig {
    double cell_side_m = 500.0;
    double pathloss_exponent = 3.0;
    int num_ues = 50;
    double tx_power_dbm = -23.0;
    double cpu_frequency_min_hz = 4.0e8;
    double cpu_frequency_max_hz = 1.2e9;
    double cycles_per_sample = 4.0e7;
    double bits_per_sample = 0.0; // > 0 switches zeta to cycles/bit

    double tx_power_w() const { return 1e-3 * std::pow(10.0, tx_power_dbm / 10.0); }
};

struct SyntheticConfig {
    int classes = 10;
    int per_class = 1000;
    int dim = 64;
};

struct DatasetConfig {
    std::string source = "synthetic"; // "synthetic" | "mnist_idx"
    std::string data_dir = ".";
    std::string images_file = "train-images-idx3-ubyte";
    std::string labels_file = "train-labels-idx1-ubyte";
    long train_pool = 0; // 0 = use all samples
    double test_fraction = 0.1;
    int group_size = 50;
    int min_groups = 1;
    int max_groups = 30;
    // dataset-scope seed: generation, pooling and the test split stay fixed
    // across run seeds, mirroring a fixed corpus shared by all runs
    std::uint64_t seed = 42;
    SyntheticConfig synthetic;
};

struct SimulationConfig {
    int rounds_max = 15;
    double deadline_T = 300.0;
    double bandwidth_B = 1e6;
    double model_size_s = 8e5; // bits
    int local_epochs = 5;
    int min_selected_N = 5;
    double noise_psd_N0 = 1e-18;
    double reputation_rate = 1.0; // eta
    double beta1 = 0.5;
    double beta2 = 0.5;
    std::array<double, 3> gamma_weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    // one entry = constant weights; several = static per-round schedule
    std::vector<std::array<double, 2>> omega_schedule = {{0.5, 0.5}};
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds; // optional multi-run list
    SelectionMode selection_mode = SelectionMode::dqs;
    LearnerConfig learner;
    AttackConfig attack;
    TopologyConfig topology;
    DatasetConfig dataset;

    // weights for communication round t (1-based); schedule is clamped at its tail
    std::array<double, 2> omega_at(int round) const {
        std::size_t i = static_cast<std::size_t>(round > 0 ? round - 1 : 0);
        if (i >= omega_schedule.size()) i = omega_schedule.size() - 1;
        return omega_schedule[i];
    }

    std::vector<std::uint64_t> run_seeds() const {
        return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
    }
};

namespace detail {

constexpr double kWeightSumTol = 1e-12;

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

inline void fail(const std::string& field, const std::string& why) {
    throw ValidationError("config: " + field + " " + why);
}

} // namespace detail

inline void validate(const SimulationConfig& c) {
    using detail::fail;
    if (c.rounds_max < 1) fail("rounds_max", "must be >= 1");
    if (!(c.deadline_T > 0)) fail("deadline_T", "must be > 0");
    if (!(c.bandwidth_B > 0)) fail("bandwidth_B", "must be > 0");
    if (!(c.model_size_s > 0)) fail("model_size_s", "must be > 0");
    if (c.local_epochs < 1) fail("local_epochs", "must be >= 1");
    if (c.min_selected_N < 0) fail("min_selected_N", "must be >= 0");
    if (!(c.noise_psd_N0 > 0)) fail("noise_psd_N0", "must be > 0");
    if (!(c.reputation_rate >= 0.0 && c.reputation_rate <= 1.0))
        fail("reputation_rate", "must lie in [0,1]");
    if (c.beta1 < 0) fail("beta1", "must be >= 0");
    if (c.beta2 < 0) fail("beta2", "must be >= 0");
    double gsum = 0;
    for (double g : c.gamma_weights) {
        if (g < 0) fail("gamma_weights", "entries must be >= 0");
        gsum += g;
    }
    if (std::fabs(gsum - 1.0) > detail::kWeightSumTol)
        fail("gamma_weights", "must sum to 1 (got " + std::to_string(gsum) + ")");
    if (c.omega_schedule.empty()) fail("omega", "schedule must be non-empty");
    for (const auto& w : c.omega_schedule) {
        if (w[0] < 0 || w[1] < 0) fail("omega", "entries must be >= 0");
        if (std::fabs(w[0] + w[1] - 1.0) > detail::kWeightSumTol)
            fail("omega", "omega1+omega2 must sum to 1 (got " + std::to_string(w[0] + w[1]) + ")");
    }
    if (c.learner.hidden_width < 1) fail("learner.hidden_width", "must be >= 1");
    if (!(c.learner.learning_rate >= 0)) fail("learner.learning_rate", "must be >= 0");
    if (c.learner.batch_size < 1) fail("learner.batch_size", "must be >= 1");
    if (c.attack.enabled) {
        if (c.attack.num_malicious < 0 || c.attack.num_malicious > c.topology.num_ues)
            fail("attack.num_malicious", "must lie in [0, num_ues]");
        if (c.attack.source_label == c.attack.target_label)
            fail("attack.source_label", "must differ from target_label");
        if (c.attack.source_label < 0 || c.attack.target_label < 0)
            fail("attack.source_label", "labels must be >= 0");
        if (!(c.attack.flip_fraction >= 0.0 && c.attack.flip_fraction <= 1.0))
            fail("attack.flip_fraction", "must lie in [0,1]");
    }
    if (!(c.topology.cell_side_m > 0)) fail("topology.cell_side_m", "must be > 0");
    if (!(c.topology.pathloss_exponent > 0)) fail("topology.pathloss_exponent", "must be > 0");
    if (c.topology.num_ues < 1) fail("topology.num_ues", "must be >= 1");
    if (!(c.topology.cpu_frequency_min_hz > 0) ||
        c.topology.cpu_frequency_max_hz < c.topology.cpu_frequency_min_hz)
        fail("topology.cpu_frequency_hz", "must be a positive [min,max] range");
    if (!(c.topology.cycles_per_sample > 0)) fail("topology.cycles_per_sample", "must be > 0");
    if (c.topology.bits_per_sample < 0) fail("topology.bits_per_sample", "must be >= 0");
    if (c.dataset.source != "synthetic" && c.dataset.source != "mnist_idx")
        fail("dataset.source", "must be \"synthetic\" or \"mnist_idx\"");
    if (!(c.dataset.test_fraction > 0.0 && c.dataset.test_fraction < 1.0))
        fail("dataset.test_fraction", "must lie in (0,1)");
    if (c.dataset.train_pool < 0) fail("dataset.train_pool", "must be >= 0");
    if (c.dataset.group_size < 1) fail("dataset.group_size", "must be >= 1");
    if (c.dataset.min_groups < 1) fail("dataset.min_groups", "must be >= 1");
    if (c.dataset.max_groups < c.dataset.min_groups)
        fail("dataset.max_groups", "must be >= min_groups");
    if (c.dataset.source == "synthetic") {
        const auto& s = c.dataset.synthetic;
        if (s.classes < 2) fail("dataset.synthetic.classes", "must be >= 2");
        if (s.per_class < 1) fail("dataset.synthetic.per_class", "must be >= 1");
        if (s.dim < 1) fail("dataset.synthetic.dim", "must be >= 1");
    }
}

inline SimulationConfig parse_config(const nlohmann::json& j) {
    using detail::get_or;
    SimulationConfig c;
    try {
        c.rounds_max = get_or(j, "rounds_max", c.rounds_max);
        c.deadline_T = get_or(j, "deadline_T", c.deadline_T);
        c.bandwidth_B = get_or(j, "bandwidth_B", c.bandwidth_B);
        c.model_size_s = get_or(j, "model_size_s", c.model_size_s);
        c.local_epochs = get_or(j, "local_epochs", c.local_epochs);
        c.min_selected_N = get_or(j, "min_selected_N", c.min_selected_N);
        c.noise_psd_N0 = get_or(j, "noise_psd_N0", c.noise_psd_N0);
        c.reputation_rate = get_or(j, "reputation_rate", c.reputation_rate);
        c.beta1 = get_or(j, "beta1", c.beta1);
        c.beta2 = get_or(j, "beta2", c.beta2);
        if (j.contains("gamma_weights")) {
            auto g = j.at("gamma_weights").get<std::vector<double>>();
            if (g.size() != 3)
                throw ValidationError("config: gamma_weights must have exactly 3 entries");
            c.gamma_weights = {g[0], g[1], g[2]};
        }
        if (j.contains("omega")) {
            const auto& w = j.at("omega");
            c.omega_schedule.clear();
            if (w.is_array() && !w.empty() && w[0].is_array()) {
                for (const auto& e : w) {
                    auto p = e.get<std::vector<double>>();
                    if (p.size() != 2)
                        throw ValidationError("config: omega schedule entries must be pairs");
                    c.omega_schedule.push_back({p[0], p[1]});
                }
            } else {
                auto p = w.get<std::vector<double>>();
                if (p.size() != 2) throw ValidationError("config: omega must be a pair");
                c.omega_schedule.push_back({p[0], p[1]});
            }
        }
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("selection_mode")) {
            std::string m = j.at("selection_mode").get<std::string>();
            if (m == "dqs") c.selection_mode = SelectionMode::dqs;
            else if (m == "top_k") c.selection_mode = SelectionMode::top_k;
            else if (m == "random") c.selection_mode = SelectionMode::random;
            else throw ValidationError("config: selection_mode must be dqs, top_k or random");
        }
        if (j.contains("learner")) {
            const auto& l = j.at("learner");
            c.learner.hidden_width = get_or(l, "hidden_width", c.learner.hidden_width);
            c.learner.learning_rate = get_or(l, "learning_rate", c.learner.learning_rate);
            c.learner.batch_size = get_or(l, "batch_size", c.learner.batch_size);
        }
        if (j.contains("attack")) {
            const auto& a = j.at("attack");
            c.attack.enabled = get_or(a, "enabled", c.attack.enabled);
            c.attack.num_malicious = get_or(a, "num_malicious", c.attack.num_malicious);
            c.attack.source_label = get_or(a, "source_label", c.attack.source_label);
            c.attack.target_label = get_or(a, "target_label", c.attack.target_label);
            c.attack.flip_fraction = get_or(a, "flip_fraction", c.attack.flip_fraction);
            c.attack.lying = get_or(a, "lying", c.attack.lying);
            c.attack.lying_margin = get_or(a, "lying_margin", c.attack.lying_margin);
        }
        if (j.contains("topology")) {
            const auto& t = j.at("topology");
            c.topology.cell_side_m = get_or(t, "cell_side_m", c.topology.cell_side_m);
            c.topology.pathloss_exponent =
                get_or(t, "pathloss_exponent", c.topology.pathloss_exponent);
            c.topology.num_ues = get_or(t, "num_ues", c.topology.num_ues);
            c.topology.tx_power_dbm = get_or(t, "tx_power_dbm", c.topology.tx_power_dbm);
            if (t.contains("cpu_frequency_hz")) {
                auto f = t.at("cpu_frequency_hz").get<std::vector<double>>();
                if (f.size() != 2)
                    throw ValidationError("config: topology.cpu_frequency_hz must be [min,max]");
                c.topology.cpu_frequency_min_hz = f[0];
                c.topology.cpu_frequency_max_hz = f[1];
            }
            c.topology.cycles_per_sample =
                get_or(t, "cycles_per_sample", c.topology.cycles_per_sample);
            c.topology.bits_per_sample = get_or(t, "bits_per_sample", c.topology.bits_per_sample);
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            c.dataset.source = get_or(d, "source", c.dataset.source);
            c.dataset.data_dir = get_or(d, "data_dir", c.dataset.data_dir);
            c.dataset.images_file = get_or(d, "images_file", c.dataset.images_file);
            c.dataset.labels_file = get_or(d, "labels_file", c.dataset.labels_file);
            c.dataset.train_pool = get_or(d, "train_pool", c.dataset.train_pool);
            c.dataset.test_fraction = get_or(d, "test_fraction", c.dataset.test_fraction);
            c.dataset.group_size = get_or(d, "group_size", c.dataset.group_size);
            c.dataset.min_groups = get_or(d, "min_groups", c.dataset.min_groups);
            c.dataset.max_groups = get_or(d, "max_groups", c.dataset.max_groups);
            c.dataset.seed = get_or<std::uint64_t>(d, "seed", c.dataset.seed);
            if (d.contains("synthetic")) {
                const auto& s = d.at("synthetic");
                c.dataset.synthetic.classes = get_or(s, "classes", c.dataset.synthetic.classes);
                c.dataset.synthetic.per_class =
                    get_or(s, "per_class", c.dataset.synthetic.per_class);
                c.dataset.synthetic.dim = get_or(s, "dim", c.dataset.synthetic.dim);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    return parse_config(j);
}

} // namespace feel
