#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

namespace feel {

// Population context needed to normalize the per-UE metrics.
struct PopulationStats {
    std::size_t max_dataset_size = 0;
    int max_participation = 0;
};

// Per-UE quality state as tracked by the server: reputation R, diversity
// index I, combined value V, and the three normalized metrics behind I
// (elements diversity, dataset size, age).
struct QualityState {
    std::vector<double> reputation;
    std::vector<double> diversity;
    std::vector<double> value;
    std::vector<std::array<double, 3>> metrics;

    explicit QualityState(std::size_t num_ues = 0)
        : reputation(num_ues, 1.0),
          diversity(num_ues, 0.0),
          value(num_ues, 0.0),
          metrics(num_ues, {0.0, 0.0, 0.0}) {}
};

// Gini-Simpson index 1 - sum((n_c/n)^2): probability that two samples drawn
// at random carry different labels. In [0, 1 - 1/C].
inline double gini_simpson(const std::vector<std::size_t>& label_counts) {
    std::size_t total = 0;
    for (std::size_t c : label_counts) total += c;
    if (total == 0) throw std::invalid_argument("gini_simpson: empty dataset");
    double sum_sq = 0.0;
    for (std::size_t c : label_counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

// The three normalized metrics v_i feeding the diversity index:
//   elements diversity — Gini-Simpson scaled by its maximum (1 - 1/C),
//   dataset size       — |D_k| / max_j |D_j|,
//   age                — freshness 1/(1 + participation_count).
inline std::array<double, 3> diversity_metrics(const std::vector<std::size_t>& label_counts,
                                               std::size_t dataset_size, int participation_count,
                                               const PopulationStats& stats, int num_classes) {
    const double gs_max = 1.0 - 1.0 / static_cast<double>(num_classes);
    const double v_elements = gs_max > 0 ? gini_simpson(label_counts) / gs_max : 0.0;
    const double v_size = stats.max_dataset_size > 0
                              ? static_cast<double>(dataset_size) /
                                    static_cast<double>(stats.max_dataset_size)
                              : 0.0;
    const double v_age = 1.0 / (1.0 + static_cast<double>(participation_count));
    return {v_elements, v_size, v_age};
}

// I_k = sum_i v_i * gamma_i
inline double diversity_index(const std::array<double, 3>& metrics,
                              const std::array<double, 3>& gamma_weights) {
    return metrics[0] * gamma_weights[0] + metrics[1] * gamma_weights[1] +
           metrics[2] * gamma_weights[2];
}

inline double diversity_index(const std::vector<std::size_t>& label_counts,
                              std::size_t dataset_size, int participation_count,
                              const PopulationStats& stats, int num_classes,
                              const std::array<double, 3>& gamma_weights) {
    return diversity_index(
        diversity_metrics(label_counts, dataset_size, participation_count, stats, num_classes),
        gamma_weights);
}

// R_k^t = R_k^{t-1} - eta * (beta1*(acc_local - avg_acc) + beta2*(acc_local - acc_test)),
// clamped to [0,1]. Reporting above the baselines drives reputation down.
inline double update_reputation(double reputation_prev, double acc_local, double avg_acc,
                                double acc_test, double eta, double beta1, double beta2) {
    const double correction =
        eta * (beta1 * (acc_local - avg_acc) + beta2 * (acc_local - acc_test));
    return std::clamp(reputation_prev - correction, 0.0, 1.0);
}

// V_k = omega1 * R_k + omega2 * I_k
inline double quality_value(double reputation, double diversity, double omega1, double omega2) {
    return omega1 * reputation + omega2 * diversity;
}

} // namespace feel
