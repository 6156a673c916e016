#pragma once

#include <cmath>
#include <vector>

#include "feel/config.hpp"
#include "feel/rng.hpp"
#include "feel/ue.hpp"

namespace feel {

// Per-UE, per-round channel state: |g|^2 = d^-exponent * |h|^2 with |h|^2
// exponentially distributed (Rayleigh amplitude).
struct ChannelRealization {
    double g_sq = 0.0;
    double distance_m = 0.0;
    double h_sq = 0.0;
    double pathloss_exponent = 0.0;
};

// Feasibility of one UE against the round deadline. min_alpha is the smallest
// bandwidth fraction that still meets the deadline; infeasible UEs carry
// feasible == false and are skipped by the scheduler.
struct Feasibility {
    bool feasible = false;
    double training_time = 0.0;
    double min_alpha = 0.0;
    double upload_time_at_min_alpha = 0.0;
};

inline ChannelRealization draw_channel(const UEProfile& ue, const TopologyConfig& topo,
                                       RngStream& rng) {
    ChannelRealization ch;
    const double cx = topo.cell_side_m / 2.0;
    const double cy = topo.cell_side_m / 2.0;
    ch.distance_m = std::hypot(ue.x - cx, ue.y - cy);
    ch.h_sq = rng.exponential(1.0);
    ch.pathloss_exponent = topo.pathloss_exponent;
    ch.g_sq = std::pow(ch.distance_m, -topo.pathloss_exponent) * ch.h_sq;
    return ch;
}

// Achievable uplink rate in bits/s for a bandwidth fraction alpha. alpha = 0
// returns 0 (continuous limit), which keeps the bisection bracket closed.
inline double rate(double alpha, double bandwidth_B, double g_sq, double tx_power_w,
                   double noise_psd_N0) {
    if (alpha <= 0.0) return 0.0;
    const double snr = g_sq * tx_power_w / (alpha * bandwidth_B * noise_psd_N0);
    return alpha * bandwidth_B * std::log2(1.0 + snr);
}

// epsilon * |D_k| * zeta_k / f_k
inline double training_time(int epochs, double dataset_units, double cycles_per_unit,
                            double cpu_frequency_hz) {
    return static_cast<double>(epochs) * dataset_units * cycles_per_unit / cpu_frequency_hz;
}

// Invert the rate at the deadline: the required upload rate is
// s / (T - t_train), and rate() is strictly increasing in alpha on (0,1],
// so the minimal fraction is found by bisection to 1e-9 absolute in alpha.
inline Feasibility min_bandwidth_fraction(double train_time, double model_size_bits,
                                          double deadline_T, double bandwidth_B, double g_sq,
                                          double tx_power_w, double noise_psd_N0) {
    Feasibility f;
    f.training_time = train_time;
    if (train_time >= deadline_T) return f; // no upload budget left
    const double required_rate = model_size_bits / (deadline_T - train_time);
    if (rate(1.0, bandwidth_B, g_sq, tx_power_w, noise_psd_N0) < required_rate) return f;
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (rate(mid, bandwidth_B, g_sq, tx_power_w, noise_psd_N0) >= required_rate) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    f.feasible = true;
    f.min_alpha = hi; // rate(hi) >= required_rate by the loop invariant
    f.upload_time_at_min_alpha =
        model_size_bits / rate(hi, bandwidth_B, g_sq, tx_power_w, noise_psd_N0);
    return f;
}

inline Feasibility min_bandwidth_fraction(const UEProfile& ue, double dataset_units,
                                          const ChannelRealization& ch,
                                          const SimulationConfig& cfg) {
    const double t_train = training_time(cfg.local_epochs, dataset_units, ue.cycles_per_sample,
                                         ue.cpu_frequency_hz);
    return min_bandwidth_fraction(t_train, cfg.model_size_s, cfg.deadline_T, cfg.bandwidth_B,
                                  ch.g_sq, ue.tx_power_w, cfg.noise_psd_N0);
}

// |D_k| in the unit zeta is expressed in: samples by default, bits when a
// bits-per-sample factor is configured.
inline double dataset_units(std::size_t sample_count, const TopologyConfig& topo) {
    const double n = static_cast<double>(sample_count);
    return topo.bits_per_sample > 0 ? n * topo.bits_per_sample : n;
}

} // namespace feel
