#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "feel/config.hpp"
#include "feel/rng.hpp"

namespace feel {

struct AttackSpec {
    int source_label = 6;
    int target_label = 2;
    double flip_fraction = 1.0;
};

// Static per-UE facts. Positions live inside the square cell; the dataset
// itself is held by the engine, indexed per UE through the partition slot.
struct UEProfile {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    double tx_power_w = 0.0;      // P_k
    double cpu_frequency_hz = 0.0; // f_k
    double cycles_per_sample = 0.0; // zeta_k
    int dataset_slot = 0;
    bool malicious = false;
    std::optional<AttackSpec> attack;
};

// Deploy num_ues uniformly in the cell and draw per-UE compute capacity.
// Malicious UEs come from a dedicated stream so toggling the attack never
// shifts placement or any other draw.
inline std::vector<UEProfile> make_population(const SimulationConfig& cfg, std::uint64_t seed) {
    const auto& topo = cfg.topology;
    std::vector<UEProfile> ues(topo.num_ues);
    for (int k = 0; k < topo.num_ues; ++k) {
        auto rng = derive_stream(seed, "place", 0, static_cast<std::uint64_t>(k));
        auto& ue = ues[k];
        ue.id = k;
        ue.x = rng.uniform(0.0, topo.cell_side_m);
        ue.y = rng.uniform(0.0, topo.cell_side_m);
        ue.tx_power_w = topo.tx_power_w();
        ue.cpu_frequency_hz = rng.uniform(topo.cpu_frequency_min_hz, topo.cpu_frequency_max_hz);
        ue.cycles_per_sample = topo.cycles_per_sample;
        ue.dataset_slot = k;
    }
    if (cfg.attack.enabled && cfg.attack.num_malicious > 0) {
        auto rng = derive_stream(seed, "malicious");
        auto picks = rng.sample_without_replacement(
            static_cast<std::size_t>(topo.num_ues),
            static_cast<std::size_t>(cfg.attack.num_malicious));
        for (std::size_t idx : picks) {
            ues[idx].malicious = true;
            ues[idx].attack = AttackSpec{cfg.attack.source_label, cfg.attack.target_label,
                                         cfg.attack.flip_fraction};
        }
    }
    return ues;
}

} // namespace feel
