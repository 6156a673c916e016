#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "feel/config.hpp"
#include "feel/rng.hpp"

namespace feel {

struct InstanceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One UE as the scheduler sees it: its data-quality value and the minimum
// bandwidth fraction it needs to meet the deadline (or infeasible).
struct SchedEntry {
    int id = 0;
    double value = 0.0;
    double min_alpha = 0.0;
    bool feasible = false;
};

struct SchedulingInstance {
    std::vector<SchedEntry> ues;
    int min_selected = 0; // N: best-effort lower bound on |S_t|
};

// Joint selection + allocation outcome. Invariants: sum(alpha) <= 1,
// alpha in (0,1] per selected UE, objective = sum of selected values.
struct ScheduleDecision {
    std::vector<int> selected;  // ascending UE id
    std::vector<double> alpha;  // aligned with selected
    double objective = 0.0;

    bool empty() const { return selected.empty(); }
};

namespace detail {

// order decisions by id, assign each UE its minimum fraction, then spread the
// leftover bandwidth proportionally (upload times shrink, objective unchanged)
inline ScheduleDecision finalize_decision(std::vector<const SchedEntry*> picked) {
    std::sort(picked.begin(), picked.end(),
              [](const SchedEntry* a, const SchedEntry* b) { return a->id < b->id; });
    ScheduleDecision d;
    double alpha_sum = 0.0;
    for (const auto* e : picked) {
        d.selected.push_back(e->id);
        d.alpha.push_back(e->min_alpha);
        d.objective += e->value;
        alpha_sum += e->min_alpha;
    }
    if (alpha_sum > 0.0) {
        for (auto& a : d.alpha) a /= alpha_sum; // scale so the budget is fully used
    }
    return d;
}

inline std::vector<const SchedEntry*> feasible_entries(const SchedulingInstance& inst) {
    std::vector<const SchedEntry*> out;
    for (const auto& e : inst.ues)
        if (e.feasible) out.push_back(&e);
    return out;
}

} // namespace detail

// Greedy density heuristic for the knapsack restriction of the joint
// selection/allocation problem, with the classical max-single-item fallback
// that guarantees a 1/2 approximation:
//   (i)   drop infeasible UEs;
//   (ii)  sort by V/min_alpha descending (ties: larger V, then smaller id);
//   (iii) add UEs whose min_alpha still fits the unit budget;
//   (iv)  if the best single UE beats the packed set, take that UE instead;
//   (v)   top up with the cheapest remaining UEs until N are selected
//         or nothing fits;
//   (vi)  redistribute leftover bandwidth proportionally.
inline ScheduleDecision greedy_schedule(const SchedulingInstance& inst) {
    auto feas = detail::feasible_entries(inst);
    std::sort(feas.begin(), feas.end(), [](const SchedEntry* a, const SchedEntry* b) {
        const double da = a->value / a->min_alpha;
        const double db = b->value / b->min_alpha;
        if (da != db) return da > db;
        if (a->value != b->value) return a->value > b->value;
        return a->id < b->id;
    });

    std::vector<const SchedEntry*> picked;
    std::vector<const SchedEntry*> skipped;
    double used = 0.0;
    double objective = 0.0;
    for (const auto* e : feas) {
        if (used + e->min_alpha <= 1.0) {
            picked.push_back(e);
            used += e->min_alpha;
            objective += e->value;
        } else {
            skipped.push_back(e);
        }
    }

    const SchedEntry* best_single = nullptr;
    for (const auto* e : feas)
        if (!best_single || e->value > best_single->value) best_single = e;
    if (best_single && best_single->value > objective) {
        picked = {best_single};
        used = best_single->min_alpha;
        skipped.clear();
        for (const auto* e : feas)
            if (e != best_single) skipped.push_back(e);
    }

    if (static_cast<int>(picked.size()) < inst.min_selected) {
        std::sort(skipped.begin(), skipped.end(), [](const SchedEntry* a, const SchedEntry* b) {
            if (a->min_alpha != b->min_alpha) return a->min_alpha < b->min_alpha;
            return a->id < b->id;
        });
        for (const auto* e : skipped) {
            if (static_cast<int>(picked.size()) >= inst.min_selected) break;
            if (used + e->min_alpha <= 1.0) {
                picked.push_back(e);
                used += e->min_alpha;
            }
        }
    }
    return detail::finalize_decision(std::move(picked));
}

// Exhaustive oracle over all subsets of feasible UEs. Ties go to the smaller
// subset, then to the lexicographically smallest id list. Guarded to K <= 20.
inline ScheduleDecision exact_schedule(const SchedulingInstance& inst) {
    if (inst.ues.size() > 20)
        throw InstanceError("exact_schedule: instance too large (K = " +
                            std::to_string(inst.ues.size()) + " > 20)");
    auto feas = detail::feasible_entries(inst);
    std::sort(feas.begin(), feas.end(),
              [](const SchedEntry* a, const SchedEntry* b) { return a->id < b->id; });
    const std::size_t k = feas.size();

    auto ids_of = [&](std::uint32_t mask) {
        std::vector<int> ids;
        for (std::size_t i = 0; i < k; ++i)
            if (mask & (1u << i)) ids.push_back(feas[i]->id);
        return ids; // ascending, since feas is sorted by id
    };

    std::uint32_t best_mask = 0;
    double best_obj = 0.0;
    int best_count = 0;
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        double alpha_sum = 0.0;
        double obj = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (mask & (1u << i)) {
                alpha_sum += feas[i]->min_alpha;
                obj += feas[i]->value;
                ++count;
            }
        }
        if (alpha_sum > 1.0) continue;
        bool better = obj > best_obj;
        if (obj == best_obj) {
            if (count != best_count) {
                better = count < best_count;
            } else if (best_count > 0) {
                better = ids_of(mask) < ids_of(best_mask);
            }
        }
        if (better) {
            best_mask = mask;
            best_obj = obj;
            best_count = count;
        }
    }

    std::vector<const SchedEntry*> picked;
    for (std::size_t i = 0; i < k; ++i)
        if (best_mask & (1u << i)) picked.push_back(feas[i]);
    return detail::finalize_decision(std::move(picked));
}

// Random-order baseline: same budget filling as the greedy but driven by a
// shuffled priority instead of value density.
inline ScheduleDecision random_schedule(const SchedulingInstance& inst, RngStream& rng) {
    auto feas = detail::feasible_entries(inst);
    rng.shuffle(feas);
    std::vector<const SchedEntry*> picked;
    double used = 0.0;
    for (const auto* e : feas) {
        if (used + e->min_alpha <= 1.0) {
            picked.push_back(e);
            used += e->min_alpha;
        }
    }
    return detail::finalize_decision(std::move(picked));
}

// Quality-only selection: the N highest-value UEs regardless of the wireless
// model, each granted an equal bandwidth share.
inline ScheduleDecision top_k_schedule(const SchedulingInstance& inst, int n) {
    std::vector<const SchedEntry*> all;
    for (const auto& e : inst.ues) all.push_back(&e);
    std::sort(all.begin(), all.end(), [](const SchedEntry* a, const SchedEntry* b) {
        if (a->value != b->value) return a->value > b->value;
        return a->id < b->id;
    });
    if (static_cast<int>(all.size()) > n) all.resize(static_cast<std::size_t>(n));
    std::sort(all.begin(), all.end(),
              [](const SchedEntry* a, const SchedEntry* b) { return a->id < b->id; });
    ScheduleDecision d;
    for (const auto* e : all) {
        d.selected.push_back(e->id);
        d.alpha.push_back(1.0 / static_cast<double>(all.size()));
        d.objective += e->value;
    }
    return d;
}

// Instance file for the schedule-bench command: one UE per line,
// "id value min_alpha" (comma or whitespace separated, '#' comments).
// min_alpha outside (0,1] marks the UE infeasible.
inline SchedulingInstance load_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instance file: " + path);
    SchedulingInstance inst;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        SchedEntry e;
        if (!(ss >> e.id)) continue; // blank line
        if (!(ss >> e.value >> e.min_alpha))
            throw InstanceError("instance " + path + ": malformed line " +
                                std::to_string(lineno));
        e.feasible = e.min_alpha > 0.0 && e.min_alpha <= 1.0;
        inst.ues.push_back(e);
    }
    return inst;
}

} // namespace feel
