#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "feel/dataset.hpp"
#include "feel/rng.hpp"
#include "feel/ue.hpp"

namespace feel {

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-UE index lists into a Dataset, plus the participation count ("age")
// the quality model feeds on. Lists are disjoint by construction.
struct Partition {
    std::vector<std::vector<std::size_t>> index_lists;
    std::vector<int> participation_count;

    std::size_t num_ues() const { return index_lists.size(); }
};

// Sort-by-label grouping: the dataset is chunked per class into label-pure
// groups of group_size (remainders dropped), each UE draws a uniform group
// count in [min_groups, max_groups], and groups are dealt without
// replacement. When total demand exceeds the supply of groups, per-UE counts
// are rescaled proportionally (floored, minimum 1).
inline Partition partition_sorted_groups(const Dataset& d, int num_ues, int group_size,
                                         int min_groups, int max_groups, RngStream& rng) {
    if (d.size() < static_cast<std::size_t>(num_ues) * min_groups * group_size)
        throw PartitionError("insufficient data for minimum allocation");

    // label-pure groups from data sorted by (label, index)
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.labels[a] < d.labels[b]; });
    std::vector<std::vector<std::size_t>> groups;
    std::size_t i = 0;
    while (i < order.size()) {
        const int label = d.labels[order[i]];
        std::size_t j = i;
        while (j < order.size() && d.labels[order[j]] == label) ++j;
        for (std::size_t g = i; g + group_size <= j; g += group_size)
            groups.emplace_back(order.begin() + g, order.begin() + g + group_size);
        i = j;
    }
    const std::size_t supply = groups.size();
    if (supply < static_cast<std::size_t>(num_ues) * min_groups)
        throw PartitionError("insufficient data for minimum allocation");

    std::vector<std::size_t> demand(num_ues);
    std::size_t total = 0;
    for (auto& c : demand) {
        c = min_groups + rng.uniform_int(static_cast<std::uint64_t>(max_groups - min_groups + 1));
        total += c;
    }
    if (total > supply) {
        // proportional rescale: floor, minimum 1; the minimum can push the sum
        // back over supply, so trim the largest counts until it fits
        std::size_t scaled = 0;
        for (auto& c : demand) {
            c = std::max<std::size_t>(1, c * supply / total);
            scaled += c;
        }
        while (scaled > supply) {
            auto it = std::max_element(demand.begin(), demand.end());
            if (*it <= 1) throw PartitionError("insufficient data for minimum allocation");
            --*it;
            --scaled;
        }
    }

    Partition p;
    p.index_lists.resize(num_ues);
    p.participation_count.assign(num_ues, 0);

    std::vector<std::size_t> group_order(supply);
    std::iota(group_order.begin(), group_order.end(), std::size_t{0});
    rng.shuffle(group_order);

    std::size_t next = 0;
    for (int k = 0; k < num_ues; ++k) {
        for (std::size_t g = 0; g < demand[k] && next < supply; ++g, ++next) {
            const auto& grp = groups[group_order[next]];
            p.index_lists[k].insert(p.index_lists[k].end(), grp.begin(), grp.end());
        }
        if (p.index_lists[k].empty()) throw PartitionError("insufficient data for minimum allocation");
    }
    return p;
}

// Flipped copy of the labels at `indices`: a flip_fraction share of the
// source-label samples (floored, drawn from the stream) become target_label.
// Features are never touched; callers keep the true labels for evaluation.
inline std::vector<int> apply_label_flip(const Dataset& d, const std::vector<std::size_t>& indices,
                                         const AttackSpec& attack, RngStream& rng) {
    std::vector<int> labels(indices.size());
    std::vector<std::size_t> source_pos;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        labels[i] = d.labels[indices[i]];
        if (labels[i] == attack.source_label) source_pos.push_back(i);
    }
    const std::size_t n_flip = static_cast<std::size_t>(
        attack.flip_fraction * static_cast<double>(source_pos.size()));
    auto picks = rng.sample_without_replacement(source_pos.size(), n_flip);
    for (std::size_t p : picks) labels[source_pos[p]] = attack.target_label;
    return labels;
}

} // namespace feel
