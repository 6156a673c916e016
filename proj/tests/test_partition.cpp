#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "feel/dataset.hpp"
#include "feel/partition.hpp"
#include "feel/rng.hpp"

using namespace feel;

TEST_CASE("the 1200-group setup: 60k samples, groups of 50, 50 UEs") {
    auto rng = derive_stream(1, "synth_data");
    const Dataset d = generate_synthetic(10, 6000, 4, rng); // balanced 60,000
    auto prng = derive_stream(1, "partition");
    const Partition p = partition_sorted_groups(d, 50, 50, 1, 30, prng);

    REQUIRE(p.num_ues() == 50);
    std::set<std::size_t> seen;
    std::size_t assigned = 0;
    for (const auto& list : p.index_lists) {
        REQUIRE_FALSE(list.empty());
        REQUIRE(list.size() % 50 == 0);       // whole label-pure groups
        REQUIRE(list.size() <= 30u * 50u);    // at most max_groups groups
        for (auto i : list) {
            REQUIRE(seen.insert(i).second);   // disjoint across UEs
            ++assigned;
        }
        // label-pure groups of 50 make every per-class count a multiple of 50
        std::vector<std::size_t> counts(10, 0);
        for (auto i : list) ++counts[static_cast<std::size_t>(d.labels[i])];
        for (auto c : counts) REQUIRE(c % 50 == 0);
    }
    REQUIRE(assigned <= 1200u * 50u);
    for (int a : p.participation_count) REQUIRE(a == 0);
}

TEST_CASE("partition rescales demand when it exceeds the group supply") {
    auto rng = derive_stream(2, "synth_data");
    const Dataset d = generate_synthetic(4, 100, 4, rng); // 400 samples
    auto prng = derive_stream(2, "partition");
    // 40 groups of 10 vs a demand of 8 UEs x [2,20] groups: draws above the
    // minimum overshoot the supply and must be rescaled
    const Partition p = partition_sorted_groups(d, 8, 10, 2, 20, prng);
    std::size_t total_groups = 0;
    for (const auto& list : p.index_lists) {
        REQUIRE_FALSE(list.empty());
        REQUIRE(list.size() % 10 == 0);
        total_groups += list.size() / 10;
    }
    REQUIRE(total_groups <= 40);
}

TEST_CASE("partition property fuzz: disjoint, pure, bounded") {
    auto meta = derive_stream(3, "partition_fuzz");
    for (int trial = 0; trial < 25; ++trial) {
        const int classes = 2 + static_cast<int>(meta.uniform_int(8));
        const int per_class = 30 + static_cast<int>(meta.uniform_int(100));
        auto drng = derive_stream(meta.next_u64(), "synth_data");
        const Dataset d = generate_synthetic(classes, per_class, 3, drng);
        const int group_size = 1 + static_cast<int>(meta.uniform_int(15));
        const int num_ues = 2 + static_cast<int>(meta.uniform_int(10));
        const int min_groups = 1 + static_cast<int>(meta.uniform_int(3));
        const int max_groups = min_groups + static_cast<int>(meta.uniform_int(10));
        auto prng = derive_stream(meta.next_u64(), "partition");
        Partition p;
        try {
            p = partition_sorted_groups(d, num_ues, group_size, min_groups, max_groups, prng);
        } catch (const PartitionError&) {
            continue; // undersized draws are allowed to reject
        }
        std::set<std::size_t> seen;
        for (const auto& list : p.index_lists) {
            REQUIRE_FALSE(list.empty());
            REQUIRE(list.size() % static_cast<std::size_t>(group_size) == 0);
            REQUIRE(list.size() / static_cast<std::size_t>(group_size) <=
                    static_cast<std::size_t>(max_groups));
            for (auto i : list) REQUIRE(seen.insert(i).second);
        }
    }
}

TEST_CASE("partition rejects insufficient data") {
    auto rng = derive_stream(4, "synth_data");
    const Dataset d = generate_synthetic(2, 10, 3, rng); // 20 samples
    auto prng = derive_stream(4, "partition");
    REQUIRE_THROWS_AS(partition_sorted_groups(d, 10, 5, 1, 3, prng), PartitionError);
}

TEST_CASE("label flip rewrites only the source label, features untouched") {
    auto rng = derive_stream(5, "synth_data");
    const Dataset d = generate_synthetic(10, 50, 4, rng);
    const std::vector<double> features_before = d.features;
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (i % 3 == 0) indices.push_back(i);

    AttackSpec full{6, 2, 1.0};
    auto frng = derive_stream(5, "flip");
    const auto flipped = apply_label_flip(d, indices, full, frng);
    REQUIRE(flipped.size() == indices.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int truth = d.labels[indices[i]];
        if (truth == 6) {
            REQUIRE(flipped[i] == 2);
            ++changed;
        } else {
            REQUIRE(flipped[i] == truth);
        }
    }
    REQUIRE(changed > 0);
    REQUIRE(d.features == features_before);

    AttackSpec none{6, 2, 0.0};
    auto frng0 = derive_stream(6, "flip");
    const auto unflipped = apply_label_flip(d, indices, none, frng0);
    for (std::size_t i = 0; i < indices.size(); ++i)
        REQUIRE(unflipped[i] == d.labels[indices[i]]);
}

TEST_CASE("label flip with no source samples changes nothing") {
    auto rng = derive_stream(7, "synth_data");
    const Dataset d = generate_synthetic(4, 20, 3, rng); // labels 0..3 only
    std::vector<std::size_t> indices(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) indices[i] = i;
    AttackSpec spec{6, 2, 1.0};
    auto frng = derive_stream(7, "flip");
    const auto labels = apply_label_flip(d, indices, spec, frng);
    REQUIRE(labels == d.labels);
}

TEST_CASE("fractional flips floor the count and come from the stream") {
    auto rng = derive_stream(8, "synth_data");
    const Dataset d = generate_synthetic(10, 41, 4, rng); // 41 sixes
    std::vector<std::size_t> indices(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) indices[i] = i;
    AttackSpec half{6, 2, 0.5};
    auto f1 = derive_stream(8, "flip");
    auto f2 = derive_stream(8, "flip");
    const auto a = apply_label_flip(d, indices, half, f1);
    const auto b = apply_label_flip(d, indices, half, f2);
    REQUIRE(a == b);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (a[i] != d.labels[i]) ++flips;
    REQUIRE(flips == 20); // floor(0.5 * 41)
}
