#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "feel/dataset.hpp"
#include "feel/mlp.hpp"
#include "feel/rng.hpp"

using namespace feel;

namespace {

struct SmallProblem {
    std::vector<double> x;
    std::vector<int> y;
    std::size_t n;
};

SmallProblem random_batch(RngStream& rng, int dim, int classes, std::size_t n) {
    SmallProblem p;
    p.n = n;
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(dim); ++i)
        p.x.push_back(rng.uniform());
    for (std::size_t i = 0; i < n; ++i)
        p.y.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes))));
    return p;
}

// central finite differences of the cross-entropy loss; the independent
// oracle for the analytic gradients
double max_relative_gradient_error(ModelParams params, const SmallProblem& prob) {
    const ModelParams analytic = compute_gradients(params, prob.x.data(), prob.y);
    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](std::vector<double>& w, const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + h;
            const double up = loss_on(params, prob.x.data(), prob.y);
            w[i] = keep - h;
            const double down = loss_on(params, prob.x.data(), prob.y);
            w[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1.0});
            worst = std::max(worst, std::fabs(fd - g[i]) / denom);
        }
    };
    probe(params.w1, analytic.w1);
    probe(params.b1, analytic.b1);
    probe(params.w2, analytic.w2);
    probe(params.b2, analytic.b2);
    return worst;
}

} // namespace

TEST_CASE("glorot init: bounded weights, zero biases, deterministic") {
    auto r1 = derive_stream(1, "model_init");
    auto r2 = derive_stream(1, "model_init");
    const ModelParams a = init_params(20, 8, 5, r1);
    const ModelParams b = init_params(20, 8, 5, r2);
    REQUIRE(a.w1 == b.w1);
    REQUIRE(a.w2 == b.w2);
    const double lim1 = std::sqrt(6.0 / 28.0);
    for (double w : a.w1) REQUIRE(std::fabs(w) <= lim1);
    const double lim2 = std::sqrt(6.0 / 13.0);
    for (double w : a.w2) REQUIRE(std::fabs(w) <= lim2);
    for (double v : a.b1) REQUIRE(v == 0.0);
    for (double v : a.b2) REQUIRE(v == 0.0);
}

TEST_CASE("forward: uniform probabilities under zero weights, normalized rows") {
    const ModelParams zero = ModelParams::zeros(6, 4, 5);
    auto rng = derive_stream(2, "batch");
    const auto prob = random_batch(rng, 6, 5, 9);
    const auto probs = forward(zero, prob.x.data(), prob.n);
    for (double p : probs) REQUIRE(p == Catch::Approx(0.2).margin(1e-12));

    auto irng = derive_stream(3, "model_init");
    const ModelParams m = init_params(6, 4, 5, irng);
    const auto q = forward(m, prob.x.data(), prob.n);
    for (std::size_t i = 0; i < prob.n; ++i) {
        double row = 0.0;
        for (int c = 0; c < 5; ++c) {
            const double p = q[i * 5 + static_cast<std::size_t>(c)];
            REQUIRE(p > 0.0);
            REQUIRE(p < 1.0);
            row += p;
        }
        REQUIRE(row == Catch::Approx(1.0).margin(1e-9));
    }

    // duplicate rows produce identical outputs
    std::vector<double> dup(prob.x.begin(), prob.x.begin() + 6);
    dup.insert(dup.end(), prob.x.begin(), prob.x.begin() + 6);
    const auto dq = forward(m, dup.data(), 2);
    for (int c = 0; c < 5; ++c) REQUIRE(dq[c] == dq[5 + c]);
}

TEST_CASE("analytic gradients match central finite differences") {
    auto rng = derive_stream(5, "gradcheck");
    for (int net = 0; net < 3; ++net) {
        auto irng = derive_stream(100 + static_cast<std::uint64_t>(net), "model_init");
        ModelParams params = init_params(6, 5, 3, irng);
        const auto prob = random_batch(rng, 6, 3, 8);
        REQUIRE(max_relative_gradient_error(params, prob) < 1e-5);
    }
}

TEST_CASE("zero learning rate and zero epochs leave parameters untouched") {
    auto rng = derive_stream(7, "synth_data");
    const Dataset d = generate_synthetic(3, 20, 4, rng);
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    auto irng = derive_stream(7, "model_init");
    const ModelParams start = init_params(4, 6, 3, irng);

    auto t1 = derive_stream(7, "train", 1, 0);
    const auto frozen = local_train(start, d, idx, d.labels, 3, 0.0, 16, t1);
    REQUIRE(frozen.params.w1 == start.w1);
    REQUIRE(frozen.params.w2 == start.w2);

    auto t2 = derive_stream(7, "train", 2, 0);
    const auto skipped = local_train(start, d, idx, d.labels, 0, 0.5, 16, t2);
    REQUIRE(skipped.params.w1 == start.w1);
    const EvalResult incoming = evaluate(start, d);
    REQUIRE(skipped.acc_local == incoming.accuracy);
}

TEST_CASE("loss decreases per batch (non-strict) and per epoch (strict)") {
    auto rng = derive_stream(11, "synth_data");
    const Dataset d = generate_synthetic(4, 50, 8, rng);
    auto irng = derive_stream(11, "model_init");
    ModelParams params = init_params(8, 8, 4, irng);

    const double lr = 0.01;
    const std::size_t batch = 25;
    const double before_epoch = loss_on(params, d.features.data(), d.labels);
    for (std::size_t off = 0; off < d.size(); off += batch) {
        const std::size_t b = std::min(batch, d.size() - off);
        const double* bx = d.features.data() + off * d.dim;
        const std::span<const int> by(d.labels.data() + off, b);
        const double before = cross_entropy(forward(params, bx, b), by, 4);
        sgd_step(params, bx, by, lr);
        const double after = cross_entropy(forward(params, bx, b), by, 4);
        REQUIRE(after <= before + 1e-12);
    }
    const double after_epoch = loss_on(params, d.features.data(), d.labels);
    REQUIRE(after_epoch < before_epoch);
}

TEST_CASE("training separable synthetic data reaches high local accuracy") {
    auto rng = derive_stream(13, "synth_data");
    const Dataset d = generate_synthetic(2, 60, 8, rng);
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto irng = derive_stream(13, "model_init");
    const ModelParams start = init_params(8, 8, 2, irng);
    auto trng = derive_stream(13, "train", 1, 0);
    const auto out = local_train(start, d, idx, d.labels, 20, 0.1, 16, trng);
    REQUIRE(out.acc_local >= 0.95);
}

TEST_CASE("fedavg: identity, frozen weighted mean, singleton, convexity") {
    ModelParams a = ModelParams::zeros(1, 1, 1);
    ModelParams b = ModelParams::zeros(1, 1, 1);
    for (auto* v : {&a.w1, &a.w2}) (*v)[0] = 0.0;
    for (auto* v : {&b.w1, &b.w2}) (*v)[0] = 4.0;
    b.b1[0] = 4.0;
    b.b2[0] = 4.0;

    const ModelParams avg = fedavg({{&a, 1.0}, {&b, 3.0}});
    REQUIRE(avg.w1[0] == Catch::Approx(3.0).margin(1e-15)); // (0*1 + 4*3)/4
    REQUIRE(avg.b2[0] == Catch::Approx(3.0).margin(1e-15));

    const ModelParams same = fedavg({{&b, 2.0}, {&b, 5.0}});
    REQUIRE(same.w1[0] == Catch::Approx(4.0).margin(1e-15));

    const ModelParams single = fedavg({{&a, 7.0}});
    REQUIRE(single.w1 == a.w1);

    REQUIRE_THROWS_AS(fedavg({}), std::invalid_argument);

    auto rng = derive_stream(17, "fedavg_fuzz");
    std::vector<ModelParams> models;
    for (int i = 0; i < 4; ++i) {
        auto ir = derive_stream(static_cast<std::uint64_t>(20 + i), "model_init");
        models.push_back(init_params(3, 4, 2, ir));
    }
    std::vector<std::pair<const ModelParams*, double>> updates;
    for (const auto& m : models) updates.emplace_back(&m, rng.uniform(0.5, 5.0));
    const ModelParams mix = fedavg(updates);
    for (std::size_t i = 0; i < mix.w1.size(); ++i) {
        double lo = models[0].w1[i], hi = models[0].w1[i];
        for (const auto& m : models) {
            lo = std::min(lo, m.w1[i]);
            hi = std::max(hi, m.w1[i]);
        }
        REQUIRE(mix.w1[i] >= lo - 1e-12);
        REQUIRE(mix.w1[i] <= hi + 1e-12);
    }
}

TEST_CASE("evaluate: tie-break to class zero, recall identity, memorization") {
    auto rng = derive_stream(19, "synth_data");
    const Dataset d = generate_synthetic(10, 30, 4, rng);
    const ModelParams zero = ModelParams::zeros(4, 3, 10);
    const EvalResult ev = evaluate(zero, d);
    REQUIRE(ev.accuracy == Catch::Approx(0.1).margin(1e-12)); // class-0 prevalence
    REQUIRE(ev.per_class_recall[0] == 1.0);
    for (int c = 1; c < 10; ++c) REQUIRE(ev.per_class_recall[static_cast<std::size_t>(c)] == 0.0);

    auto irng = derive_stream(19, "model_init");
    const ModelParams m = init_params(4, 6, 10, irng);
    const EvalResult r = evaluate(m, d);
    double weighted = 0.0;
    std::size_t total = 0;
    for (std::size_t c = 0; c < 10; ++c) {
        weighted += r.per_class_recall[c] * static_cast<double>(r.per_class_count[c]);
        total += r.per_class_count[c];
    }
    REQUIRE(total == d.size());
    REQUIRE(weighted / static_cast<double>(total) == Catch::Approx(r.accuracy).margin(1e-12));

    // a hand-built net that memorizes a two-point dataset perfectly
    Dataset two;
    two.dim = 2;
    two.num_classes = 2;
    two.features = {1.0, 0.0, 0.0, 1.0};
    two.labels = {0, 1};
    ModelParams perfect = ModelParams::zeros(2, 2, 2);
    perfect.w1 = {10.0, 0.0, 0.0, 10.0};
    perfect.w2 = {10.0, 0.0, 0.0, 10.0};
    REQUIRE(evaluate(perfect, two).accuracy == 1.0);
}
