#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "feel/dataset.hpp"
#include "feel/rng.hpp"

namespace feel {

// Dense parameters of the two-layer MLP: softmax(W2 * relu(W1 x + b1) + b2).
// Doubles as the gradient container.
struct ModelParams {
    int input_dim = 0;
    int hidden = 0;
    int classes = 0;
    std::vector<double> w1; // hidden x input, row-major
    std::vector<double> b1; // hidden
    std::vector<double> w2; // classes x hidden, row-major
    std::vector<double> b2; // classes

    static ModelParams zeros(int input_dim, int hidden, int classes) {
        ModelParams p;
        p.input_dim = input_dim;
        p.hidden = hidden;
        p.classes = classes;
        p.w1.assign(static_cast<std::size_t>(hidden) * input_dim, 0.0);
        p.b1.assign(static_cast<std::size_t>(hidden), 0.0);
        p.w2.assign(static_cast<std::size_t>(classes) * hidden, 0.0);
        p.b2.assign(static_cast<std::size_t>(classes), 0.0);
        return p;
    }
};

// Glorot-uniform weights, zero biases.
inline ModelParams init_params(int input_dim, int hidden, int classes, RngStream& rng) {
    ModelParams p = ModelParams::zeros(input_dim, hidden, classes);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
    for (auto& w : p.w1) w = rng.uniform(-lim1, lim1);
    const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
    for (auto& w : p.w2) w = rng.uniform(-lim2, lim2);
    return p;
}

namespace detail {

// Z (n x out) = X (n x in) * W^T (out x in) + b
inline void linear_forward(const double* x, std::size_t n, const std::vector<double>& w,
                           const std::vector<double>& b, std::size_t in, std::size_t out,
                           std::vector<double>& z) {
    z.resize(n * out);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x + i * in;
        double* zi = z.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wo = w.data() + o * in;
            double acc = b[o];
            for (std::size_t j = 0; j < in; ++j) acc += wo[j] * xi[j];
            zi[o] = acc;
        }
    }
}

inline void softmax_rows(std::vector<double>& z, std::size_t n, std::size_t classes) {
    for (std::size_t i = 0; i < n; ++i) {
        double* zi = z.data() + i * classes;
        double m = zi[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, zi[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            zi[c] = std::exp(zi[c] - m);
            sum += zi[c];
        }
        for (std::size_t c = 0; c < classes; ++c) zi[c] /= sum;
    }
}

struct ForwardCache {
    std::vector<double> z1;    // pre-activation, n x hidden
    std::vector<double> a1;    // relu(z1)
    std::vector<double> probs; // n x classes
};

inline void forward_cached(const ModelParams& p, const double* x, std::size_t n,
                           ForwardCache& cache) {
    const auto in = static_cast<std::size_t>(p.input_dim);
    const auto hid = static_cast<std::size_t>(p.hidden);
    const auto cls = static_cast<std::size_t>(p.classes);
    linear_forward(x, n, p.w1, p.b1, in, hid, cache.z1);
    cache.a1 = cache.z1;
    for (auto& v : cache.a1) v = v > 0.0 ? v : 0.0;
    linear_forward(cache.a1.data(), n, p.w2, p.b2, hid, cls, cache.probs);
    softmax_rows(cache.probs, n, cls);
}

} // namespace detail

// Class probabilities for a batch (n rows, input_dim columns).
inline std::vector<double> forward(const ModelParams& p, const double* x, std::size_t n) {
    detail::ForwardCache cache;
    detail::forward_cached(p, x, n, cache);
    return std::move(cache.probs);
}

// Mean softmax cross-entropy of precomputed probabilities.
inline double cross_entropy(const std::vector<double>& probs, std::span<const int> labels,
                            std::size_t classes) {
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = probs[i * classes + static_cast<std::size_t>(labels[i])];
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / static_cast<double>(labels.size());
}

inline double loss_on(const ModelParams& p, const double* x, std::span<const int> labels) {
    return cross_entropy(forward(p, x, labels.size()), labels,
                         static_cast<std::size_t>(p.classes));
}

// Exact gradients of the mean cross-entropy over the batch.
inline ModelParams compute_gradients(const ModelParams& p, const double* x,
                                     std::span<const int> labels) {
    const std::size_t n = labels.size();
    const auto in = static_cast<std::size_t>(p.input_dim);
    const auto hid = static_cast<std::size_t>(p.hidden);
    const auto cls = static_cast<std::size_t>(p.classes);

    detail::ForwardCache cache;
    detail::forward_cached(p, x, n, cache);

    ModelParams g = ModelParams::zeros(p.input_dim, p.hidden, p.classes);

    // dZ2 = (probs - onehot) / n, reused in place
    std::vector<double>& dz2 = cache.probs;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = dz2.data() + i * cls;
        row[static_cast<std::size_t>(labels[i])] -= 1.0;
        for (std::size_t c = 0; c < cls; ++c) row[c] *= inv_n;
    }

    std::vector<double> dz1(n * hid, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* dz2i = dz2.data() + i * cls;
        const double* a1i = cache.a1.data() + i * hid;
        const double* z1i = cache.z1.data() + i * hid;
        double* dz1i = dz1.data() + i * hid;
        for (std::size_t c = 0; c < cls; ++c) {
            const double d = dz2i[c];
            g.b2[c] += d;
            double* gw2c = g.w2.data() + c * hid;
            const double* w2c = p.w2.data() + c * hid;
            for (std::size_t h = 0; h < hid; ++h) {
                gw2c[h] += d * a1i[h];
                dz1i[h] += d * w2c[h];
            }
        }
        const double* xi = x + i * in;
        for (std::size_t h = 0; h < hid; ++h) {
            if (z1i[h] <= 0.0) continue;
            const double d = dz1i[h];
            g.b1[h] += d;
            double* gw1h = g.w1.data() + h * in;
            for (std::size_t j = 0; j < in; ++j) gw1h[j] += d * xi[j];
        }
    }
    return g;
}

// One minibatch SGD update.
inline void sgd_step(ModelParams& p, const double* x, std::span<const int> labels, double lr) {
    const ModelParams g = compute_gradients(p, x, labels);
    for (std::size_t i = 0; i < p.w1.size(); ++i) p.w1[i] -= lr * g.w1[i];
    for (std::size_t i = 0; i < p.b1.size(); ++i) p.b1[i] -= lr * g.b1[i];
    for (std::size_t i = 0; i < p.w2.size(); ++i) p.w2[i] -= lr * g.w2[i];
    for (std::size_t i = 0; i < p.b2.size(); ++i) p.b2[i] -= lr * g.b2[i];
}

namespace detail {

inline std::size_t argmax_row(const double* row, std::size_t classes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c; // ties resolve to the lowest class
    return best;
}

} // namespace detail

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class_recall;
    std::vector<std::size_t> per_class_count;
};

// Accuracy and per-class recall against true labels.
inline EvalResult evaluate(const ModelParams& p, const double* x, std::span<const int> labels) {
    const std::size_t n = labels.size();
    const auto cls = static_cast<std::size_t>(p.classes);
    EvalResult r;
    r.per_class_recall.assign(cls, 0.0);
    r.per_class_count.assign(cls, 0);
    std::vector<std::size_t> correct(cls, 0);

    constexpr std::size_t kChunk = 512;
    std::vector<double> probs;
    for (std::size_t off = 0; off < n; off += kChunk) {
        const std::size_t m = std::min(kChunk, n - off);
        probs = forward(p, x + off * static_cast<std::size_t>(p.input_dim), m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto truth = static_cast<std::size_t>(labels[off + i]);
            ++r.per_class_count[truth];
            if (detail::argmax_row(probs.data() + i * cls, cls) == truth) ++correct[truth];
        }
    }
    std::size_t total_correct = 0;
    for (std::size_t c = 0; c < cls; ++c) {
        total_correct += correct[c];
        r.per_class_recall[c] = r.per_class_count[c] > 0
                                    ? static_cast<double>(correct[c]) /
                                          static_cast<double>(r.per_class_count[c])
                                    : 0.0;
    }
    r.accuracy = n > 0 ? static_cast<double>(total_correct) / static_cast<double>(n) : 0.0;
    return r;
}

inline EvalResult evaluate(const ModelParams& p, const Dataset& d) {
    return evaluate(p, d.features.data(), d.labels);
}

struct LocalTrainResult {
    ModelParams params;
    double acc_local = 0.0; // training-set accuracy on the (possibly flipped) labels
};

// Minibatch SGD on the UE's local view for the given number of epochs.
// Labels are the UE's own (flipped for malicious UEs); acc_local is measured
// against the same labels after training.
inline LocalTrainResult local_train(ModelParams params, const Dataset& d,
                                    const std::vector<std::size_t>& indices,
                                    const std::vector<int>& labels, int epochs, double lr,
                                    int batch_size, RngStream& rng) {
    if (indices.empty()) throw std::invalid_argument("local_train: empty partition");
    const std::size_t m = indices.size();
    const auto dim = d.dim;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> batch_x(static_cast<std::size_t>(batch_size) * dim);
    std::vector<int> batch_y(static_cast<std::size_t>(batch_size));

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t off = 0; off < m; off += static_cast<std::size_t>(batch_size)) {
            const std::size_t b = std::min(static_cast<std::size_t>(batch_size), m - off);
            for (std::size_t i = 0; i < b; ++i) {
                const auto s = d.sample(indices[order[off + i]]);
                std::copy(s.begin(), s.end(), batch_x.begin() + i * dim);
                batch_y[i] = labels[order[off + i]];
            }
            sgd_step(params, batch_x.data(), std::span<const int>(batch_y.data(), b), lr);
        }
    }

    // local accuracy on the view the UE trains against
    std::vector<double> view_x(m * dim);
    for (std::size_t i = 0; i < m; ++i) {
        const auto s = d.sample(indices[i]);
        std::copy(s.begin(), s.end(), view_x.begin() + i * dim);
    }
    const EvalResult ev = evaluate(params, view_x.data(), labels);
    return {std::move(params), ev.accuracy};
}

// Dataset-size weighted average of model updates (order-sensitive only in
// float round-off; callers pass ascending UE id).
inline ModelParams fedavg(const std::vector<std::pair<const ModelParams*, double>>& updates) {
    if (updates.empty()) throw std::invalid_argument("fedavg: empty update list");
    double total = 0.0;
    for (const auto& [params, size] : updates) total += size;
    const ModelParams& first = *updates.front().first;
    ModelParams out = ModelParams::zeros(first.input_dim, first.hidden, first.classes);
    for (const auto& [params, size] : updates) {
        if (params->input_dim != out.input_dim || params->hidden != out.hidden ||
            params->classes != out.classes)
            throw std::invalid_argument("fedavg: inconsistent model dimensions");
        const double w = size / total;
        for (std::size_t i = 0; i < out.w1.size(); ++i) out.w1[i] += w * params->w1[i];
        for (std::size_t i = 0; i < out.b1.size(); ++i) out.b1[i] += w * params->b1[i];
        for (std::size_t i = 0; i < out.w2.size(); ++i) out.w2[i] += w * params->w2[i];
        for (std::size_t i = 0; i < out.b2.size(); ++i) out.b2[i] += w * params->b2[i];
    }
    return out;
}

} // namespace feel
