#ifndef C2SIM_NEURAL_HPP
#define C2SIM_NEURAL_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "c2sim/rng.hpp"

namespace c2sim {

class NeuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One affine layer: y = W x + b, W row-major (rows x cols).
struct LayerParams {
    int rows = 0;
    int cols = 0;
    std::vector<double> w;
    std::vector<double> b;
};

/// Feed-forward network parameters. Hidden layers use the rectifier, the
/// output layer is affine (logits for the actor, a scalar for the critic).
struct NetParams {
    std::vector<int> dims;  // [input, hidden..., output]
    std::vector<LayerParams> layers;

    static NetParams zeros(const std::vector<int>& dims) {
        NetParams p;
        p.dims = dims;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            LayerParams l;
            l.rows = dims[i + 1];
            l.cols = dims[i];
            l.w.assign(static_cast<std::size_t>(l.rows) * l.cols, 0.0);
            l.b.assign(static_cast<std::size_t>(l.rows), 0.0);
            p.layers.push_back(std::move(l));
        }
        return p;
    }

    // Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static NetParams init(const std::vector<int>& dims, std::mt19937_64& rng) {
        NetParams p = zeros(dims);
        for (auto& l : p.layers) {
            double bound = 1.0 / std::sqrt(static_cast<double>(l.cols));
            for (auto& x : l.w) x = (2.0 * uniform01(rng) - 1.0) * bound;
            for (auto& x : l.b) x = (2.0 * uniform01(rng) - 1.0) * bound;
        }
        return p;
    }

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
};

// Gradients share the NetParams shape.
using NetGrads = NetParams;

// Activations recorded by forward; inputs[i] is the input of layer i,
// inputs.back() is the network output.
struct ForwardCache {
    std::vector<std::vector<double>> inputs;
};

inline std::vector<double> forward(const NetParams& p, const std::vector<double>& input,
                                   ForwardCache* cache = nullptr) {
    if (static_cast<int>(input.size()) != p.input_dim())
        throw NeuralError("forward: input dimension mismatch");
    if (cache) {
        cache->inputs.clear();
        cache->inputs.reserve(p.layers.size() + 1);
    }
    std::vector<double> x = input;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        if (cache) cache->inputs.push_back(x);
        const LayerParams& l = p.layers[li];
        std::vector<double> y(static_cast<std::size_t>(l.rows));
        for (int r = 0; r < l.rows; ++r) {
            const double* wr = &l.w[static_cast<std::size_t>(r) * l.cols];
            double acc = l.b[static_cast<std::size_t>(r)];
            for (int c = 0; c < l.cols; ++c) acc += wr[c] * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc;
        }
        bool last = li + 1 == p.layers.size();
        if (!last)
            for (auto& v : y) v = v > 0.0 ? v : 0.0;
        x = std::move(y);
    }
    if (cache) cache->inputs.push_back(x);
    return x;
}

/// Exact gradients of the scalar loss whose output gradient is
/// `output_gradient`, accumulated into `grads` (so batches sum naturally).
inline void backward(const NetParams& p, const ForwardCache& cache,
                     const std::vector<double>& output_gradient, NetGrads& grads) {
    if (cache.inputs.size() != p.layers.size() + 1)
        throw NeuralError("backward: cache does not match network");
    if (static_cast<int>(output_gradient.size()) != p.output_dim())
        throw NeuralError("backward: output gradient dimension mismatch");

    std::vector<double> delta = output_gradient;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const LayerParams& l = p.layers[li];
        const std::vector<double>& x = cache.inputs[li];
        LayerParams& g = grads.layers[li];
        // dL/dW = delta * x^T, dL/db = delta
        for (int r = 0; r < l.rows; ++r) {
            double d = delta[static_cast<std::size_t>(r)];
            g.b[static_cast<std::size_t>(r)] += d;
            double* gr = &g.w[static_cast<std::size_t>(r) * l.cols];
            for (int c = 0; c < l.cols; ++c) gr[c] += d * x[static_cast<std::size_t>(c)];
        }
        if (li == 0) break;
        // Propagate through W and the rectifier of the previous layer; the
        // post-activation input x doubles as the rectifier mask.
        std::vector<double> prev(static_cast<std::size_t>(l.cols), 0.0);
        for (int r = 0; r < l.rows; ++r) {
            double d = delta[static_cast<std::size_t>(r)];
            const double* wr = &l.w[static_cast<std::size_t>(r) * l.cols];
            for (int c = 0; c < l.cols; ++c) prev[static_cast<std::size_t>(c)] += d * wr[c];
        }
        for (int c = 0; c < l.cols; ++c)
            if (x[static_cast<std::size_t>(c)] <= 0.0) prev[static_cast<std::size_t>(c)] = 0.0;
        delta = std::move(prev);
    }
}

inline NetGrads backward(const NetParams& p, const ForwardCache& cache,
                         const std::vector<double>& output_gradient) {
    NetGrads g = NetParams::zeros(p.dims);
    backward(p, cache, output_gradient, g);
    return g;
}

// ---------------------------------------------------------------------------
// Categorical policy head

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline double entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

// Exact log-probability of index a under softmax(logits).
inline double log_prob(const std::vector<double>& logits, int a) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : logits) lse += std::exp(v - mx);
    return logits[static_cast<std::size_t>(a)] - mx - std::log(lse);
}

struct PolicySample {
    int action = 0;
    double log_prob = 0.0;
    double entropy = 0.0;
};

/// Samples from the softmax distribution over logits (max-subtracted for
/// stability) and reports the sampled index's exact log-probability and the
/// distribution entropy.
inline PolicySample categorical_policy(const std::vector<double>& logits, std::mt19937_64& rng) {
    std::vector<double> p = softmax(logits);
    double u = uniform01(rng);
    double acc = 0.0;
    int a = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) { a = static_cast<int>(i); break; }
    }
    return {a, log_prob(logits, a), entropy(p)};
}

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer

struct OptimizerState {
    NetParams m;  // first moments
    NetParams v;  // second moments
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerState for_net(const NetParams& p) {
        OptimizerState s;
        s.m = NetParams::zeros(p.dims);
        s.v = NetParams::zeros(p.dims);
        return s;
    }
};

/// Bias-corrected adaptive-moment descent step along `grads`. Callers ascend
/// by negating the gradient. Throws on non-finite gradients.
inline void optimizer_step(NetParams& params, const NetGrads& grads, OptimizerState& state,
                           double learning_rate) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        auto update = [&](std::vector<double>& w, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (!std::isfinite(g[i])) throw NeuralError("optimizer_step: non-finite gradient");
                m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                w[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
            }
        };
        update(params.layers[li].w, grads.layers[li].w, state.m.layers[li].w, state.v.layers[li].w);
        update(params.layers[li].b, grads.layers[li].b, state.m.layers[li].b, state.v.layers[li].b);
    }
}

}  // namespace c2sim

#endif  // C2SIM_NEURAL_HPP
