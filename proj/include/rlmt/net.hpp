#pragma once

// Minimal fully-connected network with manual backpropagation. Hidden
// layers share one activation; the output layer is linear. Activation,
// loss, and optimizer are all swappable enums because the policy-level
// mutations work by swapping exactly these pieces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rlmt/errors.hpp"
#include "rlmt/rng.hpp"

namespace rlmt {

enum class Activation { Tanh, ReLU, Sigmoid };
enum class Optimizer { Adam, SGD };
enum class Loss { Huber, MSE, NegatedTD };

inline std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "Tanh";
        case Activation::ReLU: return "ReLU";
        default: return "Sigmoid";
    }
}
inline std::string_view optimizer_name(Optimizer o) {
    return o == Optimizer::Adam ? "Adam" : "SGD";
}
inline std::string_view loss_name(Loss l) {
    switch (l) {
        case Loss::Huber: return "Huber";
        case Loss::MSE: return "MSE";
        default: return "NegatedTD";
    }
}

inline Activation parse_activation(std::string_view s) {
    if (s == "Tanh") return Activation::Tanh;
    if (s == "ReLU") return Activation::ReLU;
    if (s == "Sigmoid") return Activation::Sigmoid;
    throw ParseError("unknown activation: '" + std::string(s) + "'");
}
inline Optimizer parse_optimizer(std::string_view s) {
    if (s == "Adam") return Optimizer::Adam;
    if (s == "SGD") return Optimizer::SGD;
    throw ParseError("unknown optimizer: '" + std::string(s) + "'");
}
inline Loss parse_loss(std::string_view s) {
    if (s == "Huber") return Loss::Huber;
    if (s == "MSE") return Loss::MSE;
    if (s == "NegatedTD") return Loss::NegatedTD;
    throw ParseError("unknown loss: '" + std::string(s) + "'");
}

// Per-element losses on residual r = prediction - target. MSE is written as
// 0.5*r^2 so its gradient coincides with Huber's inside |r| <= delta.
// NegatedTD is the sign-flipped Huber: the injected "learn the wrong thing"
// objective, reachable only through the loss-function mutation.
namespace detail {
constexpr double kHuberDelta = 1.0;
}

inline double loss_value(Loss loss, double pred, double target) {
    const double r = pred - target;
    switch (loss) {
        case Loss::MSE:
            return 0.5 * r * r;
        case Loss::Huber: {
            const double a = std::abs(r);
            return a <= detail::kHuberDelta
                       ? 0.5 * r * r
                       : detail::kHuberDelta * (a - 0.5 * detail::kHuberDelta);
        }
        default: {  // NegatedTD
            const double a = std::abs(r);
            const double h = a <= detail::kHuberDelta
                                 ? 0.5 * r * r
                                 : detail::kHuberDelta * (a - 0.5 * detail::kHuberDelta);
            return -h;
        }
    }
}

inline double loss_grad(Loss loss, double pred, double target) {
    const double r = pred - target;
    switch (loss) {
        case Loss::MSE:
            return r;
        case Loss::Huber:
            return std::clamp(r, -detail::kHuberDelta, detail::kHuberDelta);
        default:
            return -std::clamp(r, -detail::kHuberDelta, detail::kHuberDelta);
    }
}

struct Mlp {
    std::vector<int> layer_sizes;  // input, hidden..., output widths
    Activation activation = Activation::Tanh;
    // w[l] is row-major (out x in) for the l-th affine layer; b[l] its bias.
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;

    Mlp() = default;

    // Zero-initialized network of the given shape (weights filled later).
    Mlp(std::vector<int> sizes, Activation act)
        : layer_sizes(std::move(sizes)), activation(act) {
        if (layer_sizes.size() < 2) throw ConfigError("network needs >= 2 layers");
        const std::size_t n_layers = layer_sizes.size() - 1;
        w.resize(n_layers);
        b.resize(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            w[l].assign(static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1], 0.0);
            b[l].assign(static_cast<std::size_t>(layer_sizes[l + 1]), 0.0);
        }
    }

    // Glorot-uniform initialization from the given stream.
    Mlp(std::vector<int> sizes, Activation act, Rng& rng) : Mlp(std::move(sizes), act) {
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const double limit = std::sqrt(6.0 / (layer_sizes[l] + layer_sizes[l + 1]));
            for (auto& x : w[l]) x = rng.uniform(-limit, limit);
        }
    }

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return w.size(); }
};

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        default: return 1.0 / (1.0 + std::exp(-x));
    }
}

// Derivative expressed via pre-activation x and post-activation y.
inline double activate_grad(Activation a, double x, double y) {
    switch (a) {
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
        default: return y * (1.0 - y);
    }
}

// Intermediate values of one forward pass, kept for backprop.
// post[0] is the input; pre[l]/post[l+1] belong to affine layer l.
struct ForwardCache {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

inline std::vector<double> forward(const Mlp& net, const std::vector<double>& x,
                                   ForwardCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw UsageError("network input dimension mismatch");
    if (cache) {
        cache->pre.assign(net.layer_count(), {});
        cache->post.assign(net.layer_count() + 1, {});
        cache->post[0] = x;
    }
    std::vector<double> cur = x;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        std::vector<double> z(out);
        for (int o = 0; o < out; ++o) {
            double acc = net.b[l][o];
            const double* row = net.w[l].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
            z[o] = acc;
        }
        if (cache) cache->pre[l] = z;
        const bool last = l + 1 == net.layer_count();
        if (!last)
            for (auto& v : z) v = activate(net.activation, v);
        if (cache) cache->post[l + 1] = z;
        cur = std::move(z);
    }
    return cur;
}

struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;

    explicit Gradients(const Mlp& net) {
        w.resize(net.layer_count());
        b.resize(net.layer_count());
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            w[l].assign(net.w[l].size(), 0.0);
            b[l].assign(net.b[l].size(), 0.0);
        }
    }

    void scale(double s) {
        for (auto& layer : w)
            for (auto& v : layer) v *= s;
        for (auto& layer : b)
            for (auto& v : layer) v *= s;
    }
};

// Accumulates dLoss/dWeights into `grads` given dLoss/dOutput of one sample.
inline void backward(const Mlp& net, const ForwardCache& cache,
                     std::vector<double> d_out, Gradients& grads) {
    for (std::size_t li = net.layer_count(); li-- > 0;) {
        const int in = net.layer_sizes[li];
        const int out = net.layer_sizes[li + 1];
        if (li + 1 != net.layer_count())  // hidden layer: through activation
            for (int o = 0; o < out; ++o)
                d_out[o] *= activate_grad(net.activation, cache.pre[li][o],
                                          cache.post[li + 1][o]);
        const auto& input = cache.post[li];
        for (int o = 0; o < out; ++o) {
            grads.b[li][o] += d_out[o];
            double* wrow = grads.w[li].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) wrow[i] += d_out[o] * input[i];
        }
        if (li == 0) break;
        std::vector<double> d_in(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double* wrow = net.w[li].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) d_in[i] += wrow[i] * d_out[o];
        }
        d_out = std::move(d_in);
    }
}

// First/second-moment accumulators for Adam (beta1 0.9, beta2 0.999,
// epsilon 1e-8, bias-corrected).
struct AdamState {
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
    long long t = 0;

    AdamState() = default;
    explicit AdamState(const Mlp& net) {
        m_w.resize(net.layer_count());
        v_w.resize(net.layer_count());
        m_b.resize(net.layer_count());
        v_b.resize(net.layer_count());
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            m_w[l].assign(net.w[l].size(), 0.0);
            v_w[l].assign(net.w[l].size(), 0.0);
            m_b[l].assign(net.b[l].size(), 0.0);
            v_b[l].assign(net.b[l].size(), 0.0);
        }
    }
};

namespace detail {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, double lr,
                        long long t) {
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}
}  // namespace detail

// Applies one optimizer step for the already-computed gradients.
inline void apply_gradients(Mlp& net, const Gradients& grads, Optimizer opt, double lr,
                            AdamState& state) {
    for (const auto& layer : grads.w)
        for (double g : layer)
            if (!std::isfinite(g)) throw TrainingError("non-finite gradient");
    for (const auto& layer : grads.b)
        for (double g : layer)
            if (!std::isfinite(g)) throw TrainingError("non-finite gradient");
    if (opt == Optimizer::SGD) {
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            for (std::size_t i = 0; i < net.w[l].size(); ++i)
                net.w[l][i] -= lr * grads.w[l][i];
            for (std::size_t i = 0; i < net.b[l].size(); ++i)
                net.b[l][i] -= lr * grads.b[l][i];
        }
        return;
    }
    ++state.t;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        detail::adam_update(net.w[l], grads.w[l], state.m_w[l], state.v_w[l], lr, state.t);
        detail::adam_update(net.b[l], grads.b[l], state.m_b[l], state.v_b[l], lr, state.t);
    }
}

// Mean loss of a batch over all outputs (the contract-test entry point).
inline double batch_loss(const Mlp& net, const std::vector<std::vector<double>>& xs,
                         const std::vector<std::vector<double>>& ys, Loss loss) {
    if (xs.empty() || xs.size() != ys.size())
        throw UsageError("batch inputs/targets must be non-empty and same length");
    double total = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const auto out = forward(net, xs[n]);
        if (out.size() != ys[n].size()) throw UsageError("target dimension mismatch");
        for (std::size_t o = 0; o < out.size(); ++o)
            total += loss_value(loss, out[o], ys[n][o]);
    }
    return total / static_cast<double>(xs.size());
}

// One full gradient step on the mean batch loss.
inline void network_update(Mlp& net, const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys, Loss loss,
                           Optimizer opt, double lr, AdamState& state) {
    if (xs.empty() || xs.size() != ys.size())
        throw UsageError("batch inputs/targets must be non-empty and same length");
    Gradients grads(net);
    ForwardCache cache;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const auto out = forward(net, xs[n], &cache);
        if (out.size() != ys[n].size()) throw UsageError("target dimension mismatch");
        std::vector<double> d_out(out.size());
        for (std::size_t o = 0; o < out.size(); ++o)
            d_out[o] = loss_grad(loss, out[o], ys[n][o]);
        backward(net, cache, std::move(d_out), grads);
    }
    grads.scale(1.0 / static_cast<double>(xs.size()));
    apply_gradients(net, grads, opt, lr, state);
}

// Flat parameter vector (layer weights then biases, in layer order); used
// for bit-exact serialization and finite-difference probing.
inline std::vector<double> get_weights(const Mlp& net) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        flat.insert(flat.end(), net.w[l].begin(), net.w[l].end());
        flat.insert(flat.end(), net.b[l].begin(), net.b[l].end());
    }
    return flat;
}

inline void set_weights(Mlp& net, const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (pos + net.w[l].size() + net.b[l].size() > flat.size())
            throw UsageError("weight vector too short for network shape");
        std::copy(flat.begin() + pos, flat.begin() + pos + net.w[l].size(),
                  net.w[l].begin());
        pos += net.w[l].size();
        std::copy(flat.begin() + pos, flat.begin() + pos + net.b[l].size(),
                  net.b[l].begin());
        pos += net.b[l].size();
    }
    if (pos != flat.size()) throw UsageError("weight vector too long for network shape");
}

}  // namespace rlmt
