#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "knobtune/linalg.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

enum class OutputActivation { identity, tanh_bounded };

/// Fully connected network with rectified-linear hidden layers and a
/// per-network output activation. Gradients are computed by hand; see
/// mlp_backward.
struct Mlp {
    struct Layer {
        Matrix weights; // out x in
        std::vector<double> bias;
    };

    std::vector<Layer> layers;
    OutputActivation output_activation = OutputActivation::identity;

    std::size_t input_dim() const { return layers.front().weights.cols(); }
    std::size_t output_dim() const { return layers.back().weights.rows(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.rows() * l.weights.cols() + l.bias.size();
        return n;
    }
};

/// He-style uniform init for hidden layers; the output layer starts near zero
/// so fresh actors emit near-default actions.
inline Mlp make_mlp(const std::vector<std::size_t>& dims, OutputActivation out_act,
                    std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    Mlp net;
    net.output_activation = out_act;
    Rng rng(mix_seed(seed, 0x3117));
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Mlp::Layer layer;
        layer.weights = Matrix(dims[i + 1], dims[i]);
        layer.bias.assign(dims[i + 1], 0.0);
        const bool last = i + 2 == dims.size();
        const double bound = last ? 3e-3 : std::sqrt(6.0 / static_cast<double>(dims[i]));
        for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct MlpTrace {
    std::vector<std::vector<double>> pre;  // pre-activation per layer
    std::vector<std::vector<double>> post; // post-activation per layer; post[0] is the input
};

namespace detail {

inline void check_finite(const std::vector<double>& v, std::size_t layer, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error("mlp: non-finite " + std::string(what) + " at layer " +
                                     std::to_string(layer));
}

} // namespace detail

inline MlpTrace mlp_forward_trace(const Mlp& net, const std::vector<double>& input) {
    if (input.size() != net.input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
    MlpTrace trace;
    trace.post.push_back(input);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& layer = net.layers[li];
        const auto& in = trace.post.back();
        std::vector<double> z(layer.bias);
        for (std::size_t r = 0; r < layer.weights.rows(); ++r)
            for (std::size_t c = 0; c < layer.weights.cols(); ++c)
                z[r] += layer.weights(r, c) * in[c];
        detail::check_finite(z, li, "activation");
        std::vector<double> a(z.size());
        const bool last = li + 1 == net.layers.size();
        for (std::size_t r = 0; r < z.size(); ++r) {
            if (!last)
                a[r] = z[r] > 0.0 ? z[r] : 0.0;
            else if (net.output_activation == OutputActivation::tanh_bounded)
                a[r] = std::tanh(z[r]);
            else
                a[r] = z[r];
        }
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
    }
    return trace;
}

inline std::vector<double> mlp_forward(const Mlp& net, const std::vector<double>& input) {
    return mlp_forward_trace(net, input).post.back();
}

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
    std::vector<double> input; // dL/dinput, used to chain critic into actor

    double squared_norm() const {
        double s = 0.0;
        for (const auto& w : weights)
            for (double v : w.data()) s += v * v;
        for (const auto& b : bias)
            for (double v : b) s += v * v;
        return s;
    }

    void scale(double f) {
        for (auto& w : weights)
            for (double& v : w.data()) v *= f;
        for (auto& b : bias)
            for (double& v : b) v *= f;
    }

    void accumulate(const MlpGradients& other) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            auto& wd = weights[l].data();
            const auto& od = other.weights[l].data();
            for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += od[i];
            for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
        }
    }
};

inline MlpGradients zero_gradients(const Mlp& net) {
    MlpGradients g;
    for (const auto& l : net.layers) {
        g.weights.emplace_back(l.weights.rows(), l.weights.cols());
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    g.input.assign(net.input_dim(), 0.0);
    return g;
}

/// Backpropagates an upstream dL/doutput through the trace, returning
/// gradients for every weight and bias plus dL/dinput.
inline MlpGradients mlp_backward(const Mlp& net, const MlpTrace& trace,
                                 const std::vector<double>& upstream) {
    if (upstream.size() != net.output_dim())
        throw std::invalid_argument("mlp: upstream gradient dimension mismatch");
    MlpGradients grads = zero_gradients(net);

    std::vector<double> delta = upstream;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        const auto& z = trace.pre[li];
        const auto& in = trace.post[li];
        const bool last = li + 1 == net.layers.size();

        for (std::size_t r = 0; r < delta.size(); ++r) {
            if (!last) {
                delta[r] *= z[r] > 0.0 ? 1.0 : 0.0;
            } else if (net.output_activation == OutputActivation::tanh_bounded) {
                const double th = std::tanh(z[r]);
                delta[r] *= 1.0 - th * th;
            }
        }

        for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
            grads.bias[li][r] = delta[r];
            for (std::size_t c = 0; c < layer.weights.cols(); ++c)
                grads.weights[li](r, c) = delta[r] * in[c];
        }

        std::vector<double> prev(layer.weights.cols(), 0.0);
        for (std::size_t c = 0; c < layer.weights.cols(); ++c)
            for (std::size_t r = 0; r < layer.weights.rows(); ++r)
                prev[c] += layer.weights(r, c) * delta[r];
        delta = std::move(prev);
    }
    grads.input = delta;
    return grads;
}

/// Gradient step with global norm clipping.
inline void apply_sgd(Mlp& net, const MlpGradients& grads, double lr, double max_norm) {
    double factor = 1.0;
    if (max_norm > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > max_norm) factor = max_norm / norm;
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& wd = net.layers[l].weights.data();
        const auto& gd = grads.weights[l].data();
        for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= lr * factor * gd[i];
        for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
            net.layers[l].bias[i] -= lr * factor * grads.bias[l][i];
    }
}

/// target <- tau·main + (1-tau)·target; tau = 1 copies exactly.
inline void soft_update(Mlp& target, const Mlp& main, double tau) {
    const double keep = 1.0 - tau;
    for (std::size_t l = 0; l < main.layers.size(); ++l) {
        auto& tw = target.layers[l].weights.data();
        const auto& mw = main.layers[l].weights.data();
        for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = keep * tw[i] + tau * mw[i];
        for (std::size_t i = 0; i < target.layers[l].bias.size(); ++i)
            target.layers[l].bias[i] =
                keep * target.layers[l].bias[i] + tau * main.layers[l].bias[i];
    }
}

} // namespace knobtune
