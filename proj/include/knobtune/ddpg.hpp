#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "knobtune/mlp.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

struct DdpgParams {
    std::size_t state_dim = 16;
    std::size_t action_dim = 10;
    std::size_t hidden = 64;
    double gamma = 0.9;
    double tau = 0.005;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double grad_clip = 1.0;
    std::size_t replay_capacity = 10000;
    std::size_t batch_size = 32;
    std::size_t train_after = 64; // replay size before updates start
    std::uint64_t seed = 0;
};

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
};

/// Deterministic-policy actor-critic with a replay ring buffer and
/// soft-updated target networks. Actions live in [-1, 1]^d.
class DdpgAgent {
public:
    explicit DdpgAgent(DdpgParams params) : params_(params) {
        actor_ = make_mlp({params.state_dim, params.hidden, params.hidden, params.action_dim},
                          OutputActivation::tanh_bounded, mix_seed(params.seed, 0xAC7));
        critic_ = make_mlp({params.state_dim + params.action_dim, params.hidden, params.hidden, 1},
                           OutputActivation::identity, mix_seed(params.seed, 0xC21));
        target_actor_ = actor_;
        target_critic_ = critic_;
    }

    const DdpgParams& params() const { return params_; }
    const Mlp& actor() const { return actor_; }
    const Mlp& critic() const { return critic_; }
    const Mlp& target_actor() const { return target_actor_; }
    const Mlp& target_critic() const { return target_critic_; }
    std::size_t replay_size() const { return replay_.size(); }

    /// Policy action plus exploration noise, clipped to [-1, 1].
    std::vector<double> act(const std::vector<double>& state, double noise_sigma, Rng& rng) const {
        std::vector<double> a = mlp_forward(actor_, pad_state(state));
        for (double& v : a) {
            if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
            v = std::clamp(v, -1.0, 1.0);
        }
        return a;
    }

    void add_transition(Transition t) {
        t.state = pad_state(t.state);
        t.next_state = pad_state(t.next_state);
        if (replay_.size() < params_.replay_capacity) {
            replay_.push_back(std::move(t));
        } else {
            replay_[replay_pos_ % params_.replay_capacity] = std::move(t);
        }
        ++replay_pos_;
    }

    bool ready_to_train() const { return replay_.size() >= params_.train_after; }

    /// One critic + actor update on a sampled batch, then soft target updates.
    void train_step(Rng& rng) {
        if (!ready_to_train()) return;
        const std::size_t batch = std::min(params_.batch_size, replay_.size());
        std::vector<const Transition*> sample(batch);
        for (auto& t : sample) t = &replay_[rng.uniform_index(replay_.size())];

        // critic: minimize mean squared TD error against the target networks
        MlpGradients critic_grads = zero_gradients(critic_);
        for (const Transition* t : sample) {
            const std::vector<double> next_action = mlp_forward(target_actor_, t->next_state);
            const double q_next = mlp_forward(target_critic_, concat(t->next_state, next_action))[0];
            const double target = t->reward + params_.gamma * q_next;

            const std::vector<double> in = concat(t->state, t->action);
            const MlpTrace trace = mlp_forward_trace(critic_, in);
            const double q = trace.post.back()[0];
            const double upstream = 2.0 * (q - target) / static_cast<double>(batch);
            critic_grads.accumulate(mlp_backward(critic_, trace, {upstream}));
        }
        apply_sgd(critic_, critic_grads, params_.critic_lr, params_.grad_clip);

        // actor: ascend the critic's value of its own actions
        MlpGradients actor_grads = zero_gradients(actor_);
        for (const Transition* t : sample) {
            const MlpTrace actor_trace = mlp_forward_trace(actor_, t->state);
            const std::vector<double>& action = actor_trace.post.back();
            const MlpTrace critic_trace = mlp_forward_trace(critic_, concat(t->state, action));
            const MlpGradients dq = mlp_backward(critic_, critic_trace, {1.0});
            std::vector<double> upstream(params_.action_dim);
            for (std::size_t i = 0; i < params_.action_dim; ++i)
                upstream[i] = -dq.input[params_.state_dim + i] / static_cast<double>(batch);
            actor_grads.accumulate(mlp_backward(actor_, actor_trace, upstream));
        }
        apply_sgd(actor_, actor_grads, params_.actor_lr, params_.grad_clip);

        soft_update(target_actor_, actor_, params_.tau);
        soft_update(target_critic_, critic_, params_.tau);
    }

    nlohmann::ordered_json checkpoint() const {
        nlohmann::ordered_json j;
        j["actor"] = mlp_json(actor_);
        j["critic"] = mlp_json(critic_);
        j["target_actor"] = mlp_json(target_actor_);
        j["target_critic"] = mlp_json(target_critic_);
        j["replay_pos"] = replay_pos_;
        auto& rows = j["replay"] = nlohmann::ordered_json::array();
        for (const auto& t : replay_) {
            nlohmann::ordered_json r;
            r["s"] = t.state;
            r["a"] = t.action;
            r["r"] = t.reward;
            r["s2"] = t.next_state;
            rows.push_back(std::move(r));
        }
        return j;
    }

    void restore(const nlohmann::ordered_json& j) {
        mlp_from_json(actor_, j.at("actor"));
        mlp_from_json(critic_, j.at("critic"));
        mlp_from_json(target_actor_, j.at("target_actor"));
        mlp_from_json(target_critic_, j.at("target_critic"));
        replay_pos_ = j.at("replay_pos").get<std::size_t>();
        replay_.clear();
        for (const auto& r : j.at("replay")) {
            Transition t;
            t.state = r.at("s").get<std::vector<double>>();
            t.action = r.at("a").get<std::vector<double>>();
            t.reward = r.at("r").get<double>();
            t.next_state = r.at("s2").get<std::vector<double>>();
            replay_.push_back(std::move(t));
        }
    }

    std::vector<double> pad_state(const std::vector<double>& s) const {
        std::vector<double> out = s;
        out.resize(params_.state_dim, 0.0);
        return out;
    }

private:
    static std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> out = a;
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

    static nlohmann::ordered_json mlp_json(const Mlp& net) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& l : net.layers) {
            nlohmann::ordered_json lj;
            lj["rows"] = l.weights.rows();
            lj["cols"] = l.weights.cols();
            lj["w"] = l.weights.data();
            lj["b"] = l.bias;
            j.push_back(std::move(lj));
        }
        return j;
    }

    static void mlp_from_json(Mlp& net, const nlohmann::ordered_json& j) {
        if (j.size() != net.layers.size())
            throw std::runtime_error("ddpg checkpoint: layer count mismatch");
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            auto& layer = net.layers[li];
            const auto& lj = j[li];
            if (lj.at("rows").get<std::size_t>() != layer.weights.rows() ||
                lj.at("cols").get<std::size_t>() != layer.weights.cols())
                throw std::runtime_error("ddpg checkpoint: layer shape mismatch");
            layer.weights.data() = lj.at("w").get<std::vector<double>>();
            layer.bias = lj.at("b").get<std::vector<double>>();
        }
    }

    DdpgParams params_;
    Mlp actor_, critic_, target_actor_, target_critic_;
    std::vector<Transition> replay_;
    std::size_t replay_pos_ = 0;
};

} // namespace knobtune
