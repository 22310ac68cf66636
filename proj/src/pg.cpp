#include "pongrl/pg.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

namespace pongrl::pg {

namespace {

uint64_t mix_seed(uint64_t base, uint64_t n) {
    // splitmix64 over base + n
    uint64_t z = base + 0x9e3779b97f4a7c15ull * (n + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

std::vector<float> frame_diff(const Frame& current, const Frame& previous) {
    if (current.height != previous.height || current.width != previous.width)
        throw ShapeError("frame_diff: frame dimensions differ (" + std::to_string(current.height) +
                         "x" + std::to_string(current.width) + " vs " +
                         std::to_string(previous.height) + "x" + std::to_string(previous.width) +
                         ")");
    std::vector<float> out(current.pixels.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = current.pixels[i] - previous.pixels[i];
    return out;
}

PongRolloutEnv::PongRolloutEnv(const EnvConfig& config, uint64_t base_seed)
    : config_(config), base_seed_(base_seed) {
    config_.validate();
}

int PongRolloutEnv::obs_dim() const { return config_.frame_height * config_.frame_width; }

std::vector<float> PongRolloutEnv::reset() {
    config_.rng_seed = mix_seed(base_seed_, uint64_t(episode_++));
    env_ = std::make_unique<PongEnv>(config_);
    Frame first = env_->reset();
    prev_ = first;
    // First diff pairs the raw frame with an all-zero previous frame.
    return std::vector<float>(first.pixels.begin(), first.pixels.end());
}

StepObservation PongRolloutEnv::step(int action) {
    if (!env_) throw UsageError("PongRolloutEnv: step before reset");
    StepResult r = env_->step(static_cast<EnvAction>(action));
    StepObservation out;
    out.obs = frame_diff(r.frame, prev_);
    out.reward = r.reward;
    out.done = r.episode_done;
    prev_ = r.frame;
    return out;
}

int PongRolloutEnv::episode_score() const {
    if (!env_) return 0;
    auto [a, o] = env_->score();
    return a - o;
}

namespace {

template <class T> std::vector<T> propagate_rewards_impl(std::span<const T> raw, T gamma) {
    std::vector<T> out(raw.size());
    T running = T(0);
    for (size_t i = raw.size(); i-- > 0;) {
        if (raw[i] != T(0))
            running = raw[i]; // boundary of a served point: restart the sweep
        else
            running *= gamma;
        out[i] = running;
    }
    return out;
}

} // namespace

std::vector<float> propagate_rewards(std::span<const float> raw, float gamma) {
    return propagate_rewards_impl(raw, gamma);
}

std::vector<double> propagate_rewards(std::span<const double> raw, double gamma) {
    return propagate_rewards_impl(raw, gamma);
}

int select_action(std::span<const float> policy_output, double exploration_bias,
                  std::mt19937_64& rng) {
    const int n = int(policy_output.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> uniform_action(0, n - 1);

    if (unit(rng) < exploration_bias) return uniform_action(rng);

    double total = 0.0;
    for (float p : policy_output) {
        if (p < 0.0f) throw UsageError("select_action: negative policy output");
        total += p;
    }
    if (total <= 0.0) return uniform_action(rng); // degenerate all-zero output

    double u = unit(rng) * total;
    for (int i = 0; i < n; ++i) {
        u -= policy_output[size_t(i)];
        if (u <= 0.0) return i;
    }
    return n - 1;
}

BaselineState update_baseline(BaselineState state, std::span<const float> returns) {
    if (returns.empty()) {
        std::cerr << "warning: update_baseline called with an empty episode\n";
        return state;
    }
    double mean = 0.0;
    for (float r : returns) mean += r;
    mean /= double(returns.size());
    if (state.mode == BaselineMode::EpisodeMean)
        state.value = mean;
    else
        state.value = 0.99 * state.value + 0.01 * mean;
    return state;
}

nn::Gradients<float> episode_loss_grads(const Trajectory& traj, double baseline,
                                        const nn::Network<float>& params) {
    if (traj.steps.size() != traj.returns.size())
        throw UsageError("episode_loss_grads: returns not populated");

    auto grads = nn::zero_gradients(params);
    const int out_n = params.arch.output_size();
    std::vector<float> g(static_cast<size_t>(out_n));

    for (size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& step = traj.steps[t];
        const float advantage = traj.returns[t] - float(baseline);
        if (!std::isfinite(advantage))
            throw NumericalError("episode_loss_grads: non-finite advantage at step " +
                                 std::to_string(t));
        auto trace = nn::forward(params, std::span<const float>(step.input));
        for (int k = 0; k < out_n; ++k) {
            const float label = (k == step.action) ? 1.0f : 0.0f;
            g[size_t(k)] = 2.0f * advantage * (trace.output()[size_t(k)] - label);
        }
        nn::backward_into(params, trace, std::span<const float>(g),
                          static_cast<const float*>(nullptr), grads);
    }
    return grads;
}

void Hyperparams::validate() const {
    // alpha == 0 is allowed: it freezes the parameters, which the tests use.
    if (!(alpha >= 0.0)) throw ConfigError("hyper.alpha: must be >= 0");
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("hyper.gamma: must be in [0, 1)");
    if (episodes < 1) throw ConfigError("hyper.episodes: must be >= 1");
    if (exploration_bias < 0.0 || exploration_bias > 1.0)
        throw ConfigError("hyper.exploration_bias: must be in [0, 1]");
}

nn::Network<float> train_pg(RolloutEnv& env, nn::Network<float> params, const Hyperparams& hyper,
                            TrainSinks& sinks) {
    hyper.validate();
    if (params.arch.input_size != env.obs_dim())
        throw ShapeError("train_pg: network input " + std::to_string(params.arch.input_size) +
                         " does not match observation size " + std::to_string(env.obs_dim()));
    if (params.arch.output_size() != env.action_count())
        throw ShapeError("train_pg: network output " +
                         std::to_string(params.arch.output_size()) +
                         " does not match action count " + std::to_string(env.action_count()));

    std::mt19937_64 rng(hyper.seed);
    nn::Optimizer<float> opt{hyper.optimizer, float(hyper.alpha), 0.99f, 1e-8f, {}};
    BaselineState baseline{hyper.baseline_mode, 0.0};
    SmoothingWindow smoothing(sinks.smoothing_window);
    const auto t0 = std::chrono::steady_clock::now();

    for (int64_t ep = 0; ep < hyper.episodes; ++ep) {
        Trajectory traj;
        traj.episode_index = ep;
        std::vector<float> rewards;
        std::vector<float> obs = env.reset();

        bool done = false;
        while (!done) {
            auto trace = nn::forward(params, std::span<const float>(obs));
            const int action = select_action(trace.output(), hyper.exploration_bias, rng);
            TrajectoryStep step;
            step.input = std::move(obs);
            step.action = action;
            step.policy = trace.output();
            auto result = env.step(action);
            step.raw_reward = float(result.reward);
            rewards.push_back(step.raw_reward);
            traj.steps.push_back(std::move(step));
            obs = std::move(result.obs);
            done = result.done;
        }

        traj.returns = propagate_rewards(rewards, float(hyper.gamma));
        baseline = update_baseline(baseline, traj.returns);
        auto grads = episode_loss_grads(traj, baseline.value, params);
        opt.apply(params, grads);

        ScoreRecord rec;
        rec.episode = ep;
        rec.score = env.episode_score();
        rec.smoothed = smoothing.add(double(rec.score));
        rec.steps = int64_t(traj.steps.size());
        rec.wall_clock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (sinks.csv) sinks.csv->write(rec);
        if (sinks.on_episode) sinks.on_episode(rec);
        if (sinks.checkpoint_every > 0 && sinks.checkpoint &&
            (ep + 1) % sinks.checkpoint_every == 0)
            sinks.checkpoint(params, ep + 1);
    }
    if (sinks.csv) sinks.csv->flush();
    return params;
}

} // namespace pongrl::pg
