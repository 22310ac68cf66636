#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "pongrl/env.hpp"
#include "pongrl/nn.hpp"
#include "pongrl/scores.hpp"

namespace pongrl::pg {

// Observation-level view of an environment, what the trainers actually
// consume. PongRolloutEnv adapts PongEnv through frame differencing; tests
// plug in toy environments (contextual bandits) through the same interface.
struct StepObservation {
    std::vector<float> obs;
    int reward = 0;
    bool done = false;
};

class RolloutEnv {
public:
    virtual ~RolloutEnv() = default;
    virtual int obs_dim() const = 0;
    virtual int action_count() const = 0;
    // Starts a fresh episode and returns the first observation.
    virtual std::vector<float> reset() = 0;
    virtual StepObservation step(int action) = 0;
    // Score of the episode so far, written to the CSV log.
    virtual int episode_score() const = 0;
};

// Flattened element-wise difference current - previous, row-major.
std::vector<float> frame_diff(const Frame& current, const Frame& previous);

// Pong adapter: observations are frame differences; the first observation
// of an episode is the raw frame (previous frame taken as all zeros).
// Each reset() reseeds the underlying env deterministically from
// (base_seed, episode counter) so episodes differ but runs replay exactly.
class PongRolloutEnv : public RolloutEnv {
public:
    PongRolloutEnv(const EnvConfig& config, uint64_t base_seed);
    int obs_dim() const override;
    int action_count() const override { return 3; }
    std::vector<float> reset() override;
    StepObservation step(int action) override;
    int episode_score() const override;
    const PongEnv& env() const { return *env_; }

private:
    EnvConfig config_;
    uint64_t base_seed_;
    int64_t episode_ = 0;
    std::unique_ptr<PongEnv> env_;
    Frame prev_;
};

// Backward discount sweep r[t-1] += gamma * r[t], restarting from zero
// after every nonzero raw reward so credit never leaks across served
// points. Returns the per-step discounted return. The double overload
// exists for oracle comparisons at tolerances float cannot express.
std::vector<float> propagate_rewards(std::span<const float> raw, float gamma);
std::vector<double> propagate_rewards(std::span<const double> raw, double gamma);

// Samples an action: with probability (1 - exploration_bias) from the
// renormalized policy output, otherwise uniformly. An all-zero policy
// falls back to uniform sampling. The sampled index is both the executed
// action and the one-hot training label.
int select_action(std::span<const float> policy_output, double exploration_bias,
                  std::mt19937_64& rng);

enum class BaselineMode { EpisodeMean, RunningMean };

struct BaselineState {
    BaselineMode mode = BaselineMode::EpisodeMean;
    double value = 0.0;
};

// Episode mode sets the baseline to the mean of this episode's returns;
// running mode folds it in with a 0.99/0.01 exponential average. An empty
// episode leaves the baseline unchanged.
BaselineState update_baseline(BaselineState state, std::span<const float> returns);

struct TrajectoryStep {
    std::vector<float> input;  // diff vector fed to the network
    int action = 0;            // sampled label, one-hot index
    std::vector<float> policy; // network output at the time of acting
    float raw_reward = 0.0f;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::vector<float> returns; // discounted, same length as steps
    int64_t episode_index = 0;
};

// Advantage-weighted squared-label gradients, summed over the episode:
// per step the output-layer gradient is 2*(R_t - b)*(y - y'). Throws
// NumericalError naming the step on a non-finite advantage.
nn::Gradients<float> episode_loss_grads(const Trajectory& traj, double baseline,
                                        const nn::Network<float>& params);

struct Hyperparams {
    double alpha = 1e-3;
    double gamma = 0.9;
    int64_t episodes = 1;
    BaselineMode baseline_mode = BaselineMode::EpisodeMean;
    double exploration_bias = 0.05;
    uint64_t seed = 0;
    nn::OptMode optimizer = nn::OptMode::Sgd;

    void validate() const;
};

struct TrainSinks {
    ScoreCsvWriter* csv = nullptr;
    int smoothing_window = 100;
    int64_t checkpoint_every = 0; // 0 = never
    std::function<void(const nn::Network<float>&, int64_t episode)> checkpoint;
    std::function<void(const ScoreRecord&)> on_episode; // optional progress hook
};

// REINFORCE-with-baseline training loop: one update per episode, gradients
// summed across the episode's steps.
nn::Network<float> train_pg(RolloutEnv& env, nn::Network<float> params, const Hyperparams& hyper,
                            TrainSinks& sinks);

} // namespace pongrl::pg
