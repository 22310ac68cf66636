#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "pongrl/nn.hpp"
#include "pongrl/pg.hpp"
#include "pongrl/scores.hpp"

namespace pongrl::a3c {

struct LossWeights {
    double beta1 = 1.0;
    double beta2 = 0.5;
    double beta3 = 0.001;

    void validate() const;
};

// Episode loss totals. entropy_loss stores sum_t sum_k pi log pi, i.e. the
// NEGATED entropy, so that
//   total = beta1*policy_loss + beta2*value_loss + beta3*entropy_loss
// holds exactly while minimizing the total still rewards high entropy.
// Use entropy() for the positive entropy value.
struct LossBreakdown {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy_loss = 0.0;
    double total = 0.0;

    double entropy() const { return -entropy_loss; }
};

// One recorded actor-critic step: softmax policy, chosen action, value.
struct AcStep {
    std::vector<float> policy;
    int action = 0;
    float value = 0.0f;
};

// Sums the three loss terms over an episode. Probabilities are clamped at
// 1e-12 before logs. The advantage in the policy term uses the recorded
// value as a constant (no gradient flows through it here or in the
// gradient path).
LossBreakdown compute_losses(std::span<const AcStep> steps, std::span<const float> returns,
                             const LossWeights& weights);

// Per-episode gradients of the total loss for one trajectory, recomputing
// forward traces against `params` (which must be the snapshot the episode
// was played with).
nn::Gradients<float> episode_ac_grads(std::span<const std::vector<float>> inputs,
                                      std::span<const AcStep> steps,
                                      std::span<const float> returns, const LossWeights& weights,
                                      const nn::Network<float>& params);

// Master parameter store. A mutex serializes updates; snapshots copy the
// full network together with a version and checksum written under the same
// lock, so a snapshot can never observe a half-applied update.
class SharedParams {
public:
    SharedParams(nn::Network<float> initial, nn::Optimizer<float> optimizer);

    struct Snapshot {
        nn::Network<float> net;
        uint64_t version = 0;
        uint64_t checksum = 0;
    };

    Snapshot snapshot() const;
    void apply(const nn::Gradients<float>& grads);
    uint64_t version() const;
    uint64_t update_count() const;
    nn::Network<float> final_params() const;

private:
    mutable std::mutex mu_;
    nn::Network<float> master_;
    nn::Optimizer<float> optimizer_; // shared across workers
    uint64_t version_ = 0;
    uint64_t updates_ = 0;
    uint64_t checksum_ = 0;
};

struct A3cHyperparams {
    double alpha = 1e-3;
    double gamma = 0.9;
    int64_t episodes = 1; // global budget across all workers
    uint64_t seed = 0;
    nn::OptMode optimizer = nn::OptMode::Sgd;
    // Optional wall-clock cutoff; <= 0 means episodes-only.
    double time_limit_s = 0.0;
};

using EnvFactory = std::function<std::unique_ptr<pg::RolloutEnv>(int worker_id)>;

struct A3cSinks {
    ScoreCsvWriter* csv = nullptr; // written after join, episode-ordered
    int smoothing_window = 100;
    int64_t checkpoint_every = 0;
    std::function<void(const nn::Network<float>&, int64_t episode)> checkpoint;
};

struct A3cResult {
    nn::Network<float> params;
    std::vector<ScoreRecord> records; // episode-ordered
    std::vector<std::string> worker_errors;
};

// Runs one worker loop against `shared` until the global episode counter
// reaches `episodes`. Exposed for tests; train_a3c spawns one thread per
// worker over this.
void worker_run(int worker_id, SharedParams& shared, pg::RolloutEnv& env,
                const A3cHyperparams& hyper, const LossWeights& weights,
                std::atomic<int64_t>& episode_counter, std::mutex& record_mu,
                std::vector<ScoreRecord>& records);

A3cResult train_a3c(int n_workers, const EnvFactory& make_env, const nn::ArchitectureSpec& spec,
                    const A3cHyperparams& hyper, const LossWeights& weights, A3cSinks& sinks);

} // namespace pongrl::a3c
