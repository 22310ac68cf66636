#include "pongrl/a3c.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace pongrl::a3c {

namespace {

constexpr float kProbClamp = 1e-12f;

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    return z ^ (z >> 31);
}

} // namespace

void LossWeights::validate() const {
    if (!(beta1 > 0.0)) throw ConfigError("loss_weights.beta1: must be > 0");
    if (beta2 < 0.0 || !std::isfinite(beta2)) throw ConfigError("loss_weights.beta2: must be >= 0");
    if (beta3 < 0.0 || !std::isfinite(beta3)) throw ConfigError("loss_weights.beta3: must be >= 0");
}

LossBreakdown compute_losses(std::span<const AcStep> steps, std::span<const float> returns,
                             const LossWeights& weights) {
    if (steps.size() != returns.size())
        throw UsageError("compute_losses: steps and returns differ in length");
    LossBreakdown out;
    for (size_t t = 0; t < steps.size(); ++t) {
        const auto& s = steps[t];
        const double advantage = double(returns[t]) - double(s.value);
        const double pa = std::max(double(s.policy[size_t(s.action)]), double(kProbClamp));
        out.policy_loss += -std::log(pa) * advantage;
        out.value_loss += advantage * advantage;
        // Entropy is a property of a distribution, so renormalize the recorded
        // (float-rounded) probabilities in double before taking logs.
        double mass = 0.0;
        for (float p : s.policy) mass += std::max(double(p), double(kProbClamp));
        for (float p : s.policy) {
            const double pk = std::max(double(p), double(kProbClamp)) / mass;
            out.entropy_loss += pk * std::log(pk);
        }
    }
    out.total = weights.beta1 * out.policy_loss + weights.beta2 * out.value_loss +
                weights.beta3 * out.entropy_loss;
    return out;
}

nn::Gradients<float> episode_ac_grads(std::span<const std::vector<float>> inputs,
                                      std::span<const AcStep> steps,
                                      std::span<const float> returns, const LossWeights& weights,
                                      const nn::Network<float>& params) {
    if (inputs.size() != steps.size() || steps.size() != returns.size())
        throw UsageError("episode_ac_grads: trajectory pieces differ in length");
    if (!params.value_head) throw UsageError("episode_ac_grads: network has no value head");

    auto grads = nn::zero_gradients(params);
    const int out_n = params.arch.output_size();
    std::vector<float> g(static_cast<size_t>(out_n));

    for (size_t t = 0; t < steps.size(); ++t) {
        auto trace = nn::forward(params, std::span<const float>(inputs[t]));
        const float ret = returns[t];
        // Stop-gradient advantage: the policy term sees R - V as a constant.
        const float advantage = ret - trace.value();
        if (!std::isfinite(advantage))
            throw NumericalError("episode_ac_grads: non-finite advantage at step " +
                                 std::to_string(t));
        const int action = steps[t].action;
        for (int k = 0; k < out_n; ++k) {
            const float pk = std::max(trace.output()[size_t(k)], kProbClamp);
            g[size_t(k)] = float(weights.beta3) * (std::log(pk) + 1.0f);
            if (k == action) g[size_t(k)] += -float(weights.beta1) * advantage / pk;
        }
        const float vg = -2.0f * float(weights.beta2) * (ret - trace.value());
        nn::backward_into(params, trace, std::span<const float>(g), &vg, grads);
    }
    return grads;
}

SharedParams::SharedParams(nn::Network<float> initial, nn::Optimizer<float> optimizer)
    : master_(std::move(initial)), optimizer_(std::move(optimizer)) {
    checksum_ = nn::param_checksum(master_);
}

SharedParams::Snapshot SharedParams::snapshot() const {
    std::lock_guard lock(mu_);
    return Snapshot{master_, version_, checksum_};
}

void SharedParams::apply(const nn::Gradients<float>& grads) {
    std::lock_guard lock(mu_);
    optimizer_.apply(master_, grads);
    ++updates_;
    ++version_;
    checksum_ = nn::param_checksum(master_);
}

uint64_t SharedParams::version() const {
    std::lock_guard lock(mu_);
    return version_;
}

uint64_t SharedParams::update_count() const {
    std::lock_guard lock(mu_);
    return updates_;
}

nn::Network<float> SharedParams::final_params() const {
    std::lock_guard lock(mu_);
    return master_;
}

void worker_run(int worker_id, SharedParams& shared, pg::RolloutEnv& env,
                const A3cHyperparams& hyper, const LossWeights& weights,
                std::atomic<int64_t>& episode_counter, std::mutex& record_mu,
                std::vector<ScoreRecord>& records) {
    std::mt19937_64 rng(mix(hyper.seed, uint64_t(worker_id)));
    const auto t0 = std::chrono::steady_clock::now();

    while (true) {
        const int64_t ep = episode_counter.fetch_add(1);
        if (ep >= hyper.episodes) {
            episode_counter.fetch_sub(1); // hand the unused slot back
            break;
        }
        const double elapsed0 =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (hyper.time_limit_s > 0.0 && elapsed0 >= hyper.time_limit_s) {
            episode_counter.fetch_sub(1);
            break;
        }

        auto snap = shared.snapshot();

        std::vector<std::vector<float>> inputs;
        std::vector<AcStep> steps;
        std::vector<float> rewards;
        std::vector<float> obs = env.reset();
        bool done = false;
        while (!done) {
            auto trace = nn::forward(snap.net, std::span<const float>(obs));
            AcStep step;
            step.policy = trace.output();
            step.value = trace.value();
            // Exploration comes from the softmax distribution itself.
            step.action = pg::select_action(step.policy, 0.0, rng);
            inputs.push_back(std::move(obs));
            auto result = env.step(step.action);
            rewards.push_back(float(result.reward));
            obs = std::move(result.obs);
            done = result.done;
            steps.push_back(std::move(step));
        }

        auto returns = pg::propagate_rewards(rewards, float(hyper.gamma));
        auto grads = episode_ac_grads(inputs, steps, returns, weights, snap.net);
        shared.apply(grads);

        ScoreRecord rec;
        rec.episode = ep;
        rec.score = env.episode_score();
        rec.steps = int64_t(steps.size());
        rec.wall_clock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.worker_id = worker_id;
        {
            std::lock_guard lock(record_mu);
            records.push_back(rec);
        }
    }
}

A3cResult train_a3c(int n_workers, const EnvFactory& make_env, const nn::ArchitectureSpec& spec,
                    const A3cHyperparams& hyper, const LossWeights& weights, A3cSinks& sinks) {
    if (n_workers < 1) throw ConfigError("a3c: n_workers must be >= 1");
    weights.validate();
    if (!(hyper.alpha >= 0.0)) throw ConfigError("hyper.alpha: must be >= 0");
    if (hyper.gamma < 0.0 || hyper.gamma >= 1.0) throw ConfigError("hyper.gamma: must be in [0, 1)");
    if (hyper.episodes < 0) throw ConfigError("hyper.episodes: must be >= 0");
    if (!spec.has_value_head || spec.output_activation != nn::Activation::Softmax)
        throw ConfigError("a3c: architecture needs a softmax head and a value head");

    nn::Optimizer<float> opt{hyper.optimizer, float(hyper.alpha), 0.99f, 1e-8f, {}};
    SharedParams shared(nn::init_network<float>(spec, hyper.seed), std::move(opt));

    std::atomic<int64_t> episode_counter{0};
    std::mutex record_mu;
    A3cResult result;
    std::vector<std::string> errors(static_cast<size_t>(n_workers));

    // Worker failures are isolated: one dying thread does not stop the rest.
    auto run_one = [&](int wid, pg::RolloutEnv* env) {
        try {
            worker_run(wid, shared, *env, hyper, weights, episode_counter, record_mu,
                       result.records);
        } catch (const std::exception& e) {
            errors[size_t(wid)] = e.what();
        }
    };

    std::vector<std::unique_ptr<pg::RolloutEnv>> envs;
    for (int w = 0; w < n_workers; ++w) envs.push_back(make_env(w));

    if (n_workers == 1) {
        run_one(0, envs[0].get());
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < n_workers; ++w)
            threads.emplace_back(run_one, w, envs[size_t(w)].get());
        for (auto& t : threads) t.join();
    }

    for (int w = 0; w < n_workers; ++w)
        if (!errors[size_t(w)].empty())
            result.worker_errors.push_back("worker " + std::to_string(w) + ": " +
                                           errors[size_t(w)]);

    std::sort(result.records.begin(), result.records.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.episode < b.episode; });
    SmoothingWindow smoothing(sinks.smoothing_window);
    for (auto& rec : result.records) rec.smoothed = smoothing.add(double(rec.score));
    if (sinks.csv) {
        for (const auto& rec : result.records) sinks.csv->write(rec);
        sinks.csv->flush();
    }

    result.params = shared.final_params();
    if (sinks.checkpoint && sinks.checkpoint_every > 0)
        sinks.checkpoint(result.params, int64_t(result.records.size()));
    return result;
}

} // namespace pongrl::a3c
