#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "pongrl/a3c.hpp"
#include "pongrl/gradcheck.hpp"

using namespace pongrl;
using namespace pongrl::a3c;

namespace {

// Tiny three-action env: the context cycles through the three one-hot
// observations; matching the context pays +1, anything else -1. Episodes
// last a fixed number of steps.
class CycleEnv : public pg::RolloutEnv {
public:
    explicit CycleEnv(uint64_t seed, int steps = 6) : rng_(seed), steps_per_episode_(steps) {}

    int obs_dim() const override { return 3; }
    int action_count() const override { return 3; }

    std::vector<float> reset() override {
        step_ = 0;
        score_ = 0;
        return draw();
    }

    pg::StepObservation step(int action) override {
        pg::StepObservation r;
        r.reward = (action == context_) ? 1 : -1;
        score_ += r.reward;
        ++step_;
        r.done = step_ >= steps_per_episode_;
        r.obs = draw();
        return r;
    }

    int episode_score() const override { return score_; }

private:
    std::vector<float> draw() {
        context_ = int(rng_() % 3);
        std::vector<float> obs(3, 0.0f);
        obs[size_t(context_)] = 1.0f;
        return obs;
    }

    std::mt19937_64 rng_;
    int steps_per_episode_;
    int context_ = 0;
    int step_ = 0;
    int score_ = 0;
};

AcStep make_step(std::vector<float> policy, int action, float value) {
    AcStep s;
    s.policy = std::move(policy);
    s.action = action;
    s.value = value;
    return s;
}

} // namespace

TEST_CASE("uniform policy has per-step entropy ln 3") {
    const float u = 1.0f / 3.0f;
    std::vector<AcStep> steps{make_step({u, u, u}, 0, 0.0f)};
    std::vector<float> returns{0.0f};
    auto l = compute_losses(steps, returns, LossWeights{});
    CHECK(l.entropy() == doctest::Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(l.entropy_loss < 0.0); // stored as sum pi log pi
}

TEST_CASE("value loss is the squared advantage") {
    std::vector<AcStep> steps{make_step({0.5f, 0.25f, 0.25f}, 0, 0.5f)};
    std::vector<float> returns{1.0f};
    auto l = compute_losses(steps, returns, LossWeights{});
    CHECK(l.value_loss == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("deterministic chosen action with zero advantage has zero losses") {
    std::vector<AcStep> steps{make_step({1.0f, 0.0f, 0.0f}, 0, 0.7f)};
    std::vector<float> returns{0.7f};
    auto l = compute_losses(steps, returns, LossWeights{});
    CHECK(l.policy_loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l.value_loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total is exactly the weighted sum of the three terms") {
    std::vector<AcStep> steps{make_step({0.6f, 0.3f, 0.1f}, 1, 0.2f),
                              make_step({0.2f, 0.5f, 0.3f}, 2, -0.4f)};
    std::vector<float> returns{0.9f, -0.5f};
    LossWeights w;
    auto l = compute_losses(steps, returns, w);
    CHECK(l.total == w.beta1 * l.policy_loss + w.beta2 * l.value_loss + w.beta3 * l.entropy_loss);
}

TEST_CASE("scaling beta2 scales only the value contribution, bit-exactly") {
    std::vector<AcStep> steps{make_step({0.6f, 0.3f, 0.1f}, 0, 0.2f),
                              make_step({0.1f, 0.8f, 0.1f}, 1, 0.6f)};
    std::vector<float> returns{1.0f, -1.0f};
    LossWeights w1;
    LossWeights w2 = w1;
    w2.beta2 = 3.0 * w1.beta2;
    auto a = compute_losses(steps, returns, w1);
    auto b = compute_losses(steps, returns, w2);
    CHECK(a.policy_loss == b.policy_loss);
    CHECK(a.value_loss == b.value_loss);
    CHECK(a.entropy_loss == b.entropy_loss);
    CHECK(b.total - w2.beta1 * b.policy_loss - w2.beta3 * b.entropy_loss ==
          doctest::Approx(3.0 * (a.total - w1.beta1 * a.policy_loss -
                                 w1.beta3 * a.entropy_loss)).epsilon(1e-12));
}

TEST_CASE("per-step entropy stays within [0, ln 3]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> p(3);
        float sum = 0;
        for (auto& v : p) {
            v = unit(rng) + 1e-6f;
            sum += v;
        }
        for (auto& v : p) v /= sum;
        std::vector<AcStep> steps{make_step(p, 0, 0.0f)};
        std::vector<float> returns{0.0f};
        auto l = compute_losses(steps, returns, LossWeights{});
        CHECK(l.entropy() >= 0.0);
        CHECK(l.entropy() <= std::log(3.0) + 1e-9);
    }
    // Deterministic policy: entropy at the clamp floor, effectively zero.
    std::vector<AcStep> det{make_step({1.0f, 0.0f, 0.0f}, 0, 0.0f)};
    std::vector<float> r0{0.0f};
    CHECK(compute_losses(det, r0, LossWeights{}).entropy() < 1e-9);
}

TEST_CASE("actor-critic gradients match finite differences (double oracle)") {
    auto rep = nn::gradient_check(nn::parse_architecture("6:4:3"), nn::LossTag::ActorCritic, 11);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("episode_ac_grads matches a double-precision finite-difference oracle") {
    auto spec = nn::parse_architecture("3:4:3;softmax;v");
    auto net = nn::init_network<float>(spec, 13);

    std::vector<std::vector<float>> inputs{{1.0f, 0.0f, 0.0f}, {0.0f, 0.2f, 0.8f}};
    std::vector<float> returns{1.0f, -0.5f};
    LossWeights w;
    std::vector<AcStep> steps;
    for (const auto& x : inputs) {
        auto tr = nn::forward(net, std::span<const float>(x));
        steps.push_back(make_step(tr.output(), int(steps.size()) % 3, tr.value()));
    }

    auto analytic_f = episode_ac_grads(inputs, steps, returns, w, net);

    // Parameter-identical double net.
    auto dnet = nn::init_network<double>(spec, 0);
    {
        std::vector<const std::vector<float>*> src;
        nn::for_each_block(std::as_const(net),
                           [&](const std::vector<float>& blk) { src.push_back(&blk); });
        size_t bi = 0;
        nn::for_each_block(dnet, [&](std::vector<double>& blk) {
            const auto& s = *src[bi++];
            for (size_t i = 0; i < blk.size(); ++i) blk[i] = double(s[i]);
        });
    }
    // Stop-gradient advantages captured as constants at the base parameters.
    std::vector<double> adv;
    for (size_t t = 0; t < steps.size(); ++t) adv.push_back(double(returns[t]) - double(steps[t].value));

    auto loss = [&](nn::Network<double>& n) {
        double total = 0.0;
        for (size_t t = 0; t < inputs.size(); ++t) {
            std::vector<double> x(inputs[t].begin(), inputs[t].end());
            auto tr = nn::forward(n, std::span<const double>(x));
            const double pa = std::max(tr.output()[size_t(steps[t].action)], 1e-12);
            const double dv = double(returns[t]) - tr.value();
            double neg_ent = 0.0;
            for (double p : tr.output()) neg_ent += std::max(p, 1e-12) * std::log(std::max(p, 1e-12));
            total += w.beta1 * (-std::log(pa)) * adv[t] + w.beta2 * dv * dv + w.beta3 * neg_ent;
        }
        return total;
    };
    auto fd = nn::finite_difference_gradients(dnet, loss, 1e-5);

    nn::Gradients<double> analytic = nn::zero_gradients(dnet);
    for (size_t l = 0; l < analytic.w.size(); ++l) {
        for (size_t i = 0; i < analytic.w[l].size(); ++i)
            analytic.w[l][i] = double(analytic_f.w[l][i]);
        for (size_t i = 0; i < analytic.b[l].size(); ++i)
            analytic.b[l][i] = double(analytic_f.b[l][i]);
    }
    for (size_t i = 0; i < analytic.vw.size(); ++i) analytic.vw[i] = double(analytic_f.vw[i]);
    for (size_t i = 0; i < analytic.vb.size(); ++i) analytic.vb[i] = double(analytic_f.vb[i]);
    CHECK(nn::max_rel_error(analytic, fd) < 1e-4); // single-precision analytic
}

TEST_CASE("snapshots are versioned, checksummed, and never torn") {
    auto spec = nn::parse_architecture("4:8:3;softmax;v");
    auto net = nn::init_network<float>(spec, 1);
    nn::Optimizer<float> opt{nn::OptMode::Sgd, 0.01f, 0.99f, 1e-8f, {}};
    SharedParams shared(std::move(net), std::move(opt));

    auto s0 = shared.snapshot();
    CHECK(s0.version == 0);
    CHECK(s0.checksum == nn::param_checksum(s0.net));

    // Stress: one writer applying updates, one reader validating snapshots.
    std::atomic<bool> stop{false};
    std::atomic<int> torn{0};
    std::thread reader([&] {
        while (!stop.load()) {
            auto s = shared.snapshot();
            if (s.checksum != nn::param_checksum(s.net)) torn.fetch_add(1);
        }
    });
    auto probe = shared.snapshot().net;
    auto grads = nn::zero_gradients(probe);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> unit(-0.1f, 0.1f);
    for (int i = 0; i < 400; ++i) {
        for (auto& blk : grads.w)
            for (auto& v : blk) v = unit(rng);
        shared.apply(grads);
    }
    stop.store(true);
    reader.join();
    CHECK(torn.load() == 0);
    CHECK(shared.version() == 400);
    CHECK(shared.update_count() == 400);
}

TEST_CASE("two workers with alpha 0 leave the master untouched") {
    auto spec = nn::parse_architecture("3:4:3;softmax;v");
    const uint64_t before = nn::param_checksum(nn::init_network<float>(spec, 5));
    A3cHyperparams hyper;
    hyper.alpha = 0.0;
    hyper.episodes = 20;
    hyper.seed = 5;
    A3cSinks sinks;
    auto res = train_a3c(
        2, [](int wid) { return std::make_unique<CycleEnv>(uint64_t(wid) + 1); }, spec, hyper,
        LossWeights{}, sinks);
    CHECK(res.worker_errors.empty());
    CHECK(nn::param_checksum(res.params) == before);
    CHECK(res.records.size() == 20u); // exactly M episodes, no double-counting
    for (const auto& r : res.records) CHECK(r.worker_id >= 0);
}

TEST_CASE("episode budget zero returns the initial parameters") {
    auto spec = nn::parse_architecture("3:4:3;softmax;v");
    const uint64_t before = nn::param_checksum(nn::init_network<float>(spec, 2));
    A3cHyperparams hyper;
    hyper.episodes = 0;
    hyper.seed = 2;
    A3cSinks sinks;
    auto res = train_a3c(
        1, [](int wid) { return std::make_unique<CycleEnv>(uint64_t(wid) + 1); }, spec, hyper,
        LossWeights{}, sinks);
    CHECK(res.records.empty());
    CHECK(nn::param_checksum(res.params) == before);
}

TEST_CASE("single-worker training is bit-deterministic") {
    auto run = [] {
        auto spec = nn::parse_architecture("3:8:3;softmax;v");
        A3cHyperparams hyper;
        hyper.alpha = 0.01;
        hyper.episodes = 60;
        hyper.seed = 9;
        A3cSinks sinks;
        auto res = train_a3c(
            1, [](int) { return std::make_unique<CycleEnv>(77); }, spec, hyper, LossWeights{},
            sinks);
        std::vector<int> scores;
        for (const auto& r : res.records) scores.push_back(r.score);
        return std::pair{nn::param_checksum(res.params), scores};
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("a3c rejects architectures without the actor-critic heads") {
    A3cHyperparams hyper;
    A3cSinks sinks;
    auto make = [](int) { return std::make_unique<CycleEnv>(1); };
    CHECK_THROWS_AS(
        train_a3c(1, make, nn::parse_architecture("3:4:3"), hyper, LossWeights{}, sinks),
        ConfigError);
    CHECK_THROWS_AS(train_a3c(0, make, nn::parse_architecture("3:4:3;softmax;v"), hyper,
                              LossWeights{}, sinks),
                    ConfigError);
}

TEST_CASE("a3c training improves the toy task score") {
    auto spec = nn::parse_architecture("3:8:3;softmax;v");
    A3cHyperparams hyper;
    hyper.alpha = 0.02;
    hyper.episodes = 1500;
    hyper.seed = 4;
    A3cSinks sinks;
    sinks.smoothing_window = 100;
    auto res = train_a3c(
        2, [](int wid) { return std::make_unique<CycleEnv>(uint64_t(wid) * 31 + 7); }, spec, hyper,
        LossWeights{}, sinks);
    CHECK(res.worker_errors.empty());
    REQUIRE(res.records.size() == 1500u);
    // Early smoothed score is near the random level (-2 on six +-1 steps);
    // late smoothed score should approach the +6 ceiling.
    CHECK(res.records.back().smoothed > res.records[99].smoothed + 2.0);
    CHECK(res.records.back().smoothed > 3.0);
}
