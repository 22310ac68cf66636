#include "pongrl/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace pongrl::nn {

namespace {

constexpr double kFdEps = 1e-5;
constexpr double kProbClamp = 1e-12;

struct Betas {
    double b1 = 1.0, b2 = 0.5, b3 = 0.001;
};

} // namespace

double max_rel_error(const Gradients<double>& a, const Gradients<double>& b, std::string* worst,
                     double scale_floor) {
    double max_err = 0.0;
    auto compare = [&](const std::vector<double>& ga, const std::vector<double>& gb,
                       const std::string& name) {
        for (size_t i = 0; i < ga.size(); ++i) {
            const double denom = std::max({std::abs(ga[i]), std::abs(gb[i]), scale_floor});
            const double err = std::abs(ga[i] - gb[i]) / denom;
            if (err > max_err) {
                max_err = err;
                if (worst) *worst = name + "[" + std::to_string(i) + "]";
            }
        }
    };
    for (size_t l = 0; l < a.w.size(); ++l) {
        compare(a.w[l], b.w[l], "layer " + std::to_string(l) + " w");
        compare(a.b[l], b.b[l], "layer " + std::to_string(l) + " b");
    }
    compare(a.vw, b.vw, "value w");
    compare(a.vb, b.vb, "value b");
    return max_err;
}

GradCheckReport gradient_check(const ArchitectureSpec& spec_in, LossTag loss, uint64_t seed) {
    ArchitectureSpec spec = spec_in;
    if (loss == LossTag::ActorCritic) {
        // The actor-critic objective presumes a softmax policy and a value head.
        spec = parse_architecture(spec_in.descriptor, Activation::Softmax, true);
    }

    Network<double> net = init_network<double>(spec, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<double> input(size_t(spec.input_size));
    for (auto& v : input) v = unit(rng);

    const int out_n = spec.output_size();
    std::uniform_int_distribution<int> pick(0, out_n - 1);
    const int action = pick(rng);
    const double advantage = 1.5 * unit(rng) + (unit(rng) >= 0 ? 0.25 : -0.25); // keep away from 0

    Gradients<double> analytic = zero_gradients(net);
    std::function<double(Network<double>&)> loss_fn;

    if (loss == LossTag::SquaredLabel) {
        // L(w) = A * sum_k (y_k - y'_k)^2, one-hot label at `action`.
        auto tr = forward(net, std::span<const double>(input));
        std::vector<double> g(static_cast<size_t>(out_n));
        for (int k = 0; k < out_n; ++k)
            g[size_t(k)] = 2.0 * advantage * (tr.output()[size_t(k)] - (k == action ? 1.0 : 0.0));
        backward_into(net, tr, std::span<const double>(g), static_cast<const double*>(nullptr),
                      analytic);

        loss_fn = [input, action, advantage, out_n](Network<double>& n) {
            auto t = forward(n, std::span<const double>(input));
            double s = 0;
            for (int k = 0; k < out_n; ++k) {
                const double d = t.output()[size_t(k)] - (k == action ? 1.0 : 0.0);
                s += d * d;
            }
            return advantage * s;
        };
    } else {
        Betas beta;
        const double ret = 0.8 * unit(rng) + 0.5;
        auto tr = forward(net, std::span<const double>(input));
        // Advantage is a stop-gradient constant: evaluated once at the base
        // parameters and held fixed in both the analytic and FD paths.
        const double adv = ret - tr.value();

        std::vector<double> g(static_cast<size_t>(out_n));
        for (int k = 0; k < out_n; ++k) {
            const double pk = std::max(tr.output()[size_t(k)], kProbClamp);
            g[size_t(k)] = beta.b3 * (std::log(pk) + 1.0);
            if (k == action) g[size_t(k)] += -beta.b1 * adv / pk;
        }
        const double vg = -2.0 * beta.b2 * (ret - tr.value());
        backward_into(net, tr, std::span<const double>(g), &vg, analytic);

        loss_fn = [input, action, adv, ret, beta, out_n](Network<double>& n) {
            auto t = forward(n, std::span<const double>(input));
            const double pa = std::max(t.output()[size_t(action)], kProbClamp);
            double neg_entropy = 0;
            for (int k = 0; k < out_n; ++k) {
                const double pk = std::max(t.output()[size_t(k)], kProbClamp);
                neg_entropy += pk * std::log(pk);
            }
            const double dv = ret - t.value();
            return beta.b1 * (-std::log(pa)) * adv + beta.b2 * dv * dv + beta.b3 * neg_entropy;
        };
    }

    Gradients<double> fd = finite_difference_gradients(net, loss_fn, kFdEps);

    GradCheckReport rep;
    rep.max_rel_error = max_rel_error(analytic, fd, &rep.worst_param);
    rep.params_checked = param_count(net);
    return rep;
}

} // namespace pongrl::nn
