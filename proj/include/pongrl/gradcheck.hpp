#pragma once

#include <cstdint>
#include <string>

#include "pongrl/nn.hpp"

namespace pongrl::nn {

enum class LossTag {
    SquaredLabel, // advantage-scaled squared one-hot label loss
    ActorCritic   // weighted policy + value + entropy objective
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param; // "layer 1 w[37]" style
    size_t params_checked = 0;
};

// Compares analytic gradients against central finite differences over every
// parameter, on a seeded random input and target. Runs in double precision.
GradCheckReport gradient_check(const ArchitectureSpec& spec, LossTag loss, uint64_t seed);

// Central-difference gradients of an arbitrary scalar loss over every
// parameter of `net`. The net is restored after each probe.
template <class LossFn>
Gradients<double> finite_difference_gradients(Network<double>& net, LossFn&& loss, double eps) {
    Gradients<double> fd = zero_gradients(net);
    size_t bi = 0;
    auto fd_block = [&](size_t idx) -> std::vector<double>& {
        const size_t nl = fd.w.size();
        if (idx < 2 * nl) return (idx % 2 == 0) ? fd.w[idx / 2] : fd.b[idx / 2];
        return (idx == 2 * nl) ? fd.vw : fd.vb;
    };
    for_each_block(net, [&](std::vector<double>& blk) {
        std::vector<double>& out = fd_block(bi++);
        for (size_t i = 0; i < blk.size(); ++i) {
            const double saved = blk[i];
            blk[i] = saved + eps;
            const double lp = loss(net);
            blk[i] = saved - eps;
            const double lm = loss(net);
            blk[i] = saved;
            out[i] = (lp - lm) / (2 * eps);
        }
    });
    return fd;
}

// Worst per-parameter relative error between two gradient sets. The
// denominator is floored at `scale_floor` so near-zero gradients (dead
// ReLU units) compare on an absolute basis.
double max_rel_error(const Gradients<double>& a, const Gradients<double>& b,
                     std::string* worst = nullptr, double scale_floor = 1e-4);

} // namespace pongrl::nn
