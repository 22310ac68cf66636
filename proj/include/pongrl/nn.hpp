#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pongrl/arch.hpp"
#include "pongrl/errors.hpp"

// Dense/conv forward and backward passes, templated on the scalar type.
// Training runs in float; the finite-difference gradient harness
// instantiates double.
//
// Sign convention, used everywhere: gradients are derivatives of a loss
// being MINIMIZED, and updates move against them (w <- w - alpha * g).
// Reward-maximizing objectives are expressed as losses before they reach
// the optimizer.

namespace pongrl::nn {

template <class T> struct DenseLayer {
    int in = 0, out = 0;
    std::vector<T> w; // in * out, row-major: w[i * out + j]
    std::vector<T> b; // out
    Activation act = Activation::Linear;
};

template <class T> struct ConvLayer {
    ConvSpec spec;
    std::vector<T> k; // count * kh * kw * in_c
    std::vector<T> b; // count
    Activation act = Activation::ReLU;
};

template <class T> using Layer = std::variant<DenseLayer<T>, ConvLayer<T>>;

template <class T> struct Network {
    ArchitectureSpec arch;
    std::vector<Layer<T>> layers;
    // Optional linear value head fed by the last hidden activation
    // (the raw input when the net has a single layer).
    std::optional<DenseLayer<T>> value_head;
};

template <class T> struct ForwardTrace {
    std::vector<T> input;
    std::vector<std::vector<T>> pre; // per-layer pre-activations
    std::vector<std::vector<T>> act; // per-layer activations
    T value_pre{};
    bool has_value = false;

    const std::vector<T>& output() const { return act.back(); }
    T value() const { return value_pre; } // linear head
};

// Gradient blocks parallel to Network layout.
template <class T> struct Gradients {
    std::vector<std::vector<T>> w, b; // per layer
    std::vector<T> vw, vb;            // value head (empty when absent)

    bool all_finite() const {
        auto ok = [](const std::vector<T>& v) {
            return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(double(x)); });
        };
        for (const auto& v : w)
            if (!ok(v)) return false;
        for (const auto& v : b)
            if (!ok(v)) return false;
        return ok(vw) && ok(vb);
    }

    void add(const Gradients& other) {
        auto acc = [](std::vector<T>& a, const std::vector<T>& o) {
            for (size_t i = 0; i < a.size(); ++i) a[i] += o[i];
        };
        for (size_t l = 0; l < w.size(); ++l) {
            acc(w[l], other.w[l]);
            acc(b[l], other.b[l]);
        }
        acc(vw, other.vw);
        acc(vb, other.vb);
    }
};

namespace detail {

template <class T> void apply_activation(Activation act, const std::vector<T>& z, std::vector<T>& a) {
    a.resize(z.size());
    switch (act) {
    case Activation::ReLU:
        for (size_t i = 0; i < z.size(); ++i) a[i] = z[i] > T(0) ? z[i] : T(0);
        break;
    case Activation::Sigmoid:
        for (size_t i = 0; i < z.size(); ++i) a[i] = T(1) / (T(1) + std::exp(-z[i]));
        break;
    case Activation::Softmax: {
        T m = *std::max_element(z.begin(), z.end());
        T sum = 0;
        for (size_t i = 0; i < z.size(); ++i) {
            a[i] = std::exp(z[i] - m);
            sum += a[i];
        }
        for (auto& v : a) v /= sum;
        break;
    }
    case Activation::Linear:
        a = z;
        break;
    }
}

// Converts dL/d(activation) into dL/d(pre-activation).
template <class T>
std::vector<T> activation_backward(Activation act, const std::vector<T>& z, const std::vector<T>& a,
                                   const std::vector<T>& g) {
    std::vector<T> d(z.size());
    switch (act) {
    case Activation::ReLU:
        for (size_t i = 0; i < z.size(); ++i) d[i] = z[i] > T(0) ? g[i] : T(0);
        break;
    case Activation::Sigmoid:
        for (size_t i = 0; i < z.size(); ++i) d[i] = g[i] * a[i] * (T(1) - a[i]);
        break;
    case Activation::Softmax: {
        T dot = 0;
        for (size_t i = 0; i < a.size(); ++i) dot += g[i] * a[i];
        for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] * (g[i] - dot);
        break;
    }
    case Activation::Linear:
        d = g;
        break;
    }
    return d;
}

} // namespace detail

template <class T> inline size_t w_size(const DenseLayer<T>& l) { return l.w.size(); }
template <class T> inline size_t w_size(const ConvLayer<T>& l) { return l.k.size(); }
template <class T> inline size_t b_size(const DenseLayer<T>& l) { return l.b.size(); }
template <class T> inline size_t b_size(const ConvLayer<T>& l) { return l.b.size(); }

template <class T> Network<T> init_network(const ArchitectureSpec& spec, uint64_t seed) {
    Network<T> net;
    net.arch = spec;
    std::mt19937_64 rng(seed);

    auto gaussian = [&](std::vector<T>& dst, size_t n, int fan_in) {
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(fan_in)));
        dst.resize(n);
        for (auto& v : dst) v = T(dist(rng));
    };

    for (const auto& ls : spec.layers) {
        if (ls.is_conv) {
            ConvLayer<T> l;
            l.spec = ls.conv;
            l.act = ls.act;
            gaussian(l.k, size_t(ls.conv.kernel_size()), ls.conv.kh * ls.conv.kw * ls.conv.in_c);
            l.b.assign(size_t(ls.conv.count), T(0));
            net.layers.emplace_back(std::move(l));
        } else {
            DenseLayer<T> l;
            l.in = ls.in_width;
            l.out = ls.out_width;
            l.act = ls.act;
            gaussian(l.w, size_t(ls.in_width) * ls.out_width, ls.in_width);
            l.b.assign(size_t(ls.out_width), T(0));
            net.layers.emplace_back(std::move(l));
        }
    }
    if (spec.has_value_head) {
        DenseLayer<T> vh;
        vh.in = spec.layers.size() >= 2 ? spec.layers[spec.layers.size() - 2].out_width
                                        : spec.input_size;
        vh.out = 1;
        vh.act = Activation::Linear;
        gaussian(vh.w, size_t(vh.in), vh.in);
        vh.b.assign(1, T(0));
        net.value_head = std::move(vh);
    }
    return net;
}

template <class T> size_t param_count(const Network<T>& net) {
    size_t n = 0;
    for (const auto& l : net.layers)
        std::visit([&](const auto& lay) { n += w_size(lay) + b_size(lay); }, l);
    if (net.value_head) n += net.value_head->w.size() + net.value_head->b.size();
    return n;
}

template <class T> ForwardTrace<T> forward(const Network<T>& net, std::span<const T> input) {
    const int expect = net.arch.input_size;
    if (int(input.size()) != expect)
        throw ShapeError("forward: expected input size " + std::to_string(expect) + ", got " +
                         std::to_string(input.size()));

    ForwardTrace<T> tr;
    tr.input.assign(input.begin(), input.end());
    tr.pre.resize(net.layers.size());
    tr.act.resize(net.layers.size());

    const std::vector<T>* cur = &tr.input;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        auto& z = tr.pre[li];
        if (auto* d = std::get_if<DenseLayer<T>>(&net.layers[li])) {
            z.assign(size_t(d->out), T(0));
            for (int i = 0; i < d->in; ++i) {
                const T xi = (*cur)[size_t(i)];
                if (xi == T(0)) continue;
                const T* row = d->w.data() + size_t(i) * d->out;
                for (int j = 0; j < d->out; ++j) z[size_t(j)] += xi * row[j];
            }
            for (int j = 0; j < d->out; ++j) z[size_t(j)] += d->b[size_t(j)];
            detail::apply_activation(d->act, z, tr.act[li]);
        } else {
            const auto& c = std::get<ConvLayer<T>>(net.layers[li]);
            const auto& s = c.spec;
            z.assign(size_t(s.out_size()), T(0));
            for (int oc = 0; oc < s.count; ++oc) {
                for (int oy = 0; oy < s.out_h; ++oy) {
                    for (int ox = 0; ox < s.out_w; ++ox) {
                        T acc = c.b[size_t(oc)];
                        for (int ky = 0; ky < s.kh; ++ky) {
                            const int iy = oy * s.stride - s.pad + ky;
                            if (iy < 0 || iy >= s.in_h) continue;
                            for (int kx = 0; kx < s.kw; ++kx) {
                                const int ix = ox * s.stride - s.pad + kx;
                                if (ix < 0 || ix >= s.in_w) continue;
                                for (int ic = 0; ic < s.in_c; ++ic) {
                                    const T xi = (*cur)[(size_t(ic) * s.in_h + iy) * s.in_w + ix];
                                    const T kw = c.k[((size_t(oc) * s.kh + ky) * s.kw + kx) * s.in_c + ic];
                                    acc += xi * kw;
                                }
                            }
                        }
                        z[(size_t(oc) * s.out_h + oy) * s.out_w + ox] = acc;
                    }
                }
            }
            detail::apply_activation(c.act, z, tr.act[li]);
        }
        cur = &tr.act[li];
    }

    if (net.value_head) {
        const std::vector<T>& h =
            net.layers.size() >= 2 ? tr.act[net.layers.size() - 2] : tr.input;
        const auto& vh = *net.value_head;
        T v = vh.b[0];
        for (int i = 0; i < vh.in; ++i) v += h[size_t(i)] * vh.w[size_t(i)];
        tr.value_pre = v;
        tr.has_value = true;
    }
    return tr;
}

template <class T> Gradients<T> zero_gradients(const Network<T>& net) {
    Gradients<T> g;
    g.w.resize(net.layers.size());
    g.b.resize(net.layers.size());
    for (size_t li = 0; li < net.layers.size(); ++li) {
        std::visit(
            [&](const auto& lay) {
                g.w[li].assign(w_size(lay), T(0));
                g.b[li].assign(b_size(lay), T(0));
            },
            net.layers[li]);
    }
    if (net.value_head) {
        g.vw.assign(net.value_head->w.size(), T(0));
        g.vb.assign(net.value_head->b.size(), T(0));
    }
    return g;
}

// Accumulates reverse-mode gradients into `acc`. `out_grad` is
// dL/d(output activations); `value_grad`, when given, is dL/dV.
template <class T>
void backward_into(const Network<T>& net, const ForwardTrace<T>& tr, std::span<const T> out_grad,
                   const T* value_grad, Gradients<T>& acc) {
    const size_t n = net.layers.size();
    if (tr.pre.size() != n || acc.w.size() != n)
        throw UsageError("backward: trace/gradient blocks do not match network");
    if (out_grad.size() != tr.act.back().size())
        throw ShapeError("backward: expected output grad size " +
                         std::to_string(tr.act.back().size()) + ", got " +
                         std::to_string(out_grad.size()));
    if (value_grad && !net.value_head)
        throw UsageError("backward: value_grad given but network has no value head");

    std::vector<T> g(out_grad.begin(), out_grad.end());
    for (size_t li = n; li-- > 0;) {
        // dL/d(pre-activation) of this layer.
        std::vector<T> delta;
        std::visit(
            [&](const auto& lay) {
                delta = detail::activation_backward(lay.act, tr.pre[li], tr.act[li], g);
            },
            net.layers[li]);

        const std::vector<T>& in_act = li == 0 ? tr.input : tr.act[li - 1];
        std::vector<T> dprev(in_act.size(), T(0));

        if (auto* d = std::get_if<DenseLayer<T>>(&net.layers[li])) {
            for (int i = 0; i < d->in; ++i) {
                const T xi = in_act[size_t(i)];
                const T* wrow = d->w.data() + size_t(i) * d->out;
                T* grow = acc.w[li].data() + size_t(i) * d->out;
                T dp = 0;
                for (int j = 0; j < d->out; ++j) {
                    grow[j] += xi * delta[size_t(j)];
                    dp += wrow[j] * delta[size_t(j)];
                }
                dprev[size_t(i)] = dp;
            }
            for (int j = 0; j < d->out; ++j) acc.b[li][size_t(j)] += delta[size_t(j)];
        } else {
            const auto& c = std::get<ConvLayer<T>>(net.layers[li]);
            const auto& s = c.spec;
            for (int oc = 0; oc < s.count; ++oc) {
                for (int oy = 0; oy < s.out_h; ++oy) {
                    for (int ox = 0; ox < s.out_w; ++ox) {
                        const T dz = delta[(size_t(oc) * s.out_h + oy) * s.out_w + ox];
                        if (dz == T(0)) continue;
                        acc.b[li][size_t(oc)] += dz;
                        for (int ky = 0; ky < s.kh; ++ky) {
                            const int iy = oy * s.stride - s.pad + ky;
                            if (iy < 0 || iy >= s.in_h) continue;
                            for (int kx = 0; kx < s.kw; ++kx) {
                                const int ix = ox * s.stride - s.pad + kx;
                                if (ix < 0 || ix >= s.in_w) continue;
                                for (int ic = 0; ic < s.in_c; ++ic) {
                                    const size_t in_idx = (size_t(ic) * s.in_h + iy) * s.in_w + ix;
                                    const size_t k_idx =
                                        ((size_t(oc) * s.kh + ky) * s.kw + kx) * s.in_c + ic;
                                    acc.w[li][k_idx] += in_act[in_idx] * dz;
                                    dprev[in_idx] += c.k[k_idx] * dz;
                                }
                            }
                        }
                    }
                }
            }
        }

        // The value head taps the same activation that feeds the output layer.
        if (li == n - 1 && value_grad && net.value_head) {
            const T dv = *value_grad;
            const auto& vh = *net.value_head;
            for (int i = 0; i < vh.in; ++i) {
                acc.vw[size_t(i)] += dv * in_act[size_t(i)];
                dprev[size_t(i)] += dv * vh.w[size_t(i)];
            }
            acc.vb[0] += dv;
        }
        g = std::move(dprev);
    }
}

template <class T>
Gradients<T> backward(const Network<T>& net, const ForwardTrace<T>& tr, std::span<const T> out_grad,
                      const T* value_grad = nullptr) {
    Gradients<T> acc = zero_gradients(net);
    backward_into(net, tr, out_grad, value_grad, acc);
    return acc;
}

// Visits every parameter block paired with its gradient block, in a fixed
// order (layer weights, layer biases, then the value head). The same order
// defines checkpoint layout and checksums.
template <class T, class F> void for_each_block(Network<T>& net, F&& f) {
    for (auto& l : net.layers)
        std::visit(
            [&](auto& lay) {
                if constexpr (std::is_same_v<std::decay_t<decltype(lay)>, DenseLayer<T>>) {
                    f(lay.w);
                    f(lay.b);
                } else {
                    f(lay.k);
                    f(lay.b);
                }
            },
            l);
    if (net.value_head) {
        f(net.value_head->w);
        f(net.value_head->b);
    }
}

template <class T, class F> void for_each_block(const Network<T>& net, F&& f) {
    for_each_block(const_cast<Network<T>&>(net),
                   [&](auto& blk) { f(static_cast<const std::vector<T>&>(blk)); });
}

template <class T, class F> void for_each_grad_block(Gradients<T>& g, F&& f) {
    for (size_t l = 0; l < g.w.size(); ++l) {
        f(g.w[l]);
        f(g.b[l]);
    }
    if (!g.vw.empty()) {
        f(g.vw);
        f(g.vb);
    }
}

// Plain gradient-descent step: w <- w - alpha * g.
// Throws NumericalError (leaving params untouched) on non-finite gradients.
template <class T> void sgd_update(Network<T>& net, const Gradients<T>& grads, T alpha) {
    if (!grads.all_finite()) throw NumericalError("sgd_update: non-finite gradient entry");
    size_t bi = 0;
    auto blocks_of = [&](size_t idx) -> const std::vector<T>& {
        const size_t nl = grads.w.size();
        if (idx < 2 * nl) return (idx % 2 == 0) ? grads.w[idx / 2] : grads.b[idx / 2];
        return (idx == 2 * nl) ? grads.vw : grads.vb;
    };
    for_each_block(net, [&](std::vector<T>& blk) {
        const std::vector<T>& gb = blocks_of(bi++);
        for (size_t i = 0; i < blk.size(); ++i) blk[i] -= alpha * gb[i];
    });
}

enum class OptMode { Sgd, RmsProp };

// Optimizer with optional RMSProp accumulator. Step direction is always
// descent on the provided gradients.
template <class T> struct Optimizer {
    OptMode mode = OptMode::Sgd;
    T alpha = T(1e-3);
    T decay = T(0.99);
    T eps = T(1e-8);
    Gradients<T> cache;
    bool cache_ready = false;

    void apply(Network<T>& net, const Gradients<T>& grads) {
        if (mode == OptMode::Sgd) {
            sgd_update(net, grads, alpha);
            return;
        }
        if (!grads.all_finite()) throw NumericalError("optimizer: non-finite gradient entry");
        if (!cache_ready) {
            cache = zero_gradients(net);
            cache_ready = true;
        }
        size_t bi = 0;
        auto grad_block = [&](size_t idx) -> const std::vector<T>& {
            const size_t nl = grads.w.size();
            if (idx < 2 * nl) return (idx % 2 == 0) ? grads.w[idx / 2] : grads.b[idx / 2];
            return (idx == 2 * nl) ? grads.vw : grads.vb;
        };
        auto cache_block = [&](size_t idx) -> std::vector<T>& {
            const size_t nl = cache.w.size();
            if (idx < 2 * nl) return (idx % 2 == 0) ? cache.w[idx / 2] : cache.b[idx / 2];
            return (idx == 2 * nl) ? cache.vw : cache.vb;
        };
        for_each_block(net, [&](std::vector<T>& blk) {
            const std::vector<T>& gb = grad_block(bi);
            std::vector<T>& cb = cache_block(bi);
            ++bi;
            for (size_t i = 0; i < blk.size(); ++i) {
                cb[i] = decay * cb[i] + (T(1) - decay) * gb[i] * gb[i];
                blk[i] -= alpha * gb[i] / (std::sqrt(cb[i]) + eps);
            }
        });
    }
};

// FNV-1a over all parameter bytes, in block order. Used by the shared
// parameter store to detect torn snapshots.
template <class T> uint64_t param_checksum(const Network<T>& net) {
    uint64_t h = 1469598103934665603ull;
    for_each_block(net, [&](const std::vector<T>& blk) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(blk.data());
        for (size_t i = 0; i < blk.size() * sizeof(T); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    });
    return h;
}

} // namespace pongrl::nn
