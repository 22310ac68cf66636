#include "pongrl/introspect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>

#include "pongrl/pg.hpp"

namespace pongrl::introspect {

std::vector<ActivationRecord> record_rollout(const nn::Network<float>& params,
                                             const EnvConfig& env_config, int64_t steps,
                                             uint64_t seed, bool greedy) {
    if (params.arch.input_size != env_config.frame_height * env_config.frame_width)
        throw ShapeError("record_rollout: network input " +
                         std::to_string(params.arch.input_size) + " does not match frame area " +
                         std::to_string(env_config.frame_height * env_config.frame_width));

    std::vector<ActivationRecord> records;
    records.reserve(size_t(steps));
    std::mt19937_64 rng(seed);
    pg::PongRolloutEnv env(env_config, seed);

    std::vector<float> obs = env.reset();
    for (int64_t t = 0; t < steps; ++t) {
        auto trace = nn::forward(params, std::span<const float>(obs));
        int action;
        if (greedy) {
            const auto& y = trace.output();
            action = int(std::max_element(y.begin(), y.end()) - y.begin());
        } else {
            action = pg::select_action(trace.output(), 0.0, rng);
        }
        ActivationRecord rec;
        rec.step = t;
        rec.hidden = trace.act.front();
        rec.action = action;
        records.push_back(std::move(rec));

        auto result = env.step(action);
        obs = result.done ? env.reset() : std::move(result.obs);
    }
    return records;
}

std::array<std::vector<const ActivationRecord*>, 3>
group_by_action(std::span<const ActivationRecord> records) {
    std::array<std::vector<const ActivationRecord*>, 3> groups;
    for (const auto& rec : records) {
        if (rec.action < 0 || rec.action > 2)
            throw UsageError("group_by_action: action index out of range");
        groups[size_t(rec.action)].push_back(&rec);
    }
    return groups;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

// Nearest centroid, ties to the lowest index.
int nearest(const std::vector<double>& v, const std::vector<std::vector<double>>& centroids,
            double* dist_out = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < centroids.size(); ++c) {
        const double d = sq_dist(v, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = int(c);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

} // namespace

KmeansResult kmeans(std::span<const std::vector<double>> vectors, int k, uint64_t seed,
                    int max_iters, double tol) {
    if (k <= 0) throw UsageError("kmeans: k must be positive");
    if (vectors.empty()) throw UsageError("kmeans: no input vectors");

    // Reduce k when there are fewer distinct vectors than clusters asked for.
    std::set<std::vector<double>> distinct(vectors.begin(), vectors.end());
    if (int(distinct.size()) < k) {
        std::cerr << "warning: kmeans reducing k from " << k << " to " << distinct.size()
                  << " (too few distinct vectors)\n";
        k = int(distinct.size());
    }

    std::mt19937_64 rng(seed);
    const size_t n = vectors.size();

    // Greedy k-means++ seeding: each step draws several D^2-weighted
    // candidates and keeps the one that lowers the potential the most.
    std::vector<std::vector<double>> centroids;
    std::uniform_int_distribution<size_t> first(0, n - 1);
    centroids.push_back(vectors[first(rng)]);
    std::vector<double> d2(n);
    const int n_candidates = 2 + int(std::ceil(std::log(double(std::max(2, k)))));
    while (int(centroids.size()) < k) {
        double total = 0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(vectors[i], c));
            d2[i] = best;
            total += best;
        }
        size_t pick = first(rng);
        if (total > 0) {
            double best_potential = std::numeric_limits<double>::infinity();
            std::uniform_real_distribution<double> unit(0.0, total);
            for (int cand = 0; cand < n_candidates; ++cand) {
                double u = unit(rng);
                size_t idx = 0;
                for (size_t i = 0; i < n; ++i) {
                    u -= d2[i];
                    idx = i;
                    if (u <= 0) break;
                }
                double potential = 0;
                for (size_t i = 0; i < n; ++i)
                    potential += std::min(d2[i], sq_dist(vectors[i], vectors[idx]));
                if (potential < best_potential) {
                    best_potential = potential;
                    pick = idx;
                }
            }
        }
        centroids.push_back(vectors[pick]);
    }

    KmeansResult res;
    res.k = k;
    res.assignment.assign(n, 0);
    const size_t dims = vectors[0].size();
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int round = 0; round < max_iters; ++round) {
        // Lloyd sweeps until the centroids settle.
        bool lloyd_done = false;
        while (!lloyd_done && res.iterations < max_iters) {
            double inertia = 0;
            for (size_t i = 0; i < n; ++i) {
                double d;
                res.assignment[i] = nearest(vectors[i], centroids, &d);
                inertia += d;
            }
            // Lloyd iterations never increase inertia; treat a rise as a defect.
            if (inertia > prev_inertia + 1e-9 * std::max(1.0, prev_inertia))
                throw NumericalError("kmeans: inertia increased between iterations");
            prev_inertia = inertia;
            ++res.iterations;

            // Recompute centroids; an emptied cluster grabs the point farthest
            // from its current assignment (deterministic).
            std::vector<std::vector<double>> next(centroids.size(),
                                                  std::vector<double>(dims, 0.0));
            std::vector<size_t> counts(centroids.size(), 0);
            for (size_t i = 0; i < n; ++i) {
                auto& c = next[size_t(res.assignment[i])];
                for (size_t j = 0; j < dims; ++j) c[j] += vectors[i][j];
                ++counts[size_t(res.assignment[i])];
            }
            for (size_t c = 0; c < next.size(); ++c) {
                if (counts[c] == 0) {
                    size_t far_i = 0;
                    double far_d = -1;
                    for (size_t i = 0; i < n; ++i) {
                        const double d = sq_dist(vectors[i], centroids[size_t(res.assignment[i])]);
                        if (d > far_d) {
                            far_d = d;
                            far_i = i;
                        }
                    }
                    next[c] = vectors[far_i];
                    counts[c] = 0;
                } else {
                    for (auto& v : next[c]) v /= double(counts[c]);
                }
            }

            double shift = 0;
            for (size_t c = 0; c < next.size(); ++c)
                shift = std::max(shift, sq_dist(next[c], centroids[c]));
            centroids = std::move(next);
            lloyd_done = std::sqrt(shift) < tol;
        }

        // Hartigan refinement: move single points between clusters whenever
        // the exact inertia change is negative. Escapes Lloyd-stable local
        // optima; strictly decreasing, so the monotone invariant holds.
        std::vector<size_t> counts(centroids.size(), 0);
        std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(dims, 0.0));
        for (size_t i = 0; i < n; ++i) {
            ++counts[size_t(res.assignment[i])];
            for (size_t j = 0; j < dims; ++j) sums[size_t(res.assignment[i])][j] += vectors[i][j];
        }
        for (size_t c = 0; c < centroids.size(); ++c)
            if (counts[c])
                for (size_t j = 0; j < dims; ++j) centroids[c][j] = sums[c][j] / double(counts[c]);

        bool moved = false;
        for (size_t i = 0; i < n; ++i) {
            const size_t src = size_t(res.assignment[i]);
            if (counts[src] <= 1) continue;
            const double remove_gain =
                double(counts[src]) / double(counts[src] - 1) * sq_dist(vectors[i], centroids[src]);
            double best_delta = -1e-12; // strict improvement only
            int best_dst = -1;
            for (size_t dst = 0; dst < centroids.size(); ++dst) {
                if (dst == src) continue;
                const double add_cost = double(counts[dst]) / double(counts[dst] + 1) *
                                        sq_dist(vectors[i], centroids[dst]);
                const double delta = add_cost - remove_gain;
                if (delta < best_delta) {
                    best_delta = delta;
                    best_dst = int(dst);
                }
            }
            if (best_dst >= 0) {
                const size_t dst = size_t(best_dst);
                for (size_t j = 0; j < dims; ++j) {
                    sums[src][j] -= vectors[i][j];
                    sums[dst][j] += vectors[i][j];
                }
                --counts[src];
                ++counts[dst];
                res.assignment[i] = best_dst;
                for (size_t j = 0; j < dims; ++j) {
                    centroids[src][j] = sums[src][j] / double(counts[src]);
                    centroids[dst][j] = sums[dst][j] / double(counts[dst]);
                }
                moved = true;
            }
        }
        if (!moved) break;
        prev_inertia = std::numeric_limits<double>::infinity(); // re-enter Lloyd cleanly
    }

    // Final assignment against the final centroids.
    res.inertia = 0;
    for (size_t i = 0; i < n; ++i) {
        double d;
        res.assignment[i] = nearest(vectors[i], centroids, &d);
        res.inertia += d;
    }
    res.centroids = std::move(centroids);
    return res;
}

KmeansResult kmeans_best_of(std::span<const std::vector<double>> vectors, int k, uint64_t seed,
                            int restarts, int max_iters, double tol) {
    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        auto res = kmeans(vectors, k, seed + uint64_t(r), max_iters, tol);
        if (res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

WeightImage reshape_to_image(std::span<const double> values, int height, int width,
                             int node_index) {
    if (int(values.size()) != height * width)
        throw ShapeError("reshape_to_image: expected " + std::to_string(height * width) +
                         " values, got " + std::to_string(values.size()));
    WeightImage img;
    img.node_index = node_index;
    img.height = height;
    img.width = width;
    img.pixels.resize(values.size());

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 0) {
        std::fill(img.pixels.begin(), img.pixels.end(), 0.5);
    } else {
        for (size_t i = 0; i < values.size(); ++i) img.pixels[i] = (values[i] - lo) / (hi - lo);
    }
    return img;
}

std::vector<WeightImage> render_weight_images(const nn::Network<float>& params,
                                              std::span<const int> node_indices, int frame_height,
                                              int frame_width) {
    const auto* first = std::get_if<nn::DenseLayer<float>>(&params.layers.front());
    if (!first)
        throw UsageError("render_weight_images: first layer is convolutional; "
                         "use render_kernels instead");
    if (first->in != frame_height * frame_width)
        throw ShapeError("render_weight_images: first layer input " + std::to_string(first->in) +
                         " does not match frame area " +
                         std::to_string(frame_height * frame_width));

    std::vector<WeightImage> out;
    std::vector<double> column(size_t(first->in));
    for (int j : node_indices) {
        if (j < 0 || j >= first->out)
            throw UsageError("render_weight_images: node index " + std::to_string(j) +
                             " out of range");
        for (int i = 0; i < first->in; ++i)
            column[size_t(i)] = double(first->w[size_t(i) * first->out + j]);
        out.push_back(reshape_to_image(column, frame_height, frame_width, j));
    }
    return out;
}

std::vector<WeightImage> render_kernels(const nn::Network<float>& params) {
    const auto* conv = std::get_if<nn::ConvLayer<float>>(&params.layers.front());
    if (!conv) throw UsageError("render_kernels: first layer is not convolutional");
    const auto& s = conv->spec;
    std::vector<WeightImage> out;
    std::vector<double> flat(size_t(s.kh) * s.kw);
    for (int oc = 0; oc < s.count; ++oc) {
        for (int ic = 0; ic < s.in_c; ++ic) {
            for (int ky = 0; ky < s.kh; ++ky)
                for (int kx = 0; kx < s.kw; ++kx)
                    flat[size_t(ky) * s.kw + kx] =
                        double(conv->k[((size_t(oc) * s.kh + ky) * s.kw + kx) * s.in_c + ic]);
            out.push_back(reshape_to_image(flat, s.kh, s.kw, oc * s.in_c + ic));
        }
    }
    return out;
}

namespace {

unsigned char quantize(double v) {
    // round half up into [0, 255]
    const double scaled = std::floor(v * 255.0 + 0.5);
    return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

} // namespace

void write_pgm(const WeightImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_pgm: cannot open '" + path + "'");
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    for (double v : image.pixels) out.put(char(quantize(v)));
    if (!out) throw IoError("write_pgm: write failed for '" + path + "'");
}

WeightImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open '" + path + "'");
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
        throw IoError("read_pgm: '" + path + "' is not a maxval-255 P5 file");
    in.get(); // single whitespace after header
    WeightImage img;
    img.height = h;
    img.width = w;
    img.pixels.resize(size_t(w) * h);
    for (auto& v : img.pixels) {
        const int c = in.get();
        if (c == EOF) throw IoError("read_pgm: truncated pixel data in '" + path + "'");
        v = double(c) / 255.0;
    }
    return img;
}

void write_frame_pgm(const Frame& frame, const std::string& path) {
    WeightImage img;
    img.height = frame.height;
    img.width = frame.width;
    img.pixels.assign(frame.pixels.begin(), frame.pixels.end());
    write_pgm(img, path);
}

std::vector<int> assign_nodes_to_actions(std::span<const ActivationRecord> records) {
    if (records.empty()) throw UsageError("assign_nodes_to_actions: no records");
    const size_t width = records.front().hidden.size();
    std::array<std::vector<double>, 3> sums;
    std::array<size_t, 3> counts{0, 0, 0};
    for (auto& s : sums) s.assign(width, 0.0);
    for (const auto& rec : records) {
        auto& s = sums[size_t(rec.action)];
        for (size_t j = 0; j < width; ++j) s[j] += double(rec.hidden[j]);
        ++counts[size_t(rec.action)];
    }
    std::vector<int> out(width, 0);
    for (size_t j = 0; j < width; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (counts[size_t(a)] == 0) continue;
            const double mean = sums[size_t(a)][j] / double(counts[size_t(a)]);
            if (mean > best) {
                best = mean;
                out[j] = a;
            }
        }
    }
    return out;
}

BandReport detect_band(const WeightImage& image) {
    const size_t n = image.pixels.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return image.pixels[a] > image.pixels[b]; });
    const size_t top = std::max<size_t>(1, n / 10);
    std::vector<char> mask(n, 0);
    for (size_t i = 0; i < top; ++i) mask[order[i]] = 1;

    // Largest 8-connected component of the top-decile mask.
    std::vector<int> comp(n, -1);
    int n_comp = 0;
    size_t best_size = 0;
    int best_comp = -1;
    std::vector<size_t> stack;
    for (size_t s = 0; s < n; ++s) {
        if (!mask[s] || comp[s] >= 0) continue;
        const int id = n_comp++;
        size_t size = 0;
        stack.push_back(s);
        comp[s] = id;
        while (!stack.empty()) {
            const size_t cur = stack.back();
            stack.pop_back();
            ++size;
            const int y = int(cur) / image.width, x = int(cur) % image.width;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= image.height || nx < 0 || nx >= image.width) continue;
                    const size_t ni = size_t(ny) * image.width + nx;
                    if (mask[ni] && comp[ni] < 0) {
                        comp[ni] = id;
                        stack.push_back(ni);
                    }
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best_comp = id;
        }
    }

    BandReport rep;
    if (best_comp < 0) return rep;
    rep.largest_component_share = double(best_size) / double(top);
    int y0 = image.height, y1 = -1, x0 = image.width, x1 = -1;
    for (size_t i = 0; i < n; ++i) {
        if (comp[i] != best_comp) continue;
        const int y = int(i) / image.width, x = int(i) % image.width;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
    }
    const double span = std::hypot(double(y1 - y0), double(x1 - x0));
    rep.diagonal_extent = span / std::hypot(double(image.height - 1), double(image.width - 1));
    return rep;
}

} // namespace pongrl::introspect
