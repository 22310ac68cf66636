#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pongrl/env.hpp"
#include "pongrl/nn.hpp"

namespace pongrl::introspect {

// First-hidden-layer activations and the action taken at one rollout step.
struct ActivationRecord {
    int64_t step = 0;
    std::vector<float> hidden;
    int action = 0;
};

// Plays `steps` environment steps with frozen weights (spanning as many
// episodes as needed) and records (hidden activation, action) pairs.
// `greedy` picks the argmax action; the default samples from the policy,
// matching the play distribution.
std::vector<ActivationRecord> record_rollout(const nn::Network<float>& params,
                                             const EnvConfig& env_config, int64_t steps,
                                             uint64_t seed, bool greedy = false);

// Partitions records by the action taken. Index = EnvAction one-hot index.
std::array<std::vector<const ActivationRecord*>, 3>
group_by_action(std::span<const ActivationRecord> records);

struct KmeansResult {
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment; // per input vector
    double inertia = 0.0;
    int iterations = 0;
    int k = 0; // may be reduced below the requested k
};

// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed;
// assignment ties break to the lowest centroid index; inertia is checked
// to be non-increasing every iteration. If fewer than k distinct vectors
// exist, k is reduced (with a warning on stderr).
KmeansResult kmeans(std::span<const std::vector<double>> vectors, int k, uint64_t seed,
                    int max_iters = 300, double tol = 1e-6);

// Best inertia over `restarts` seeded runs (seed, seed+1, ...).
KmeansResult kmeans_best_of(std::span<const std::vector<double>> vectors, int k, uint64_t seed,
                            int restarts = 10, int max_iters = 300, double tol = 1e-6);

struct WeightImage {
    int node_index = -1;
    int height = 0, width = 0;
    std::vector<double> pixels; // [0,1]
};

// Min-max normalizes a vector into an h x w image; a constant vector maps
// to all 0.5 (zero-range guard).
WeightImage reshape_to_image(std::span<const double> values, int height, int width,
                             int node_index = -1);

// Incoming weight column of each selected first-layer hidden node, reshaped
// to the frame grid. Requires a dense first layer whose input is the frame
// area; conv first layers are rejected (render their kernels instead).
std::vector<WeightImage> render_weight_images(const nn::Network<float>& params,
                                              std::span<const int> node_indices, int frame_height,
                                              int frame_width);

// Every kernel of a conv first layer as a kh x kw image.
std::vector<WeightImage> render_kernels(const nn::Network<float>& params);

// Binary PGM (P5), maxval 255, intensity quantized with round-half-up.
void write_pgm(const WeightImage& image, const std::string& path);
WeightImage read_pgm(const std::string& path);

void write_frame_pgm(const Frame& frame, const std::string& path);

// Assigns each hidden node to the action whose steps give it the highest
// mean activation (the grouping used for the node-map image).
std::vector<int> assign_nodes_to_actions(std::span<const ActivationRecord> records);

// Soft structure metric for a weight image: fraction of the top-decile
// pixels that fall in the largest 8-connected component, plus that
// component's bounding-box diagonal extent relative to the image diagonal.
// High values of both suggest a coherent trajectory-like band.
struct BandReport {
    double largest_component_share = 0.0;
    double diagonal_extent = 0.0;
};
BandReport detect_band(const WeightImage& image);

} // namespace pongrl::introspect
