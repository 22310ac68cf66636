#pragma once

#include <string>

#include "pongrl/a3c.hpp"
#include "pongrl/env.hpp"
#include "pongrl/pg.hpp"

namespace pongrl {

enum class RunMode { TrainPg, TrainA3c, Eval, Introspect, GradCheck };

RunMode parse_mode(const std::string& name);
std::string to_string(RunMode mode);

// Fully resolved run configuration. Config files are flat key=value text
// (one pair per line, '#' comments); CLI flags override file values.
struct RunConfig {
    RunMode mode = RunMode::TrainPg;

    EnvConfig env;
    std::string arch; // descriptor text, possibly with ';' annotations

    pg::Hyperparams hyper;
    a3c::LossWeights loss_weights;
    int workers = 1;
    double time_limit_s = 0.0;

    std::string out_dir = "out";
    std::string checkpoint_path;   // input checkpoint for eval/introspect
    int64_t checkpoint_every = 0;
    int smoothing_window = 100;
    bool deterministic_timing = false; // write wall_clock_s as 0 in CSVs

    int64_t introspect_steps = 50'000;
    int kmeans_k = 5;
    bool greedy = false;

    // Applies one key=value pair; unknown keys and bad values throw
    // ConfigError naming the key (and line, when given).
    void apply(const std::string& key, const std::string& value, int line = 0);

    // Mode-dependent validation (required fields, ranges).
    void validate() const;
};

RunConfig load_config(const std::string& path, RunConfig base = {});

// Writes the fully-resolved configuration as key=value lines, enough to
// reproduce the run.
void write_manifest(const RunConfig& config, const std::string& path);

struct EvalResult {
    double mean_score = 0.0;
    std::vector<ScoreRecord> records;
};

// Frozen-weight play for `episodes` episodes (sampled actions; greedy when
// requested). No learning happens. csv_path may be empty.
EvalResult evaluate(const nn::Network<float>& params, const EnvConfig& env_config, int episodes,
                    uint64_t seed, const std::string& csv_path = {}, bool greedy = false,
                    int smoothing_window = 100, bool zero_wall_clock = false);

} // namespace pongrl
