#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "pongrl/errors.hpp"

namespace pongrl {

struct ScoreRecord {
    int64_t episode = 0;
    int score = 0;
    double smoothed = 0.0;
    int64_t steps = 0;
    double wall_clock_s = 0.0;
    int worker_id = -1; // only written in the a3c CSV schema
};

// Trailing moving average over min(window, count) most recent scores.
std::vector<double> smooth_scores(std::span<const double> raw, int window);

// Incremental form of smooth_scores for streaming writers.
class SmoothingWindow {
public:
    explicit SmoothingWindow(int window);
    double add(double score);

private:
    int window_;
    double sum_ = 0.0;
    std::deque<double> values_;
};

// Streaming CSV writer with the fixed schema
//   episode,score,smoothed_score,steps,wall_clock_s[,worker_id]
// When zero_wall_clock is set the wall_clock_s column is written as 0.000,
// which makes fixed-seed runs byte-identical across invocations.
class ScoreCsvWriter {
public:
    ScoreCsvWriter(const std::string& path, bool with_worker_id, bool zero_wall_clock = false);
    void write(const ScoreRecord& rec);
    void flush();

private:
    std::ofstream out_;
    bool with_worker_id_;
    bool zero_wall_clock_;
};

// Parses a CSV produced by ScoreCsvWriter (schema checks included).
std::vector<ScoreRecord> read_score_csv(const std::string& path);

} // namespace pongrl
