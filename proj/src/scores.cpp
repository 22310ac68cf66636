#include "pongrl/scores.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace pongrl {

std::vector<double> smooth_scores(std::span<const double> raw, int window) {
    if (window < 1) throw UsageError("smooth_scores: window must be >= 1");
    std::vector<double> out;
    out.reserve(raw.size());
    SmoothingWindow w(window);
    for (double s : raw) out.push_back(w.add(s));
    return out;
}

SmoothingWindow::SmoothingWindow(int window) : window_(window) {
    if (window < 1) throw UsageError("SmoothingWindow: window must be >= 1");
}

double SmoothingWindow::add(double score) {
    values_.push_back(score);
    sum_ += score;
    if (int(values_.size()) > window_) {
        sum_ -= values_.front();
        values_.pop_front();
    }
    return sum_ / double(values_.size());
}

ScoreCsvWriter::ScoreCsvWriter(const std::string& path, bool with_worker_id, bool zero_wall_clock)
    : out_(path, std::ios::trunc), with_worker_id_(with_worker_id),
      zero_wall_clock_(zero_wall_clock) {
    if (!out_) throw IoError("ScoreCsvWriter: cannot open '" + path + "'");
    out_ << "episode,score,smoothed_score,steps,wall_clock_s";
    if (with_worker_id_) out_ << ",worker_id";
    out_ << "\n";
}

void ScoreCsvWriter::write(const ScoreRecord& rec) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.6f,%lld,%.3f",
                  static_cast<long long>(rec.episode), rec.score, rec.smoothed,
                  static_cast<long long>(rec.steps),
                  zero_wall_clock_ ? 0.0 : rec.wall_clock_s);
    out_ << buf;
    if (with_worker_id_) out_ << ',' << rec.worker_id;
    out_ << "\n";
}

void ScoreCsvWriter::flush() { out_.flush(); }

std::vector<ScoreRecord> read_score_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_score_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("read_score_csv: empty file '" + path + "'");
    bool with_worker = false;
    if (line == "episode,score,smoothed_score,steps,wall_clock_s,worker_id")
        with_worker = true;
    else if (line != "episode,score,smoothed_score,steps,wall_clock_s")
        throw IoError("read_score_csv: unexpected header '" + line + "'");

    std::vector<ScoreRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        ScoreRecord rec;
        auto next = [&]() -> std::string {
            if (!std::getline(ss, field, ','))
                throw IoError("read_score_csv: short row '" + line + "'");
            return field;
        };
        rec.episode = std::stoll(next());
        rec.score = std::stoi(next());
        rec.smoothed = std::stod(next());
        rec.steps = std::stoll(next());
        rec.wall_clock_s = std::stod(next());
        if (with_worker) rec.worker_id = std::stoi(next());
        out.push_back(rec);
    }
    return out;
}

} // namespace pongrl
