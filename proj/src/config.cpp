#include "pongrl/config.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pongrl {

RunMode parse_mode(const std::string& name) {
    if (name == "train-pg") return RunMode::TrainPg;
    if (name == "train-a3c") return RunMode::TrainA3c;
    if (name == "eval") return RunMode::Eval;
    if (name == "introspect") return RunMode::Introspect;
    if (name == "gradcheck") return RunMode::GradCheck;
    throw ConfigError("unknown mode '" + name + "'");
}

std::string to_string(RunMode mode) {
    switch (mode) {
    case RunMode::TrainPg: return "train-pg";
    case RunMode::TrainA3c: return "train-a3c";
    case RunMode::Eval: return "eval";
    case RunMode::Introspect: return "introspect";
    case RunMode::GradCheck: return "gradcheck";
    }
    return "?";
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why, int line) {
    std::string where = line > 0 ? " (line " + std::to_string(line) + ")" : "";
    throw ConfigError("config key '" + key + "'" + where + ": " + why);
}

double to_double(const std::string& key, const std::string& v, int line) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        bad(key, "not a number: '" + v + "'", line);
    }
}

int64_t to_int(const std::string& key, const std::string& v, int line) {
    try {
        size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        bad(key, "not an integer: '" + v + "'", line);
    }
}

bool to_bool(const std::string& key, const std::string& v, int line) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    bad(key, "not a boolean (use 0/1/true/false): '" + v + "'", line);
}

} // namespace

void RunConfig::apply(const std::string& key, const std::string& value, int line) {
    if (key == "mode") mode = parse_mode(value);
    else if (key == "frame_height") env.frame_height = int(to_int(key, value, line));
    else if (key == "frame_width") env.frame_width = int(to_int(key, value, line));
    else if (key == "paddle_height") env.paddle_height = int(to_int(key, value, line));
    else if (key == "paddle_speed") env.paddle_speed = to_double(key, value, line);
    else if (key == "ball_speed") env.ball_speed = to_double(key, value, line);
    else if (key == "opponent_speed_cap") env.opponent_speed_cap = to_double(key, value, line);
    else if (key == "points_to_win") env.points_to_win = int(to_int(key, value, line));
    else if (key == "step_limit") env.step_limit = to_int(key, value, line);
    else if (key == "arch") arch = value;
    else if (key == "alpha") {
        hyper.alpha = to_double(key, value, line);
        if (hyper.alpha < 0) bad(key, "must be >= 0", line);
    } else if (key == "gamma") {
        hyper.gamma = to_double(key, value, line);
        if (hyper.gamma < 0.0 || hyper.gamma >= 1.0) bad(key, "must be in [0, 1)", line);
    } else if (key == "episodes") {
        hyper.episodes = to_int(key, value, line);
        if (hyper.episodes < 0) bad(key, "must be >= 0", line);
    } else if (key == "exploration_bias") {
        hyper.exploration_bias = to_double(key, value, line);
        if (hyper.exploration_bias < 0.0 || hyper.exploration_bias > 1.0)
            bad(key, "must be in [0, 1]", line);
    } else if (key == "baseline") {
        if (value == "episode") hyper.baseline_mode = pg::BaselineMode::EpisodeMean;
        else if (value == "running") hyper.baseline_mode = pg::BaselineMode::RunningMean;
        else bad(key, "must be 'episode' or 'running'", line);
    } else if (key == "optimizer") {
        if (value == "sgd") hyper.optimizer = nn::OptMode::Sgd;
        else if (value == "rmsprop") hyper.optimizer = nn::OptMode::RmsProp;
        else bad(key, "must be 'sgd' or 'rmsprop'", line);
    } else if (key == "seed") {
        hyper.seed = uint64_t(to_int(key, value, line));
        env.rng_seed = hyper.seed;
    } else if (key == "workers") {
        workers = int(to_int(key, value, line));
        if (workers < 1) bad(key, "must be >= 1", line);
    } else if (key == "beta1") loss_weights.beta1 = to_double(key, value, line);
    else if (key == "beta2") loss_weights.beta2 = to_double(key, value, line);
    else if (key == "beta3") loss_weights.beta3 = to_double(key, value, line);
    else if (key == "time_limit_s") time_limit_s = to_double(key, value, line);
    else if (key == "out") out_dir = value;
    else if (key == "checkpoint") checkpoint_path = value;
    else if (key == "checkpoint_every") checkpoint_every = to_int(key, value, line);
    else if (key == "smoothing_window") {
        smoothing_window = int(to_int(key, value, line));
        if (smoothing_window < 1) bad(key, "must be >= 1", line);
    } else if (key == "deterministic_timing") deterministic_timing = to_bool(key, value, line);
    else if (key == "introspect_steps") introspect_steps = to_int(key, value, line);
    else if (key == "kmeans_k") {
        kmeans_k = int(to_int(key, value, line));
        if (kmeans_k < 1) bad(key, "must be >= 1", line);
    } else if (key == "greedy") greedy = to_bool(key, value, line);
    else bad(key, "unknown key", line);
}

void RunConfig::validate() const {
    env.validate();
    const bool training = mode == RunMode::TrainPg || mode == RunMode::TrainA3c;
    if ((training || mode == RunMode::GradCheck) && arch.empty())
        throw ConfigError("config: required key 'arch' missing for mode " + to_string(mode));
    if ((mode == RunMode::Eval || mode == RunMode::Introspect) && checkpoint_path.empty())
        throw ConfigError("config: required key 'checkpoint' missing for mode " + to_string(mode));
    if (training) hyper.validate();
    if (mode == RunMode::TrainA3c) loss_weights.validate();
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file '" + path + "' cannot be opened");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config '" + path + "' line " + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            const size_t sb = s.find_first_not_of(" \t");
            const size_t se = s.find_last_not_of(" \t");
            s = sb == std::string::npos ? std::string() : s.substr(sb, se - sb + 1);
        };
        strip(key);
        strip(value);
        base.apply(key, value, lineno);
    }
    return base;
}

void write_manifest(const RunConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_manifest: cannot open '" + path + "'");
    out << "mode=" << to_string(c.mode) << "\n"
        << "frame_height=" << c.env.frame_height << "\n"
        << "frame_width=" << c.env.frame_width << "\n"
        << "paddle_height=" << c.env.paddle_height << "\n"
        << "paddle_speed=" << c.env.paddle_speed << "\n"
        << "ball_speed=" << c.env.ball_speed << "\n"
        << "opponent_speed_cap=" << c.env.opponent_speed_cap << "\n"
        << "points_to_win=" << c.env.points_to_win << "\n"
        << "step_limit=" << c.env.step_limit << "\n"
        << "arch=" << c.arch << "\n"
        << "alpha=" << c.hyper.alpha << "\n"
        << "gamma=" << c.hyper.gamma << "\n"
        << "episodes=" << c.hyper.episodes << "\n"
        << "exploration_bias=" << c.hyper.exploration_bias << "\n"
        << "baseline=" << (c.hyper.baseline_mode == pg::BaselineMode::EpisodeMean ? "episode" : "running") << "\n"
        << "optimizer=" << (c.hyper.optimizer == nn::OptMode::Sgd ? "sgd" : "rmsprop") << "\n"
        << "seed=" << c.hyper.seed << "\n"
        << "workers=" << c.workers << "\n"
        << "beta1=" << c.loss_weights.beta1 << "\n"
        << "beta2=" << c.loss_weights.beta2 << "\n"
        << "beta3=" << c.loss_weights.beta3 << "\n"
        << "time_limit_s=" << c.time_limit_s << "\n"
        << "out=" << c.out_dir << "\n"
        << "checkpoint=" << c.checkpoint_path << "\n"
        << "checkpoint_every=" << c.checkpoint_every << "\n"
        << "smoothing_window=" << c.smoothing_window << "\n"
        << "deterministic_timing=" << (c.deterministic_timing ? 1 : 0) << "\n"
        << "introspect_steps=" << c.introspect_steps << "\n"
        << "kmeans_k=" << c.kmeans_k << "\n"
        << "greedy=" << (c.greedy ? 1 : 0) << "\n";
}

EvalResult evaluate(const nn::Network<float>& params, const EnvConfig& env_config, int episodes,
                    uint64_t seed, const std::string& csv_path, bool greedy, int smoothing_window,
                    bool zero_wall_clock) {
    pg::PongRolloutEnv env(env_config, seed);
    std::mt19937_64 rng(seed);
    SmoothingWindow smoothing(smoothing_window);
    EvalResult result;
    const auto t0 = std::chrono::steady_clock::now();

    for (int ep = 0; ep < episodes; ++ep) {
        std::vector<float> obs = env.reset();
        bool done = false;
        int64_t steps = 0;
        while (!done) {
            auto trace = nn::forward(params, std::span<const float>(obs));
            int action;
            if (greedy) {
                const auto& y = trace.output();
                action = int(std::max_element(y.begin(), y.end()) - y.begin());
            } else {
                action = pg::select_action(trace.output(), 0.0, rng);
            }
            auto r = env.step(action);
            obs = std::move(r.obs);
            done = r.done;
            ++steps;
        }
        ScoreRecord rec;
        rec.episode = ep;
        rec.score = env.episode_score();
        rec.smoothed = smoothing.add(double(rec.score));
        rec.steps = steps;
        rec.wall_clock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.records.push_back(rec);
        result.mean_score += double(rec.score);
    }
    if (!result.records.empty()) result.mean_score /= double(result.records.size());

    if (!csv_path.empty()) {
        ScoreCsvWriter csv(csv_path, false, zero_wall_clock);
        for (const auto& rec : result.records) csv.write(rec);
    }
    return result;
}

} // namespace pongrl
