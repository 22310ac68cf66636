#include "pongrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pongrl {

namespace {

// Serve angles stay shallow enough that the opponent can track every serve;
// only deliberate edge hits (up to kMaxDeflect) produce balls it cannot catch.
constexpr double kServeAngle = 35.0 * M_PI / 180.0;
constexpr double kMaxDeflect = 75.0 * M_PI / 180.0;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

} // namespace

void EnvConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("EnvConfig." + field + ": " + why);
    };
    if (frame_height < 8) fail("frame_height", "must be >= 8");
    if (frame_width < 8) fail("frame_width", "must be >= 8");
    if (paddle_height < 1 || paddle_height >= frame_height)
        fail("paddle_height", "must be in [1, frame_height)");
    if (paddle_speed < 1.0) fail("paddle_speed", "must be >= 1");
    if (ball_speed < 1.0) fail("ball_speed", "must be >= 1");
    if (opponent_speed_cap < 1.0) fail("opponent_speed_cap", "must be >= 1");
    if (points_to_win < 1) fail("points_to_win", "must be >= 1");
    if (step_limit < 1) fail("step_limit", "must be >= 1");
}

PongEnv::PongEnv(const EnvConfig& config) : config_(config) {
    config_.validate();
    reset();
}

Frame PongEnv::reset() {
    rng_.seed(config_.rng_seed);
    agent_points_ = 0;
    opponent_points_ = 0;
    done_ = false;
    tick_ = 0;
    agent_y_ = config_.frame_height / 2.0;
    opponent_y_ = config_.frame_height / 2.0;
    serve_to_agent_ = (rng_() & 1) != 0;
    serve();
    return render();
}

void PongEnv::serve() {
    ball_x_ = config_.frame_width / 2.0;
    ball_y_ = config_.frame_height / 2.0;
    std::uniform_real_distribution<double> angle(-kServeAngle, kServeAngle);
    const double theta = angle(rng_);
    const double dir = serve_to_agent_ ? 1.0 : -1.0;
    ball_vx_ = dir * config_.ball_speed * std::cos(theta);
    ball_vy_ = config_.ball_speed * std::sin(theta);
    serve_to_agent_ = !serve_to_agent_;
}

void PongEnv::move_opponent() {
    const double diff = ball_y_ - opponent_y_;
    opponent_y_ += clamp(diff, -config_.opponent_speed_cap, config_.opponent_speed_cap);
    const double half = config_.paddle_height / 2.0;
    opponent_y_ = clamp(opponent_y_, half, config_.frame_height - half);
}

// Checks whether the segment from (x0,y0) to (x0+vx, y0+vy) crosses the
// paddle face plane and hits the paddle span. On a hit the ball is placed
// at the contact point with a fresh direction of unchanged magnitude.
bool PongEnv::try_paddle_bounce(double plane_x, double paddle_y, bool agent_side,
                                double x0, double y0) {
    const bool toward = agent_side ? (ball_vx_ > 0) : (ball_vx_ < 0);
    if (!toward) return false;
    const bool crosses = agent_side ? (x0 <= plane_x && x0 + ball_vx_ >= plane_x)
                                    : (x0 >= plane_x && x0 + ball_vx_ <= plane_x);
    if (!crosses) return false;

    const double t = (plane_x - x0) / ball_vx_;
    double ycross = y0 + ball_vy_ * t;
    // Fold against the walls in case the segment bounces before the plane.
    const double half_ball = kBallSize / 2.0;
    const double lo = half_ball, hi = config_.frame_height - half_ball;
    while (ycross < lo || ycross > hi) {
        if (ycross < lo) ycross = 2 * lo - ycross;
        if (ycross > hi) ycross = 2 * hi - ycross;
    }

    const double span = config_.paddle_height / 2.0 + half_ball;
    if (std::abs(ycross - paddle_y) > span) return false;

    const double offset = clamp((ycross - paddle_y) / span, -1.0, 1.0);
    const double theta = offset * kMaxDeflect;
    const double out_dir = agent_side ? -1.0 : 1.0;
    ball_vx_ = out_dir * config_.ball_speed * std::cos(theta);
    ball_vy_ = config_.ball_speed * std::sin(theta);
    ball_x_ = plane_x;
    ball_y_ = ycross;
    return true;
}

StepResult PongEnv::step(EnvAction action) {
    if (done_) throw UsageError("PongEnv::step called after episode_done");
    ++tick_;
    if (tick_ > config_.step_limit)
        throw UsageError("PongEnv: episode exceeded step_limit=" +
                         std::to_string(config_.step_limit));

    const double half_paddle = config_.paddle_height / 2.0;
    if (action == EnvAction::Up) agent_y_ -= config_.paddle_speed;
    if (action == EnvAction::Down) agent_y_ += config_.paddle_speed;
    agent_y_ = clamp(agent_y_, half_paddle, config_.frame_height - half_paddle);

    move_opponent();

    const double half_ball = kBallSize / 2.0;
    const double agent_plane = config_.frame_width - kPaddleWidth - half_ball;
    const double opponent_plane = kPaddleWidth + half_ball;

    const double x0 = ball_x_, y0 = ball_y_;
    if (!try_paddle_bounce(agent_plane, agent_y_, true, x0, y0) &&
        !try_paddle_bounce(opponent_plane, opponent_y_, false, x0, y0)) {
        ball_x_ += ball_vx_;
        ball_y_ += ball_vy_;
        const double lo = half_ball, hi = config_.frame_height - half_ball;
        while (ball_y_ < lo || ball_y_ > hi) {
            if (ball_y_ < lo) {
                ball_y_ = 2 * lo - ball_y_;
                ball_vy_ = -ball_vy_;
            }
            if (ball_y_ > hi) {
                ball_y_ = 2 * hi - ball_y_;
                ball_vy_ = -ball_vy_;
            }
        }
    }

    StepResult result;
    if (ball_x_ < 0.0) {
        result.reward = 1;
        result.point_scored = true;
        ++agent_points_;
    } else if (ball_x_ > config_.frame_width) {
        result.reward = -1;
        result.point_scored = true;
        ++opponent_points_;
    }
    if (result.point_scored) {
        if (agent_points_ == config_.points_to_win || opponent_points_ == config_.points_to_win)
            done_ = true;
        else
            serve();
    }

    result.frame = render();
    result.episode_done = done_;
    result.score = {agent_points_, opponent_points_};
    return result;
}

Frame PongEnv::render() const {
    Frame f;
    f.height = config_.frame_height;
    f.width = config_.frame_width;
    f.tick = tick_;
    f.pixels.assign(static_cast<size_t>(f.height) * f.width, 0.0f);

    auto fill = [&](int y0, int x0, int h, int w) {
        for (int y = std::max(0, y0); y < std::min(f.height, y0 + h); ++y)
            for (int x = std::max(0, x0); x < std::min(f.width, x0 + w); ++x)
                f.at(y, x) = 1.0f;
    };

    const int ph = config_.paddle_height;
    fill(static_cast<int>(std::lround(opponent_y_ - ph / 2.0)), 0, ph, kPaddleWidth);
    fill(static_cast<int>(std::lround(agent_y_ - ph / 2.0)), f.width - kPaddleWidth, ph,
         kPaddleWidth);
    fill(static_cast<int>(std::lround(ball_y_)) - kBallSize / 2,
         static_cast<int>(std::lround(ball_x_)) - kBallSize / 2, kBallSize, kBallSize);
    return f;
}

} // namespace pongrl
