#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "pongrl/errors.hpp"

namespace pongrl {

// One rendered game frame: grayscale intensities in [0,1], row-major.
struct Frame {
    int height = 0;
    int width = 0;
    std::vector<float> pixels; // height * width
    int64_t tick = 0;

    float at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    float& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
};

// The three paddle actions. One-hot index mapping is fixed:
// Still = 0, Up = 1, Down = 2.
enum class EnvAction : int { Still = 0, Up = 1, Down = 2 };

struct StepResult {
    Frame frame;
    int reward = 0; // in {-1, 0, +1}
    bool point_scored = false;
    bool episode_done = false;
    std::pair<int, int> score{0, 0}; // (agent_points, opponent_points)
};

struct EnvConfig {
    int frame_height = 80;
    int frame_width = 80;
    int paddle_height = 16;
    double paddle_speed = 2.0;
    double ball_speed = 2.0;
    double opponent_speed_cap = 1.5;
    int points_to_win = 21;
    uint64_t rng_seed = 0;
    // Hard ceiling on steps per episode. Hitting it throws; it exists so
    // pathological rallies cannot hang a training run.
    int64_t step_limit = 1'000'000;

    void validate() const;
};

// Deterministic two-player Pong on a binary pixel board.
//
// The agent owns the right paddle, the built-in opponent the left one.
// The opponent tracks the ball vertically at most opponent_speed_cap
// pixels per step; balls deflected steeply off a paddle edge can outrun
// it, which is the only way to score against it. Ball velocity keeps
// constant magnitude (config.ball_speed) between scoring events; wall
// and paddle reflections change direction only. Serves alternate sides,
// with the serve angle drawn from the seeded generator.
class PongEnv {
public:
    explicit PongEnv(const EnvConfig& config);

    // Re-seeds from config.rng_seed and returns the initial frame.
    Frame reset();

    // Advances one step. Throws UsageError once the episode is done.
    StepResult step(EnvAction action);

    Frame render() const;

    bool done() const { return done_; }
    std::pair<int, int> score() const { return {agent_points_, opponent_points_}; }
    int64_t tick() const { return tick_; }
    const EnvConfig& config() const { return config_; }

    // Diagnostic accessors (tests, debugging).
    double ball_x() const { return ball_x_; }
    double ball_y() const { return ball_y_; }
    double ball_vx() const { return ball_vx_; }
    double ball_vy() const { return ball_vy_; }

    // Rendered sprite sizes in pixels (fixed; board geometry scales around them).
    static constexpr int kBallSize = 2;
    static constexpr int kPaddleWidth = 2;

private:
    void serve();
    void move_opponent();
    bool try_paddle_bounce(double plane_x, double paddle_y, bool agent_side,
                           double x0, double y0);

    EnvConfig config_;
    std::mt19937_64 rng_;
    double ball_x_ = 0, ball_y_ = 0;
    double ball_vx_ = 0, ball_vy_ = 0;
    double agent_y_ = 0;    // paddle center
    double opponent_y_ = 0; // paddle center
    int agent_points_ = 0;
    int opponent_points_ = 0;
    bool serve_to_agent_ = false;
    bool done_ = false;
    int64_t tick_ = 0;
};

} // namespace pongrl
