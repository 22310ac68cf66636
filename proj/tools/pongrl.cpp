#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "pongrl/a3c.hpp"
#include "pongrl/checkpoint.hpp"
#include "pongrl/config.hpp"
#include "pongrl/gradcheck.hpp"
#include "pongrl/introspect.hpp"
#include "pongrl/pg.hpp"

namespace fs = std::filesystem;
using namespace pongrl;

namespace {

struct CliState {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string dump_frame_path;
};

// Every flag funnels into RunConfig::apply so file values and CLI flags
// share one validation path; flags given on the command line override the
// config file.
void add_common_options(CLI::App* cmd, CliState& state) {
    cmd->add_option("--config", state.config_path, "flat key=value config file");
    auto opt = [&state, cmd](const std::string& flag, const std::string& key,
                             const std::string& help) {
        cmd->add_option_function<std::string>(
               flag, [&state, key](const std::string& v) { state.overrides.emplace_back(key, v); },
               help)
            ->type_name("VALUE");
    };
    opt("--arch", "arch", "architecture descriptor, e.g. 6400:200:3");
    opt("--alpha", "alpha", "learning rate");
    opt("--gamma", "gamma", "discount factor in [0,1)");
    opt("--episodes", "episodes", "episode budget");
    opt("--seed", "seed", "master seed (env, init, sampling)");
    opt("--workers", "workers", "a3c worker count");
    opt("--out", "out", "output directory");
    opt("--checkpoint", "checkpoint", "checkpoint file to load");
    opt("--checkpoint-every", "checkpoint_every", "checkpoint cadence in episodes");
    opt("--smoothing-window", "smoothing_window", "score smoothing window");
    opt("--exploration-bias", "exploration_bias", "uniform action mixing probability");
    opt("--baseline", "baseline", "baseline mode: episode | running");
    opt("--optimizer", "optimizer", "sgd | rmsprop");
    opt("--beta1", "beta1", "policy loss weight");
    opt("--beta2", "beta2", "value loss weight");
    opt("--beta3", "beta3", "entropy loss weight");
    opt("--time-limit", "time_limit_s", "wall-clock budget in seconds (a3c)");
    opt("--frame-height", "frame_height", "board height in pixels");
    opt("--frame-width", "frame_width", "board width in pixels");
    opt("--paddle-height", "paddle_height", "paddle height in pixels");
    opt("--paddle-speed", "paddle_speed", "paddle speed, pixels/step");
    opt("--ball-speed", "ball_speed", "ball speed, pixels/step");
    opt("--opponent-speed-cap", "opponent_speed_cap", "opponent tracking cap, pixels/step");
    opt("--points-to-win", "points_to_win", "points per episode");
    opt("--step-limit", "step_limit", "hard per-episode step ceiling");
    opt("--deterministic-timing", "deterministic_timing",
        "write wall_clock_s as 0 for bit-reproducible CSVs");
    opt("--steps", "introspect_steps", "rollout steps to record (introspect)");
    opt("--kmeans-k", "kmeans_k", "clusters per action group (introspect)");
    opt("--greedy", "greedy", "argmax actions instead of sampling");
}

RunConfig resolve_config(RunMode mode, const CliState& state) {
    RunConfig config;
    config.mode = mode;
    if (!state.config_path.empty()) config = load_config(state.config_path, config);
    config.mode = mode; // subcommand wins over any mode= in the file
    for (const auto& [key, value] : state.overrides) config.apply(key, value);
    config.validate();
    return config;
}

void save_with_meta(const nn::Network<float>& net, const std::string& path) {
    save_checkpoint(net, path);
    std::cout << "wrote checkpoint " << path << "\n";
}

int run_train_pg(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    write_manifest(config, config.out_dir + "/manifest");

    auto spec = nn::parse_architecture(config.arch, nn::Activation::Sigmoid, false);
    if (spec.output_size() != 3)
        throw ConfigError("train-pg: policy network must have 3 outputs, got " +
                          std::to_string(spec.output_size()));
    auto net = nn::init_network<float>(spec, config.hyper.seed);

    pg::PongRolloutEnv env(config.env, config.hyper.seed);
    ScoreCsvWriter csv(config.out_dir + "/scores.csv", false, config.deterministic_timing);
    pg::TrainSinks sinks;
    sinks.csv = &csv;
    sinks.smoothing_window = config.smoothing_window;
    sinks.checkpoint_every = config.checkpoint_every;
    sinks.checkpoint = [&](const nn::Network<float>& n, int64_t ep) {
        save_with_meta(n, config.out_dir + "/checkpoint_ep" + std::to_string(ep) + ".pgnn");
    };
    sinks.on_episode = [](const ScoreRecord& rec) {
        if ((rec.episode + 1) % 100 == 0)
            std::cout << "episode " << (rec.episode + 1) << " score " << rec.score << " smoothed "
                      << rec.smoothed << "\n";
    };

    auto trained = pg::train_pg(env, std::move(net), config.hyper, sinks);
    save_with_meta(trained, config.out_dir + "/final.pgnn");
    return 0;
}

int run_train_a3c(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    write_manifest(config, config.out_dir + "/manifest");

    auto spec = nn::parse_architecture(config.arch, nn::Activation::Softmax, true);
    if (spec.output_size() != 3)
        throw ConfigError("train-a3c: policy network must have 3 outputs, got " +
                          std::to_string(spec.output_size()));

    a3c::A3cHyperparams hyper;
    hyper.alpha = config.hyper.alpha;
    hyper.gamma = config.hyper.gamma;
    hyper.episodes = config.hyper.episodes;
    hyper.seed = config.hyper.seed;
    hyper.optimizer = config.hyper.optimizer;
    hyper.time_limit_s = config.time_limit_s;

    a3c::EnvFactory factory = [&config](int worker_id) {
        return std::make_unique<pg::PongRolloutEnv>(config.env,
                                                    config.hyper.seed * 7919 + uint64_t(worker_id));
    };

    ScoreCsvWriter csv(config.out_dir + "/scores.csv", true, config.deterministic_timing);
    a3c::A3cSinks sinks;
    sinks.csv = &csv;
    sinks.smoothing_window = config.smoothing_window;

    auto result = a3c::train_a3c(config.workers, factory, spec, hyper, config.loss_weights, sinks);
    save_with_meta(result.params, config.out_dir + "/final.pgnn");
    for (const auto& err : result.worker_errors) std::cerr << "error: " << err << "\n";
    return result.worker_errors.empty() ? 0 : 3;
}

int run_eval(const RunConfig& config, const CliState& state) {
    for (const auto& [key, value] : state.overrides)
        if (key == "alpha")
            std::cerr << "warning: --alpha has no effect in eval mode (ignored)\n";

    auto net = load_checkpoint(config.checkpoint_path, nullptr, config.arch);
    fs::create_directories(config.out_dir);
    write_manifest(config, config.out_dir + "/manifest");

    if (!state.dump_frame_path.empty()) {
        PongEnv env(config.env);
        introspect::write_frame_pgm(env.reset(), state.dump_frame_path);
        std::cout << "wrote frame " << state.dump_frame_path << "\n";
    }

    const int episodes = int(std::max<int64_t>(1, config.hyper.episodes));
    auto result = evaluate(net, config.env, episodes, config.hyper.seed,
                           config.out_dir + "/eval.csv", config.greedy, config.smoothing_window,
                           config.deterministic_timing);
    std::cout << "episodes " << episodes << " mean score " << result.mean_score << "\n";
    return 0;
}

// Grid shape for reshaping hidden-layer vectors: the divisor pair of n
// closest to a square (200 -> 20x10, 400 -> 20x20).
std::pair<int, int> grid_shape(int n) {
    int best_h = 1;
    for (int h = 1; h * h <= n; ++h)
        if (n % h == 0) best_h = h;
    return {n / best_h, best_h};
}

int run_introspect(const RunConfig& config) {
    auto net = load_checkpoint(config.checkpoint_path);
    fs::create_directories(config.out_dir);
    write_manifest(config, config.out_dir + "/manifest");

    auto records = introspect::record_rollout(net, config.env, config.introspect_steps,
                                              config.hyper.seed, config.greedy);
    auto groups = introspect::group_by_action(records);
    static const char* kActionNames[3] = {"still", "up", "down"};

    std::ofstream report(config.out_dir + "/clusters.jsonl", std::ios::trunc);
    if (!report) throw IoError("introspect: cannot open cluster report");

    const int hidden_width = int(records.front().hidden.size());
    const auto [grid_h, grid_w] = grid_shape(hidden_width);

    for (int a = 0; a < 3; ++a) {
        const auto& group = groups[size_t(a)];
        std::cout << "action " << kActionNames[a] << ": " << group.size() << " records\n";
        if (group.empty()) continue;
        std::vector<std::vector<double>> vecs;
        vecs.reserve(group.size());
        for (const auto* rec : group)
            vecs.emplace_back(rec->hidden.begin(), rec->hidden.end());
        auto km = introspect::kmeans_best_of(vecs, config.kmeans_k, config.hyper.seed);
        std::vector<int> sizes(size_t(km.k), 0);
        for (int c : km.assignment) ++sizes[size_t(c)];
        for (int c = 0; c < km.k; ++c) {
            report << nlohmann::json{{"group", kActionNames[a]},
                                     {"cluster", c},
                                     {"size", sizes[size_t(c)]},
                                     {"inertia", km.inertia}}
                          .dump()
                   << "\n";
            auto img = introspect::reshape_to_image(km.centroids[size_t(c)], grid_h, grid_w, c);
            introspect::write_pgm(img, config.out_dir + "/centroid_" + kActionNames[a] + "_" +
                                           std::to_string(c) + ".pgm");
        }
    }

    // Node-to-action map over the hidden grid.
    auto node_actions = introspect::assign_nodes_to_actions(records);
    std::vector<double> map_vals(node_actions.size());
    for (size_t j = 0; j < node_actions.size(); ++j) map_vals[j] = (node_actions[j] + 1) / 3.0;
    introspect::write_pgm(introspect::reshape_to_image(map_vals, grid_h, grid_w),
                          config.out_dir + "/node_groups.pgm");

    // First-layer weight images for a spread of hidden nodes.
    if (std::holds_alternative<nn::DenseLayer<float>>(net.layers.front())) {
        const int out_n = std::get<nn::DenseLayer<float>>(net.layers.front()).out;
        std::vector<int> nodes;
        const int count = std::min(16, out_n);
        for (int i = 0; i < count; ++i) nodes.push_back(i * out_n / count);
        auto images = introspect::render_weight_images(net, nodes, config.env.frame_height,
                                                       config.env.frame_width);
        for (const auto& img : images) {
            introspect::write_pgm(img, config.out_dir + "/node_" + std::to_string(img.node_index) +
                                           ".pgm");
            auto band = introspect::detect_band(img);
            std::cout << "node " << img.node_index << " band: component_share "
                      << band.largest_component_share << " diagonal_extent "
                      << band.diagonal_extent << "\n";
        }
    } else {
        auto kernels = introspect::render_kernels(net);
        for (size_t i = 0; i < kernels.size(); ++i)
            introspect::write_pgm(kernels[i],
                                  config.out_dir + "/kernel_" + std::to_string(i) + ".pgm");
    }
    std::cout << "introspection artifacts written to " << config.out_dir << "\n";
    return 0;
}

int run_gradcheck(const RunConfig& config) {
    auto spec = nn::parse_architecture(config.arch);
    for (auto tag : {nn::LossTag::SquaredLabel, nn::LossTag::ActorCritic}) {
        auto rep = nn::gradient_check(spec, tag, config.hyper.seed);
        std::cout << (tag == nn::LossTag::SquaredLabel ? "squared-label" : "actor-critic")
                  << ": max_rel_error " << rep.max_rel_error << " over " << rep.params_checked
                  << " params (worst " << rep.worst_param << ")\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pongrl: policy-gradient Pong trainer and network introspection"};
    app.require_subcommand(1);

    CliState state;
    auto* train_pg_cmd = app.add_subcommand("train-pg", "REINFORCE-with-baseline training");
    auto* train_a3c_cmd = app.add_subcommand("train-a3c", "asynchronous advantage actor-critic");
    auto* eval_cmd = app.add_subcommand("eval", "frozen-weight evaluation of a checkpoint");
    auto* introspect_cmd =
        app.add_subcommand("introspect", "record activations, cluster, render weight images");
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    for (auto* cmd : {train_pg_cmd, train_a3c_cmd, eval_cmd, introspect_cmd, gradcheck_cmd})
        add_common_options(cmd, state);
    eval_cmd->add_option("--dump-frame", state.dump_frame_path,
                         "debug: write the initial frame as a PGM file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train_pg_cmd->parsed()) return run_train_pg(resolve_config(RunMode::TrainPg, state));
        if (train_a3c_cmd->parsed()) return run_train_a3c(resolve_config(RunMode::TrainA3c, state));
        if (eval_cmd->parsed()) return run_eval(resolve_config(RunMode::Eval, state), state);
        if (introspect_cmd->parsed())
            return run_introspect(resolve_config(RunMode::Introspect, state));
        if (gradcheck_cmd->parsed()) return run_gradcheck(resolve_config(RunMode::GradCheck, state));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
