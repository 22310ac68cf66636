#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pongrl/checkpoint.hpp"
#include "pongrl/config.hpp"
#include "pongrl/scores.hpp"

using namespace pongrl;

namespace {

std::string temp_path(const char* name) { return std::string("io_test_") + name; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool params_equal(const nn::Network<float>& a, const nn::Network<float>& b) {
    return nn::param_checksum(a) == nn::param_checksum(b);
}

} // namespace

TEST_CASE("config keys apply with range checking") {
    RunConfig c;
    c.apply("gamma", "0.9");
    CHECK(c.hyper.gamma == doctest::Approx(0.9));
    c.apply("alpha", "0.0001");
    CHECK(c.hyper.alpha == doctest::Approx(0.0001));
    c.apply("arch", "6400:200:3");
    CHECK(c.arch == "6400:200:3");
    c.apply("workers", "4");
    CHECK(c.workers == 4);

    CHECK_THROWS_WITH_AS(c.apply("gamma", "1.5"), doctest::Contains("gamma"), ConfigError);
    CHECK_THROWS_WITH_AS(c.apply("frobnicate", "1", 7), doctest::Contains("frobnicate"),
                         ConfigError);
    CHECK_THROWS_AS(c.apply("episodes", "not-a-number"), ConfigError);
}

TEST_CASE("train mode requires an architecture") {
    RunConfig c;
    c.mode = RunMode::TrainPg;
    c.arch.clear();
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("arch"), ConfigError);
    c.arch = "6400:100:3";
    CHECK_NOTHROW(c.validate());

    RunConfig e;
    e.mode = RunMode::Eval;
    CHECK_THROWS_WITH_AS(e.validate(), doctest::Contains("checkpoint"), ConfigError);
}

TEST_CASE("load_config parses flat key=value files with comments") {
    const auto path = temp_path("run.cfg");
    write_text(path, "# experiment\n"
                     "mode=train-pg\n"
                     "arch=6400:100:3\n"
                     "gamma=0.9\n"
                     "alpha=0.001\n"
                     "episodes=24000\n"
                     "\n"
                     "seed=1\n");
    auto c = load_config(path);
    CHECK(c.mode == RunMode::TrainPg);
    CHECK(c.arch == "6400:100:3");
    CHECK(c.hyper.gamma == doctest::Approx(0.9));
    CHECK(c.hyper.episodes == 24000);
    CHECK_NOTHROW(c.validate());
    std::remove(path.c_str());
}

TEST_CASE("load_config reports the offending line") {
    const auto path = temp_path("bad.cfg");
    write_text(path, "gamma=0.9\nnonsense_key=1\n");
    CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("nonsense_key"), ConfigError);
    CHECK_THROWS_AS(load_config("does_not_exist.cfg"), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("manifest round-trips the resolved configuration") {
    RunConfig c;
    c.mode = RunMode::TrainA3c;
    c.arch = "6400:256:3";
    c.hyper.gamma = 0.95;
    c.hyper.alpha = 0.0001;
    c.workers = 4;
    const auto path = temp_path("manifest");
    write_manifest(c, path);
    auto back = load_config(path);
    CHECK(back.mode == RunMode::TrainA3c);
    CHECK(back.arch == c.arch);
    CHECK(back.hyper.gamma == doctest::Approx(c.hyper.gamma));
    CHECK(back.workers == 4);
    std::remove(path.c_str());
}

TEST_CASE("smooth_scores matches the pinned examples") {
    std::vector<double> raw{3.0, -5.0, 7.0, 1.0};
    auto identity = smooth_scores(raw, 1);
    CHECK(identity == raw);

    std::vector<double> constant(50, -21.0);
    for (double s : smooth_scores(constant, 100)) CHECK(s == doctest::Approx(-21.0));

    std::vector<double> three{-21.0, -19.0, -17.0};
    auto sm = smooth_scores(three, 3);
    CHECK(sm.back() == doctest::Approx(-19.0));
    CHECK(sm[0] == doctest::Approx(-21.0));
    CHECK(sm[1] == doctest::Approx(-20.0)); // mean over the 2 seen so far
}

TEST_CASE("SmoothingWindow agrees with smooth_scores") {
    std::vector<double> raw{1, 4, -2, 8, 0, 3, 3, -7, 2, 5};
    auto batch = smooth_scores(raw, 4);
    SmoothingWindow win(4);
    for (size_t i = 0; i < raw.size(); ++i)
        CHECK(win.add(raw[i]) == doctest::Approx(batch[i]).epsilon(1e-12));
}

TEST_CASE("score CSV writer and reader round trip") {
    const auto path = temp_path("scores.csv");
    {
        ScoreCsvWriter w(path, false);
        for (int i = 0; i < 5; ++i) {
            ScoreRecord r;
            r.episode = i;
            r.score = -21 + i;
            r.smoothed = -21.0 + 0.5 * i;
            r.steps = 100 + i;
            r.wall_clock_s = 0.25 * i;
            w.write(r);
        }
        w.flush();
    }
    auto records = read_score_csv(path);
    REQUIRE(records.size() == 5u);
    CHECK(records[2].episode == 2);
    CHECK(records[2].score == -19);
    CHECK(records[2].smoothed == doctest::Approx(-20.0));
    CHECK(records[2].steps == 102);
    CHECK(records[2].wall_clock_s == doctest::Approx(0.5));
    CHECK(records[2].worker_id == -1);
    std::remove(path.c_str());
}

TEST_CASE("worker-id CSV schema and zeroed wall clock") {
    const auto path = temp_path("a3c_scores.csv");
    {
        ScoreCsvWriter w(path, true, true);
        ScoreRecord r;
        r.episode = 0;
        r.score = 3;
        r.steps = 42;
        r.wall_clock_s = 123.456;
        r.worker_id = 2;
        w.write(r);
        w.flush();
    }
    const auto text = slurp(path);
    CHECK(text.find("worker_id") != std::string::npos);
    CHECK(text.find("123.456") == std::string::npos); // zeroed for determinism
    auto records = read_score_csv(path);
    REQUIRE(records.size() == 1u);
    CHECK(records[0].worker_id == 2);
    CHECK(records[0].wall_clock_s == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint save/load is bit-exact") {
    auto spec = nn::parse_architecture("20:10:3;softmax;v");
    auto net = nn::init_network<float>(spec, 77);
    const auto path = temp_path("net.pgnn");
    save_checkpoint(net, path);

    CheckpointMeta meta;
    auto back = load_checkpoint(path, &meta);
    CHECK(meta.format_version == 1);
    CHECK(meta.descriptor == spec.canonical());
    CHECK(params_equal(net, back));
    CHECK(back.value_head.has_value());
    std::remove(path.c_str());
}

TEST_CASE("conv checkpoints round trip too") {
    auto spec = nn::parse_architecture("64:conv(2,3x3):4:3");
    auto net = nn::init_network<float>(spec, 5);
    const auto path = temp_path("conv.pgnn");
    save_checkpoint(net, path);
    auto back = load_checkpoint(path);
    CHECK(params_equal(net, back));
    std::remove(path.c_str());
}

TEST_CASE("truncated checkpoints are rejected without partial params") {
    auto net = nn::init_network<float>(nn::parse_architecture("20:10:3"), 1);
    const auto path = temp_path("trunc.pgnn");
    save_checkpoint(net, path);
    auto bytes = slurp(path);
    write_text(path, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("a flipped byte fails the CRC") {
    auto net = nn::init_network<float>(nn::parse_architecture("20:10:3"), 2);
    const auto path = temp_path("flip.pgnn");
    save_checkpoint(net, path);
    auto bytes = slurp(path);
    bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x01);
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(),
                                                                  std::streamsize(bytes.size()));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("CRC"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("architecture expectation mismatches are named") {
    auto net = nn::init_network<float>(nn::parse_architecture("6400:200:3"), 3);
    const auto path = temp_path("arch.pgnn");
    save_checkpoint(net, path);
    CHECK_NOTHROW(load_checkpoint(path, nullptr, "6400:200:3"));
    CHECK_THROWS_AS(load_checkpoint(path, nullptr, "6400:100:3"), IoError);
    CHECK_THROWS_AS(load_checkpoint("missing.pgnn"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("eval is deterministic and a random policy loses badly") {
    EnvConfig ec;
    ec.rng_seed = 0;
    auto params = nn::init_network<float>(nn::parse_architecture("6400:8:3"), 9);

    auto a = evaluate(params, ec, 5, 11);
    auto b = evaluate(params, ec, 5, 11);
    REQUIRE(a.records.size() == 5u);
    CHECK(a.mean_score == b.mean_score);
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].score == b.records[i].score);
        CHECK(a.records[i].steps == b.records[i].steps);
    }
    CHECK(a.mean_score <= -15.0);
}

TEST_CASE("mode names round trip") {
    for (RunMode m : {RunMode::TrainPg, RunMode::TrainA3c, RunMode::Eval, RunMode::Introspect,
                      RunMode::GradCheck})
        CHECK(parse_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_mode("bogus"), ConfigError);
}
