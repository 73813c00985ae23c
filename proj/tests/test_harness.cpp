#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "wcs/config.hpp"
#include "wcs/errors.hpp"
#include "wcs/harness.hpp"
#include "wcs/plots.hpp"

using namespace wcs;
using namespace wcs::exp;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(WCS_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wcs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.m = 3;
  c.p_max = 1.5;
  c.T_train = 4;
  c.T_test = 6;
  c.N = 12;
  c.iterations = 4;
  c.hidden_sizes = {8, 8};
  c.n_eval_seeds = 5;
  return c;
}

}  // namespace

TEST_CASE("shipped configs", "[config]") {
  const auto e1 = load_config((kConfigs / "exp1.cfg").string());
  CHECK(e1.m == 15);
  CHECK(e1.p_max == 6.0);
  CHECK(e1.T_train == 5);
  CHECK(e1.T_test == 30);
  CHECK(e1.N == 1000);

  const auto e2 = load_config((kConfigs / "exp2.cfg").string());
  CHECK(e2.m == 10);
  CHECK(e2.p_max == 3.0);
  CHECK(e2.T_train == 10);
  CHECK(e2.T_test == 40);
  CHECK(e2.N == 300);
  CHECK(e2.w_obs_var == 0.4);
  CHECK(e2.lambda_h == 1.0);

  for (const char* name : {"exp1_scaled.cfg", "exp2_scaled.cfg", "smoke.cfg"})
    CHECK_NOTHROW(validate(load_config((kConfigs / name).string())));
}

TEST_CASE("config errors name the key", "[config]") {
  auto key_of = [](const std::string& text) {
    try {
      validate(parse_config(text));
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  CHECK(key_of("p_max = -1\n") == "p_max");
  CHECK(key_of("m = 0\n") == "m");
  CHECK(key_of("gamma = 1.5\n") == "gamma");
  CHECK(key_of("bogus = 3\n") == "bogus");
  CHECK(key_of("N = 5\nN = 6\n") == "N");
  CHECK(key_of("alpha =\n") == "alpha");
  CHECK(key_of("alpha = fast\n") == "alpha");
  CHECK(key_of("pretrain = maybe\n") == "pretrain");
  CHECK(key_of("hidden_sizes = 8,0\n") == "hidden_sizes");
  CHECK(key_of("# only a comment\n\n") == "<none>");
  CHECK_THROWS_AS(load_config("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("config round-trips through text", "[config]") {
  ExperimentConfig c = tiny();
  c.alpha = 1.0 / 3.0;
  c.w_obs_var = 0.4;
  c.pretrain = true;
  c.hidden_sizes = {7, 5, 3};
  c.eval_seed = 18446744073709551615ull;
  CHECK(parse_config(to_text(c)) == c);
  CHECK(parse_config(to_text(ExperimentConfig{})) == ExperimentConfig{});

  const auto e = parse_config("m = 4  # trailing comment\n  p_max=2\n");
  CHECK(e.m == 4);
  CHECK(e.p_max == 2.0);
  CHECK(e.T_test == ExperimentConfig{}.T_test);
}

TEST_CASE("environment seed overrides", "[config]") {
  ExperimentConfig c;
  setenv("WCS_TRAIN_SEED", "77", 1);
  apply_env_overrides(c);
  unsetenv("WCS_TRAIN_SEED");
  CHECK(c.train_seed == 77u);
  CHECK(c.plant_seed == ExperimentConfig{}.plant_seed);
}

TEST_CASE("roster construction", "[harness]") {
  const auto c = tiny();
  const System a = build_system(c), b = build_system(c);
  REQUIRE(a.plant_count() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const double ai = a.plants()[i].A()(0, 0);
    CHECK(ai >= c.a_min);
    CHECK(ai <= c.a_max);
    CHECK(ai == b.plants()[i].A()(0, 0));
    CHECK(a.plants()[i].W()(0, 0) == c.process_noise_var);
  }
}

TEST_CASE("train with zero iterations returns the initial policy", "[harness]") {
  auto c = tiny();
  c.iterations = 0;
  const auto out = train(c);
  CHECK(out.log.empty());
  CHECK(out.policy.net == initial_policy(c).net);
}

TEST_CASE("train writes reproducible outputs", "[harness][determinism]") {
  auto c = tiny();
  c.checkpoint_every = 2;
  const auto d1 = scratch("train1"), d2 = scratch("train2");
  const auto o1 = train(c, d1);
  train(c, d2);
  for (const char* f : {"train_log.csv", "params_final.txt", "config.cfg", "checkpoint_000002.txt",
                        "checkpoint_000004.txt", "train.svg"}) {
    INFO(f);
    REQUIRE(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  CHECK(fs::exists(d1 / "timing.csv"));
  CHECK(o1.checkpoints.size() == 2);
  CHECK(load_config((d1 / "config.cfg").string()) == c);
  CHECK(nn::load_params((d1 / "params_final.txt").string()) == o1.policy.net);
  CHECK(o1.allocations_checked == 4u * 12u * 4u);

  auto other = c;
  other.train_seed = 99;
  const auto d3 = scratch("train3");
  train(other, d3);
  CHECK(slurp(d1 / "train_log.csv") != slurp(d3 / "train_log.csv"));
}

TEST_CASE("paired evaluation", "[harness]") {
  const auto c = tiny();
  const System sys = build_system(c);
  const auto eq = make_allocator("equal", c), ca = make_allocator("control_aware", c);

  const auto same = evaluate(c, sys, {eq, eq}, 5);
  CHECK(same.costs[0] == same.costs[1]);
  CHECK(same.win_rate(0, 1) == 0.0);

  // Changing the learned parameters must not change any other policy's costs.
  const auto p1 = initial_policy(c).net;
  auto p2 = p1;
  p2 *= 3.0;
  const auto r1 = evaluate(c, sys, {make_allocator("learned", c, &p1), eq, ca}, 5);
  const auto r2 = evaluate(c, sys, {make_allocator("learned", c, &p2), eq, ca}, 5);
  CHECK(r1.costs[1] == r2.costs[1]);
  CHECK(r1.costs[2] == r2.costs[2]);
  CHECK(r1.costs[0] != r2.costs[0]);
  CHECK(r1.policies == std::vector<std::string>{"learned", "equal", "control_aware"});
  CHECK(r1.allocations_checked == 3u * 5u * 6u);
  // The reference's position in the list does not matter either.
  const auto r3 = evaluate(c, sys, {ca, eq}, 5);
  CHECK(r3.costs[0] == r1.costs[2]);

  auto one = tiny();
  one.m = 1;
  const System s1 = build_system(one);
  const auto deg = evaluate(one, s1, {make_allocator("equal", one), make_allocator("control_aware", one)}, 5);
  CHECK(deg.costs[0] == deg.costs[1]);

  CHECK_THROWS_AS(evaluate(c, sys, {}, 5), UsageError);
  CHECK_THROWS_AS(make_allocator("greedy", c), UsageError);
  auto wrong = tiny();
  wrong.m = 4;
  CHECK_THROWS_AS(make_allocator("learned", wrong, &p1), UsageError);
}

TEST_CASE("report statistics", "[harness]") {
  EvalReport r;
  r.policies = {"a", "b"};
  r.seeds = {0, 1, 2, 3};
  r.costs = {{1, 5, 3, 2}, {2, 4, 3, 9}};
  CHECK(r.mean(0) == 2.75);
  CHECK(r.median(0) == 2.5);
  CHECK(r.median(1) == 3.5);
  CHECK(r.win_rate(0, 1) == 0.5);
  CHECK(r.index_of("b") == 1);
  CHECK_THROWS_AS(r.index_of("c"), UsageError);
}

TEST_CASE("CSV schemas are pinned", "[plots]") {
  auto c = tiny();
  const auto d = scratch("schema");
  train(c, d);
  CHECK(first_line(d / "train_log.csv") == "iteration,mean_cost,grad_norm,mean_total_cost");
  CHECK(first_line(d / "timing.csv") == "iteration,elapsed_s");

  const System sys = build_system(c);
  const auto eq = make_allocator("equal", c), ca = make_allocator("control_aware", c);
  const auto report = evaluate(c, sys, {ca, eq}, 4);
  write_eval_outputs(report, d);
  CHECK(first_line(d / "compare.csv") == "seed,policy,total_cost");
  CHECK(first_line(d / "summary.csv") == "policy,mean_cost,median_cost,ref_win_rate");
  emit_plots(example_episode(c, sys, *eq), d / "episode.svg");
  CHECK(first_line(d / "episode.csv") == "t,plant,x,h,p,closed,stage_cost");

  // Read-back is exact.
  const auto table = read_compare_csv(d / "compare.csv");
  CHECK(table.policies == report.policies);
  CHECK(table.cost == report.costs);
  const auto ep = read_episode_csv(d / "episode.csv");
  CHECK(ep.steps == c.T_test);
  CHECK(ep.plants == c.m);
}

TEST_CASE("plot structure", "[plots]") {
  const auto d = scratch("plots");
  rl::TrainLog one{rl::TrainLogRow{0, 12.5, 13.0, 0.7, 0.01, false}};
  emit_plots(one, d / "train.svg");
  const std::string t = slurp(d / "train.svg");
  CHECK(count(t, "class=\"series\"") == 1);
  CHECK(fs::exists(d / "train.csv"));

  ExperimentConfig c;
  c.m = 15;
  c.p_max = 6;
  c.T_test = 30;
  const System sys = build_system(c);
  const auto eq = make_allocator("equal", c);
  emit_plots(example_episode(c, sys, *eq), d / "episode.svg");
  const std::string e = slurp(d / "episode.svg");
  CHECK(count(e, "<g class=\"panel\"") == 3);
  CHECK(count(e, "class=\"series\"") == 45);

  EvalReport r;
  r.policies = {"learned", "equal", "control_aware"};
  for (std::uint64_t k = 0; k < 20; ++k) r.seeds.push_back(k);
  r.costs.assign(3, std::vector<double>(20, 1.0));
  r.costs[1][3] = 7.0;
  emit_plots(r, d / "compare.svg");
  const std::string b = slurp(d / "compare.svg");
  CHECK(count(b, "class=\"bar\"") == 60);
  CHECK(count(b, "<g class=\"seed\"") == 20);
  CHECK(read_compare_csv(d / "compare.csv").cost == r.costs);

  // Round trip through the plot subcommand's reader.
  render_train_svg(d / "again.svg", read_train_csv(d / "train.csv"));
  CHECK(slurp(d / "again.svg") == t);

  CHECK_THROWS_AS(emit_plots(rl::TrainLog{}, d / "empty.svg"), UsageError);
  std::ofstream(d / "blocker") << "not a directory";
  CHECK_THROWS_AS(emit_plots(one, d / "blocker" / "x.svg"), IoError);
}
