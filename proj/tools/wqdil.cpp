#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wqdil/config.hpp"
#include "wqdil/demos.hpp"
#include "wqdil/grid_archive.hpp"
#include "wqdil/point_walker.hpp"
#include "wqdil/qd_loop.hpp"
#include "wqdil/vppo.hpp"

namespace fs = std::filesystem;
using namespace wqdil;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

HarnessConfig resolve(const Common& common) {
  HarnessConfig cfg;
  if (!common.config_path.empty()) cfg = load_config(common.config_path);
  if (common.seed) cfg.qd.seed = *common.seed;
  return cfg;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "overrides the config seed");
  cmd->add_option("--out-dir", common.out_dir, "output directory");
}

void print_metrics(const qd::ArchiveMetrics& m) {
  std::printf("qd_score %.4f  coverage %.2f%%  best %.4f  average %.4f  elites %d\n", m.qd_score,
              m.coverage, m.best.value_or(0.0), m.average.value_or(0.0), m.occupied);
}

void save_run(const fs::path& dir, const HarnessConfig& cfg, const qd::RunResult& result) {
  fs::create_directories(dir);
  result.archive.save(dir / "archive.csv", dir / "archive.params", result.policy_spec.mean);
  std::ofstream heat(dir / "heatmap.csv");
  result.archive.write_heatmap_csv(heat);
  std::ofstream conf(dir / "config.txt");
  write_config(conf, cfg);
}

qd::RunResult run_logged(const HarnessConfig& cfg, const qd::ExpertData* expert, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream metrics(dir / "metrics.csv");
  qd::write_metrics_header(metrics);
  const auto start = std::chrono::steady_clock::now();
  auto result = qd::run(cfg.qd, expert, [&](const qd::IterationLog& row) {
    qd::write_metrics_row(metrics, row);
    metrics.flush();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "iter %4d  qd %.3f  cov %.2f%%  restart %d  (%.0fs)\n", row.iteration,
                 row.metrics.qd_score, row.metrics.coverage, row.restarted ? 1 : 0, secs);
  });
  save_run(dir, cfg, result);
  return result;
}

int cmd_run(const Common& common, const std::string& demos_override) {
  HarnessConfig cfg = resolve(common);
  if (!demos_override.empty()) cfg.demos = demos_override;
  std::optional<qd::ExpertData> expert;
  if (!cfg.qd.true_reward) {
    if (cfg.demos.empty()) throw std::runtime_error("run: a demos file is required (demos = ... or --demos)");
    expert = demos::to_expert_data(demos::load_demos(cfg.demos), cfg.qd.horizon);
  }
  const auto result = run_logged(cfg, expert ? &*expert : nullptr, common.out_dir);
  print_metrics(result.archive.metrics());
  if (result.error) {
    std::cerr << "run aborted at " << *result.error << "; partial archive saved\n";
    return 1;
  }
  return 0;
}

qd::GridArchive load_run_archive(const fs::path& dir, const HarnessConfig& cfg, nn::PolicySpec& spec) {
  const env::PointWalkerEnv prototype(cfg.qd.horizon);
  spec = nn::make_policy_spec(prototype.observation_dim(), prototype.action_dim(),
                              cfg.qd.vppo.policy_hidden, cfg.qd.vppo.learn_log_std);
  return qd::GridArchive::load(dir / "archive.csv", dir / "archive.params", spec.mean,
                               spec.param_count(), cfg.qd.grid);
}

int cmd_eval(const Common& common, int episodes) {
  Common c = common;
  const fs::path dir = common.out_dir;
  if (c.config_path.empty() && fs::exists(dir / "config.txt")) c.config_path = (dir / "config.txt").string();
  const HarnessConfig cfg = resolve(c);
  nn::PolicySpec spec;
  const auto archive = load_run_archive(dir, cfg, spec);
  std::printf("stored:      ");
  print_metrics(archive.metrics());

  Random rng(cfg.qd.seed);
  std::vector<std::uint64_t> seeds(episodes);
  for (auto& s : seeds) s = rng.next_u64();
  qd::GridArchive fresh(cfg.qd.grid);
  for (const auto& cell : archive.occupied_cells()) {
    const auto& elite = *archive.at(cell);
    std::vector<Measure> measures;
    double ret = 0.0;
    for (auto s : seeds) {
      const auto demo = demos::rollout_demonstration(spec, elite.params, s, cfg.qd.horizon);
      ret += demo.episode_return / episodes;
      measures.push_back(demo.episodic_measure);
    }
    fresh.insert({elite.params, ret, env::episodic_measure(measures), ret});
  }
  std::printf("re-evaluated: ");
  print_metrics(fresh.metrics());
  return 0;
}

int cmd_heatmap(const Common& common, const std::string& format, const std::string& out) {
  Common c = common;
  const fs::path dir = common.out_dir;
  if (c.config_path.empty() && fs::exists(dir / "config.txt")) c.config_path = (dir / "config.txt").string();
  const HarnessConfig cfg = resolve(c);
  const auto archive = qd::GridArchive::load_csv(dir / "archive.csv", cfg.qd.grid);
  const fs::path target = out.empty() ? dir / ("heatmap." + format) : fs::path(out);
  std::ofstream os(target, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + target.string());
  if (format == "pgm") {
    archive.write_heatmap_pgm(os);
  } else {
    archive.write_heatmap_csv(os);
  }
  std::cout << "wrote " << target.string() << '\n';
  return 0;
}

int cmd_gen_demos(const Common& common, const std::string& out) {
  const HarnessConfig cfg = resolve(common);
  const fs::path dir = fs::path(common.out_dir) / "expert";
  auto expert_cfg = cfg;
  expert_cfg.qd.true_reward = true;
  expert_cfg.qd.variant.bonus_enabled = false;
  const auto result = run_logged(expert_cfg, nullptr, dir);
  if (result.error) throw std::runtime_error("expert run aborted at " + *result.error);
  std::printf("expert archive: ");
  print_metrics(result.archive.metrics());
  const auto sources = demos::select_demonstrators(result.archive, cfg.pool_size, cfg.num_demos);
  const auto set = demos::record_demonstrations(result.archive, sources, result.policy_spec,
                                                result.eval_seeds, cfg.qd.horizon);
  demos::save_demos(out, set);
  for (std::size_t i = 0; i < set.demos.size(); ++i) {
    const auto& d = set.demos[i];
    std::printf("demo %zu  cell (%d,%d)  measure (%.3f, %.3f)  return %.4f\n", i, set.sources[i].row,
                set.sources[i].col, d.episodic_measure[0], d.episodic_measure[1], d.episode_return);
  }
  demos::print_demo_stats(std::cout, set);
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quality-diversity imitation learning on the PointWalker environment"};
  app.require_subcommand(1);

  Common common;
  std::string demos_override;
  auto* run = app.add_subcommand("run", "run the outer loop and save the archive");
  add_common(run, common);
  run->add_option("--demos", demos_override, "demonstration CSV (overrides the config)");

  int episodes = 4;
  auto* eval = app.add_subcommand("eval", "reload a saved archive and re-evaluate its elites");
  add_common(eval, common);
  eval->add_option("--episodes", episodes, "episodes per elite")->check(CLI::PositiveNumber);

  std::string format = "csv";
  std::string heat_out;
  auto* heat = app.add_subcommand("export-heatmap", "write the archive fitness grid");
  add_common(heat, common);
  heat->add_option("--format", format)->check(CLI::IsMember({"csv", "pgm"}));
  heat->add_option("--out", heat_out, "output file (default <out-dir>/heatmap.<format>)");

  std::string demos_out = "demos.csv";
  auto* gen = app.add_subcommand("gen-demos", "build an expert archive and record demonstrations");
  add_common(gen, common);
  gen->add_option("--out", demos_out, "demonstration CSV to write");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(common, demos_override);
    if (*eval) return cmd_eval(common, episodes);
    if (*heat) return cmd_heatmap(common, format, heat_out);
    if (*gen) return cmd_gen_demos(common, demos_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
