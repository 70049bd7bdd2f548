#include "wqdil/demos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wqdil/vppo.hpp"

namespace wqdil::demos {

namespace {

constexpr const char* kStateColumns[] = {"x", "phi1", "phi2", "c1", "c2"};
constexpr int kStateFields = 5;

double distance(const Measure& a, const Measure& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("demos: line " + std::to_string(line) + ": " + what) {}
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "bad number '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError(line, "bad number '" + s + "'");
  return v;
}

long parse_int(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "bad integer '" + s + "'");
  }
  if (used != s.size()) throw ParseError(line, "bad integer '" + s + "'");
  return v;
}

int count_prefixed(const std::vector<std::string>& cols, std::size_t from, char prefix,
                   std::size_t& next) {
  int n = 0;
  next = from;
  while (next < cols.size() && cols[next] == prefix + std::to_string(n + 1)) {
    ++n;
    ++next;
  }
  return n;
}

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void finish(Demonstration& demo) {
  std::vector<Measure> deltas;
  demo.episode_return = 0.0;
  for (const auto& s : demo.steps) {
    demo.episode_return += env::true_reward(s.state, s.action);
    deltas.push_back(s.delta);
  }
  demo.episodic_measure = env::episodic_measure(deltas);
}

}  // namespace

qd::RunResult generate_expert_archive(qd::QdConfig config) {
  config.true_reward = true;
  config.variant.bonus_enabled = false;
  return qd::run(config, nullptr);
}

qd::GridArchive random_policy_archive(const qd::QdConfig& config, int draws, std::uint64_t seed) {
  Random rng(seed);
  const env::PointWalkerEnv prototype(config.horizon);
  vppo::Vppo runner(config.vppo, prototype, rng.next_u64());
  std::vector<std::uint64_t> eval_seeds(config.eval_episodes);
  for (auto& s : eval_seeds) s = rng.next_u64();
  const auto& spec = runner.policy_spec();
  const vppo::TrueReward reward;
  explore::VisitCountArchive unused(config.explorer_resolution);

  qd::GridArchive archive(config.grid);
  for (int i = 0; i < draws; ++i) {
    nn::ParamVector params = nn::init_params(spec.mean, rng);
    params.resize(spec.param_count(), config.vppo.initial_log_std);
    const auto ev = runner.evaluate(params, eval_seeds, reward, unused, false);
    archive.insert({std::move(params), ev.true_return, ev.measure, ev.true_return});
  }
  return archive;
}

std::vector<qd::CellIndex> select_demonstrators(const qd::GridArchive& archive, int pool_size,
                                                int k) {
  if (k < 1 || pool_size < k) throw std::invalid_argument("select_demonstrators: need 1 <= k <= pool_size");
  if (archive.occupied() < k) {
    throw std::invalid_argument("select_demonstrators: archive holds " +
                                std::to_string(archive.occupied()) + " elites, need " +
                                std::to_string(k));
  }
  auto cells = archive.occupied_cells();
  std::stable_sort(cells.begin(), cells.end(), [&](qd::CellIndex a, qd::CellIndex b) {
    return archive.at(a)->fitness > archive.at(b)->fitness;
  });
  cells.resize(std::min<std::size_t>(cells.size(), pool_size));

  std::vector<qd::CellIndex> chosen{cells.front()};
  std::vector<double> min_dist(cells.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(cells.size(), false);
  taken[0] = true;
  while (static_cast<int>(chosen.size()) < k) {
    const Measure& last = archive.at(chosen.back())->measure;
    std::size_t pick = cells.size();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], distance(archive.at(cells[i])->measure, last));
      // Pool order is fitness order, so strict > keeps the fitter candidate on ties.
      if (pick == cells.size() || min_dist[i] > min_dist[pick]) pick = i;
    }
    taken[pick] = true;
    chosen.push_back(cells[pick]);
  }

  // Greedy alone can land well short of the best spread, mostly because the
  // seed is fixed to the fittest elite. Swap picks for pool members while
  // that strictly raises the minimum pairwise distance.
  auto spread = [&](const std::vector<qd::CellIndex>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t j = i + 1; j < set.size(); ++j)
        best = std::min(best, distance(archive.at(set[i])->measure, archive.at(set[j])->measure));
    return best;
  };
  double current = spread(chosen);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (taken[i]) continue;
        auto trial = chosen;
        trial[slot] = cells[i];
        const double d = spread(trial);
        if (d > current) {
          const auto old = std::find(cells.begin(), cells.end(), chosen[slot]) - cells.begin();
          taken[old] = false;
          taken[i] = true;
          chosen = std::move(trial);
          current = d;
          improved = true;
        }
      }
    }
  }
  return chosen;
}

Demonstration rollout_demonstration(const nn::PolicySpec& spec, std::span<const double> params,
                                    std::uint64_t seed, int horizon) {
  const env::PointWalker walker(horizon);
  env::EnvState state = walker.reset(seed);
  Demonstration demo;
  nn::Matrix obs(1, env::kObservationDim);
  while (!walker.terminal(state)) {
    walker.observe(state, std::span<double>(obs.data(), env::kObservationDim));
    const nn::Matrix mean = nn::mean_actions(spec, params, obs);
    const env::EnvAction action(mean(0, 0), mean(0, 1));
    auto out = walker.step(state, action);
    demo.steps.push_back({state, action, out.delta});
    state = out.next_state;
  }
  finish(demo);
  return demo;
}

DemoSet record_demonstrations(const qd::GridArchive& archive, std::span<const qd::CellIndex> sources,
                              const nn::PolicySpec& spec, std::span<const std::uint64_t> candidate_seeds,
                              int horizon) {
  if (candidate_seeds.empty()) throw std::invalid_argument("record_demonstrations: no seeds");
  DemoSet set;
  for (const auto& cell : sources) {
    const auto& elite = archive.at(cell);
    if (!elite) throw std::invalid_argument("record_demonstrations: empty source cell");
    if (elite->params.size() != spec.param_count()) {
      throw std::invalid_argument("record_demonstrations: elite parameters do not fit the policy");
    }
    Demonstration best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (auto seed : candidate_seeds) {
      auto demo = rollout_demonstration(spec, elite->params, seed, horizon);
      const double d = distance(demo.episodic_measure, elite->measure);
      if (d < best_dist) {
        best_dist = d;
        best = std::move(demo);
      }
    }
    set.demos.push_back(std::move(best));
    set.sources.push_back(cell);
  }
  return set;
}

void save_demos(std::ostream& os, const DemoSet& set) {
  os << "demo_id,t";
  for (const char* c : kStateColumns) os << ',' << c;
  for (int j = 1; j <= env::kActionDim; ++j) os << ",a" << j;
  for (int j = 1; j <= kMeasureDim; ++j) os << ",d" << j;
  os << '\n';
  for (std::size_t id = 0; id < set.demos.size(); ++id) {
    for (const auto& s : set.demos[id].steps) {
      os << id << ',' << s.state.t << ',';
      put(os, s.state.x);
      os << ',';
      put(os, s.state.phi1);
      os << ',';
      put(os, s.state.phi2);
      os << ',' << s.state.c1 << ',' << s.state.c2 << ',';
      put(os, s.action.a1());
      os << ',';
      put(os, s.action.a2());
      os << ',';
      put(os, s.delta[0]);
      os << ',';
      put(os, s.delta[1]);
      os << '\n';
    }
  }
}

void save_demos(const std::filesystem::path& path, const DemoSet& set) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_demos: cannot open " + path.string());
  save_demos(os, set);
  if (!os) throw std::runtime_error("save_demos: write failed for " + path.string());
}

DemoSet load_demos(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError(lineno, "missing header");
  const auto header = split_csv(line);
  if (header.size() < 2 + kStateFields || header[0] != "demo_id" || header[1] != "t") {
    throw ParseError(lineno, "header must start with demo_id,t,x,phi1,phi2,c1,c2");
  }
  for (int i = 0; i < kStateFields; ++i) {
    if (header[2 + i] != kStateColumns[i]) {
      throw ParseError(lineno, "unexpected state column '" + header[2 + i] + "'");
    }
  }
  std::size_t pos = 0;
  const int action_dims = count_prefixed(header, 2 + kStateFields, 'a', pos);
  const int delta_dims = count_prefixed(header, pos, 'd', pos);
  if (pos != header.size()) throw ParseError(lineno, "unexpected column '" + header[pos] + "'");
  if (action_dims != env::kActionDim || delta_dims != kMeasureDim) {
    throw ParseError(lineno, "header declares " + std::to_string(action_dims) + " action and " +
                                 std::to_string(delta_dims) + " measure dims; environment has " +
                                 std::to_string(env::kActionDim) + " and " +
                                 std::to_string(kMeasureDim));
  }
  const std::size_t width = header.size();

  DemoSet set;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) throw ParseError(lineno, "empty line");
    const auto f = split_csv(line);
    if (f.size() != width) {
      throw ParseError(lineno, "expected " + std::to_string(width) + " fields, got " +
                                   std::to_string(f.size()));
    }
    const long id = parse_int(f[0], lineno);
    const long t = parse_int(f[1], lineno);
    if (id == static_cast<long>(set.demos.size())) {
      set.demos.emplace_back();
    } else if (id != static_cast<long>(set.demos.size()) - 1) {
      throw ParseError(lineno, "demo ids must be consecutive from 0");
    }
    auto& demo = set.demos.back();
    if (t != static_cast<long>(demo.steps.size())) {
      throw ParseError(lineno, "expected t=" + std::to_string(demo.steps.size()));
    }
    DemoStep step;
    step.state.t = static_cast<int>(t);
    step.state.x = parse_double(f[2], lineno);
    step.state.phi1 = parse_double(f[3], lineno);
    step.state.phi2 = parse_double(f[4], lineno);
    step.state.c1 = static_cast<int>(parse_int(f[5], lineno));
    step.state.c2 = static_cast<int>(parse_int(f[6], lineno));
    const double a1 = parse_double(f[7], lineno);
    const double a2 = parse_double(f[8], lineno);
    if (std::abs(a1) > 1.0 || std::abs(a2) > 1.0) throw ParseError(lineno, "action outside [-1, 1]");
    step.action = env::EnvAction(a1, a2);
    step.delta = {parse_double(f[9], lineno), parse_double(f[10], lineno)};
    if (step.state.c1 != env::contact(step.state.phi1) ||
        step.state.c2 != env::contact(step.state.phi2)) {
      throw ParseError(lineno, "contact flags disagree with leg phases");
    }
    if (step.delta != env::single_step_measure(step.state)) {
      throw ParseError(lineno, "measure proxy disagrees with contact flags");
    }
    demo.steps.push_back(step);
  }
  for (auto& demo : set.demos) finish(demo);
  return set;
}

DemoSet load_demos(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_demos: cannot open " + path.string());
  return load_demos(is);
}

qd::ExpertData to_expert_data(const DemoSet& set, int horizon) {
  const env::PointWalker walker(horizon);
  std::size_t rows = 0;
  for (const auto& d : set.demos) rows += d.steps.size();
  qd::ExpertData data;
  data.observations.resize(static_cast<Eigen::Index>(rows), env::kObservationDim);
  data.actions.resize(static_cast<Eigen::Index>(rows), env::kActionDim);
  Eigen::Index r = 0;
  for (const auto& d : set.demos) {
    for (const auto& s : d.steps) {
      walker.observe(s.state, std::span<double>(data.observations.row(r).data(), env::kObservationDim));
      data.actions(r, 0) = s.action.a1();
      data.actions(r, 1) = s.action.a2();
      data.deltas.push_back(s.delta);
      ++r;
    }
  }
  return data;
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  SummaryStats s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / values.size());
  return s;
}

void print_demo_stats(std::ostream& os, const DemoSet& set) {
  std::vector<double> lengths, returns;
  for (const auto& d : set.demos) {
    lengths.push_back(static_cast<double>(d.steps.size()));
    returns.push_back(d.episode_return);
  }
  const auto l = summarize(lengths);
  const auto r = summarize(returns);
  const auto flags = os.flags();
  os << std::left << std::setw(10) << "" << std::right << std::setw(12) << "min" << std::setw(12)
     << "max" << std::setw(12) << "mean" << std::setw(12) << "std" << '\n';
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(10) << "length" << std::right << std::setw(12) << l.min
     << std::setw(12) << l.max << std::setw(12) << l.mean << std::setw(12) << l.stddev << '\n';
  os << std::left << std::setw(10) << "return" << std::right << std::setw(12) << r.min
     << std::setw(12) << r.max << std::setw(12) << r.mean << std::setw(12) << r.stddev << '\n';
  os.flags(flags);
}

}  // namespace wqdil::demos
