#pragma once

// Independent reference computations shared by unit and acceptance tests.
// Deliberately naive: loops and straight-line formulas, no library calls.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

struct WalkerStep {
  double x, phi1, phi2;
  int c1, c2;
  double reward;
  double d1, d2;
};

// Straight transcription of the walker update equations.
inline WalkerStep walker_step(double x, double phi1, double phi2, double a1, double a2) {
  const double two_pi = 2.0 * std::numbers::pi;
  a1 = std::max(-1.0, std::min(1.0, a1));
  a2 = std::max(-1.0, std::min(1.0, a2));
  const int c1 = std::sin(phi1) < 0.0 ? 1 : 0;
  const int c2 = std::sin(phi2) < 0.0 ? 1 : 0;
  const double v = 0.5 * (c1 * std::fabs(std::cos(phi1)) + c2 * std::fabs(std::cos(phi2)));
  WalkerStep s;
  s.x = x + v;
  s.phi1 = std::fmod(phi1 + 0.05 + 0.55 * (a1 + 1.0) / 2.0, two_pi);
  s.phi2 = std::fmod(phi2 + 0.05 + 0.55 * (a2 + 1.0) / 2.0, two_pi);
  s.c1 = std::sin(s.phi1) < 0.0 ? 1 : 0;
  s.c2 = std::sin(s.phi2) < 0.0 ? 1 : 0;
  s.reward = v - 0.05 * (a1 * a1 + a2 * a2);
  s.d1 = c1;
  s.d2 = c2;
  return s;
}

// GAE straight from the definition: A_t = sum_l (gamma lambda)^l delta_{t+l},
// truncated at the first done and at the end of the buffer (bootstrapped
// with the last value). Layout [t * n_envs + e].
inline std::vector<double> gae_quadratic(const std::vector<double>& rewards,
                                         const std::vector<double>& values,
                                         const std::vector<std::uint8_t>& dones,
                                         const std::vector<double>& last_values, int n_envs,
                                         double gamma, double lambda) {
  const int length = static_cast<int>(rewards.size()) / n_envs;
  std::vector<double> adv(rewards.size(), 0.0);
  for (int e = 0; e < n_envs; ++e) {
    for (int t = 0; t < length; ++t) {
      double total = 0.0;
      double weight = 1.0;
      for (int u = t; u < length; ++u) {
        const int i = u * n_envs + e;
        const bool done = dones[i] != 0;
        double next_value = 0.0;
        if (!done) next_value = (u + 1 < length) ? values[(u + 1) * n_envs + e] : last_values[e];
        const double delta = rewards[i] + gamma * next_value - values[i];
        total += weight * delta;
        if (done) break;
        weight *= gamma * lambda;
      }
      adv[t * n_envs + e] = total;
    }
  }
  return adv;
}

struct Cell {
  int row, col;
  bool operator<(const Cell& o) const { return row != o.row ? row < o.row : col < o.col; }
};

inline int bin(double m, int g) {
  int b = static_cast<int>(std::floor(m * g));
  return b >= g ? g - 1 : b;
}

// Keep-per-cell-max replay.
inline std::map<Cell, double> keep_max(const std::vector<std::pair<std::array<double, 2>, double>>& inserts,
                                       int g) {
  std::map<Cell, double> best;
  for (const auto& [m, f] : inserts) {
    const Cell c{bin(m[0], g), bin(m[1], g)};
    auto it = best.find(c);
    if (it == best.end() || f > it->second) best[c] = f;
  }
  return best;
}

// Central differences of a scalar function.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, std::span<const std::size_t> coords,
                                        double h = 1e-5) {
  std::vector<double> g;
  for (std::size_t i : coords) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g.push_back((up - down) / (2.0 * h));
  }
  return g;
}

// Fourth-order central stencil. Truncation is O(h^4), so a larger h keeps
// rounding noise well below 1e-4 relative even on tiny components.
inline std::vector<double> central_diff4(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x, std::span<const std::size_t> coords,
                                         double h = 1e-3) {
  std::vector<double> g;
  for (std::size_t i : coords) {
    const double keep = x[i];
    auto at = [&](double offset) {
      x[i] = keep + offset;
      return f(x);
    };
    const double d = 8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h));
    x[i] = keep;
    g.push_back(d / (12.0 * h));
  }
  return g;
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace oracle
