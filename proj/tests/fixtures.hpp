#pragma once

// Independent oracles and synthetic fixtures shared by the unit tests and the
// acceptance runner. Nothing here calls the routine it is meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "singtime/experiments.hpp"
#include "singtime/fractal.hpp"

namespace fixtures {

using singtime::fractal::FractalSet;
using singtime::fractal::Interval;

// Random union of at most `max_components` closed intervals in [0,1]; about a
// third of the components are single points.
inline FractalSet random_set(std::mt19937_64& gen, std::size_t max_components) {
  std::uniform_int_distribution<std::size_t> count(1, max_components);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t m = count(gen);
  std::vector<double> cuts(2 * m);
  for (auto& c : cuts) c = unit(gen);
  std::sort(cuts.begin(), cuts.end());
  std::vector<Interval> iv;
  for (std::size_t i = 0; i < m; ++i) {
    Interval x{cuts[2 * i], cuts[2 * i + 1]};
    if (unit(gen) < 1.0 / 3.0) x.hi = x.lo;
    if (!iv.empty() && !(iv.back().hi < x.lo)) continue;
    iv.push_back(x);
  }
  return FractalSet(std::move(iv), {0.0, 1.0});
}

// Cost of covering one run of hull length `len` by pieces of length <= step,
// allowing the remainder to be spread over the full pieces when it is within
// the documented piece slack. Enumerates piece counts r and, for each r, the
// two extreme-point layouts of the concave cost.
inline double run_cost(double len, double s, double step, double anchor) {
  if (len <= 0.0) return std::pow(0.0, s);
  const double slack = 0x1p-42;
  double best = std::numeric_limits<double>::infinity();
  const auto r_min = static_cast<long>(std::ceil(len / (step * (1.0 + slack)))) - 1;
  const auto r_max = static_cast<long>(std::ceil(len / step)) + 1;
  for (long r = std::max(1L, r_min); r <= r_max; ++r) {
    const double rd = static_cast<double>(r);
    // layout 1: r - 1 full pieces and one remainder
    const double rem = len - (rd - 1.0) * step;
    if (rem > 0.0 && rem <= step) best = std::min(best, (rd - 1.0) * std::pow(step, s) + std::pow(rem, s));
    if (rem == 0.0 && r > 1) best = std::min(best, (rd - 1.0) * std::pow(step, s));
    // layout 2: r equal pieces, each within the slack
    const double full = std::floor(len / step);
    const double extra = len - full * step;
    if (rd == full && extra > 0.0 &&
        extra <= full * step * slack + 16.0 * std::numeric_limits<double>::epsilon() * std::abs(anchor))
      best = std::min(best, rd * std::pow(len / rd, s));
  }
  return best;
}

// Exhaustive pre-measure: every way to split the components into runs of
// consecutive components (2^(m-1) splits), each run covered as one hull.
inline double premeasure_exhaustive(const FractalSet& a, double s, double eta) {
  const auto& c = a.intervals();
  if (c.empty()) return 0.0;
  const double step = eta * (1.0 - 0x1p-40);
  const std::size_t m = c.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (m - 1)); ++mask) {
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const bool boundary = i + 1 == m || ((mask >> i) & 1U);
      if (!boundary) continue;
      total += run_cost(c[i].hi - c[start].lo, s, step, c[i].hi);
      start = i + 1;
    }
    best = std::min(best, total);
  }
  return best;
}

// Cost of a random feasible cover: random runs, each cut into random pieces of
// length <= step.
inline double random_cover_cost(const FractalSet& a, double s, double eta, std::mt19937_64& gen) {
  const auto& c = a.intervals();
  const double step = eta * (1.0 - 0x1p-40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double total = 0.0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const bool boundary = i + 1 == c.size() || unit(gen) < 0.5 || c[i + 1].hi - c[start].lo > step * 3;
    if (!boundary) continue;
    double x = c[start].lo;
    const double hi = c[i].hi;
    if (hi == x) total += std::pow(0.0, s);
    while (x < hi) {
      const double len = std::min(hi - x, step * (0.2 + 0.8 * unit(gen)));
      total += std::pow(len, s);
      x += len;
    }
    start = i + 1;
  }
  return total;
}

// Ensemble whose exceedance set is the level-8 Cantor prefix, sampled on a grid
// of spacing 3^-8/2 over [0,1]. All R = 10 trajectories exceed K on the Cantor
// intervals; 4 of them also exceed on scattered points E1 and 2 on points E2,
// so the flagged set grows as epsilon drops below 0.4 and 0.2.
struct CantorEnsemble {
  std::vector<singtime::experiments::NormSeries> trajectories;
  double threshold_K = 1.0;
  int level = 8;
  std::vector<double> scales;  // 3^-k / 2, k = 1..level
};

inline CantorEnsemble cantor_ensemble(std::uint64_t seed) {
  CantorEnsemble e;
  const int level = e.level;
  const long third = static_cast<long>(std::lround(std::pow(3.0, level)));
  const long points = 2 * third + 1;
  const double h = 1.0 / static_cast<double>(2 * third);
  // Cantor membership of grid point i: i*h in a level-8 interval.
  std::vector<bool> in_cantor(static_cast<std::size_t>(points), false);
  for (long code = 0; code < (1L << level); ++code) {
    long left = 0;  // left end in units of 3^-level
    long width = third;
    for (int b = level - 1; b >= 0; --b) {
      width /= 3;
      if ((code >> b) & 1L) left += 2 * width;
    }
    // interval [left, left + 1] in units of 3^-level = grid indices 2*left .. 2*left + 2
    for (long i = 2 * left; i <= 2 * left + 2; ++i) in_cantor[static_cast<std::size_t>(i)] = true;
  }
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<long> pick(0, points - 1);
  std::vector<int> extra(static_cast<std::size_t>(points), 0);  // 0: none, 1: E1, 2: E2
  for (int k = 0; k < 40; ++k) {
    const long i = pick(gen);
    if (!in_cantor[static_cast<std::size_t>(i)]) extra[static_cast<std::size_t>(i)] = k % 2 == 0 ? 1 : 2;
  }
  const int R = 10;
  for (int r = 0; r < R; ++r) {
    singtime::experiments::NormSeries s;
    s.channel = "L2";
    for (long i = 0; i < points; ++i) {
      s.t.push_back(static_cast<double>(i) * h);
      const auto idx = static_cast<std::size_t>(i);
      bool exceed = in_cantor[idx];
      if (extra[idx] == 1 && r < 4) exceed = true;
      if (extra[idx] == 2 && r < 2) exceed = true;
      s.value.push_back(exceed ? 2.0 * e.threshold_K : 0.5 * e.threshold_K);
    }
    e.trajectories.push_back(std::move(s));
  }
  for (int k = 1; k <= level; ++k) e.scales.push_back(std::pow(3.0, -k) / 2.0);
  return e;
}

// Samples with P(tau <= T) = T^rate on [0,1] by inverse transform.
inline std::vector<double> power_law_samples(std::size_t n, double rate, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = std::pow(unit(gen), 1.0 / rate);
  return out;
}

} // namespace fixtures
