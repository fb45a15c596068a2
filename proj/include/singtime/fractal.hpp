#pragma once

// Fractal measures and dimensions of one-dimensional sets.
//
// Sets are finite unions of closed intervals (points allowed). Genuine
// fractals enter as finite-level prefixes, e.g. cantor_prefix(k).
//
// Conventions:
//   * balls of radius eta are closed intervals of length 2*eta;
//   * Hausdorff pre-measure covers use diam < eta, relaxed to
//     diam <= eta * kStrictShrink so the optimum is attained in floating point;
//   * 0^0 = 1, so the s = 0 pre-measure counts cover elements.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "singtime/errors.hpp"

namespace singtime::fractal {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

// "diam < eta" is evaluated as "diam <= eta * kStrictShrink".
inline constexpr double kStrictShrink = 1.0 - 0x1p-40;

namespace detail {

// Absolute rounding allowance for a coordinate of magnitude |x|.
inline double coord_slack(double x) {
  return 16.0 * std::numeric_limits<double>::epsilon() * std::abs(x);
}

// Relative slack granted to a ball of diameter 2*eta when deciding coverage.
inline constexpr double kBallSlack = 0x1p-44;
// Relative slack granted to a pre-measure piece; strictly larger than kBallSlack
// so that every ball cover of diameter eta*kStrictShrink is a feasible piece cover.
inline constexpr double kPieceSlack = 0x1p-42;

} // namespace detail

class FractalSet {
public:
  FractalSet() = default;

  // Validates sortedness, disjointness, finiteness and window containment.
  FractalSet(std::vector<Interval> intervals, Interval window)
      : intervals_(std::move(intervals)), window_(window) {
    if (!std::isfinite(window_.lo) || !std::isfinite(window_.hi) || window_.lo > window_.hi)
      throw ParameterError("FractalSet: window must be finite with t_min <= t_max");
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      const auto& iv = intervals_[i];
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw ParameterError("FractalSet: non-finite endpoint");
      if (iv.lo > iv.hi) throw ParameterError("FractalSet: interval with lo > hi");
      if (iv.lo < window_.lo || iv.hi > window_.hi)
        throw ParameterError("FractalSet: interval outside window");
      if (i > 0 && !(intervals_[i - 1].hi < iv.lo))
        throw ParameterError("FractalSet: intervals must be sorted and pairwise disjoint");
    }
  }

  // Sorts and merges overlapping/touching input; window defaults to the hull.
  static FractalSet from_unsorted(std::vector<Interval> raw,
                                  std::optional<Interval> window = std::nullopt) {
    for (auto& iv : raw)
      if (iv.lo > iv.hi) std::swap(iv.lo, iv.hi);
    std::sort(raw.begin(), raw.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
    std::vector<Interval> merged;
    for (const auto& iv : raw) {
      if (!merged.empty() && iv.lo <= merged.back().hi)
        merged.back().hi = std::max(merged.back().hi, iv.hi);
      else
        merged.push_back(iv);
    }
    Interval w{0.0, 0.0};
    if (window) {
      w = *window;
    } else if (!merged.empty()) {
      w = {merged.front().lo, merged.back().hi};
    }
    return FractalSet(std::move(merged), w);
  }

  const std::vector<Interval>& intervals() const { return intervals_; }
  Interval window() const { return window_; }
  bool empty() const { return intervals_.empty(); }
  std::size_t size() const { return intervals_.size(); }

  double lebesgue_measure() const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += iv.length();
    return m;
  }

  // Index of the component containing t, if any.
  std::optional<std::size_t> component_of(double t) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const Interval& iv) { return v < iv.lo; });
    if (it == intervals_.begin()) return std::nullopt;
    --it;
    if (t <= it->hi) return static_cast<std::size_t>(it - intervals_.begin());
    return std::nullopt;
  }

  bool contains(double t) const { return component_of(t).has_value(); }

  bool subset_of(const FractalSet& other) const {
    for (const auto& iv : intervals_) {
      auto c = other.component_of(iv.lo);
      if (!c || other.intervals_[*c].hi < iv.hi) return false;
    }
    return true;
  }

private:
  std::vector<Interval> intervals_;
  Interval window_{0.0, 0.0};
};

// Level-k prefix of the middle-thirds Cantor set inside `window`:
// the 2^k closed intervals of length |window| * 3^-k.
inline FractalSet cantor_prefix(int level, Interval window = {0.0, 1.0}) {
  if (level < 0 || level > 30) throw ParameterError("cantor_prefix: level must be in [0, 30]");
  std::int64_t pow3 = 1;
  for (int i = 0; i < level; ++i) pow3 *= 3;
  const double span = window.hi - window.lo;
  std::vector<Interval> out;
  out.reserve(std::size_t{1} << level);
  for (std::int64_t code = 0; code < (std::int64_t{1} << level); ++code) {
    // binary digits of `code` select ternary digit 0 or 2
    std::int64_t m = 0;
    for (int bit = level - 1; bit >= 0; --bit) m = 3 * m + (((code >> bit) & 1) ? 2 : 0);
    const double lo = window.lo + span * (static_cast<double>(m) / static_cast<double>(pow3));
    const double hi = window.lo + span * (static_cast<double>(m + 1) / static_cast<double>(pow3));
    out.push_back({lo, hi});
  }
  return FractalSet(std::move(out), window);
}

// ---------------------------------------------------------------------------
// Minimal ball covers

struct BallCover {
  double eta = 0.0;
  std::size_t count = 0;
  std::vector<double> centers;  // empty when not requested
};

namespace detail {

// Greedy left-to-right sweep; optimal in 1-D. `emit(center)` sees every ball.
template <typename Emit>
std::size_t sweep_balls(const FractalSet& a, double eta, Emit&& emit) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ParameterError("ball_count: eta must be positive");
  const double diam = 2.0 * eta;
  std::size_t count = 0;
  bool have = false;
  double reach = 0.0;
  for (const auto& comp : a.intervals()) {
    const double tol = diam * kBallSlack + coord_slack(comp.hi);
    if (have && comp.hi <= reach + tol) continue;
    const double start = (have && comp.lo <= reach + tol) ? reach : comp.lo;
    const double len = comp.hi - start;
    double m = std::ceil((len - tol) / diam);
    if (m < 1.0) m = 1.0;
    const auto balls = static_cast<std::size_t>(m);
    for (std::size_t i = 0; i < balls; ++i) emit(start + eta + diam * static_cast<double>(i));
    count += balls;
    reach = start + diam * m;
    have = true;
  }
  return count;
}

} // namespace detail

inline std::size_t ball_count(const FractalSet& a, double eta) {
  return detail::sweep_balls(a, eta, [](double) {});
}

inline BallCover ball_cover(const FractalSet& a, double eta) {
  BallCover out;
  out.eta = eta;
  out.count = detail::sweep_balls(a, eta, [&](double c) { out.centers.push_back(c); });
  return out;
}

// Finite-scale sequence (eta, eta^s * N(A, eta)) whose limsup is the upper
// s-dimensional Minkowski content. No extrapolation.
inline std::vector<std::pair<double, double>> minkowski_content(const FractalSet& a, double s,
                                                                std::span<const double> etas) {
  if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("minkowski_content: s must lie in [0,1]");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0)) throw ParameterError("minkowski_content: scales must be positive");
    if (i > 0 && !(etas[i] < etas[i - 1]))
      throw ParameterError("minkowski_content: scales must be strictly decreasing");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(etas.size());
  for (double eta : etas)
    out.emplace_back(eta, std::pow(eta, s) * static_cast<double>(ball_count(a, eta)));
  return out;
}

// ---------------------------------------------------------------------------
// Hausdorff pre-measure

struct CoverEstimate {
  double s = 0.0;
  double eta = 0.0;
  double value = 0.0;
  std::vector<Interval> cover;
};

namespace detail {

// Cheapest cover of a single interval of length `len` by pieces of length <= step.
// Concavity of L^s puts the optimum at floor(len/step) full pieces plus the
// remainder; a remainder below q*step*kPieceSlack may instead be spread over
// the q full pieces.
struct HullCover {
  double cost = 0.0;
  std::size_t pieces = 0;
  bool equal_split = false;  // q pieces of length len/q instead of full + remainder
};

inline HullCover hull_cover(double len, double s, double step, double anchor) {
  if (len <= 0.0) return {std::pow(0.0, s), 1, false};
  const double q = std::floor(len / step);
  const double rem = len - q * step;
  HullCover best{q * std::pow(step, s) + (rem > 0.0 ? std::pow(rem, s) : 0.0),
                 static_cast<std::size_t>(q) + (rem > 0.0 ? 1 : 0), false};
  if (q >= 1.0 && rem > 0.0 && rem <= q * step * kPieceSlack + coord_slack(anchor)) {
    const double split = q * std::pow(len / q, s);
    if (split <= best.cost) best = {split, static_cast<std::size_t>(q), true};
  }
  return best;
}

} // namespace detail

// Exact infimum of sum diam(I_j)^s over interval covers with diam < eta.
// The union of an optimal cover groups the components into runs of
// consecutive components whose hulls it covers, so a dynamic program over
// runs is exact. Ties: lower cost, then fewer pieces.
inline CoverEstimate hausdorff_premeasure(const FractalSet& a, double s, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ParameterError("hausdorff_premeasure: eta must be positive");
  if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("hausdorff_premeasure: s must lie in [0,1]");
  CoverEstimate est{s, eta, 0.0, {}};
  if (a.empty()) return est;

  const auto& comps = a.intervals();
  const std::size_t m = comps.size();
  const double step = eta * kStrictShrink;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // best[j]: optimal cost for components [0, j); from[j]: start of the last run.
  std::vector<double> best(m + 1, inf);
  std::vector<std::size_t> pieces(m + 1, 0), from(m + 1, 0);
  best[0] = 0.0;
  for (std::size_t j = 1; j <= m; ++j) {
    for (std::size_t i = j; i-- > 0;) {
      const auto hc = detail::hull_cover(comps[j - 1].hi - comps[i].lo, s, step, comps[j - 1].hi);
      const double c = best[i] + hc.cost;
      const std::size_t np = pieces[i] + hc.pieces;
      if (c < best[j] || (c == best[j] && np < pieces[j])) {
        best[j] = c;
        pieces[j] = np;
        from[j] = i;
      }
    }
  }
  est.value = best[m];

  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t j = m; j > 0; j = from[j]) runs.emplace_back(from[j], j);
  std::reverse(runs.begin(), runs.end());
  for (const auto& [i, j] : runs) {
    const double lo = comps[i].lo, hi = comps[j - 1].hi;
    const auto hc = detail::hull_cover(hi - lo, s, step, hi);
    if (hc.equal_split) {
      const double len = (hi - lo) / static_cast<double>(hc.pieces);
      for (std::size_t k = 0; k < hc.pieces; ++k)
        est.cover.push_back({lo + len * static_cast<double>(k), k + 1 == hc.pieces ? hi : lo + len * static_cast<double>(k + 1)});
      continue;
    }
    double x = lo;
    for (std::size_t k = 0; k < hc.pieces; ++k) {
      const double y = k + 1 == hc.pieces ? hi : std::min(hi, x + step);
      est.cover.push_back({x, y});
      x = y;
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Dimension estimation

struct DimensionFit {
  std::vector<double> scales;
  std::vector<double> log_counts;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double dimension = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y ~ slope*x + intercept. A zero-variance response is a
// perfect fit (r^2 = 1).
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  if (syy <= 0.0) {
    f.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (f.slope * x[i] + f.intercept);
      ss_res += r * r;
    }
    f.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return f;
}

// Box-counting dimension: regression of log N(A, eta) on log(1/eta).
inline DimensionFit dimension_fit(const FractalSet& a, std::span<const double> etas) {
  if (etas.size() < 3) throw ParameterError("dimension_fit: need at least 3 scales");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0)) throw ParameterError("dimension_fit: scales must be positive");
    if (i > 0 && !(etas[i] < etas[i - 1]))
      throw ParameterError("dimension_fit: scales must be strictly decreasing");
  }
  if (a.empty()) throw ParameterError("dimension_fit: the empty set has no box dimension");
  DimensionFit fit;
  fit.scales.assign(etas.begin(), etas.end());
  std::vector<double> x;
  for (double eta : etas) {
    x.push_back(-std::log(eta));
    fit.log_counts.push_back(std::log(static_cast<double>(ball_count(a, eta))));
  }
  const auto lf = least_squares(x, fit.log_counts);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.dimension = std::clamp(lf.slope, 0.0, 1.0);
  return fit;
}

// Scale ladders used by the CLI.
inline std::vector<double> dyadic_scales(double span, int first, int last) {
  std::vector<double> out;
  for (int j = first; j <= last; ++j) out.push_back(std::ldexp(span, -j));
  return out;
}

// span * 3^-k / 2 for k = first..last: one ball per level-k Cantor interval.
inline std::vector<double> triadic_scales(double span, int first, int last) {
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(span * std::pow(3.0, -k) / 2.0);
  return out;
}

// ---------------------------------------------------------------------------
// Vitali covering

// Greedy 1-D Vitali selection for equal radii: selected centers are pairwise
// >= 2r apart and the 5r balls around them cover every input center. Returns
// original indices in increasing order of center position.
inline std::vector<std::size_t> vitali_subcover(std::span<const double> centers, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ParameterError("vitali_subcover: radius must be positive");
  std::vector<std::size_t> order(centers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
  std::vector<std::size_t> chosen;
  for (std::size_t idx : order) {
    if (chosen.empty() || centers[idx] - centers[chosen.back()] >= 2.0 * radius) chosen.push_back(idx);
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// I/O

// Plain text: one real per line (a point) or "lo hi" (an interval); '#' lines
// and blank lines are ignored. Overlapping input is merged.
inline FractalSet read_point_set(std::istream& in, std::optional<Interval> window = std::nullopt) {
  std::vector<Interval> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double lo = 0.0, hi = 0.0;
    if (!(ls >> lo)) throw ConfigError("point set: cannot parse line " + std::to_string(lineno));
    if (!(ls >> hi)) hi = lo;
    std::string rest;
    if (ls >> rest) throw ConfigError("point set: trailing text on line " + std::to_string(lineno));
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw ConfigError("point set: non-finite value on line " + std::to_string(lineno));
    raw.push_back({lo, hi});
  }
  return FractalSet::from_unsorted(std::move(raw), window);
}

inline void write_point_set(std::ostream& out, const FractalSet& a) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& iv : a.intervals()) {
    line.str("");
    if (iv.lo == iv.hi)
      line << iv.lo;
    else
      line << iv.lo << ' ' << iv.hi;
    out << line.str() << '\n';
  }
}

inline nlohmann::ordered_json to_json(const CoverEstimate& e) {
  nlohmann::ordered_json j;
  j["s"] = e.s;
  j["eta"] = e.eta;
  j["value"] = e.value;
  auto cover = nlohmann::ordered_json::array();
  for (const auto& iv : e.cover) cover.push_back({iv.lo, iv.hi});
  j["cover"] = std::move(cover);
  return j;
}

inline nlohmann::ordered_json to_json(const DimensionFit& f) {
  nlohmann::ordered_json j;
  j["scales"] = f.scales;
  j["log_counts"] = f.log_counts;
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["r_squared"] = f.r_squared;
  j["dimension"] = f.dimension;
  return j;
}

} // namespace singtime::fractal
