#pragma once

// Monte Carlo lifetime tails, the ensemble singular-time proxy, and the
// bridges from solver output to the fractal and criticality modules.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "singtime/config.hpp"
#include "singtime/criticality.hpp"
#include "singtime/errors.hpp"
#include "singtime/fractal.hpp"
#include "singtime/rng.hpp"
#include "singtime/spde.hpp"

namespace singtime::experiments {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A recorded norm trajectory; `channel` names the norm.
struct NormSeries {
  std::string channel;
  std::vector<double> t;
  std::vector<double> value;
};

inline NormSeries series_from(const spde::SimulationResult& r) {
  NormSeries s;
  s.channel = r.norm_channel;
  for (const auto& row : r.ledger) {
    s.t.push_back(row.t);
    s.value.push_back(row.norm);
  }
  return s;
}

// First time the norm reaches k, linearly interpolated between records
// (an infinite record is reached at its own time); +inf if never.
inline double detect_lifetime(const NormSeries& s, double k, const std::string& channel) {
  if (s.channel != channel)
    throw ConfigError("trajectory carries norm channel '" + s.channel + "', not '" + channel + "'");
  if (s.t.size() != s.value.size()) throw ParameterError("detect_lifetime: time and value lengths differ");
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    if (!(s.value[i] >= k)) continue;
    if (i == 0 || std::isinf(s.value[i])) return s.t[i];
    const double v0 = s.value[i - 1], v1 = s.value[i];
    const double frac = (k - v0) / (v1 - v0);
    return s.t[i - 1] + frac * (s.t[i] - s.t[i - 1]);
  }
  return kInf;
}

// ---------------------------------------------------------------------------
// 0-D surrogate dx = x^2 dt + sigma x dW

struct ScalarSurrogate {
  double x0 = 1.0;
  double sigma = 0.0;
  double dt = 1e-3;
  double t_end = 2.0;
  double cap = 1e12;  // recording stops once |x| reaches this
};

inline constexpr const char* kScalarChannel = "abs";

// Exact-flow splitting: x <- x / (1 - x dt), then x <- x exp(sigma dW - sigma^2 dt / 2).
// When the drift flow explodes inside a step, the exact explosion time
// t + 1/x is recorded with value +inf.
inline NormSeries scalar_blowup_series(const ScalarSurrogate& p, std::uint64_t seed) {
  if (!(p.dt > 0.0) || !(p.t_end >= 0.0)) throw ParameterError("scalar surrogate: need dt > 0 and t_end >= 0");
  NormSeries s;
  s.channel = kScalarChannel;
  auto gen = rng::engine(seed, 0);
  rng::Normal normal;
  double x = p.x0;
  s.t.push_back(0.0);
  s.value.push_back(std::abs(x));
  const auto steps = static_cast<std::size_t>(std::llround(p.t_end / p.dt));
  const double sqdt = std::sqrt(p.dt);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t_prev = static_cast<double>(i - 1) * p.dt;
    if (std::abs(x) >= p.cap) break;
    if (x * p.dt >= 1.0) {
      s.t.push_back(t_prev + 1.0 / x);
      s.value.push_back(kInf);
      break;
    }
    x = x / (1.0 - x * p.dt);
    if (p.sigma != 0.0) x *= std::exp(p.sigma * sqdt * normal(gen) - 0.5 * p.sigma * p.sigma * p.dt);
    s.t.push_back(static_cast<double>(i) * p.dt);
    s.value.push_back(std::abs(x));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ensembles

using Realization = std::function<NormSeries(std::size_t index)>;

// Runs realizations 0..count-1 on `jobs` worker threads; results are stored by index.
inline std::vector<NormSeries> run_ensemble(const Realization& make, std::size_t count, unsigned jobs) {
  std::vector<NormSeries> out(count);
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = make(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// Realization r of the solver: config seed replaced by sub_seed(master, r).
inline Realization spde_realization(const spde::SimConfig& base, std::uint64_t master_seed) {
  return [base, master_seed](std::size_t r) {
    spde::SimConfig c = base;
    c.seed = rng::sub_seed(master_seed, r);
    return series_from(spde::simulate(c));
  };
}

inline Realization scalar_realization(const ScalarSurrogate& p, std::uint64_t master_seed) {
  return [p, master_seed](std::size_t r) { return scalar_blowup_series(p, rng::sub_seed(master_seed, r)); };
}

// ---------------------------------------------------------------------------
// Tail exponent fitting

struct ExponentFit {
  std::optional<double> slope;  // +inf for a step ecdf; empty when nothing crossed inside the window
  std::optional<std::pair<double, double>> ci;
  std::pair<double, double> window{0.0, 0.0};
  std::size_t points = 0;
};

namespace detail {

// Slope of log F_N(tau) against log tau over distinct sample values in `window`.
// F_N counts every sample (survivors included) in the denominator.
inline std::optional<double> tail_slope(std::vector<double> samples, std::pair<double, double> window,
                                        std::size_t* points = nullptr) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  std::vector<double> x, y;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = samples[i];
    if (!std::isfinite(v) || !(v > 0.0) || v < window.first || v > window.second) continue;
    if (i + 1 < samples.size() && samples[i + 1] == v) continue;  // last copy carries the full count
    x.push_back(std::log(v));
    y.push_back(std::log(static_cast<double>(i + 1) / n));
  }
  if (points) *points = x.size();
  if (x.empty()) return std::nullopt;
  if (x.size() == 1) return kInf;
  return fractal::least_squares(x, y).slope;
}

inline std::pair<double, double> default_window(std::span<const double> samples) {
  double lo = kInf;
  for (double v : samples)
    if (std::isfinite(v) && v > 0.0) lo = std::min(lo, v);
  if (!std::isfinite(lo)) return {0.0, 0.0};
  return {lo, 10.0 * lo};
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || v[lo] == v[hi]) return v[lo];
  if (std::isinf(v[hi])) return v[hi];
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace detail

// Small-T log-log slope of the ecdf with a percentile-bootstrap 95% interval.
// Default window: [tau_min, 10 tau_min] over positive finite samples.
inline ExponentFit fit_tail_exponent(std::span<const double> samples,
                                     std::optional<std::pair<double, double>> window,
                                     std::size_t bootstrap, std::uint64_t seed) {
  ExponentFit fit;
  fit.window = window ? *window : detail::default_window(samples);
  if (fit.window.first > fit.window.second) throw ParameterError("fit window must satisfy lo <= hi");
  std::vector<double> all(samples.begin(), samples.end());
  fit.slope = detail::tail_slope(all, fit.window, &fit.points);
  if (!fit.slope || bootstrap == 0 || all.empty()) return fit;
  auto gen = rng::engine(seed, 0);
  std::vector<double> slopes, resample(all.size());
  for (std::size_t b = 0; b < bootstrap; ++b) {
    for (auto& v : resample) v = all[static_cast<std::size_t>(gen() % all.size())];
    if (auto s = detail::tail_slope(resample, fit.window)) slopes.push_back(*s);
  }
  if (!slopes.empty()) fit.ci = std::make_pair(detail::percentile(slopes, 0.025), detail::percentile(slopes, 0.975));
  return fit;
}

// ---------------------------------------------------------------------------
// Monte Carlo tail

struct LifetimeEstimate {
  double threshold_k = 0.0;
  std::string channel;
  std::vector<double> samples;                     // tau per realization, +inf for survivors
  std::vector<std::pair<double, double>> ecdf;     // (T, fraction tau <= T)
  ExponentFit fit;
  std::vector<std::pair<double, double>> envelope; // (T, C0 T^{p Exc} (1 + N^p))
};

struct TailOptions {
  std::vector<double> thresholds;
  std::vector<double> horizons;
  std::optional<std::pair<double, double>> window;
  criticality::Rational exc{0};
  criticality::Rational p{4};
  double c0 = 1.0;
  double n_level = 0.0;
  std::uint64_t bootstrap_seed = 1;
  std::size_t bootstrap = 1000;
};

struct TailResult {
  std::vector<LifetimeEstimate> estimates;  // one per threshold, in input order
  bool ecdf_monotone_in_T = true;
  bool ecdf_antitone_in_threshold = true;
  bool pathwise_ordered = true;  // tau_{k1} <= tau_{k2} for k1 <= k2 on every realization
};

inline double ecdf_at(std::span<const double> samples, double T) {
  std::size_t c = 0;
  for (double v : samples)
    if (v <= T) ++c;
  return samples.empty() ? 0.0 : static_cast<double>(c) / static_cast<double>(samples.size());
}

// Lifetime statistics from already computed trajectories.
inline TailResult lifetime_tail(const std::vector<NormSeries>& trajectories, const std::string& channel,
                                const TailOptions& opt) {
  if (trajectories.size() < 2) throw ParameterError("monte_carlo_tail: ensemble size must be >= 2");
  if (opt.thresholds.empty()) throw ParameterError("monte_carlo_tail: at least one threshold required");
  for (double T : opt.horizons)
    if (!(T > 0.0)) throw ParameterError("monte_carlo_tail: horizons must be positive");
  TailResult res;
  bool all_zero = true;
  for (double k : opt.thresholds) {
    LifetimeEstimate est;
    est.threshold_k = k;
    est.channel = channel;
    for (const auto& tr : trajectories) {
      est.samples.push_back(detect_lifetime(tr, k, channel));
      all_zero = all_zero && est.samples.back() == 0.0;
    }
    std::vector<double> horizons = opt.horizons;
    std::sort(horizons.begin(), horizons.end());
    for (double T : horizons) {
      est.ecdf.emplace_back(T, ecdf_at(est.samples, T));
      est.envelope.emplace_back(T, criticality::lifetime_tail_bound(opt.exc, opt.p, opt.n_level, T, opt.c0));
    }
    for (std::size_t i = 1; i < est.ecdf.size(); ++i)
      if (est.ecdf[i].second < est.ecdf[i - 1].second) res.ecdf_monotone_in_T = false;
    est.fit = fit_tail_exponent(est.samples, opt.window, opt.bootstrap, opt.bootstrap_seed);
    res.estimates.push_back(std::move(est));
  }
  if (all_zero) throw ParameterError("monte_carlo_tail: every realization crossed every threshold at t = 0 (degenerate input)");
  for (std::size_t a = 0; a < res.estimates.size(); ++a)
    for (std::size_t b = 0; b < res.estimates.size(); ++b) {
      const auto& ea = res.estimates[a];
      const auto& eb = res.estimates[b];
      if (!(ea.threshold_k < eb.threshold_k)) continue;
      for (std::size_t h = 0; h < ea.ecdf.size(); ++h)
        if (ea.ecdf[h].second < eb.ecdf[h].second) res.ecdf_antitone_in_threshold = false;
      for (std::size_t r = 0; r < ea.samples.size(); ++r)
        if (ea.samples[r] > eb.samples[r]) res.pathwise_ordered = false;
    }
  return res;
}

inline TailResult monte_carlo_tail(const Realization& make, std::size_t ensemble, const std::string& channel,
                                   const TailOptions& opt, unsigned jobs) {
  if (ensemble < 2) throw ParameterError("monte_carlo_tail: ensemble size must be >= 2");
  return lifetime_tail(run_ensemble(make, ensemble, jobs), channel, opt);
}

// ---------------------------------------------------------------------------
// Tail exponent check

struct TailCheck {
  std::optional<double> fitted;
  double expected = 0.0;  // p * Exc
  std::optional<std::pair<double, double>> ci;
  double ci_half = 0.0;
  bool pass = false;
  std::string note;
};

// One-sided: PASS iff fitted >= p*Exc - CI. The tail bound is an upper bound,
// so a faster measured decay is consistent with it.
inline TailCheck tail_exponent_check(const ExponentFit& fit, const criticality::Setting& setting) {
  const auto rep = criticality::excess(setting);
  TailCheck c;
  c.fitted = fit.slope;
  c.ci = fit.ci;
  c.expected = criticality::to_double(setting.p * rep.exc);
  if (rep.exc <= 0) {
    c.pass = true;
    c.note = rep.exc == 0 ? "no rate at criticality" : "Exc < 0: no tail rate predicted";
    return c;
  }
  if (!fit.slope) {
    c.pass = true;
    c.note = "no crossings inside the fit window";
    return c;
  }
  if (std::isinf(*fit.slope)) {
    c.pass = true;
    c.note = "step ecdf: exponent +inf surrogate";
    return c;
  }
  if (fit.ci) {
    const auto [lo, hi] = *fit.ci;
    if (std::isfinite(lo) && std::isfinite(hi))
      c.ci_half = 0.5 * (hi - lo);
    else if (std::isfinite(lo))
      c.ci_half = std::max(*fit.slope - lo, 0.0);
  }
  c.pass = *fit.slope >= c.expected - c.ci_half;
  c.note = c.pass ? "measured decay at least as fast as T^{p Exc}" : "measured decay slower than T^{p Exc}";
  return c;
}

// ---------------------------------------------------------------------------
// Paired-seed shift check

struct ShiftCheck {
  std::size_t pairs = 0;
  double mean_difference = 0.0;  // mean of min(b, cap) - min(a, cap)
  std::pair<double, double> ci{0.0, 0.0};
  bool shifted_left = false;     // b crosses earlier: upper CI bound < 0
};

inline ShiftCheck paired_shift_check(std::span<const double> a, std::span<const double> b, double cap,
                                     std::size_t bootstrap, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) throw ParameterError("paired_shift_check: need equally sized, non-empty samples");
  if (!(cap > 0.0) || !std::isfinite(cap)) throw ParameterError("paired_shift_check: cap must be positive and finite");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = std::min(b[i], cap) - std::min(a[i], cap);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  ShiftCheck c;
  c.pairs = diff.size();
  c.mean_difference = mean(diff);
  auto gen = rng::engine(seed, 0);
  std::vector<double> means, resample(diff.size());
  for (std::size_t r = 0; r < std::max<std::size_t>(bootstrap, 1); ++r) {
    for (auto& v : resample) v = diff[static_cast<std::size_t>(gen() % diff.size())];
    means.push_back(mean(resample));
  }
  c.ci = {detail::percentile(means, 0.025), detail::percentile(means, 0.975)};
  c.shifted_left = c.ci.second < 0.0;
  return c;
}

// ---------------------------------------------------------------------------
// Singular-time proxy

inline constexpr const char* kProxyLabel =
    "PROXY: times where the fraction of realizations with norm > K is >= epsilon; "
    "a numerical stand-in, not the singular-time set of the theory";

struct ProxyOptions {
  double epsilon = 0.5;
  double threshold_K = 1.0;
  std::string channel = "L2";
  std::optional<std::vector<double>> scales;  // default: span 2^-j, j >= 3, down to the sampling step
  criticality::Setting setting = criticality::nse_setting(criticality::Rational(3));
};

struct SingularTimeReport {
  double epsilon = 0.0;
  double threshold_K = 0.0;
  std::string channel;
  std::string set_label = "per-epsilon proxy set";
  std::vector<double> times;
  std::vector<double> fraction;
  fractal::FractalSet flagged;
  std::optional<fractal::DimensionFit> dimension;
  criticality::CriticalityReport criticality;
  criticality::Rational predicted_bound;
};

inline SingularTimeReport singular_proxy(const std::vector<NormSeries>& ensemble, const ProxyOptions& opt) {
  if (ensemble.empty()) throw ParameterError("singular_proxy: empty ensemble");
  if (!(opt.epsilon > 0.0 && opt.epsilon <= 1.0)) throw ParameterError("singular_proxy: epsilon must lie in (0,1]");
  const auto& grid = ensemble.front().t;
  if (grid.empty()) throw ParameterError("singular_proxy: empty trajectories");
  for (const auto& s : ensemble) {
    if (s.channel != opt.channel)
      throw ConfigError("trajectory carries norm channel '" + s.channel + "', not '" + opt.channel + "'");
    if (s.t != grid || s.value.size() != grid.size())
      throw ParameterError("singular_proxy: trajectories must share one time grid");
  }
  SingularTimeReport rep;
  rep.epsilon = opt.epsilon;
  rep.threshold_K = opt.threshold_K;
  rep.channel = opt.channel;
  rep.times = grid;
  rep.fraction.assign(grid.size(), 0.0);
  const auto R = static_cast<double>(ensemble.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t c = 0;
    for (const auto& s : ensemble)
      if (s.value[i] > opt.threshold_K) ++c;
    rep.fraction[i] = static_cast<double>(c) / R;
  }
  std::vector<fractal::Interval> runs;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(rep.fraction[i] >= opt.epsilon)) continue;
    if (!runs.empty() && i > 0 && rep.fraction[i - 1] >= opt.epsilon)
      runs.back().hi = grid[i];
    else
      runs.push_back({grid[i], grid[i]});
  }
  rep.flagged = fractal::FractalSet(std::move(runs), {grid.front(), grid.back()});

  rep.criticality = criticality::excess(opt.setting);
  rep.predicted_bound = rep.criticality.dimension_bound;

  if (!rep.flagged.empty()) {
    std::vector<double> scales;
    if (opt.scales) {
      scales = *opt.scales;
    } else {
      double spacing = kInf;
      for (std::size_t i = 1; i < grid.size(); ++i) spacing = std::min(spacing, grid[i] - grid[i - 1]);
      const double span = grid.back() - grid.front();
      for (int j = 3; span > 0.0 && std::ldexp(span, -j) >= spacing; ++j) scales.push_back(std::ldexp(span, -j));
    }
    if (scales.size() >= 3) rep.dimension = fractal::dimension_fit(rep.flagged, scales);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV reports. `provenance` lines are written first as "# key = value".

using Provenance = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string provenance_block(const std::string& title, const Provenance& provenance) {
  std::string out = "# singtime " + title + "\n";
  for (const auto& [k, v] : provenance) out += "# " + k + " = " + v + "\n";
  return out;
}

} // namespace detail

// threshold,T,ecdf,envelope per (threshold, horizon), then the fit per threshold.
inline std::string lifetime_csv(const Provenance& provenance, const TailResult& r) {
  using config::format_real;
  std::string out = detail::provenance_block("lifetime", provenance);
  out += "# ecdf_monotone_in_T = " + std::string(r.ecdf_monotone_in_T ? "true" : "false") + "\n";
  out += "# ecdf_antitone_in_threshold = " + std::string(r.ecdf_antitone_in_threshold ? "true" : "false") + "\n";
  out += "# pathwise_ordered = " + std::string(r.pathwise_ordered ? "true" : "false") + "\n";
  for (const auto& e : r.estimates) {
    out += "# fit threshold = " + format_real(e.threshold_k) + ": slope = " +
           (e.fit.slope ? format_real(*e.fit.slope) : std::string("none"));
    if (e.fit.ci) out += ", ci95 = [" + format_real(e.fit.ci->first) + ", " + format_real(e.fit.ci->second) + "]";
    out += ", window = [" + format_real(e.fit.window.first) + ", " + format_real(e.fit.window.second) +
           "], points = " + std::to_string(e.fit.points) + "\n";
  }
  out += "threshold,T,ecdf,envelope\n";
  for (const auto& e : r.estimates)
    for (std::size_t h = 0; h < e.ecdf.size(); ++h)
      out += format_real(e.threshold_k) + "," + format_real(e.ecdf[h].first) + "," + format_real(e.ecdf[h].second) +
             "," + format_real(e.envelope[h].second) + "\n";
  return out;
}

// realization,tau_<k1>,tau_<k2>,...; survivors are written as inf.
inline std::string lifetime_samples_csv(const Provenance& provenance, const TailResult& r) {
  using config::format_real;
  std::string out = detail::provenance_block("lifetime samples", provenance);
  out += "realization";
  for (const auto& e : r.estimates) out += ",tau_" + format_real(e.threshold_k);
  out += "\n";
  const std::size_t n = r.estimates.empty() ? 0 : r.estimates.front().samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i);
    for (const auto& e : r.estimates) out += "," + format_real(e.samples[i]);
    out += "\n";
  }
  return out;
}

struct SampleColumn {
  double threshold = 0.0;
  std::vector<double> samples;
};

// Reads the output of lifetime_samples_csv.
inline std::vector<SampleColumn> read_lifetime_samples(std::istream& in) {
  std::vector<SampleColumn> cols;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    return f;
  };
  auto number = [&](const std::string& t) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
      throw ConfigError("lifetime samples: cannot parse '" + t + "' on line " + std::to_string(lineno));
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line);
    if (!header) {
      if (f.empty() || f[0] != "realization") throw ConfigError("lifetime samples: missing 'realization' header");
      for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i].rfind("tau_", 0) != 0) throw ConfigError("lifetime samples: bad column '" + f[i] + "'");
        cols.push_back({number(f[i].substr(4)), {}});
      }
      header = true;
      continue;
    }
    if (f.size() != cols.size() + 1) throw ConfigError("lifetime samples: wrong field count on line " + std::to_string(lineno));
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i].samples.push_back(number(f[i + 1]));
  }
  if (!header) throw ConfigError("lifetime samples: empty file");
  return cols;
}

// t,fraction,flagged per grid time.
inline std::string singular_csv(const Provenance& provenance, const SingularTimeReport& r) {
  using config::format_real;
  std::string out = detail::provenance_block("singular", provenance);
  out += std::string("# ") + kProxyLabel + "\n";
  out += "# set = " + r.set_label + "\n";
  out += "# epsilon = " + format_real(r.epsilon) + ", K = " + format_real(r.threshold_K) + ", channel = " + r.channel + "\n";
  out += "# flagged components = " + std::to_string(r.flagged.size()) + "\n";
  out += "# measured dimension = " + (r.dimension ? format_real(r.dimension->dimension) : std::string("none"));
  if (r.dimension) out += " (r^2 = " + format_real(r.dimension->r_squared) + ")";
  out += "\n# predicted bound = " + criticality::to_string(r.predicted_bound) + " (Exc = " +
         criticality::to_string(r.criticality.exc) + ")\n";
  out += "t,fraction,flagged\n";
  for (std::size_t i = 0; i < r.times.size(); ++i)
    out += format_real(r.times[i]) + "," + format_real(r.fraction[i]) + "," +
           (r.fraction[i] >= r.epsilon ? "1" : "0") + "\n";
  return out;
}

} // namespace singtime::experiments
