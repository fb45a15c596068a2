#pragma once

// Criticality calculus for abstract semilinear SPDEs, in exact rational
// arithmetic: per-term excess, the coupled and additive excess Exc, regime
// classification, the singular-time dimension bound 1 - ell*Exc, the Serrin
// exponent and the 3D Navier-Stokes weak-setting parameters.

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"
#include "singtime/errors.hpp"

namespace singtime::criticality {

using Rational = boost::multiprecision::cpp_rational;

inline std::string to_string(const Rational& r) { return r.str(); }
inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Accepts "3", "-2", "3/4", "0.75", "1.5e-3".
inline Rational parse_rational(std::string_view text) {
  auto fail = [&]() -> Rational { throw ParameterError("cannot parse rational '" + std::string(text) + "'"); };
  std::string s(text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t pos = 0;
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  s = s.substr(pos);
  if (s.empty()) return fail();
  if (auto slash = s.find('/'); slash != std::string::npos) {
    const Rational num = parse_rational(s.substr(0, slash));
    const Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw ParameterError("rational with zero denominator: '" + s + "'");
    return num / den;
  }
  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') negative = (s[i++] == '-');
  boost::multiprecision::cpp_int mantissa = 0;
  int frac_digits = 0;
  bool any_digit = false, seen_dot = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      mantissa = mantissa * 10 + (c - '0');
      if (seen_dot) ++frac_digits;
      any_digit = true;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!any_digit) return fail();
  long exponent = 0;
  if (i < s.size()) {
    if (s[i] != 'e' && s[i] != 'E') return fail();
    ++i;
    std::size_t used = 0;
    try {
      exponent = std::stol(s.substr(i), &used);
    } catch (const std::exception&) {
      return fail();
    }
    if (i + used != s.size()) return fail();
  }
  exponent -= frac_digits;
  Rational value(mantissa);
  const boost::multiprecision::cpp_int ten = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                        static_cast<unsigned>(std::labs(exponent)));
  value = exponent >= 0 ? value * Rational(ten) : value / Rational(ten);
  return negative ? -value : value;
}

struct NonlinearityTerm {
  Rational rho;   // growth exponent, > 0
  Rational beta;  // space roughness, in (0,1)
};

enum class SplitMode { coupled, additive };

enum class Regime { global_irregularity, partial_regularity, global_regularity, spatially_critical };

inline std::string to_string(SplitMode m) { return m == SplitMode::coupled ? "coupled" : "additive"; }

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::global_irregularity: return "global_irregularity";
    case Regime::partial_regularity: return "partial_regularity";
    case Regime::global_regularity: return "global_regularity";
    case Regime::spatially_critical: return "spatially_critical";
  }
  return "unknown";
}

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "coupled") return SplitMode::coupled;
  if (s == "additive") return SplitMode::additive;
  throw ParameterError("split mode must be 'coupled' or 'additive', got '" + std::string(s) + "'");
}

struct Setting {
  Rational p{4};
  Rational alpha{0};
  std::vector<NonlinearityTerm> terms;
  Rational ell{2};
  SplitMode split_mode = SplitMode::coupled;
};

struct CriticalityReport {
  std::vector<Rational> exc_terms;
  Rational exc;
  std::vector<bool> subcritical;       // per term: exc_j >= 0
  bool spatially_subcritical = false;  // Exc > 0
  bool spacetime_supercritical = false;  // Exc < 1/ell
  Rational dimension_bound;            // 1 - ell*Exc
  Regime regime = Regime::global_irregularity;
  SplitMode split_mode = SplitMode::coupled;
};

namespace detail {

inline void check_time_weight(const Rational& p, const Rational& alpha) {
  if (p < 2) throw ValidationError("time integrability violates p >= 2 (p = " + to_string(p) + ")");
  if (alpha < 0) throw ValidationError("time weight violates alpha >= 0 (alpha = " + to_string(alpha) + ")");
  if (alpha != 0 && !(alpha < p / 2 - 1))
    throw ValidationError("time weight violates alpha < p/2 - 1 (alpha = " + to_string(alpha) +
                          ", p/2 - 1 = " + to_string(p / 2 - 1) + ")");
}

inline void check_term(const NonlinearityTerm& t) {
  if (!(t.rho > 0)) throw ValidationError("nonlinearity violates rho > 0 (rho = " + to_string(t.rho) + ")");
  if (!(t.beta > 0 && t.beta < 1))
    throw ValidationError("nonlinearity violates 0 < beta < 1 (beta = " + to_string(t.beta) + ")");
}

} // namespace detail

// exc_j = 1 - beta_j - (rho_j/(rho_j+1)) (1+alpha)/p
inline Rational excess_per_term(const NonlinearityTerm& term, const Rational& p, const Rational& alpha) {
  detail::check_time_weight(p, alpha);
  detail::check_term(term);
  return 1 - term.beta - (term.rho / (term.rho + 1)) * ((1 + alpha) / p);
}

inline void validate(const Setting& s) {
  detail::check_time_weight(s.p, s.alpha);
  if (s.terms.empty()) throw ValidationError("setting needs at least one nonlinearity term");
  for (const auto& t : s.terms) detail::check_term(t);
  if (s.ell < 1) throw ValidationError("energy integrability violates ell >= 1 (ell = " + to_string(s.ell) + ")");
}

inline Regime classify(const Rational& exc, const Rational& ell) {
  if (exc < 0) return Regime::global_irregularity;
  if (exc == 0) return Regime::spatially_critical;
  if (exc < 1 / ell) return Regime::partial_regularity;
  return Regime::global_regularity;
}

// coupled:  Exc = (min_j exc_j) (1 + 1/max_j rho_j)
// additive: Exc = min_j [ ((rho_j+1)/rho_j)(1-beta_j) - (1+alpha)/p ]
inline CriticalityReport excess(const Setting& s) {
  validate(s);
  CriticalityReport r;
  r.split_mode = s.split_mode;
  Rational min_exc, max_rho, min_additive;
  for (std::size_t j = 0; j < s.terms.size(); ++j) {
    const auto& t = s.terms[j];
    const Rational e = excess_per_term(t, s.p, s.alpha);
    const Rational add = ((t.rho + 1) / t.rho) * (1 - t.beta) - (1 + s.alpha) / s.p;
    r.exc_terms.push_back(e);
    r.subcritical.push_back(e >= 0);
    if (j == 0 || e < min_exc) min_exc = e;
    if (j == 0 || t.rho > max_rho) max_rho = t.rho;
    if (j == 0 || add < min_additive) min_additive = add;
  }
  r.exc = s.split_mode == SplitMode::coupled ? min_exc * (1 + 1 / max_rho) : min_additive;
  r.spatially_subcritical = r.exc > 0;
  r.spacetime_supercritical = r.exc < 1 / s.ell;
  r.dimension_bound = 1 - s.ell * r.exc;
  r.regime = classify(r.exc, s.ell);
  return r;
}

// Exponent of T in the Hoelder-interpolation bound C0 T^exc. Requires
// beta <= 1 - (rho/(rho+1)) (1+alpha)/p.
inline Rational holder_gap_exponent(const NonlinearityTerm& term, const Rational& p, const Rational& alpha) {
  if (!(term.rho > 0)) throw ValidationError("nonlinearity violates rho > 0 (rho = " + to_string(term.rho) + ")");
  if (!(p > 0)) throw ValidationError("time integrability violates p > 0");
  if (alpha < 0) throw ValidationError("time weight violates alpha >= 0");
  const Rational ceiling = 1 - (term.rho / (term.rho + 1)) * ((1 + alpha) / p);
  if (term.beta > ceiling)
    throw ValidationError("gap hypothesis violates beta <= 1 - (rho/(rho+1))(1+alpha)/p (beta = " +
                          to_string(term.beta) + ", bound = " + to_string(ceiling) + ")");
  return ceiling - term.beta;
}

struct SerrinResult {
  Rational delta;
  Regime regime = Regime::partial_regularity;
};

// delta0 = (p0/2)(2/p0 + gamma0 + 3/q0 - 1); global regularity when
// 2/p0 + gamma0 + 3/q0 <= 1.
inline SerrinResult serrin_delta(const Rational& p0, const Rational& q0, const Rational& gamma0) {
  if (p0 < 2) throw ValidationError("Serrin exponent violates p0 >= 2 (p0 = " + to_string(p0) + ")");
  if (!(q0 > 3)) throw ValidationError("Serrin exponent violates q0 > 3 (q0 = " + to_string(q0) + ")");
  if (gamma0 < 0) throw ValidationError("Serrin exponent violates gamma0 >= 0 (gamma0 = " + to_string(gamma0) + ")");
  if (!(gamma0 + 3 / q0 < 1))
    throw ValidationError("Serrin exponent violates gamma0 + 3/q0 < 1 (gamma0 + 3/q0 = " +
                          to_string(gamma0 + 3 / q0) + ")");
  const Rational index = 2 / p0 + gamma0 + 3 / q0;
  SerrinResult r;
  r.delta = (p0 / 2) * (index - 1);
  r.regime = index > 1 ? Regime::partial_regularity : Regime::global_regularity;
  return r;
}

struct NseWeakSetting {
  Rational q;
  Rational p;
  Rational alpha;
  Rational beta;
  Rational time_ratio;   // (1+alpha)/p = (3/2)(1/2 - 1/q)
  Rational trace_index;  // 1 - 2(1+alpha)/p - 3/q, equal to the H^1(T^3) index -1/2
};

// Parameters (p, alpha) making H^1(T^3) embed sharply into the trace space
// B^{1-2(1+alpha)/p}_{q,p}. The chooser picks the smallest integer p >= 4 with
// alpha >= 0; alpha < p/2 - 1 then holds automatically because q < 6.
inline NseWeakSetting nse_weak_setting(const Rational& q) {
  if (!(q > 2 && q < 6))
    throw ValidationError("weak setting requires 2 < q < 6 for the sharp embedding H^1 -> B^{1-2(1+alpha)/p}_{q,p} "
                          "(q = " + to_string(q) + ")");
  NseWeakSetting w;
  w.q = q;
  w.time_ratio = Rational(3, 2) * (Rational(1, 2) - 1 / q);
  // alpha = ratio*p - 1 >= 0  <=>  p >= 1/ratio
  const Rational min_p = 1 / w.time_ratio;
  boost::multiprecision::cpp_int p_int = numerator(min_p) / denominator(min_p);
  if (Rational(p_int) < min_p) p_int += 1;
  if (p_int < 4) p_int = 4;
  w.p = Rational(p_int);
  w.alpha = w.time_ratio * w.p - 1;
  w.beta = Rational(1, 2) + Rational(3, 4) / q;
  w.trace_index = 1 - 2 * w.time_ratio - 3 / q;
  if (!(w.alpha == 0 || w.alpha < w.p / 2 - 1))
    throw InvariantViolation("nse_weak_setting: chooser produced alpha >= p/2 - 1");
  return w;
}

// Single-term setting (rho = 1) for the 3D NSE weak setting, with ell = 2.
inline Setting nse_setting(const Rational& q, SplitMode mode = SplitMode::coupled) {
  const auto w = nse_weak_setting(q);
  Setting s;
  s.p = w.p;
  s.alpha = w.alpha;
  s.terms = {NonlinearityTerm{Rational(1), w.beta}};
  s.ell = 2;
  s.split_mode = mode;
  return s;
}

// C0 * T^{p*exc} * (1 + N^p): envelope of P(tau - t <= T) up to the
// caller-supplied P(||u_t|| > N) term.
inline double lifetime_tail_bound(const Rational& exc, const Rational& p, double n_level, double horizon, double c0) {
  if (exc < 0) throw ParameterError("lifetime_tail_bound: exc must be >= 0");
  if (!(p > 0)) throw ParameterError("lifetime_tail_bound: p must be positive");
  if (!(n_level >= 0.0)) throw ParameterError("lifetime_tail_bound: N must be >= 0");
  if (!(horizon > 0.0)) throw ParameterError("lifetime_tail_bound: T must be positive");
  if (!(c0 > 0.0)) throw ParameterError("lifetime_tail_bound: C0 must be positive");
  const double rate = to_double(p * exc);
  return c0 * std::pow(horizon, rate) * (1.0 + std::pow(n_level, to_double(p)));
}

// ---------------------------------------------------------------------------
// Dimension-bound table for the stochastic 3D Navier-Stokes equations.

struct TableRow {
  std::string label;
  std::string energy;
  std::string ell;
  std::string regularity;
  std::string exc;
  std::string bound;
};

// The critical Sobolev threshold of 3D NSE is -1 and Exc carries a factor 1/2
// from parabolic scaling: Exc = (1/2)(regularity + 1).
inline Rational nse_excess_from_regularity(const Rational& regularity) { return Rational(1, 2) * (regularity + 1); }

inline std::vector<TableRow> nse_table() {
  std::vector<TableRow> rows;

  // Row 1: energy space L^2_t(H^1), regularity 1 - 3/2.
  const Rational reg1 = Rational(1) - Rational(3, 2);
  const Rational exc1 = nse_excess_from_regularity(reg1);
  const Rational bound1 = 1 - 2 * exc1;
  const auto via_setting = excess(nse_setting(Rational(3)));
  if (via_setting.exc != exc1 || via_setting.dimension_bound != bound1)
    throw InvariantViolation("nse_table: abstract excess disagrees with the Sobolev-index route");
  rows.push_back({"1", "L^2_t(H^1(T^3))", "2", "1-3/2 = " + to_string(reg1), "(1/2)(-1/2+1) = " + to_string(exc1),
                  to_string(bound1)});

  // Row 2: energy space L^{p0}_t(L^{q0}), bound (p0/2)(2/p0+3/q0-1).
  rows.push_back({"2", "L^p0_t(L^q0(T^3))", "p0", "-3/q0", "(1/2)(-3/q0+1)", "(p0/2)(2/p0+3/q0-1)"});
  const Rational samples[2][2] = {{Rational(4), Rational(4)}, {Rational(4), Rational(6)}};
  for (const auto& pq : samples) {
    const Rational p0 = pq[0], q0 = pq[1];
    const Rational reg = -3 / q0;
    const Rational exc = nse_excess_from_regularity(reg);
    const Rational bound = 1 - p0 * exc;
    if (serrin_delta(p0, q0, 0).delta != bound)
      throw InvariantViolation("nse_table: Serrin exponent disagrees with 1 - p0*Exc");
    rows.push_back({"2", "(p0,q0) = (" + to_string(p0) + "," + to_string(q0) + ")", to_string(p0), to_string(reg),
                    to_string(exc), to_string(bound)});
  }
  return rows;
}

inline nlohmann::ordered_json to_json(const CriticalityReport& r, const Setting& s) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(s.split_mode);
  j["p"] = to_string(s.p);
  j["alpha"] = to_string(s.alpha);
  j["ell"] = to_string(s.ell);
  auto terms = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.terms.size(); ++i) {
    nlohmann::ordered_json t;
    t["rho"] = to_string(s.terms[i].rho);
    t["beta"] = to_string(s.terms[i].beta);
    t["exc"] = to_string(r.exc_terms[i]);
    t["subcritical"] = static_cast<bool>(r.subcritical[i]);
    terms.push_back(std::move(t));
  }
  j["terms"] = std::move(terms);
  j["Exc"] = to_string(r.exc);
  j["spatially_subcritical"] = r.spatially_subcritical;
  j["spacetime_supercritical"] = r.spacetime_supercritical;
  j["dimension_bound"] = to_string(r.dimension_bound);
  j["regime"] = to_string(r.regime);
  return j;
}

} // namespace singtime::criticality
