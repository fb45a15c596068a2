#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "singtime/singtime.hpp"

namespace fs = std::filesystem;
using namespace singtime;
using criticality::Rational;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

struct Globals {
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  std::vector<std::string> sets;
};

Globals g;

void note(const std::string& msg) {
  if (!g.quiet) std::cerr << "singtime: " << msg << '\n';
}

fs::path out_dir() {
  std::string dir = g.out;
  if (dir.empty()) {
    const char* env = std::getenv("SINGTIME_OUT");
    dir = env && *env ? env : ".";
  }
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
  note("wrote " + path.string());
}

std::string fmt(double v) { return config::format_real(v); }

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Config file, then --seed, then --set overrides.
config::FlatConfig load_config(const std::string& path) {
  auto fc = config::FlatConfig::load(path);
  if (g.seed) fc.set("seed", std::to_string(*g.seed));
  for (const auto& s : g.sets) fc.apply_override(s);
  return fc;
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto v = config::parse_real_list(text, "--window");
  if (v.size() != 2 || !(v[0] > 0.0) || !(v[0] <= v[1])) throw ConfigError("--window must be lo,hi with 0 < lo <= hi");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Criticality setting flags shared by several subcommands

struct SettingFlags {
  std::string p = "4";
  std::string alpha = "0";
  std::string ell = "2";
  std::string mode = "coupled";
  std::vector<std::string> terms;
  std::string nse_q;
};

void add_setting_flags(CLI::App* sc, SettingFlags& f) {
  sc->add_option("--p", f.p, "time integrability p (rational)")->capture_default_str();
  sc->add_option("--alpha", f.alpha, "time weight alpha (rational)")->capture_default_str();
  sc->add_option("--ell", f.ell, "energy exponent ell (rational)")->capture_default_str();
  sc->add_option("--term", f.terms, "nonlinearity term rho,beta (repeatable)");
  sc->add_option("--mode", f.mode, "coupled or additive")->capture_default_str();
  sc->add_option("--nse-q", f.nse_q, "use the 3D NSE weak setting with this q instead of --term");
}

criticality::NonlinearityTerm parse_term(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("--term expects rho,beta, got '" + text + "'");
  return {criticality::parse_rational(text.substr(0, comma)), criticality::parse_rational(text.substr(comma + 1))};
}

// Without --term the 3D NSE weak setting (q = --nse-q, default 3) is used.
criticality::Setting build_setting(const SettingFlags& f, bool require_terms) {
  const auto mode = criticality::parse_split_mode(f.mode);
  if (f.terms.empty()) {
    if (require_terms && f.nse_q.empty()) throw ConfigError("give at least one --term rho,beta or --nse-q");
    return criticality::nse_setting(criticality::parse_rational(f.nse_q.empty() ? "3" : f.nse_q), mode);
  }
  if (!f.nse_q.empty()) throw ConfigError("--term and --nse-q are mutually exclusive");
  criticality::Setting s;
  s.p = criticality::parse_rational(f.p);
  s.alpha = criticality::parse_rational(f.alpha);
  s.ell = criticality::parse_rational(f.ell);
  s.split_mode = mode;
  for (const auto& t : f.terms) s.terms.push_back(parse_term(t));
  return s;
}

experiments::Provenance setting_provenance(const criticality::Setting& s, const criticality::CriticalityReport& r) {
  using criticality::to_string;
  std::string terms;
  for (const auto& t : s.terms) terms += (terms.empty() ? "" : " ") + to_string(t.rho) + "," + to_string(t.beta);
  return {{"setting.p", to_string(s.p)},         {"setting.alpha", to_string(s.alpha)},
          {"setting.ell", to_string(s.ell)},     {"setting.mode", to_string(s.split_mode)},
          {"setting.terms", terms},              {"setting.Exc", to_string(r.exc)},
          {"setting.dimension_bound", to_string(r.dimension_bound)}};
}

// ---------------------------------------------------------------------------
// criticality, serrin, nse-table

int run_criticality(const SettingFlags& f, bool json) {
  const auto s = build_setting(f, true);
  const auto r = criticality::excess(s);
  if (json) {
    std::cout << criticality::to_json(r, s).dump(2) << '\n';
    return kExitOk;
  }
  using criticality::to_string;
  std::cout << "setting: p = " << to_string(s.p) << ", alpha = " << to_string(s.alpha) << ", ell = "
            << to_string(s.ell) << ", mode = " << to_string(s.split_mode) << '\n';
  for (std::size_t i = 0; i < s.terms.size(); ++i)
    std::cout << "term " << i + 1 << ": rho = " << to_string(s.terms[i].rho) << ", beta = " << to_string(s.terms[i].beta)
              << ", exc_" << i + 1 << " = " << to_string(r.exc_terms[i]) << (r.subcritical[i] ? " (subcritical)" : " (supercritical)")
              << '\n';
  std::cout << "Exc = " << to_string(r.exc) << '\n'
            << "spatially subcritical: " << (r.spatially_subcritical ? "yes" : "no") << '\n'
            << "spacetime supercritical: " << (r.spacetime_supercritical ? "yes" : "no") << '\n'
            << "dimension bound: " << to_string(r.dimension_bound) << '\n'
            << "regime: " << to_string(r.regime) << '\n';
  return kExitOk;
}

int run_serrin(const std::string& p0, const std::string& q0, const std::string& gamma0) {
  const auto r = criticality::serrin_delta(criticality::parse_rational(p0), criticality::parse_rational(q0),
                                           criticality::parse_rational(gamma0));
  std::cout << "p0 = " << p0 << ", q0 = " << q0 << ", gamma0 = " << gamma0 << '\n'
            << "delta0 = " << criticality::to_string(r.delta) << " (" << fixed(criticality::to_double(r.delta)) << ")\n"
            << "regime: " << criticality::to_string(r.regime) << '\n';
  return kExitOk;
}

int run_nse_table() {
  const auto rows = criticality::nse_table();
  std::vector<std::string> head = {"row", "energy space", "ell", "regularity", "Exc", "dim bound"};
  std::vector<std::vector<std::string>> cells = {head};
  for (const auto& r : rows) cells.push_back({r.label, r.energy, r.ell, r.regularity, r.exc, r.bound});
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    std::cout << line << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dimension, premeasure

fractal::FractalSet load_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open point set '" + path + "'");
  auto a = fractal::read_point_set(in);
  if (a.empty()) throw ConfigError("point set '" + path + "' is empty");
  return a;
}

int run_dimension(const std::string& path, const std::string& scheme, int first, int levels, const std::string& scales) {
  const auto a = load_set(path);
  const double span = a.window().length();
  if (!(span > 0.0)) throw ConfigError("point set must span a positive window");
  std::vector<double> etas;
  if (!scales.empty()) {
    etas = config::parse_real_list(scales, "--scales");
  } else if (scheme == "dyadic") {
    etas = fractal::dyadic_scales(span, first < 0 ? 3 : first, levels);
  } else if (scheme == "dyadic-thirds") {
    etas = fractal::triadic_scales(span, first < 0 ? 1 : first, levels);
  } else {
    throw ConfigError("--scheme must be dyadic or dyadic-thirds, got '" + scheme + "'");
  }
  const auto fit = fractal::dimension_fit(a, etas);
  std::cout << "input: " << fs::path(path).filename().string() << " (" << a.size() << " components, window ["
            << fmt(a.window().lo) << ", " << fmt(a.window().hi) << "])\n"
            << "scheme: " << (scales.empty() ? scheme : std::string("explicit")) << ", " << fit.scales.size()
            << " scales\n";
  char buf[128];
  std::cout << "eta                      count\n";
  for (std::size_t i = 0; i < fit.scales.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-24.17g %zu", fit.scales[i], fractal::ball_count(a, fit.scales[i]));
    std::cout << buf << '\n';
  }
  std::cout << "slope = " << fixed(fit.slope) << ", r^2 = " << fixed(fit.r_squared) << '\n'
            << "box-counting dimension = " << fixed(fit.dimension) << '\n';
  auto j = fractal::to_json(fit);
  j["input"] = fs::path(path).filename().string();
  write_text(out_dir() / "dimension.json", j.dump(2) + "\n");
  return kExitOk;
}

int run_premeasure(const std::string& path, double s, double eta) {
  const auto a = load_set(path);
  const auto e = fractal::hausdorff_premeasure(a, s, eta);
  std::cout << "input: " << fs::path(path).filename().string() << " (" << a.size() << " components)\n"
            << "s = " << fmt(s) << ", eta = " << fmt(eta) << '\n'
            << "H^s_eta = " << fmt(e.value) << " (" << e.cover.size() << " cover pieces)\n";
  auto j = fractal::to_json(e);
  j["input"] = fs::path(path).filename().string();
  write_text(out_dir() / "premeasure.json", j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

config::FlatConfig solver_subset(const config::FlatConfig& fc) {
  config::FlatConfig sub;
  for (const auto& [k, v] : fc.values())
    if (spde::sim_config_keys().count(k)) sub.set(k, v);
  return sub;
}

int run_simulate(const std::string& cfg_path, const std::string& ledger_name, const std::string& snapshot,
                 const std::string& noise_record) {
  const auto fc = load_config(cfg_path);
  fc.require_known(spde::sim_config_keys());
  const auto c = spde::sim_config_from(fc);
  note("simulate: d = " + std::to_string(c.d) + ", n = " + std::to_string(c.n) + ", dt = " + fmt(c.dt) +
       ", t_end = " + fmt(c.t_end));
  const auto r = spde::simulate(c);
  const auto dir = out_dir();
  write_text(dir / ledger_name, spde::ledger_csv(c, r));
  if (!snapshot.empty()) {
    std::ostringstream ss;
    spde::write_snapshot(ss, r.final_state);
    write_text(dir / snapshot, ss.str());
  }
  if (!noise_record.empty() && c.noise) {
    std::ostringstream ss;
    noise::write_noise(ss, *c.noise);
    write_text(dir / noise_record, ss.str());
  }
  double worst = 0.0;
  for (const auto& row : r.ledger) worst = std::max(worst, std::abs(row.residual));
  const auto& last = r.ledger.back();
  std::cout << "steps: " << last.step << ", t = " << fmt(last.t) << '\n'
            << "E = " << fmt(last.E) << ", " << r.norm_channel << " norm = " << fmt(last.norm) << '\n'
            << "max |ledger residual| = " << fmt(worst) << '\n'
            << "max divergence residual = " << fmt(r.max_divergence_residual) << '\n';
  if (r.blowup)
    std::cout << "blow-up at step " << r.blowup->step << ", t = " << fmt(r.blowup->t) << ": " << r.blowup->reason << '\n';
  else
    std::cout << "blow-up: none\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// lifetime, singular

const std::set<std::string>& scalar_keys() {
  static const std::set<std::string> keys = {"model", "seed", "scalar.x0", "scalar.sigma", "scalar.dt",
                                             "scalar.t_end", "scalar.cap"};
  return keys;
}

struct Model {
  experiments::Realization make;
  std::string channel;
  std::uint64_t master = 1;
  double t_end = 1.0;
  experiments::Provenance provenance;
};

Model build_model(const config::FlatConfig& fc) {
  Model m;
  const auto kind = fc.get_string("model", "spde");
  if (kind == "scalar") {
    fc.require_known(scalar_keys());
    experiments::ScalarSurrogate p;
    p.x0 = fc.get_double("scalar.x0", p.x0);
    p.sigma = fc.get_double("scalar.sigma", p.sigma);
    p.dt = fc.get_double("scalar.dt", p.dt);
    p.t_end = fc.get_double("scalar.t_end", p.t_end);
    p.cap = fc.get_double("scalar.cap", p.cap);
    if (!(p.dt > 0.0) || !(p.t_end >= 0.0) || !(p.cap > 0.0)) throw ConfigError("scalar: need dt > 0, t_end >= 0, cap > 0");
    m.master = fc.get_uint("seed", 1);
    m.make = experiments::scalar_realization(p, m.master);
    m.channel = experiments::kScalarChannel;
    m.t_end = p.t_end;
    m.provenance = {{"model", "scalar"},          {"seed", std::to_string(m.master)},
                    {"scalar.x0", fmt(p.x0)},     {"scalar.sigma", fmt(p.sigma)},
                    {"scalar.dt", fmt(p.dt)},     {"scalar.t_end", fmt(p.t_end)},
                    {"scalar.cap", fmt(p.cap)}};
    return m;
  }
  if (kind != "spde") throw ConfigError("model must be spde or scalar, got '" + kind + "'");
  auto known = spde::sim_config_keys();
  known.insert("model");
  fc.require_known(known);
  const auto c = spde::sim_config_from(solver_subset(fc));
  m.master = c.seed;
  m.make = experiments::spde_realization(c, m.master);
  m.channel = c.norm.label();
  m.t_end = c.t_end;
  m.provenance = {{"model", "spde"}};
  for (const auto& kv : spde::describe(c)) m.provenance.push_back(kv);
  return m;
}

struct LifetimeFlags {
  std::size_t ensemble = 32;
  std::string thresholds;
  std::string horizons;
  std::string window;
  double c0 = 1.0;
  double n_level = 0.0;
  std::size_t bootstrap = 1000;
  std::string samples_name = "lifetime_samples.csv";
  SettingFlags setting;
};

int run_lifetime(const std::string& cfg_path, const LifetimeFlags& f) {
  const auto fc = load_config(cfg_path);
  const auto model = build_model(fc);
  const auto setting = build_setting(f.setting, false);
  const auto rep = criticality::excess(setting);
  experiments::TailOptions opt;
  opt.thresholds = config::parse_real_list(f.thresholds, "--threshold");
  if (f.horizons.empty()) {
    for (double frac : {0.125, 0.25, 0.5, 1.0}) opt.horizons.push_back(frac * model.t_end);
  } else {
    opt.horizons = config::parse_real_list(f.horizons, "--horizons");
  }
  if (!f.window.empty()) opt.window = parse_window(f.window);
  opt.exc = rep.exc < 0 ? Rational(0) : rep.exc;
  opt.p = setting.p;
  opt.c0 = f.c0;
  opt.n_level = f.n_level;
  opt.bootstrap = f.bootstrap;
  opt.bootstrap_seed = rng::sub_seed(model.master, 0xB0075742ULL);
  if (f.ensemble < 2) throw ConfigError("--ensemble must be >= 2");
  note("lifetime: " + std::to_string(f.ensemble) + " realizations on " + std::to_string(g.jobs) + " job(s)");
  const auto res = experiments::monte_carlo_tail(model.make, f.ensemble, model.channel, opt, g.jobs);

  auto prov = model.provenance;
  prov.emplace_back("ensemble", std::to_string(f.ensemble));
  prov.emplace_back("channel", model.channel);
  prov.emplace_back("bootstrap", std::to_string(f.bootstrap));
  prov.emplace_back("c0", fmt(f.c0));
  prov.emplace_back("n_level", fmt(f.n_level));
  for (const auto& kv : setting_provenance(setting, rep)) prov.push_back(kv);
  const auto dir = out_dir();
  write_text(dir / "lifetime.csv", experiments::lifetime_csv(prov, res));
  write_text(dir / f.samples_name, experiments::lifetime_samples_csv(prov, res));

  for (const auto& e : res.estimates) {
    std::size_t crossed = 0;
    for (double v : e.samples)
      if (std::isfinite(v)) ++crossed;
    std::cout << "threshold " << fmt(e.threshold_k) << ": " << crossed << "/" << e.samples.size() << " crossed";
    if (e.fit.slope) {
      std::cout << ", tail slope = " << fmt(*e.fit.slope);
      if (e.fit.ci) std::cout << " [" << fmt(e.fit.ci->first) << ", " << fmt(e.fit.ci->second) << "]";
    } else {
      std::cout << ", tail slope = none";
    }
    std::cout << '\n';
    for (std::size_t h = 0; h < e.ecdf.size(); ++h)
      std::cout << "  T = " << fmt(e.ecdf[h].first) << ": P(tau <= T) = " << fmt(e.ecdf[h].second)
                << ", envelope = " << fmt(e.envelope[h].second) << '\n';
  }
  std::cout << "ecdf nondecreasing in T: " << (res.ecdf_monotone_in_T ? "yes" : "no") << '\n'
            << "ecdf nonincreasing in threshold: " << (res.ecdf_antitone_in_threshold ? "yes" : "no") << '\n'
            << "pathwise ordered: " << (res.pathwise_ordered ? "yes" : "no") << '\n';
  if (!res.ecdf_monotone_in_T || !res.pathwise_ordered) throw InvariantViolation("lifetime: ordering invariant violated");
  return kExitOk;
}

struct SingularFlags {
  std::size_t ensemble = 8;
  double epsilon = 0.5;
  double threshold_K = 1.0;
  std::string scales;
  SettingFlags setting;
};

int run_singular(const std::string& cfg_path, const SingularFlags& f) {
  const auto fc = load_config(cfg_path);
  auto known = spde::sim_config_keys();
  known.insert("model");
  fc.require_known(known);
  if (fc.get_string("model", "spde") != "spde") throw ConfigError("singular requires model = spde");
  const auto c = spde::sim_config_from(solver_subset(fc));
  experiments::ProxyOptions opt;
  opt.epsilon = f.epsilon;
  opt.threshold_K = f.threshold_K;
  opt.channel = c.norm.label();
  if (!f.scales.empty()) opt.scales = config::parse_real_list(f.scales, "--scales");
  opt.setting = build_setting(f.setting, false);
  if (f.ensemble < 1) throw ConfigError("--ensemble must be >= 1");
  note("singular: " + std::to_string(f.ensemble) + " realizations on " + std::to_string(g.jobs) + " job(s)");
  const auto ensemble = experiments::run_ensemble(experiments::spde_realization(c, c.seed), f.ensemble, g.jobs);
  const auto rep = experiments::singular_proxy(ensemble, opt);

  experiments::Provenance prov = {{"model", "spde"}};
  for (const auto& kv : spde::describe(c)) prov.push_back(kv);
  prov.emplace_back("ensemble", std::to_string(f.ensemble));
  for (const auto& kv : setting_provenance(opt.setting, rep.criticality)) prov.push_back(kv);
  const auto dir = out_dir();
  write_text(dir / "singular.csv", experiments::singular_csv(prov, rep));
  std::ostringstream set;
  set << "# " << experiments::kProxyLabel << '\n';
  fractal::write_point_set(set, rep.flagged);
  write_text(dir / "singular_set.txt", set.str());

  std::cout << experiments::kProxyLabel << '\n'
            << "epsilon = " << fmt(rep.epsilon) << ", K = " << fmt(rep.threshold_K) << ", channel = " << rep.channel
            << '\n'
            << "flagged components: " << rep.flagged.size() << '\n';
  if (rep.dimension)
    std::cout << "measured box-counting dimension: " << fixed(rep.dimension->dimension)
              << " (r^2 = " << fixed(rep.dimension->r_squared) << ")\n";
  else
    std::cout << "measured box-counting dimension: none\n";
  std::cout << "predicted bound: " << criticality::to_string(rep.predicted_bound) << " (Exc = "
            << criticality::to_string(rep.criticality.exc) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tail-check

int run_tail_check(const std::string& path, const std::string& threshold, const std::string& window,
                   std::size_t bootstrap, const SettingFlags& sf) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open samples file '" + path + "'");
  const auto cols = experiments::read_lifetime_samples(in);
  if (cols.empty()) throw ConfigError("samples file has no tau columns");
  const experiments::SampleColumn* col = &cols.front();
  if (!threshold.empty()) {
    const double k = config::parse_real_list(threshold, "--threshold").at(0);
    col = nullptr;
    for (const auto& c : cols)
      if (c.threshold == k) col = &c;
    if (!col) throw ConfigError("no column for threshold " + threshold);
  }
  const auto setting = build_setting(sf, false);
  std::optional<std::pair<double, double>> w;
  if (!window.empty()) w = parse_window(window);
  const auto fit = experiments::fit_tail_exponent(col->samples, w, bootstrap, g.seed.value_or(1));
  const auto check = experiments::tail_exponent_check(fit, setting);
  std::cout << "input: " << fs::path(path).filename().string() << ", threshold " << fmt(col->threshold) << ", "
            << col->samples.size() << " samples\n"
            << "window: [" << fmt(fit.window.first) << ", " << fmt(fit.window.second) << "], " << fit.points
            << " points\n"
            << "fitted slope: " << (check.fitted ? fmt(*check.fitted) : std::string("none"));
  if (check.ci) std::cout << " (95% CI [" << fmt(check.ci->first) << ", " << fmt(check.ci->second) << "])";
  std::cout << '\n'
            << "expected p*Exc: " << fmt(check.expected) << '\n'
            << (check.pass ? "PASS" : "FAIL") << ": " << check.note << '\n';
  return check.pass ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// validate-noise

struct NoiseFlags {
  std::string record;
  int d = 2;
  int k_max = 2;
  double gamma = 2.0 / 3.0;
  double amplitude = 1.0;
  std::uint64_t noise_seed = 1;
  bool lie = false;
  int grid_n = 32;
  std::string write_record;
};

int run_validate_noise(const NoiseFlags& f) {
  noise::NoiseField field;
  if (!f.record.empty()) {
    std::ifstream in(f.record);
    if (!in) throw ConfigError("cannot open noise record '" + f.record + "'");
    field = noise::read_noise(in);
  } else {
    field = noise::build_kraichnan(f.d, f.k_max, f.gamma, f.amplitude, f.noise_seed);
  }
  if (f.lie && field.mu_mode == noise::MuMode::none) field = noise::build_lie(field);
  if (!f.write_record.empty()) {
    std::ostringstream ss;
    noise::write_noise(ss, field);
    write_text(out_dir() / f.write_record, ss.str());
  }
  const auto report = noise::validate(field, f.grid_n);
  auto j = noise::to_json(report);
  j["modes"] = field.modes.size();
  j["fields"] = field.field_count();
  j["mu_mode"] = noise::to_string(field.mu_mode);
  j["kolmogorov_surrogate"] = field.kolmogorov_surrogate;
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"singtime: criticality, fractal covers and stochastic PDE experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--jobs", g.jobs, "worker threads for ensembles")->capture_default_str()->check(CLI::Range(1u, 1024u));
  app.add_option("--seed", g.seed, "master seed (overrides the config file)");
  app.add_option("--out", g.out, "output directory (default: $SINGTIME_OUT or .)");
  app.add_flag("--quiet", g.quiet, "suppress progress messages");
  app.add_option("--set", g.sets, "config override key=value (repeatable)");

  SettingFlags crit_flags;
  bool crit_json = false;
  auto* crit = app.add_subcommand("criticality", "excess exponent, regime and dimension bound");
  add_setting_flags(crit, crit_flags);
  crit->add_flag("--json", crit_json, "print JSON");

  std::string p0, q0, gamma0 = "0";
  auto* serrin = app.add_subcommand("serrin", "Serrin-class partial regularity exponent");
  serrin->add_option("--p0", p0, "time exponent")->required();
  serrin->add_option("--q0", q0, "space exponent")->required();
  serrin->add_option("--gamma0", gamma0, "extra regularity")->capture_default_str();

  auto* table = app.add_subcommand("nse-table", "dimension bounds for the stochastic 3D Navier-Stokes equations");

  std::string dim_file, dim_scheme = "dyadic", dim_scales;
  int dim_first = -1, dim_levels = 12;
  auto* dim = app.add_subcommand("dimension", "box-counting dimension of a point set");
  dim->add_option("file", dim_file, "point set file")->required();
  dim->add_option("--scheme", dim_scheme, "dyadic (span 2^-j) or dyadic-thirds (span 3^-k / 2)")->capture_default_str();
  dim->add_option("--first", dim_first, "first level (default 3 for dyadic, 1 for dyadic-thirds)");
  dim->add_option("--levels", dim_levels, "last level")->capture_default_str();
  dim->add_option("--scales", dim_scales, "explicit comma-separated radii");

  std::string pm_file;
  double pm_s = 0.5, pm_eta = 0.1;
  auto* pm = app.add_subcommand("premeasure", "Hausdorff premeasure H^s_eta of a point set");
  pm->add_option("file", pm_file, "point set file")->required();
  pm->add_option("--s", pm_s, "exponent s in [0,1]")->capture_default_str();
  pm->add_option("--eta", pm_eta, "cover diameter bound")->capture_default_str();

  std::string sim_cfg, sim_ledger = "simulate.csv", sim_snapshot, sim_noise;
  auto* sim = app.add_subcommand("simulate", "run the SPDE solver and write the energy ledger");
  sim->add_option("config", sim_cfg, "config file")->required();
  sim->add_option("--ledger", sim_ledger, "ledger file name in the output directory")->capture_default_str();
  sim->add_option("--snapshot", sim_snapshot, "write the final state to this file name");
  sim->add_option("--noise-record", sim_noise, "write the noise record to this file name");

  std::string life_cfg;
  LifetimeFlags life;
  auto* lt = app.add_subcommand("lifetime", "Monte Carlo lifetime tail");
  lt->add_option("config", life_cfg, "config file (model = spde or scalar)")->required();
  lt->add_option("--ensemble", life.ensemble, "realizations")->capture_default_str();
  lt->add_option("--threshold", life.thresholds, "comma-separated norm thresholds k")->required();
  lt->add_option("--horizons", life.horizons, "comma-separated horizons T (default t_end/8, /4, /2, 1)");
  lt->add_option("--window", life.window, "fit window lo,hi");
  lt->add_option("--c0", life.c0, "envelope constant C0")->capture_default_str();
  lt->add_option("--n-level", life.n_level, "envelope level N")->capture_default_str();
  lt->add_option("--bootstrap", life.bootstrap, "bootstrap resamples")->capture_default_str();
  lt->add_option("--samples", life.samples_name, "samples file name")->capture_default_str();
  add_setting_flags(lt, life.setting);

  std::string sing_cfg;
  SingularFlags sing;
  auto* sg = app.add_subcommand("singular", "singular-time proxy set and its dimension");
  sg->add_option("config", sing_cfg, "config file")->required();
  sg->add_option("--ensemble", sing.ensemble, "realizations")->capture_default_str();
  sg->add_option("--epsilon", sing.epsilon, "fraction threshold epsilon")->capture_default_str();
  sg->add_option("--threshold-K", sing.threshold_K, "norm threshold K")->capture_default_str();
  sg->add_option("--scales", sing.scales, "explicit comma-separated radii");
  add_setting_flags(sg, sing.setting);

  std::string tc_file, tc_threshold, tc_window;
  std::size_t tc_bootstrap = 1000;
  SettingFlags tc_setting;
  auto* tc = app.add_subcommand("tail-check", "compare a fitted tail exponent with p*Exc");
  tc->add_option("samples", tc_file, "samples CSV written by lifetime")->required();
  tc->add_option("--threshold", tc_threshold, "column to use (default: first)");
  tc->add_option("--window", tc_window, "fit window lo,hi");
  tc->add_option("--bootstrap", tc_bootstrap, "bootstrap resamples")->capture_default_str();
  add_setting_flags(tc, tc_setting);

  NoiseFlags nf;
  auto* vn = app.add_subcommand("validate-noise", "check a Kraichnan noise family on a grid");
  vn->add_option("--record", nf.record, "noise record file (instead of the Kraichnan flags)");
  vn->add_option("--d", nf.d, "dimension")->capture_default_str();
  vn->add_option("--k-max", nf.k_max, "largest wavenumber")->capture_default_str();
  vn->add_option("--gamma", nf.gamma, "spectral exponent")->capture_default_str();
  vn->add_option("--amplitude", nf.amplitude, "amplitude")->capture_default_str();
  vn->add_option("--noise-seed", nf.noise_seed, "polarization seed")->capture_default_str();
  vn->add_flag("--lie", nf.lie, "add the Lie transport term");
  vn->add_option("--grid-n", nf.grid_n, "grid points per side")->capture_default_str();
  vn->add_option("--write-record", nf.write_record, "write the noise record to this file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*crit) return run_criticality(crit_flags, crit_json);
    if (*serrin) return run_serrin(p0, q0, gamma0);
    if (*table) return run_nse_table();
    if (*dim) return run_dimension(dim_file, dim_scheme, dim_first, dim_levels, dim_scales);
    if (*pm) return run_premeasure(pm_file, pm_s, pm_eta);
    if (*sim) return run_simulate(sim_cfg, sim_ledger, sim_snapshot, sim_noise);
    if (*lt) return run_lifetime(life_cfg, life);
    if (*sg) return run_singular(sing_cfg, sing);
    if (*tc) return run_tail_check(tc_file, tc_threshold, tc_window, tc_bootstrap, tc_setting);
    if (*vn) return run_validate_noise(nf);
  } catch (const InvariantViolation& e) {
    std::cerr << "singtime: invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ConfigError& e) {
    std::cerr << "singtime: configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "singtime: invalid parameter: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "singtime: invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "singtime: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
