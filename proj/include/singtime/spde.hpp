#pragma once

// Pseudo-spectral solver for the Ito-form stochastic Navier-Stokes equations
// on the torus [0,1)^d with transport noise,
//
//   du = [nu Lap u - P div(S_eps u (x) u) + A u] dt + sum_n L_n u dW^n,
//   L_n u = P[(sigma_n . grad) u + mu_n u],   A u = 1/2 sum_n L_n L_n u,
//
// with an exact heat factor per step and a per-step energy ledger.
//
// Ledger convention (E is the squared L^2 norm, not half of it):
//   residual = E(t) - E(0) + 2 nu D_cum - 2 drift_cum - 2 mart_cum,
//   D_cum     = int_0^t ||grad u||^2 ds                 (exact for the heat factor)
//   drift_cum = sum over steps of dt sum_n <L_n u, S_n u>,  S_n = (mu_n + mu_n^T)/2
//   mart_cum  = sum over steps of sum_n dW^n int (mu_n u).u dx
// Drift work and martingale increments use the pre-step state.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "singtime/config.hpp"
#include "singtime/errors.hpp"
#include "singtime/noise.hpp"
#include "singtime/rng.hpp"
#include "singtime/spectral.hpp"

namespace singtime::spde {

using spectral::Complex;
using spectral::Grid;
using spectral::kTwoPi;
using spectral::VectorPhys;
using spectral::VectorSpec;

// ---------------------------------------------------------------------------
// Mode-wise operators

// (P f)_i(k) = f_i(k) - sum_j k_i k_j / |k|^2 f_j(k); k = 0 passes through.
inline void helmholtz_project(const Grid& g, VectorSpec& f) {
  const int d = f.d;
  for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
    const double k2 = g.k_squared(idx);
    if (k2 == 0.0) continue;
    const auto& k = g.wavevector(idx);
    Complex dot = 0.0;
    for (int c = 0; c < d; ++c) dot += static_cast<double>(k[c]) * f.component(c)[idx];
    const Complex scale = dot / k2;
    for (int c = 0; c < d; ++c) f.component(c)[idx] -= static_cast<double>(k[c]) * scale;
  }
}

inline VectorSpec helmholtz_projected(const Grid& g, VectorSpec f) {
  helmholtz_project(g, f);
  return f;
}

// Gaussian mollifier: mode k is multiplied by exp(-eps^2 4 pi^2 |k|^2).
inline void mollify(const Grid& g, VectorSpec& u, double eps) {
  if (!(eps >= 0.0)) throw ParameterError("mollify: eps must be >= 0");
  if (eps == 0.0) return;
  for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
    const double m = std::exp(-eps * eps * kTwoPi * kTwoPi * g.k_squared(idx));
    for (int c = 0; c < u.d; ++c) u.component(c)[idx] *= m;
  }
}

// ---------------------------------------------------------------------------
// Nonlinear and noise operators

class Operators {
public:
  Operators(const Grid& g, bool dealias, const noise::NoiseField* field = nullptr)
      : g_(g), dealias_(dealias) {
    if (field) {
      field_ = *field;
      sampled_ = noise::sample(*field, g);
    }
  }

  const Grid& grid() const { return g_; }
  bool dealias() const { return dealias_; }
  std::size_t field_count() const { return sampled_.fields; }
  bool has_mu() const { return !sampled_.mu.empty(); }

  // P div(S_eps u (x) u), masked to the retained modes.
  VectorSpec nonlinear_term(const VectorSpec& u, double eps) const {
    const int d = g_.dim();
    const std::size_t N = g_.real_size(), S = g_.spec_size();
    VectorSpec w = u;
    mollify(g_, w, eps);
    const VectorPhys wp = spectral::to_physical(g_, w);
    const VectorPhys up = spectral::to_physical(g_, u);
    VectorSpec out(g_);
    std::vector<double> prod(N);
    std::vector<Complex> hat(S);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto wi = wp.component(i);
        const auto uj = up.component(j);
        for (std::size_t p = 0; p < N; ++p) prod[p] = wi[p] * uj[p];
        g_.forward(prod, hat);
        auto oj = out.component(j);
        for (std::size_t idx = 0; idx < S; ++idx)
          oj[idx] += Complex(0.0, kTwoPi * g_.wavevector(idx)[i]) * hat[idx];
      }
    finish(out);
    return out;
  }

  // P[(sigma . grad) u + mu u] for given physical coefficient arrays
  // (sigma: d x N, mu: d x d x N or empty).
  VectorSpec transport(const VectorSpec& u, std::span<const double> sigma, std::span<const double> mu) const {
    const int d = g_.dim();
    const std::size_t N = g_.real_size(), S = g_.spec_size();
    std::vector<double> acc(static_cast<std::size_t>(d) * N, 0.0);
    std::vector<Complex> hat(S);
    std::vector<double> phys(N);
    for (int j = 0; j < d; ++j) {
      const auto uj = u.component(j);
      for (int i = 0; i < d; ++i) {
        const double* si = sigma.data() + static_cast<std::size_t>(i) * N;
        for (std::size_t idx = 0; idx < S; ++idx) hat[idx] = Complex(0.0, kTwoPi * g_.wavevector(idx)[i]) * uj[idx];
        g_.inverse(hat, phys);
        double* aj = acc.data() + static_cast<std::size_t>(j) * N;
        for (std::size_t p = 0; p < N; ++p) aj[p] += si[p] * phys[p];
      }
    }
    if (!mu.empty()) {
      const VectorPhys up = spectral::to_physical(g_, u);
      for (int i = 0; i < d; ++i) {
        double* ai = acc.data() + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < d; ++j) {
          const double* mij = mu.data() + (static_cast<std::size_t>(i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)) * N;
          const auto uj = up.component(j);
          for (std::size_t p = 0; p < N; ++p) ai[p] += mij[p] * uj[p];
        }
      }
    }
    VectorSpec out(g_);
    for (int c = 0; c < d; ++c) g_.forward({acc.data() + static_cast<std::size_t>(c) * N, N}, out.component(c));
    finish(out);
    return out;
  }

  // L_n u
  VectorSpec noise_operator_L(const VectorSpec& u, std::size_t n) const {
    check_index(n);
    const auto d = static_cast<std::size_t>(g_.dim());
    const std::size_t N = g_.real_size();
    std::span<const double> sigma(sampled_.sigma.data() + n * d * N, d * N);
    std::span<const double> mu;
    if (has_mu()) mu = {sampled_.mu.data() + n * d * d * N, d * d * N};
    return transport(u, sigma, mu);
  }

  // Coefficients of sum_n w_n L_n.
  std::pair<std::vector<double>, std::vector<double>> combined_coefficients(std::span<const double> weights) const {
    if (weights.size() != field_count()) throw ParameterError("combined_coefficients: one weight per noise field required");
    const auto d = static_cast<std::size_t>(g_.dim());
    const std::size_t N = g_.real_size();
    std::vector<double> sigma(d * N, 0.0), mu;
    if (has_mu()) mu.assign(d * d * N, 0.0);
    for (std::size_t n = 0; n < weights.size(); ++n) {
      const double w = weights[n];
      if (w == 0.0) continue;
      const double* s = sampled_.sigma.data() + n * d * N;
      for (std::size_t p = 0; p < d * N; ++p) sigma[p] += w * s[p];
      if (!mu.empty()) {
        const double* m = sampled_.mu.data() + n * d * d * N;
        for (std::size_t p = 0; p < d * d * N; ++p) mu[p] += w * m[p];
      }
    }
    return {std::move(sigma), std::move(mu)};
  }

  // A u = 1/2 sum_n L_n L_n u
  VectorSpec ito_correction(const VectorSpec& u) const {
    VectorSpec out(g_);
    for (std::size_t n = 0; n < field_count(); ++n) {
      const VectorSpec once = noise_operator_L(u, n);
      const VectorSpec twice = noise_operator_L(once, n);
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += 0.5 * twice.data[i];
    }
    return out;
  }

  // sum_n <L_n u, S_n u>_{L^2}; zero when mu = 0.
  double drift_work(const VectorSpec& u) const {
    if (!has_mu()) return 0.0;
    const auto d = static_cast<std::size_t>(g_.dim());
    const std::size_t N = g_.real_size();
    const VectorPhys up = spectral::to_physical(g_, u);
    double total = 0.0;
    for (std::size_t n = 0; n < field_count(); ++n) {
      const VectorPhys lp = spectral::to_physical(g_, noise_operator_L(u, n));
      const double* mu = sampled_.mu.data() + n * d * d * N;
      double acc = 0.0;
      for (std::size_t p = 0; p < N; ++p) {
        for (std::size_t i = 0; i < d; ++i) {
          double su = 0.0;
          for (std::size_t j = 0; j < d; ++j)
            su += 0.5 * (mu[(i * d + j) * N + p] + mu[(j * d + i) * N + p]) * up.data[j * N + p];
          acc += lp.data[i * N + p] * su;
        }
      }
      total += acc / static_cast<double>(N);
    }
    return total;
  }

  // sum_n dW^n int (mu_n u).u dx; zero when mu = 0.
  double martingale_increment(const VectorSpec& u, std::span<const double> dW) const {
    if (!has_mu()) return 0.0;
    const auto [sigma, mu] = combined_coefficients(dW);
    (void)sigma;
    const auto d = static_cast<std::size_t>(g_.dim());
    const std::size_t N = g_.real_size();
    const VectorPhys up = spectral::to_physical(g_, u);
    double acc = 0.0;
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) acc += up.data[i * N + p] * mu[(i * d + j) * N + p] * up.data[j * N + p];
    return acc / static_cast<double>(N);
  }

  // Mask to retained modes, then project.
  void finish(VectorSpec& f) const {
    spectral::apply_mask(g_, f, dealias_);
    helmholtz_project(g_, f);
  }

private:
  void check_index(std::size_t n) const {
    if (n >= field_count()) throw ParameterError("noise field index out of range");
  }

  const Grid& g_;
  bool dealias_;
  noise::NoiseField field_;
  noise::SampledNoise sampled_;
};

// Convenience wrappers with a throwaway operator set.
inline VectorSpec nonlinear_term(const Grid& g, const VectorSpec& u, double eps, bool dealias) {
  return Operators(g, dealias).nonlinear_term(u, eps);
}

inline VectorSpec noise_operator_L(const Grid& g, const VectorSpec& u, const noise::NoiseField& f, std::size_t n,
                                   bool dealias) {
  return Operators(g, dealias, &f).noise_operator_L(u, n);
}

inline VectorSpec ito_correction(const Grid& g, const VectorSpec& u, const noise::NoiseField& f, bool dealias) {
  return Operators(g, dealias, &f).ito_correction(u);
}

// ---------------------------------------------------------------------------
// Norms

enum class NormSpace { L2, Lq, Hs };

struct NormSpec {
  NormSpace space = NormSpace::L2;
  double q = 2.0;
  double s = 1.0;

  // Channel name used in trajectories and CSV headers.
  std::string label() const {
    switch (space) {
      case NormSpace::L2: return "L2";
      case NormSpace::Lq: return "Lq:" + config::format_real(q);
      case NormSpace::Hs: return "Hs:" + config::format_real(s);
    }
    return "?";
  }
};

inline NormSpace parse_norm_space(const std::string& s) {
  if (s == "L2") return NormSpace::L2;
  if (s == "Lq") return NormSpace::Lq;
  if (s == "Hs") return NormSpace::Hs;
  throw ConfigError("norm.space must be L2, Lq or Hs, got '" + s + "'");
}

inline double evaluate_norm(const Grid& g, const VectorSpec& u, const NormSpec& spec) {
  switch (spec.space) {
    case NormSpace::L2: return std::sqrt(spectral::norm_squared(g, u));
    case NormSpace::Hs: {
      double acc = 0.0;
      for (int c = 0; c < u.d; ++c) {
        const auto comp = u.component(c);
        for (std::size_t i = 0; i < g.spec_size(); ++i)
          acc += g.weight(i) * std::pow(1.0 + kTwoPi * kTwoPi * g.k_squared(i), spec.s) * std::norm(comp[i]);
      }
      return std::sqrt(acc);
    }
    case NormSpace::Lq: {
      const VectorPhys up = spectral::to_physical(g, u);
      double acc = 0.0;
      for (std::size_t p = 0; p < up.size; ++p) {
        double m2 = 0.0;
        for (int c = 0; c < u.d; ++c) m2 += up.component(c)[p] * up.component(c)[p];
        acc += std::pow(m2, 0.5 * spec.q);
      }
      return std::pow(acc / static_cast<double>(up.size), 1.0 / spec.q);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// State, initial data, snapshots

struct SpectralState {
  int d = 2;
  int n = 32;
  double t = 0.0;
  VectorSpec u_hat;
};

enum class InitialKind { taylor_green, random_shell, file };

struct InitialCondition {
  InitialKind kind = InitialKind::taylor_green;
  double amplitude = 1.0;
  std::uint64_t seed = 1;
  int k_lo = 1;
  int k_hi = 4;
  double slope = 1.0;  // shell spectrum |k|^-slope
  std::string path;
};

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::taylor_green: return "taylor_green";
    case InitialKind::random_shell: return "random_shell";
    case InitialKind::file: return "file";
  }
  return "?";
}

inline InitialKind parse_initial_kind(const std::string& s) {
  if (s == "taylor_green") return InitialKind::taylor_green;
  if (s == "random_shell") return InitialKind::random_shell;
  if (s == "file") return InitialKind::file;
  throw ConfigError("u0.kind must be taylor_green, random_shell or file, got '" + s + "'");
}

inline constexpr char kSnapshotMagic[16] = {'S', 'I', 'N', 'G', 'T', 'I', 'M', 'E', '-', 'S', 'T', 'A', 'T', 'E', '\0', '\0'};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ConfigError("snapshot: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

} // namespace detail

// Layout: 16-byte magic, u8 version (1), u32 d, u32 n, then for each component
// the half-spectrum coefficients as (re, im) float64 pairs, all little-endian.
inline void write_snapshot(std::ostream& out, const SpectralState& s) {
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  detail::put_le<std::uint8_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.d));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.n));
  for (const auto& c : s.u_hat.data) {
    detail::put_le<double>(out, c.real());
    detail::put_le<double>(out, c.imag());
  }
}

inline SpectralState read_snapshot(std::istream& in) {
  char magic[16];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0)
    throw ConfigError("snapshot: bad magic header");
  if (detail::get_le<std::uint8_t>(in) != 1) throw ConfigError("snapshot: unsupported version");
  SpectralState s;
  s.d = static_cast<int>(detail::get_le<std::uint32_t>(in));
  s.n = static_cast<int>(detail::get_le<std::uint32_t>(in));
  Grid g(s.d, s.n);
  s.u_hat = VectorSpec(g);
  for (auto& c : s.u_hat.data) {
    const double re = detail::get_le<double>(in);
    const double im = detail::get_le<double>(in);
    c = Complex(re, im);
  }
  return s;
}

inline SpectralState make_initial(const Grid& g, const InitialCondition& ic, bool dealias) {
  SpectralState s;
  s.d = g.dim();
  s.n = g.n();
  const std::size_t N = g.real_size();
  if (ic.kind == InitialKind::file) {
    std::ifstream in(ic.path, std::ios::binary);
    if (!in) throw ConfigError("cannot open initial-data snapshot '" + ic.path + "'");
    auto loaded = read_snapshot(in);
    if (loaded.d != s.d || loaded.n != s.n)
      throw ConfigError("snapshot grid (d=" + std::to_string(loaded.d) + ", n=" + std::to_string(loaded.n) +
                        ") does not match the configured grid");
    s.u_hat = std::move(loaded.u_hat);
  } else if (ic.kind == InitialKind::taylor_green) {
    VectorPhys u(g);
    for (std::size_t p = 0; p < N; ++p) {
      const double x = kTwoPi * g.coordinate(p, 0), y = kTwoPi * g.coordinate(p, 1);
      if (s.d == 2) {
        u.component(0)[p] = -ic.amplitude * std::cos(x) * std::sin(y);
        u.component(1)[p] = ic.amplitude * std::sin(x) * std::cos(y);
      } else {
        const double z = kTwoPi * g.coordinate(p, 2);
        u.component(0)[p] = ic.amplitude * std::sin(x) * std::cos(y) * std::cos(z);
        u.component(1)[p] = -ic.amplitude * std::cos(x) * std::sin(y) * std::cos(z);
        u.component(2)[p] = 0.0;
      }
    }
    s.u_hat = spectral::to_spectral(g, u);
  } else {
    if (ic.k_lo < 1 || ic.k_hi < ic.k_lo) throw ConfigError("random_shell: need 1 <= u0.k_lo <= u0.k_hi");
    if (!(ic.amplitude >= 0.0)) throw ConfigError("random_shell: amplitude must be >= 0");
    s.u_hat = VectorSpec(g);
    auto gen = rng::engine(ic.seed, 0);
    rng::Normal normal;
    for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
      const double kn = std::sqrt(g.k_squared(idx));
      const bool in_shell = kn >= ic.k_lo && kn <= ic.k_hi;
      for (int c = 0; c < s.d; ++c) {
        // Draw for every mode so the stream does not depend on the shell.
        const double re = normal(gen), im = normal(gen);
        if (in_shell) s.u_hat.component(c)[idx] = std::pow(kn, -ic.slope) * Complex(re, im);
      }
    }
    // Round trip through physical space restores Hermitian symmetry on the
    // self-conjugate planes.
    s.u_hat = spectral::to_spectral(g, spectral::to_physical(g, s.u_hat));
    for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
      const double kn = std::sqrt(g.k_squared(idx));
      if (kn >= ic.k_lo && kn <= ic.k_hi) continue;
      for (int c = 0; c < s.d; ++c) s.u_hat.component(c)[idx] = 0.0;
    }
  }
  spectral::apply_mask(g, s.u_hat, dealias);
  helmholtz_project(g, s.u_hat);
  if (ic.kind == InitialKind::random_shell) {
    const double norm = std::sqrt(spectral::norm_squared(g, s.u_hat));
    if (norm > 0.0)
      for (auto& c : s.u_hat.data) c *= ic.amplitude / norm;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Configuration

enum class Scheme { milstein, euler_maruyama };

inline std::string to_string(Scheme s) { return s == Scheme::milstein ? "milstein" : "euler_maruyama"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "milstein") return Scheme::milstein;
  if (s == "euler_maruyama") return Scheme::euler_maruyama;
  throw ConfigError("scheme must be milstein or euler_maruyama, got '" + s + "'");
}

// How the noise family is obtained (kept alongside the built field for provenance).
struct NoiseSpec {
  std::string kind = "none";  // none | kraichnan | file
  int k_max = 2;
  double gamma = 2.0 / 3.0;
  double amplitude = 0.1;
  std::uint64_t seed = 1;
  bool lie = false;
  std::string file;
};

struct SimConfig {
  int d = 2;
  int n = 32;
  double nu = 1.0;
  double dt = 1e-3;
  double t_end = 1.0;
  double mollifier_eps = 0.0;
  bool dealias = true;
  bool nonlinear = true;
  std::uint64_t seed = 1;
  int record_every = 1;
  NormSpec norm;
  Scheme scheme = Scheme::milstein;
  double blowup_factor = 1e6;
  NoiseSpec noise_spec;
  std::shared_ptr<const noise::NoiseField> noise;  // null: no noise
  InitialCondition u0;
};

inline void validate(const SimConfig& c) {
  if (c.d != 2 && c.d != 3) throw ConfigError("d must be 2 or 3");
  if (!spectral::is_power_of_two(c.n) || c.n < 4) throw ConfigError("n must be a power of two >= 4");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt must be positive");
  if (!(c.t_end >= 0.0) || !std::isfinite(c.t_end)) throw ConfigError("t_end must be >= 0");
  if (!(c.nu >= 0.0)) throw ConfigError("nu must be >= 0");
  if (!(c.mollifier_eps >= 0.0)) throw ConfigError("mollifier_eps must be >= 0");
  if (c.record_every < 1) throw ConfigError("record_every must be >= 1");
  if (!(c.blowup_factor > 1.0)) throw ConfigError("blowup_factor must exceed 1");
  if (c.norm.space == NormSpace::Lq && !(c.norm.q >= 1.0)) throw ConfigError("norm.q must be >= 1");
  if (c.noise && c.noise->d != c.d) throw ConfigError("noise dimension does not match d");
}

inline std::shared_ptr<const noise::NoiseField> build_noise(const NoiseSpec& ns, int d) {
  if (ns.kind == "none") return nullptr;
  noise::NoiseField f;
  if (ns.kind == "kraichnan") {
    f = noise::build_kraichnan(d, ns.k_max, ns.gamma, ns.amplitude, ns.seed);
  } else if (ns.kind == "file") {
    std::ifstream in(ns.file);
    if (!in) throw ConfigError("cannot open noise record '" + ns.file + "'");
    f = noise::read_noise(in);
  } else {
    throw ConfigError("noise.kind must be none, kraichnan or file, got '" + ns.kind + "'");
  }
  if (ns.lie && f.mu_mode == noise::MuMode::none) f = noise::build_lie(f);
  return std::make_shared<const noise::NoiseField>(std::move(f));
}

inline const std::set<std::string>& sim_config_keys() {
  static const std::set<std::string> keys = {
      "d", "n", "nu", "dt", "t_end", "mollifier_eps", "dealias", "nonlinear", "seed", "record_every",
      "scheme", "blowup_factor", "norm.space", "norm.q", "norm.s",
      "noise.kind", "noise.k_max", "noise.gamma", "noise.amplitude", "noise.seed", "noise.lie", "noise.file",
      "u0.kind", "u0.amplitude", "u0.seed", "u0.k_lo", "u0.k_hi", "u0.slope", "u0.file"};
  return keys;
}

// Reads the solver keys from `fc`; other keys are left for the caller to check.
inline SimConfig sim_config_from(const config::FlatConfig& fc) {
  SimConfig c;
  c.d = static_cast<int>(fc.get_int("d", c.d));
  c.n = static_cast<int>(fc.get_int("n", c.n));
  c.nu = fc.get_double("nu", c.nu);
  c.dt = fc.get_double("dt", c.dt);
  c.t_end = fc.get_double("t_end", c.t_end);
  c.mollifier_eps = fc.get_double("mollifier_eps", c.mollifier_eps);
  c.dealias = fc.get_bool("dealias", c.dealias);
  c.nonlinear = fc.get_bool("nonlinear", c.nonlinear);
  c.seed = fc.get_uint("seed", c.seed);
  c.record_every = static_cast<int>(fc.get_int("record_every", c.record_every));
  c.scheme = parse_scheme(fc.get_string("scheme", to_string(c.scheme)));
  c.blowup_factor = fc.get_double("blowup_factor", c.blowup_factor);
  c.norm.space = parse_norm_space(fc.get_string("norm.space", "L2"));
  c.norm.q = fc.get_double("norm.q", c.norm.q);
  c.norm.s = fc.get_double("norm.s", c.norm.s);

  c.noise_spec.kind = fc.get_string("noise.kind", c.noise_spec.kind);
  c.noise_spec.k_max = static_cast<int>(fc.get_int("noise.k_max", c.noise_spec.k_max));
  c.noise_spec.gamma = fc.get_double("noise.gamma", c.noise_spec.gamma);
  c.noise_spec.amplitude = fc.get_double("noise.amplitude", c.noise_spec.amplitude);
  c.noise_spec.seed = fc.get_uint("noise.seed", c.noise_spec.seed);
  c.noise_spec.lie = fc.get_bool("noise.lie", c.noise_spec.lie);
  c.noise_spec.file = fc.get_string("noise.file", c.noise_spec.file);

  c.u0.kind = parse_initial_kind(fc.get_string("u0.kind", to_string(c.u0.kind)));
  c.u0.amplitude = fc.get_double("u0.amplitude", c.u0.amplitude);
  c.u0.seed = fc.get_uint("u0.seed", c.seed);
  c.u0.k_lo = static_cast<int>(fc.get_int("u0.k_lo", c.u0.k_lo));
  c.u0.k_hi = static_cast<int>(fc.get_int("u0.k_hi", c.u0.k_hi));
  c.u0.slope = fc.get_double("u0.slope", c.u0.slope);
  c.u0.path = fc.get_string("u0.file", c.u0.path);

  validate(c);
  try {
    c.noise = build_noise(c.noise_spec, c.d);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  validate(c);
  return c;
}

// Resolved configuration as sorted key/value pairs (report provenance).
inline std::vector<std::pair<std::string, std::string>> describe(const SimConfig& c) {
  using config::format_real;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"d", std::to_string(c.d)},
      {"n", std::to_string(c.n)},
      {"nu", format_real(c.nu)},
      {"dt", format_real(c.dt)},
      {"t_end", format_real(c.t_end)},
      {"mollifier_eps", format_real(c.mollifier_eps)},
      {"dealias", c.dealias ? "true" : "false"},
      {"nonlinear", c.nonlinear ? "true" : "false"},
      {"seed", std::to_string(c.seed)},
      {"record_every", std::to_string(c.record_every)},
      {"scheme", to_string(c.scheme)},
      {"blowup_factor", format_real(c.blowup_factor)},
      {"norm.space", c.norm.space == NormSpace::L2 ? "L2" : c.norm.space == NormSpace::Lq ? "Lq" : "Hs"},
      {"norm.q", format_real(c.norm.q)},
      {"norm.s", format_real(c.norm.s)},
      {"noise.kind", c.noise_spec.kind},
      {"noise.k_max", std::to_string(c.noise_spec.k_max)},
      {"noise.gamma", format_real(c.noise_spec.gamma)},
      {"noise.amplitude", format_real(c.noise_spec.amplitude)},
      {"noise.seed", std::to_string(c.noise_spec.seed)},
      {"noise.lie", c.noise_spec.lie ? "true" : "false"},
      {"noise.file", c.noise_spec.file},
      {"u0.kind", to_string(c.u0.kind)},
      {"u0.amplitude", format_real(c.u0.amplitude)},
      {"u0.seed", std::to_string(c.u0.seed)},
      {"u0.k_lo", std::to_string(c.u0.k_lo)},
      {"u0.k_hi", std::to_string(c.u0.k_hi)},
      {"u0.slope", format_real(c.u0.slope)},
      {"u0.file", c.u0.path},
  };
  std::sort(kv.begin(), kv.end());
  return kv;
}

// ---------------------------------------------------------------------------
// Time stepping

struct LedgerRow {
  std::size_t step = 0;
  double t = 0.0;
  double E = 0.0;
  double D_cum = 0.0;
  double drift_cum = 0.0;
  double mart_cum = 0.0;
  double residual = 0.0;
  double norm = 0.0;
};

struct BlowUp {
  std::size_t step = 0;
  double t = 0.0;
  std::string reason;
};

struct SimulationResult {
  std::string norm_channel;
  std::vector<LedgerRow> ledger;
  SpectralState final_state;
  std::optional<BlowUp> blowup;
  double max_divergence_residual = 0.0;
};

// Supplies dW for step `step` (1-based): one entry per noise field, variance dt.
using IncrementSource = std::function<void(std::size_t step, std::span<double> dW)>;

// Gaussian increments drawn from the config seed.
inline IncrementSource gaussian_increments(std::uint64_t seed, double dt) {
  auto gen = std::make_shared<std::mt19937_64>(rng::sub_seed(seed, 0));
  auto normal = std::make_shared<rng::Normal>();
  const double scale = std::sqrt(dt);
  return [gen, normal, scale](std::size_t, std::span<double> dW) {
    for (auto& w : dW) w = scale * (*normal)(*gen);
  };
}

// A Brownian path fixed on a fine grid; coarse increments are sums of
// consecutive fine increments, added pairwise.
class BrownianPath {
public:
  BrownianPath(std::size_t fields, std::size_t fine_steps, double fine_dt, std::uint64_t seed)
      : fields_(fields), fine_steps_(fine_steps), increments_(fields * fine_steps) {
    auto gen = rng::engine(seed, 0);
    rng::Normal normal;
    const double scale = std::sqrt(fine_dt);
    for (auto& w : increments_) w = scale * normal(gen);
  }

  // Increments for coarse step `step` (1-based) of size `factor` fine steps.
  IncrementSource coarse(std::size_t factor) const {
    if (factor == 0 || (factor & (factor - 1)) != 0) throw ParameterError("BrownianPath: factor must be a power of two");
    return [this, factor](std::size_t step, std::span<double> dW) {
      const std::size_t first = (step - 1) * factor;
      if (first + factor > fine_steps_) throw ParameterError("BrownianPath: path exhausted");
      std::vector<double> buf(factor);
      for (std::size_t f = 0; f < fields_; ++f) {
        for (std::size_t i = 0; i < factor; ++i) buf[i] = increments_[(first + i) * fields_ + f];
        for (std::size_t width = factor; width > 1; width /= 2)
          for (std::size_t i = 0; i < width / 2; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
        dW[f] = buf[0];
      }
    };
  }

private:
  std::size_t fields_;
  std::size_t fine_steps_;
  std::vector<double> increments_;
};

class Solver {
public:
  explicit Solver(const SimConfig& c) : cfg_(c), grid_(c.d, c.n), ops_(grid_, c.dealias, c.noise.get()) {
    validate(c);
  }
  Solver(const Solver&) = delete;
  Solver& operator=(const Solver&) = delete;

  const Grid& grid() const { return grid_; }
  const Operators& operators() const { return ops_; }
  const SimConfig& config() const { return cfg_; }

  SpectralState initial_state() const { return make_initial(grid_, cfg_.u0, cfg_.dealias); }

  struct StepOutcome {
    double D_inc = 0.0;
    double drift_inc = 0.0;
    double mart_inc = 0.0;
  };

  // Advances `u` by one step with the given increments.
  StepOutcome step(VectorSpec& u, std::span<const double> dW) const {
    StepOutcome out;
    const double dt = cfg_.dt;
    VectorSpec v = u;
    if (cfg_.nonlinear) {
      const VectorSpec nl = ops_.nonlinear_term(u, cfg_.mollifier_eps);
      for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] -= dt * nl.data[i];
    }
    if (ops_.field_count() > 0) {
      out.drift_inc = dt * ops_.drift_work(u);
      out.mart_inc = ops_.martingale_increment(u, dW);
      const auto [sigma, mu] = ops_.combined_coefficients(dW);
      const VectorSpec bu = ops_.transport(u, sigma, mu);
      if (cfg_.scheme == Scheme::milstein) {
        // u + B u + B B u / 2: the Ito correction cancels the diagonal of the
        // second-order term, leaving only the product of increments.
        const VectorSpec bbu = ops_.transport(bu, sigma, mu);
        for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += bu.data[i] + 0.5 * bbu.data[i];
      } else {
        const VectorSpec au = ops_.ito_correction(u);
        for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += dt * au.data[i] + bu.data[i];
      }
    }
    ops_.finish(v);

    // Exact heat factor; D_inc = int_0^dt ||grad e^{s nu Lap} v||^2 ds.
    for (std::size_t idx = 0; idx < grid_.spec_size(); ++idx) {
      const double k2 = kTwoPi * kTwoPi * grid_.k_squared(idx);
      const double lambda = cfg_.nu * k2;
      const double factor = std::exp(-lambda * dt);
      const double window = lambda > 0.0 ? -std::expm1(-2.0 * lambda * dt) / (2.0 * lambda) : dt;
      double mag = 0.0;
      for (int c = 0; c < v.d; ++c) {
        auto& z = v.component(c)[idx];
        mag += std::norm(z);
        z *= factor;
      }
      out.D_inc += grid_.weight(idx) * k2 * window * mag;
    }
    u = std::move(v);
    return out;
  }

  SimulationResult run(const IncrementSource& increments) const { return run(initial_state(), increments); }

  SimulationResult run() const { return run(gaussian_increments(cfg_.seed, cfg_.dt)); }

  SimulationResult run(SpectralState state, const IncrementSource& increments) const {
    SimulationResult res;
    res.norm_channel = cfg_.norm.label();
    const double nu = cfg_.nu;
    const double E0 = spectral::norm_squared(grid_, state.u_hat);
    const double ceiling = cfg_.blowup_factor * std::sqrt(E0);
    double D = 0.0, drift = 0.0, mart = 0.0;
    auto row = [&](std::size_t step, double t, double E, double norm) {
      return LedgerRow{step, t, E, D, drift, mart, E - E0 + 2.0 * nu * D - 2.0 * drift - 2.0 * mart, norm};
    };
    res.ledger.push_back(row(0, state.t, E0, evaluate_norm(grid_, state.u_hat, cfg_.norm)));

    const auto steps = static_cast<std::size_t>(std::llround(cfg_.t_end / cfg_.dt));
    const double t0 = state.t;
    std::vector<double> dW(ops_.field_count(), 0.0);
    for (std::size_t s = 1; s <= steps; ++s) {
      if (!dW.empty()) increments(s, dW);
      const auto inc = step(state.u_hat, dW);
      D += inc.D_inc;
      drift += inc.drift_inc;
      mart += inc.mart_inc;
      state.t = t0 + static_cast<double>(s) * cfg_.dt;
      const double E = spectral::norm_squared(grid_, state.u_hat);
      const bool finite = std::isfinite(E) && std::isfinite(D) && std::isfinite(drift) && std::isfinite(mart);
      if (!finite || (E0 > 0.0 && std::sqrt(E) > ceiling)) {
        res.blowup = BlowUp{s, state.t, finite ? "L2 norm exceeded blow-up ceiling" : "non-finite value"};
        res.ledger.push_back(row(s, state.t, E, std::numeric_limits<double>::infinity()));
        break;
      }
      res.max_divergence_residual = std::max(res.max_divergence_residual, spectral::divergence_residual(grid_, state.u_hat));
      if (res.max_divergence_residual > 1e-10)
        throw InvariantViolation("divergence residual " + std::to_string(res.max_divergence_residual) +
                                 " exceeds 1e-10 at step " + std::to_string(s));
      if (s % static_cast<std::size_t>(cfg_.record_every) == 0 || s == steps)
        res.ledger.push_back(row(s, state.t, E, evaluate_norm(grid_, state.u_hat, cfg_.norm)));
    }
    res.final_state = std::move(state);
    return res;
  }

private:
  SimConfig cfg_;
  Grid grid_;
  Operators ops_;
};

inline SimulationResult simulate(const SimConfig& c) { return Solver(c).run(); }

inline SimulationResult simulate(const SimConfig& c, const IncrementSource& increments) {
  return Solver(c).run(increments);
}

// CSV: '#' provenance lines, then t,E,D_cum,drift_cum,mart_cum,residual,<norm>.
inline std::string ledger_csv(const SimConfig& c, const SimulationResult& r) {
  using config::format_real;
  std::string out = "# singtime simulate\n";
  for (const auto& [k, v] : describe(c)) out += "# " + k + " = " + v + "\n";
  if (r.blowup)
    out += "# blowup step = " + std::to_string(r.blowup->step) + ", t = " + format_real(r.blowup->t) + " (" +
           r.blowup->reason + ")\n";
  out += "t,E,D_cum,drift_cum,mart_cum,residual,norm_" + r.norm_channel + "\n";
  for (const auto& row : r.ledger) {
    out += format_real(row.t) + "," + format_real(row.E) + "," + format_real(row.D_cum) + "," +
           format_real(row.drift_cum) + "," + format_real(row.mart_cum) + "," + format_real(row.residual) + "," +
           format_real(row.norm) + "\n";
  }
  return out;
}

} // namespace singtime::spde
