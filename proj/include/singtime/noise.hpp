#pragma once

// Transport-noise coefficient families (sigma_n, mu_n) on the torus.
//
// A NoiseField is a finite list of modes (k, e, a). Mode m contributes two
// real vector fields:
//   sigma_{2m}(x)   = a e cos(2 pi k.x)
//   sigma_{2m+1}(x) = a e sin(2 pi k.x)
// With mu_mode = lie, mu_n = grad sigma_n, stored as the matrix
// (mu_n)_{ij} = d_j (sigma_n)_i and applied as (mu_n u)_i = sum_j (mu_n)_{ij} u_j.
// The k = 0 mode is allowed and gives a constant field (its sine partner is zero).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "singtime/errors.hpp"
#include "singtime/rng.hpp"
#include "singtime/spectral.hpp"

namespace singtime::noise {

using spectral::kTwoPi;
using Vec3 = std::array<double, 3>;

enum class MuMode { none, lie };

inline std::string to_string(MuMode m) { return m == MuMode::none ? "none" : "lie"; }

inline MuMode parse_mu_mode(const std::string& s) {
  if (s == "none") return MuMode::none;
  if (s == "lie") return MuMode::lie;
  throw ParameterError("mu_mode must be 'none' or 'lie', got '" + s + "'");
}

struct NoiseMode {
  spectral::Wavevector k{0, 0, 0};
  Vec3 e{0.0, 0.0, 0.0};  // unit polarization, e.k = 0
  double amplitude = 0.0;

  bool operator==(const NoiseMode&) const = default;
};

struct NoiseField {
  int d = 2;
  std::vector<NoiseMode> modes;
  double gamma = 1.0;
  MuMode mu_mode = MuMode::none;
  double M_bound = 0.0;
  bool kolmogorov_surrogate = false;

  std::size_t field_count() const { return 2 * modes.size(); }
  bool operator==(const NoiseField&) const = default;
};

inline double k_norm(const spectral::Wavevector& k) {
  return std::sqrt(static_cast<double>(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
}

// Analytic bound on ||(sigma_n)_n||_{C^gamma(T^d; l^2)}, gamma capped at 1:
//   sqrt(sum a^2) + sqrt(sum a^2 4^{1-g} (2 pi |k|)^{2g}).
// The second term bounds the Hoelder seminorm via
// |e^{i t} - 1| <= 2^{1-g} |t|^g, applied to each cos/sin pair.
inline double compute_m_bound(const NoiseField& f) {
  const double g = std::min(f.gamma, 1.0);
  double sup = 0.0, semi = 0.0;
  for (const auto& m : f.modes) {
    const double a2 = m.amplitude * m.amplitude;
    sup += a2;
    semi += a2 * std::pow(4.0, 1.0 - g) * std::pow(kTwoPi * k_norm(m.k), 2.0 * g);
  }
  return std::sqrt(sup) + std::sqrt(semi);
}

namespace detail {

inline Vec3 normalize(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// One representative per +/-k pair: first nonzero component positive.
inline bool canonical(const spectral::Wavevector& k, int d) {
  for (int a = 0; a < d; ++a) {
    if (k[a] > 0) return true;
    if (k[a] < 0) return false;
  }
  return false;
}

} // namespace detail

// Isotropic divergence-free shell family: every 0 < |k| <= k_max up to sign,
// d-1 polarizations, amplitude * |k|^{-(gamma + d/2)}, mu = 0. In 3-D the
// orthonormal polarization pair of each wavevector is rotated by a seeded angle.
inline NoiseField build_kraichnan(int d, int k_max, double gamma, double amplitude, std::uint64_t seed) {
  if (d != 2 && d != 3) throw ParameterError("build_kraichnan: d must be 2 or 3");
  if (k_max < 1) throw ParameterError("build_kraichnan: k_max must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("build_kraichnan: gamma must be positive");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    throw ParameterError("build_kraichnan: amplitude must be >= 0");

  std::vector<spectral::Wavevector> ks;
  const int zr = d == 3 ? k_max : 0;
  for (int i = -k_max; i <= k_max; ++i)
    for (int j = -k_max; j <= k_max; ++j)
      for (int l = -zr; l <= zr; ++l) {
        const spectral::Wavevector k{i, j, l};
        if (i * i + j * j + l * l > k_max * k_max || !detail::canonical(k, d)) continue;
        ks.push_back(k);
      }
  std::sort(ks.begin(), ks.end(), [](const auto& a, const auto& b) {
    const int na = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    const int nb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    return na != nb ? na < nb : a < b;
  });

  NoiseField f;
  f.d = d;
  f.gamma = gamma;
  f.mu_mode = MuMode::none;
  f.kolmogorov_surrogate = std::abs(gamma - 2.0 / 3.0) < 1e-12;
  const double decay = gamma + 0.5 * d;
  for (std::size_t idx = 0; idx < ks.size(); ++idx) {
    const auto& k = ks[idx];
    const double kn = k_norm(k);
    const double a = amplitude * std::pow(kn, -decay);
    if (d == 2) {
      f.modes.push_back({k, {-k[1] / kn, k[0] / kn, 0.0}, a});
      continue;
    }
    const Vec3 khat{k[0] / kn, k[1] / kn, k[2] / kn};
    int axis = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(khat[c]) < std::abs(khat[axis])) axis = c;
    Vec3 ref{0.0, 0.0, 0.0};
    ref[axis] = 1.0;
    const double proj = ref[0] * khat[0] + ref[1] * khat[1] + ref[2] * khat[2];
    const Vec3 e1 = detail::normalize({ref[0] - proj * khat[0], ref[1] - proj * khat[1], ref[2] - proj * khat[2]});
    const Vec3 e2 = detail::cross(khat, e1);
    auto gen = rng::engine(seed, idx);
    const double theta = kTwoPi * rng::Normal::uniform(gen);
    const double c = std::cos(theta), s = std::sin(theta);
    Vec3 r1{}, r2{};
    for (int q = 0; q < 3; ++q) {
      r1[q] = c * e1[q] + s * e2[q];
      r2[q] = -s * e1[q] + c * e2[q];
    }
    f.modes.push_back({k, r1, a});
    f.modes.push_back({k, r2, a});
  }
  f.M_bound = compute_m_bound(f);
  return f;
}

// Copy of `base` with mu_n = grad sigma_n.
inline NoiseField build_lie(const NoiseField& base) {
  if (base.mu_mode != MuMode::none) throw ParameterError("build_lie: base field already carries mu_n = grad sigma_n");
  NoiseField out = base;
  out.mu_mode = MuMode::lie;
  return out;
}

// ---------------------------------------------------------------------------
// Grid sampling

// Coefficient fields sampled on an n^d grid.
// sigma[(f * d + i) * N + p] = (sigma_f)_i(x_p)
// mu[((f * d + i) * d + j) * N + p] = (mu_f)_{ij}(x_p), empty when mu = 0.
struct SampledNoise {
  int d = 0;
  std::size_t points = 0;
  std::size_t fields = 0;
  std::vector<double> sigma;
  std::vector<double> mu;

  const double* sigma_component(std::size_t f, int i) const {
    return sigma.data() + (f * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)) * points;
  }
  const double* mu_entry(std::size_t f, int i, int j) const {
    return mu.data() + ((f * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)) * static_cast<std::size_t>(d) +
                        static_cast<std::size_t>(j)) *
                           points;
  }
};

inline SampledNoise sample(const NoiseField& f, const spectral::Grid& g) {
  if (f.d != g.dim()) throw ParameterError("noise field dimension does not match the grid");
  const int n = g.n();
  for (const auto& m : f.modes)
    for (int a = 0; a < f.d; ++a)
      if (std::abs(m.k[a]) >= n / 2)
        throw ParameterError("noise mode |k_a| >= n/2 is not resolved on a grid with n = " + std::to_string(n));

  SampledNoise s;
  s.d = f.d;
  s.points = g.real_size();
  s.fields = f.field_count();
  const std::size_t N = s.points;
  const auto d = static_cast<std::size_t>(f.d);
  s.sigma.assign(s.fields * d * N, 0.0);
  if (f.mu_mode == MuMode::lie) s.mu.assign(s.fields * d * d * N, 0.0);

  // Integer phase table: 2 pi r / n for r = k.i mod n keeps samples exactly periodic.
  std::vector<double> cos_t(static_cast<std::size_t>(n)), sin_t(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    cos_t[static_cast<std::size_t>(r)] = std::cos(kTwoPi * r / n);
    sin_t[static_cast<std::size_t>(r)] = std::sin(kTwoPi * r / n);
  }
  std::vector<std::array<int, 3>> idx(N);
  for (std::size_t p = 0; p < N; ++p)
    for (int a = 0; a < f.d; ++a) idx[p][static_cast<std::size_t>(a)] = static_cast<int>(std::lround(g.coordinate(p, a) * n));

  for (std::size_t m = 0; m < f.modes.size(); ++m) {
    const auto& mode = f.modes[m];
    const std::size_t fc = 2 * m, fs = 2 * m + 1;
    for (std::size_t p = 0; p < N; ++p) {
      long phase = 0;
      for (int a = 0; a < f.d; ++a) phase += static_cast<long>(mode.k[a]) * idx[p][static_cast<std::size_t>(a)];
      const auto r = static_cast<std::size_t>(((phase % n) + n) % n);
      const double c = cos_t[r], sn = sin_t[r];
      for (std::size_t i = 0; i < d; ++i) {
        s.sigma[(fc * d + i) * N + p] = mode.amplitude * mode.e[i] * c;
        s.sigma[(fs * d + i) * N + p] = mode.amplitude * mode.e[i] * sn;
        if (s.mu.empty()) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const double gk = kTwoPi * mode.amplitude * mode.e[i] * mode.k[j];
          s.mu[((fc * d + i) * d + j) * N + p] = -gk * sn;
          s.mu[((fs * d + i) * d + j) * N + p] = gk * c;
        }
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Validation

struct NoiseReport {
  int grid_n = 0;
  double sup_l2_squared = 0.0;     // max_x sum_n |sigma_n(x)|^2
  double l2_variation = 0.0;       // (max - min)/max of sum_n |sigma_n(x)|^2
  double holder_seminorm = 0.0;    // finite-difference estimate at dyadic separations
  double c_gamma_estimate = 0.0;   // sqrt(sup) + seminorm
  double M_bound = 0.0;
  double divergence_residual = 0.0;
  std::optional<double> lie_residual;
  bool holder_is_estimate = true;
};

// Grid check of the noise assumptions. Throws InvariantViolation when the
// spectral divergence exceeds 1e-12 (relative), when the C^gamma estimate
// exceeds M_bound, or when stored mu_n disagrees with spectral grad sigma_n.
inline NoiseReport validate(const NoiseField& f, int grid_n) {
  if (!spectral::is_power_of_two(grid_n)) throw ParameterError("validate: grid_n must be a power of two");
  spectral::Grid g(f.d, grid_n);
  const auto s = sample(f, g);
  const std::size_t N = s.points;
  const auto d = static_cast<std::size_t>(f.d);

  NoiseReport rep;
  rep.grid_n = grid_n;
  rep.M_bound = f.M_bound;

  std::vector<double> l2(N, 0.0);
  for (std::size_t fi = 0; fi < s.fields; ++fi)
    for (std::size_t i = 0; i < d; ++i) {
      const double* c = s.sigma.data() + (fi * d + i) * N;
      for (std::size_t p = 0; p < N; ++p) l2[p] += c[p] * c[p];
    }
  const auto [mn, mx] = std::minmax_element(l2.begin(), l2.end());
  rep.sup_l2_squared = *mx;
  rep.l2_variation = *mx > 0.0 ? (*mx - *mn) / *mx : 0.0;

  // Hoelder quotient along each axis at separations 2^j / n.
  const double gexp = std::min(f.gamma, 1.0);
  const int n = grid_n;
  for (int axis = 0; axis < f.d; ++axis) {
    std::size_t stride = 1;
    for (int a = f.d - 1; a > axis; --a) stride *= static_cast<std::size_t>(n);
    for (int shift = 1; shift < n; shift *= 2) {
      const double h = static_cast<double>(shift) / n;
      for (std::size_t p = 0; p < N; ++p) {
        const std::size_t coord = (p / stride) % static_cast<std::size_t>(n);
        const std::size_t q = p - coord * stride + ((coord + static_cast<std::size_t>(shift)) % static_cast<std::size_t>(n)) * stride;
        double acc = 0.0;
        for (std::size_t fi = 0; fi < s.fields; ++fi)
          for (std::size_t i = 0; i < d; ++i) {
            const double* c = s.sigma.data() + (fi * d + i) * N;
            const double diff = c[q] - c[p];
            acc += diff * diff;
          }
        rep.holder_seminorm = std::max(rep.holder_seminorm, std::sqrt(acc) / std::pow(h, gexp));
      }
    }
  }
  rep.c_gamma_estimate = std::sqrt(rep.sup_l2_squared) + rep.holder_seminorm;

  // Spectral divergence of each sampled field.
  std::vector<spectral::Complex> hat(d * g.spec_size());
  std::vector<spectral::Complex> dhat(g.spec_size());
  std::vector<double> phys(N);
  double div_num = 0.0, div_den = 0.0;
  double lie_num = 0.0, lie_den = 0.0;
  for (std::size_t fi = 0; fi < s.fields; ++fi) {
    for (std::size_t i = 0; i < d; ++i)
      g.forward({s.sigma.data() + (fi * d + i) * N, N}, {hat.data() + i * g.spec_size(), g.spec_size()});
    for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
      const auto& k = g.wavevector(idx);
      spectral::Complex dot = 0.0;
      double mag = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        dot += static_cast<double>(k[i]) * hat[i * g.spec_size() + idx];
        mag += std::norm(hat[i * g.spec_size() + idx]);
      }
      div_num = std::max(div_num, std::abs(dot));
      div_den = std::max(div_den, std::sqrt(g.k_squared(idx) * mag));
    }
    if (s.mu.empty()) continue;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const auto* comp = hat.data() + i * g.spec_size();
        for (std::size_t idx = 0; idx < g.spec_size(); ++idx)
          dhat[idx] = spectral::Complex(0.0, kTwoPi * g.wavevector(idx)[j]) * comp[idx];
        g.inverse(dhat, phys);
        const double* stored = s.mu.data() + ((fi * d + i) * d + j) * N;
        for (std::size_t p = 0; p < N; ++p) {
          lie_num = std::max(lie_num, std::abs(phys[p] - stored[p]));
          lie_den = std::max(lie_den, std::abs(stored[p]));
        }
      }
  }
  rep.divergence_residual = div_den > 0.0 ? div_num / div_den : 0.0;
  if (f.mu_mode == MuMode::lie) rep.lie_residual = lie_den > 0.0 ? lie_num / lie_den : lie_num;

  if (!(rep.divergence_residual <= 1e-12))
    throw InvariantViolation("noise validate: divergence residual " + std::to_string(rep.divergence_residual) +
                             " exceeds 1e-12 (sigma_n must satisfy k . sigma_hat_n(k) = 0)");
  if (!(rep.c_gamma_estimate <= f.M_bound * (1.0 + 1e-9) + 1e-300))
    throw InvariantViolation("noise validate: C^gamma estimate " + std::to_string(rep.c_gamma_estimate) +
                             " exceeds M_bound " + std::to_string(f.M_bound));
  if (rep.lie_residual && !(*rep.lie_residual <= 1e-10))
    throw InvariantViolation("noise validate: mu_n differs from grad sigma_n (residual " +
                             std::to_string(*rep.lie_residual) + ")");
  return rep;
}

inline nlohmann::ordered_json to_json(const NoiseReport& r) {
  nlohmann::ordered_json j;
  j["grid_n"] = r.grid_n;
  j["sup_l2_squared"] = r.sup_l2_squared;
  j["l2_variation"] = r.l2_variation;
  j["holder_seminorm_estimate"] = r.holder_seminorm;
  j["c_gamma_estimate"] = r.c_gamma_estimate;
  j["M_bound"] = r.M_bound;
  j["divergence_residual"] = r.divergence_residual;
  if (r.lie_residual)
    j["lie_residual"] = *r.lie_residual;
  else
    j["lie_residual"] = nullptr;
  j["holder_is_estimate"] = r.holder_is_estimate;
  return j;
}

// ---------------------------------------------------------------------------
// Text record
//
//   singtime-noise 1
//   d <d>
//   gamma <g>
//   mu_mode none|lie
//   M_bound <M>
//   kolmogorov_surrogate 0|1
//   modes <count>
//   k_1 .. k_d e_1 .. e_d a        (one line per mode)
//
// Reals are written with 17 significant digits and round-trip exactly.

inline void write_noise(std::ostream& out, const NoiseField& f) {
  std::ostringstream s;
  s.precision(17);
  s << "singtime-noise 1\n";
  s << "d " << f.d << '\n';
  s << "gamma " << f.gamma << '\n';
  s << "mu_mode " << to_string(f.mu_mode) << '\n';
  s << "M_bound " << f.M_bound << '\n';
  s << "kolmogorov_surrogate " << (f.kolmogorov_surrogate ? 1 : 0) << '\n';
  s << "modes " << f.modes.size() << '\n';
  for (const auto& m : f.modes) {
    for (int a = 0; a < f.d; ++a) s << m.k[a] << ' ';
    for (int a = 0; a < f.d; ++a) s << m.e[a] << ' ';
    s << m.amplitude << '\n';
  }
  out << s.str();
}

inline NoiseField read_noise(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw ConfigError("noise record: " + what); };
  auto expect = [&](const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key) fail("expected key '" + key + "'");
  };
  NoiseField f;
  int version = 0;
  expect("singtime-noise");
  if (!(in >> version) || version != 1) fail("unsupported version");
  expect("d");
  if (!(in >> f.d) || (f.d != 2 && f.d != 3)) fail("d must be 2 or 3");
  expect("gamma");
  if (!(in >> f.gamma)) fail("bad gamma");
  expect("mu_mode");
  std::string mm;
  in >> mm;
  try {
    f.mu_mode = parse_mu_mode(mm);
  } catch (const ParameterError& e) {
    fail(e.what());
  }
  expect("M_bound");
  if (!(in >> f.M_bound)) fail("bad M_bound");
  expect("kolmogorov_surrogate");
  int kol = 0;
  if (!(in >> kol)) fail("bad kolmogorov_surrogate");
  f.kolmogorov_surrogate = kol != 0;
  expect("modes");
  std::size_t count = 0;
  if (!(in >> count)) fail("bad mode count");
  for (std::size_t m = 0; m < count; ++m) {
    NoiseMode mode;
    for (int a = 0; a < f.d; ++a)
      if (!(in >> mode.k[a])) fail("truncated mode list");
    for (int a = 0; a < f.d; ++a)
      if (!(in >> mode.e[a])) fail("truncated mode list");
    if (!(in >> mode.amplitude)) fail("truncated mode list");
    f.modes.push_back(mode);
  }
  return f;
}

} // namespace singtime::noise
