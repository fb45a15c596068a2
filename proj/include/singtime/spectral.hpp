#pragma once

// Periodic spectral grid on the unit torus T^d = [0,1)^d, d in {2,3}.
//
// Real fields live on n^d points, spectral fields in the real-to-complex
// half layout (last axis keeps 0..n/2). Coefficients are normalised so that
// u(x) = sum_k u_hat(k) exp(2 pi i k.x); Hermitian symmetry is implicit in
// the layout. Vector fields store components contiguously:
// [component][index].

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <fftw3.h>

#include "singtime/errors.hpp"

namespace singtime::spectral {

using Complex = std::complex<double>;
using Wavevector = std::array<int, 3>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW's planner is not re-entrant; plan creation and destruction go through this lock.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

class Grid {
public:
  Grid(int d, int n) : d_(d), n_(n) {
    if (d != 2 && d != 3) throw ParameterError("Grid: dimension must be 2 or 3");
    if (!is_power_of_two(n) || n < 4) throw ParameterError("Grid: n must be a power of two >= 4");
    real_size_ = 1;
    for (int i = 0; i < d; ++i) real_size_ *= static_cast<std::size_t>(n);
    spec_size_ = real_size_ / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
    dealias_cut_ = n / 3;

    wavevectors_.resize(spec_size_);
    weights_.resize(spec_size_);
    ksq_.resize(spec_size_);
    nyquist_.resize(spec_size_);
    const int half = n / 2 + 1;
    auto fold = [n](int i) { return i <= n / 2 ? i : i - n; };
    for (std::size_t idx = 0; idx < spec_size_; ++idx) {
      Wavevector k{0, 0, 0};
      std::size_t rest = idx;
      const int last = static_cast<int>(rest % static_cast<std::size_t>(half));
      rest /= static_cast<std::size_t>(half);
      if (d == 2) {
        k[0] = fold(static_cast<int>(rest));
        k[1] = last;
      } else {
        k[1] = fold(static_cast<int>(rest % static_cast<std::size_t>(n)));
        k[0] = fold(static_cast<int>(rest / static_cast<std::size_t>(n)));
        k[2] = last;
      }
      wavevectors_[idx] = k;
      weights_[idx] = (last == 0 || last == n / 2) ? 1.0 : 2.0;
      ksq_[idx] = static_cast<double>(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
      bool nyq = false;
      for (int a = 0; a < d; ++a) nyq = nyq || std::abs(k[a]) == n / 2;
      nyquist_[idx] = nyq;
    }

    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    std::vector<int> dims(static_cast<std::size_t>(d), n);
    auto* rbuf = fftw_alloc_real(real_size_);
    auto* cbuf = fftw_alloc_complex(spec_size_);
    forward_ = fftw_plan_dft_r2c(d, dims.data(), rbuf, cbuf, FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_ = fftw_plan_dft_c2r(d, dims.data(), cbuf, rbuf, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(rbuf);
    fftw_free(cbuf);
    if (!forward_ || !inverse_) throw InvariantViolation("Grid: FFTW planning failed");
  }

  Grid(const Grid& other) : Grid(other.d_, other.n_) {}
  Grid& operator=(const Grid&) = delete;

  ~Grid() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
  }

  int dim() const { return d_; }
  int n() const { return n_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t spec_size() const { return spec_size_; }
  int dealias_cut() const { return dealias_cut_; }

  const Wavevector& wavevector(std::size_t idx) const { return wavevectors_[idx]; }
  double k_squared(std::size_t idx) const { return ksq_[idx]; }
  // Multiplicity of a stored mode in the full spectrum (Parseval weight).
  double weight(std::size_t idx) const { return weights_[idx]; }
  bool nyquist(std::size_t idx) const { return nyquist_[idx]; }

  // Modes kept by the solver: never Nyquist; with dealiasing, |k_a| <= n/3 on every axis.
  bool retained(std::size_t idx, bool dealias) const {
    if (nyquist_[idx]) return false;
    if (!dealias) return true;
    const auto& k = wavevectors_[idx];
    for (int a = 0; a < d_; ++a)
      if (std::abs(k[a]) > dealias_cut_) return false;
    return true;
  }

  // Storage index of wavevector k; `conjugate` is set when k is stored as -k.
  struct ModeRef {
    std::size_t index;
    bool conjugate;
  };
  std::optional<ModeRef> find(Wavevector k) const {
    bool conj = false;
    const int lastaxis = d_ - 1;
    if (k[lastaxis] < 0) {
      for (auto& c : k) c = -c;
      conj = true;
    }
    for (int a = 0; a < d_; ++a)
      if (k[a] < -n_ / 2 || k[a] > n_ / 2) return std::nullopt;
    auto wrap = [this](int v) { return static_cast<std::size_t>(v < 0 ? v + n_ : v); };
    const auto half = static_cast<std::size_t>(n_ / 2 + 1);
    std::size_t idx = 0;
    if (d_ == 2)
      idx = wrap(k[0]) * half + static_cast<std::size_t>(k[1]);
    else
      idx = (wrap(k[0]) * static_cast<std::size_t>(n_) + wrap(k[1])) * half + static_cast<std::size_t>(k[2]);
    return ModeRef{idx, conj};
  }

  // Physical coordinate of grid point `p` along `axis`.
  double coordinate(std::size_t p, int axis) const {
    std::size_t stride = 1;
    for (int a = d_ - 1; a > axis; --a) stride *= static_cast<std::size_t>(n_);
    const std::size_t i = (p / stride) % static_cast<std::size_t>(n_);
    return static_cast<double>(i) / static_cast<double>(n_);
  }

  // Forward transform, normalised to Fourier coefficients.
  void forward(std::span<const double> phys, std::span<Complex> spec) const {
    scratch_real_.assign(phys.begin(), phys.end());
    fftw_execute_dft_r2c(forward_, scratch_real_.data(), reinterpret_cast<fftw_complex*>(spec.data()));
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (auto& c : spec) c *= scale;
  }

  // Inverse transform (synthesis). Input is left untouched.
  void inverse(std::span<const Complex> spec, std::span<double> phys) const {
    scratch_spec_.assign(spec.begin(), spec.end());
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(scratch_spec_.data()), phys.data());
  }

  // <f, g>_{L^2(T^d)} for one scalar component in spectral form.
  double inner(std::span<const Complex> f, std::span<const Complex> g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < spec_size_; ++i) acc += weights_[i] * (f[i].real() * g[i].real() + f[i].imag() * g[i].imag());
    return acc;
  }

private:
  int d_;
  int n_;
  std::size_t real_size_ = 0;
  std::size_t spec_size_ = 0;
  int dealias_cut_ = 0;
  std::vector<Wavevector> wavevectors_;
  std::vector<double> weights_;
  std::vector<double> ksq_;
  std::vector<bool> nyquist_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
  mutable std::vector<double> scratch_real_;
  mutable std::vector<Complex> scratch_spec_;
};

// Spectral vector field with d components.
struct VectorSpec {
  int d = 0;
  std::size_t size = 0;  // per component
  std::vector<Complex> data;

  VectorSpec() = default;
  VectorSpec(int dim, std::size_t per_component) : d(dim), size(per_component), data(static_cast<std::size_t>(dim) * per_component) {}
  explicit VectorSpec(const Grid& g) : VectorSpec(g.dim(), g.spec_size()) {}

  std::span<Complex> component(int c) { return {data.data() + static_cast<std::size_t>(c) * size, size}; }
  std::span<const Complex> component(int c) const { return {data.data() + static_cast<std::size_t>(c) * size, size}; }
};

// Physical vector field with d components.
struct VectorPhys {
  int d = 0;
  std::size_t size = 0;
  std::vector<double> data;

  VectorPhys() = default;
  VectorPhys(int dim, std::size_t per_component) : d(dim), size(per_component), data(static_cast<std::size_t>(dim) * per_component) {}
  explicit VectorPhys(const Grid& g) : VectorPhys(g.dim(), g.real_size()) {}

  std::span<double> component(int c) { return {data.data() + static_cast<std::size_t>(c) * size, size}; }
  std::span<const double> component(int c) const { return {data.data() + static_cast<std::size_t>(c) * size, size}; }
};

inline VectorSpec to_spectral(const Grid& g, const VectorPhys& u) {
  VectorSpec out(g);
  for (int c = 0; c < u.d; ++c) g.forward(u.component(c), out.component(c));
  return out;
}

inline VectorPhys to_physical(const Grid& g, const VectorSpec& u) {
  VectorPhys out(g);
  for (int c = 0; c < u.d; ++c) g.inverse(u.component(c), out.component(c));
  return out;
}

// <u, v>_{L^2} summed over components.
inline double inner(const Grid& g, const VectorSpec& u, const VectorSpec& v) {
  double acc = 0.0;
  for (int c = 0; c < u.d; ++c) acc += g.inner(u.component(c), v.component(c));
  return acc;
}

inline double norm_squared(const Grid& g, const VectorSpec& u) { return inner(g, u, u); }

// ||grad u||^2_{L^2}
inline double gradient_norm_squared(const Grid& g, const VectorSpec& u) {
  double acc = 0.0;
  for (int c = 0; c < u.d; ++c) {
    const auto comp = u.component(c);
    for (std::size_t i = 0; i < g.spec_size(); ++i)
      acc += g.weight(i) * kTwoPi * kTwoPi * g.k_squared(i) * std::norm(comp[i]);
  }
  return acc;
}

// Zero every mode outside the retained set.
inline void apply_mask(const Grid& g, VectorSpec& u, bool dealias) {
  for (std::size_t i = 0; i < g.spec_size(); ++i) {
    if (g.retained(i, dealias)) continue;
    for (int c = 0; c < u.d; ++c) u.component(c)[i] = 0.0;
  }
}

// max_k |k . u_hat(k)| / max_k |k| |u_hat(k)|, 0 for the zero field.
inline double divergence_residual(const Grid& g, const VectorSpec& u) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.spec_size(); ++i) {
    const auto& k = g.wavevector(i);
    Complex dot = 0.0;
    double mag = 0.0;
    for (int c = 0; c < u.d; ++c) {
      dot += static_cast<double>(k[c]) * u.component(c)[i];
      mag += std::norm(u.component(c)[i]);
    }
    num = std::max(num, std::abs(dot));
    den = std::max(den, std::sqrt(g.k_squared(i) * mag));
  }
  return den > 0.0 ? num / den : 0.0;
}

} // namespace singtime::spectral
