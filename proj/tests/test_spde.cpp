#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "singtime/spde.hpp"

using namespace singtime;
using namespace singtime::spde;
using spectral::Grid;
using spectral::VectorPhys;
using spectral::VectorSpec;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double k2Pi = 2.0 * kPi;

// Random trigonometric stream function psi on T^2; returns u = (d_y psi, -d_x psi)
// (divergence-free) or grad psi, evaluated analytically at the grid points.
VectorPhys stream_field(const Grid& g, std::mt19937_64& gen, int kmax, bool gradient) {
  std::normal_distribution<double> normal;
  VectorPhys u(g);
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) {
      if (ky == 0 && kx <= 0) continue;
      const double a = normal(gen), b = normal(gen);
      for (std::size_t p = 0; p < g.real_size(); ++p) {
        const double ph = k2Pi * (kx * g.coordinate(p, 0) + ky * g.coordinate(p, 1));
        // d/dx_j psi = 2 pi k_j (-a sin + b cos)
        const double common = k2Pi * (-a * std::sin(ph) + b * std::cos(ph));
        const double dx = kx * common, dy = ky * common;
        u.component(0)[p] += gradient ? dx : dy;
        u.component(1)[p] += gradient ? dy : -dx;
      }
    }
  return u;
}

double max_abs(const VectorSpec& u) {
  double m = 0.0;
  for (const auto& c : u.data) m = std::max(m, std::abs(c));
  return m;
}

double max_diff(const VectorSpec& a, const VectorSpec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// Single-mode field with coefficient `c` at k (and its conjugate), component `comp`.
VectorSpec single_mode(const Grid& g, spectral::Wavevector k, int comp, spectral::Complex c) {
  VectorSpec u(g);
  const auto ref = g.find(k);
  u.component(comp)[ref->index] = ref->conjugate ? std::conj(c) : c;
  return u;
}

noise::NoiseField constant_field(int d, const noise::Vec3& e) {
  noise::NoiseField f;
  f.d = d;
  f.modes = {{{0, 0, 0}, e, 1.0}};
  f.M_bound = noise::compute_m_bound(f);
  return f;
}

SimConfig heat_config() {
  SimConfig c;
  c.d = 2;
  c.n = 32;
  c.dt = 1e-3;
  c.t_end = 1.0;
  c.nonlinear = false;
  return c;
}

} // namespace

TEST(Helmholtz, HandExamples) {
  Grid g(2, 8);
  auto a = single_mode(g, {1, 0, 0}, 0, 1.0);
  helmholtz_project(g, a);
  EXPECT_EQ(max_abs(a), 0.0);
  auto b = single_mode(g, {1, 0, 0}, 1, 1.0);
  const auto before = b;
  helmholtz_project(g, b);
  EXPECT_EQ(max_diff(b, before), 0.0);
  // k = 0 passes through
  auto z = single_mode(g, {0, 0, 0}, 0, 0.7);
  helmholtz_project(g, z);
  EXPECT_EQ(z.component(0)[0], spectral::Complex(0.7));
}

TEST(Helmholtz, IdempotentAnnihilatesGradientsFixesSolenoidal) {
  Grid g(2, 16);
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto grad = spectral::to_spectral(g, stream_field(g, gen, 5, true));
    const auto sol = spectral::to_spectral(g, stream_field(g, gen, 5, false));
    VectorSpec mix(g);
    for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = grad.data[i] + sol.data[i];
    const double scale = max_abs(mix);
    EXPECT_LE(max_abs(helmholtz_projected(g, grad)), 1e-13 * scale);
    EXPECT_LE(max_diff(helmholtz_projected(g, sol), sol), 1e-13 * scale);
    const auto once = helmholtz_projected(g, mix);
    EXPECT_LE(max_diff(helmholtz_projected(g, once), once), 1e-14 * scale);
    EXPECT_LE(max_diff(once, sol), 1e-12 * scale);
  }
}

TEST(Mollify, MultiplierAndContraction) {
  Grid g(2, 8);
  auto u = single_mode(g, {1, 0, 0}, 1, 1.0);
  auto same = u;
  mollify(g, same, 0.0);
  EXPECT_EQ(max_diff(same, u), 0.0);
  mollify(g, u, 1.0);
  EXPECT_NEAR(u.component(1)[g.find({1, 0, 0})->index].real(), std::exp(-4.0 * kPi * kPi), 1e-20);
  std::mt19937_64 gen(5);
  const auto w = spectral::to_spectral(g, stream_field(g, gen, 3, false));
  for (double eps : {0.01, 0.1, 0.5}) {
    auto m = w;
    mollify(g, m, eps);
    EXPECT_LE(spectral::norm_squared(g, m), spectral::norm_squared(g, w));
    EXPECT_LE(spectral::gradient_norm_squared(g, m), spectral::gradient_norm_squared(g, w));
  }
  EXPECT_THROW(mollify(g, u, -1.0), ParameterError);
}

TEST(Nonlinear, ZeroAndTaylorGreen) {
  Grid g(2, 16);
  EXPECT_EQ(max_abs(nonlinear_term(g, VectorSpec(g), 0.0, true)), 0.0);
  InitialCondition ic;
  const auto tg = make_initial(g, ic, true).u_hat;
  for (double eps : {0.0, 0.1})
    for (bool dealias : {true, false}) EXPECT_LE(max_abs(nonlinear_term(g, tg, eps, dealias)), 1e-14);
}

TEST(Nonlinear, MatchesProductRuleOracle) {
  // u = (sin 2pi y, cos 4pi x) is divergence-free, so div(u (x) u) = (u.grad)u
  //   = (2pi cos 4pi x cos 2pi y, -4pi sin 2pi y sin 4pi x)
  //   = pi (c+ + c-, 2 c+ - 2 c-),  c+- = cos 2pi(2x +- y).
  // Projecting each plane wave off its wavevector (2, +-1) leaves
  //   pi c+ (-3/5, 6/5) + pi c- (-3/5, -6/5).
  Grid g(2, 16);
  VectorPhys u(g), expect(g);
  for (std::size_t p = 0; p < g.real_size(); ++p) {
    const double x = g.coordinate(p, 0), y = g.coordinate(p, 1);
    u.component(0)[p] = std::sin(k2Pi * y);
    u.component(1)[p] = std::cos(2.0 * k2Pi * x);
    const double cp = std::cos(k2Pi * (2 * x + y)), cm = std::cos(k2Pi * (2 * x - y));
    expect.component(0)[p] = kPi * (-0.6 * cp - 0.6 * cm);
    expect.component(1)[p] = kPi * (1.2 * cp - 1.2 * cm);
  }
  const auto got = nonlinear_term(g, spectral::to_spectral(g, u), 0.0, true);
  EXPECT_LE(max_diff(got, spectral::to_spectral(g, expect)), 1e-13);
  // the Taylor-Green-like pair (cos 2pi y, cos 2pi x) has a pure-gradient convective term
  for (std::size_t p = 0; p < g.real_size(); ++p) {
    u.component(0)[p] = std::cos(k2Pi * g.coordinate(p, 1));
    u.component(1)[p] = std::cos(k2Pi * g.coordinate(p, 0));
  }
  EXPECT_LE(max_abs(nonlinear_term(g, spectral::to_spectral(g, u), 0.0, true)), 1e-14);
}

TEST(Nonlinear, EnergyNeutralOnRandomStates) {
  Grid g(2, 32);
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 10; ++trial) {
    InitialCondition ic;
    ic.kind = InitialKind::random_shell;
    ic.seed = 100 + trial;
    ic.k_hi = 10;
    const auto u = make_initial(g, ic, true).u_hat;
    for (double eps : {0.0, 0.05}) {
      const auto nl = nonlinear_term(g, u, eps, true);
      const double h1 = spectral::norm_squared(g, u) + spectral::gradient_norm_squared(g, u);
      EXPECT_LE(std::abs(spectral::inner(g, nl, u)), 1e-10 * h1);
    }
  }
}

TEST(NoiseOperator, ConstantFieldIsFourierMultiplier) {
  Grid g(2, 16);
  const auto f = constant_field(2, {0.6, 0.8, 0.0});
  for (spectral::Wavevector k : {spectral::Wavevector{1, 0, 0}, {0, 2, 0}, {3, -1, 0}, {-2, 3, 0}}) {
    // u = e_perp 2 Re(c exp(2 pi i k.x)), c = 0.5 + 0.25 i; sigma.grad multiplies c by 2 pi i (sigma.k).
    const double kn = std::sqrt(static_cast<double>(k[0] * k[0] + k[1] * k[1]));
    const double e[2] = {-k[1] / kn, k[0] / kn};
    const double sk = 0.6 * k[0] + 0.8 * k[1];
    const spectral::Complex c(0.5, 0.25), lc = c * spectral::Complex(0.0, k2Pi * sk);
    VectorPhys u(g), lu_exact(g);
    for (std::size_t p = 0; p < g.real_size(); ++p) {
      const double ph = k2Pi * (k[0] * g.coordinate(p, 0) + k[1] * g.coordinate(p, 1));
      const spectral::Complex w(std::cos(ph), std::sin(ph));
      for (int comp = 0; comp < 2; ++comp) {
        u.component(comp)[p] = e[comp] * 2.0 * (c * w).real();
        lu_exact.component(comp)[p] = e[comp] * 2.0 * (lc * w).real();
      }
    }
    const auto uh = spectral::to_spectral(g, u);
    const auto expect = spectral::to_spectral(g, lu_exact);
    const auto lu = noise_operator_L(g, uh, f, 0, true);
    EXPECT_LE(max_diff(lu, expect), 1e-13 * max_abs(expect));
    // sine partner of the k = 0 mode vanishes
    EXPECT_EQ(max_abs(noise_operator_L(g, uh, f, 1, true)), 0.0);
    const auto au = ito_correction(g, uh, f, true);
    VectorSpec ea = uh;
    for (auto& z : ea.data) z *= -2.0 * kPi * kPi * sk * sk;
    EXPECT_LE(max_diff(au, ea), 1e-12 * max_abs(ea));
  }
  EXPECT_EQ(max_abs(noise_operator_L(g, VectorSpec(g), f, 0, true)), 0.0);
  EXPECT_THROW(noise_operator_L(g, VectorSpec(g), f, 2, true), ParameterError);
}

TEST(NoiseOperator, MuOnlyIsProjectedMatrixProduct) {
  Grid g(2, 16);
  Operators ops(g, true);
  const double M[2][2] = {{0.3, -1.1}, {0.7, 0.2}};
  std::vector<double> sigma(2 * g.real_size(), 0.0), mu(4 * g.real_size());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      std::fill_n(mu.begin() + (i * 2 + j) * static_cast<long>(g.real_size()), g.real_size(), M[i][j]);
  std::mt19937_64 gen(7);
  const auto u = spectral::to_spectral(g, stream_field(g, gen, 4, false));
  const auto got = ops.transport(u, sigma, mu);
  // Mode-wise oracle: w = M u_hat(k), then remove the k-parallel part.
  VectorSpec expect(g);
  for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
    if (!g.retained(idx, true)) continue;
    const auto& k = g.wavevector(idx);
    spectral::Complex w[2];
    for (int i = 0; i < 2; ++i) w[i] = M[i][0] * u.component(0)[idx] + M[i][1] * u.component(1)[idx];
    const double k2 = g.k_squared(idx);
    const spectral::Complex dot = k2 > 0 ? (static_cast<double>(k[0]) * w[0] + static_cast<double>(k[1]) * w[1]) / k2 : 0.0;
    for (int i = 0; i < 2; ++i) expect.component(i)[idx] = w[i] - static_cast<double>(k[i]) * dot;
  }
  EXPECT_LE(max_diff(got, expect), 1e-12 * max_abs(expect));
}

TEST(NoiseOperator, TransportIsSkewWithoutMu) {
  Grid g(2, 32);
  const auto f = noise::build_kraichnan(2, 3, 1.0, 1.0, 0);
  Operators ops(g, true, &f);
  InitialCondition ic;
  ic.kind = InitialKind::random_shell;
  ic.k_hi = 8;
  const auto u = make_initial(g, ic, true).u_hat;
  for (std::size_t n = 0; n < ops.field_count(); ++n)
    EXPECT_LE(std::abs(spectral::inner(g, ops.noise_operator_L(u, n), u)), 1e-12 * spectral::gradient_norm_squared(g, u));
  EXPECT_EQ(ops.drift_work(u), 0.0);
  std::vector<double> dW(ops.field_count(), 0.3);
  EXPECT_EQ(ops.martingale_increment(u, dW), 0.0);
}

TEST(NoiseOperator, LieItoIdentity) {
  // 2 <u, A u> + sum ||L_n u||^2 = 2 sum <L_n u, S_n u>
  Grid g(2, 32);
  const auto f = noise::build_lie(noise::build_kraichnan(2, 2, 1.0, 0.5, 0));
  Operators ops(g, true, &f);
  InitialCondition ic;
  ic.kind = InitialKind::random_shell;
  ic.k_hi = 6;
  const auto u = make_initial(g, ic, true).u_hat;
  double lhs = 2.0 * spectral::inner(g, u, ops.ito_correction(u));
  for (std::size_t n = 0; n < ops.field_count(); ++n) lhs += spectral::norm_squared(g, ops.noise_operator_L(u, n));
  const double rhs = 2.0 * ops.drift_work(u);
  EXPECT_NE(rhs, 0.0);
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(rhs));
}

TEST(Step, HeatFactorIsExact) {
  auto c = heat_config();
  c.t_end = 0.05;
  c.u0.kind = InitialKind::random_shell;
  c.u0.k_hi = 6;
  Solver s(c);
  auto st = s.initial_state();
  const auto u0 = st.u_hat;
  const double scale = max_abs(u0);
  const auto r = s.run(st, gaussian_increments(1, c.dt));
  const double t = r.final_state.t;
  EXPECT_NEAR(t, 0.05, 1e-15);
  for (std::size_t idx = 0; idx < s.grid().spec_size(); ++idx) {
    const double factor = std::exp(-4.0 * kPi * kPi * s.grid().k_squared(idx) * t);
    for (int comp = 0; comp < 2; ++comp) {
      const auto a = u0.component(comp)[idx];
      EXPECT_LE(std::abs(r.final_state.u_hat.component(comp)[idx] - factor * a), 1e-13 * std::abs(a) + 1e-16 * scale);
    }
  }
}

TEST(Step, ZeroStaysZero) {
  auto c = heat_config();
  c.t_end = 0.01;
  c.nonlinear = true;
  c.u0.amplitude = 0.0;
  c.noise = std::make_shared<const noise::NoiseField>(noise::build_lie(noise::build_kraichnan(2, 2, 1.0, 1.0, 0)));
  const auto r = simulate(c);
  EXPECT_EQ(max_abs(r.final_state.u_hat), 0.0);
  EXPECT_FALSE(r.blowup.has_value());
}

TEST(Ledger, HeatIdentityAndDissipationOracle) {
  const auto c = heat_config();
  const auto r = simulate(c);
  const double E0 = r.ledger.front().E;
  EXPECT_NEAR(E0, 0.5, 1e-15);  // Taylor-Green: mean of cos^2 sin^2 is 1/4 per component
  for (const auto& row : r.ledger) {
    EXPECT_LE(std::abs(row.residual), 1e-8 * E0);
    EXPECT_EQ(row.drift_cum, 0.0);
    EXPECT_EQ(row.mart_cum, 0.0);
  }
  // E(t) = E0 exp(-16 pi^2 t), D_cum = int ||grad u||^2 = 8 pi^2 int E.
  const double lam = 16.0 * kPi * kPi;
  const auto& last = r.ledger.back();
  EXPECT_NEAR(last.t, 1.0, 1e-12);
  EXPECT_NEAR(last.E, E0 * std::exp(-lam), 1e-12 * E0);
  EXPECT_NEAR(last.D_cum, 8.0 * kPi * kPi * E0 * (1.0 - std::exp(-lam)) / lam, 1e-12);
  EXPECT_EQ(r.ledger.size(), 1001u);
}

TEST(Ledger, TransportNoiseResidualIsFirstOrder) {
  const double h = 5e-4, T = 0.05;
  auto field = std::make_shared<const noise::NoiseField>(noise::build_kraichnan(2, 2, 1.0, 1.0, 3));
  BrownianPath path(field->field_count(), static_cast<std::size_t>(std::llround(T / h)), h, 21);
  std::vector<double> res;
  for (std::size_t factor : {4, 2, 1}) {
    SimConfig c;
    c.n = 16;
    c.dt = h * static_cast<double>(factor);
    c.t_end = T;
    c.noise = field;
    c.u0.kind = InitialKind::random_shell;
    c.u0.k_hi = 4;
    const auto r = simulate(c, path.coarse(factor));
    for (const auto& row : r.ledger) {
      EXPECT_EQ(row.drift_cum, 0.0);
      EXPECT_EQ(row.mart_cum, 0.0);
    }
    res.push_back(std::abs(r.ledger.back().residual));
  }
  EXPECT_GT(res[0], 0.0);
  const double order = std::log2(res[0] / res[2]) / 2.0;
  EXPECT_GE(order, 0.9) << res[0] << ' ' << res[1] << ' ' << res[2];
}

TEST(Ledger, LieNoiseResidualShrinksOnAverage) {
  // With mu != 0 the residual carries the fluctuation of sum dW_n dW_m - dt
  // around the Ito drift, so only its path average decays (order 1/2 or better).
  const double h = 2.5e-4, T = 0.02;
  auto field = std::make_shared<const noise::NoiseField>(noise::build_lie(noise::build_kraichnan(2, 2, 1.0, 0.5, 3)));
  std::vector<double> mean_res;
  double work = 0.0;
  for (std::size_t factor : {16, 1}) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      BrownianPath path(field->field_count(), static_cast<std::size_t>(std::llround(T / h)), h, 100 + seed);
      SimConfig c;
      c.n = 16;
      c.dt = h * static_cast<double>(factor);
      c.t_end = T;
      c.noise = field;
      c.u0.kind = InitialKind::random_shell;
      c.u0.k_hi = 4;
      const auto r = simulate(c, path.coarse(factor));
      acc += std::abs(r.ledger.back().residual);
      work = std::max(work, std::abs(r.ledger.back().drift_cum));
    }
    mean_res.push_back(acc / 8.0);
  }
  EXPECT_GT(work, 0.0);
  EXPECT_GE(mean_res[0] / mean_res[1], 4.0) << mean_res[0] << ' ' << mean_res[1];
}

TEST(Step, StrongSelfConvergenceOnFixedPath) {
  const double h = 2.5e-4, T = 0.02;
  auto field = std::make_shared<const noise::NoiseField>(noise::build_kraichnan(2, 2, 1.0, 1.0, 4));
  BrownianPath path(field->field_count(), static_cast<std::size_t>(std::llround(T / h)), h, 23);
  std::vector<VectorSpec> finals;
  for (std::size_t factor : {8, 4, 2, 1}) {
    SimConfig c;
    c.n = 16;
    c.dt = h * static_cast<double>(factor);
    c.t_end = T;
    c.noise = field;
    c.u0.kind = InitialKind::random_shell;
    c.u0.k_hi = 4;
    finals.push_back(simulate(c, path.coarse(factor)).final_state.u_hat);
  }
  Grid g(2, 16);
  auto err = [&](std::size_t i) {
    VectorSpec d = finals[i];
    for (std::size_t j = 0; j < d.data.size(); ++j) d.data[j] -= finals[3].data[j];
    return std::sqrt(spectral::norm_squared(g, d));
  };
  const double order = std::log2(err(0) / err(1));
  EXPECT_GE(order, 0.5) << err(0) << ' ' << err(1) << ' ' << err(2);
  EXPECT_LT(err(1), err(0));
}

TEST(Simulate, MollifierUniformity) {
  auto field = std::make_shared<const noise::NoiseField>(noise::build_kraichnan(2, 2, 2.0 / 3.0, 0.5, 1));
  std::vector<double> supE, D;
  for (double eps : {0.2, 0.1, 0.05}) {
    SimConfig c;
    c.n = 32;
    c.dt = 1e-3;
    c.t_end = 0.1;
    c.mollifier_eps = eps;
    c.noise = field;
    c.u0.kind = InitialKind::random_shell;
    c.u0.amplitude = 5.0;
    const auto r = simulate(c);
    double s = 0.0;
    for (const auto& row : r.ledger) s = std::max(s, row.E);
    supE.push_back(s);
    D.push_back(r.ledger.back().D_cum);
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / *hi;
  };
  EXPECT_LT(spread(supE), 0.2);
  EXPECT_LT(spread(D), 0.2);
}

TEST(Simulate, DeterministicGivenSeed) {
  SimConfig c;
  c.n = 16;
  c.t_end = 0.02;
  c.seed = 77;
  c.noise = std::make_shared<const noise::NoiseField>(noise::build_kraichnan(2, 2, 1.0, 1.0, 0));
  const auto a = simulate(c), b = simulate(c);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t i = 0; i < a.ledger.size(); ++i) {
    EXPECT_EQ(a.ledger[i].E, b.ledger[i].E);
    EXPECT_EQ(a.ledger[i].residual, b.ledger[i].residual);
  }
  EXPECT_EQ(ledger_csv(c, a), ledger_csv(c, b));
  c.seed = 78;
  EXPECT_NE(simulate(c).ledger.back().E, a.ledger.back().E);
}

TEST(Simulate, BlowUpIsAResult) {
  SimConfig c;
  c.n = 16;
  c.nu = 0.0;
  c.dt = 1e-2;
  c.t_end = 5.0;
  c.blowup_factor = 10.0;
  c.u0.kind = InitialKind::random_shell;
  c.u0.amplitude = 200.0;
  const auto r = simulate(c);
  ASSERT_TRUE(r.blowup.has_value());
  EXPECT_TRUE(std::isinf(r.ledger.back().norm));
  EXPECT_EQ(r.ledger.back().step, r.blowup->step);
  EXPECT_LT(r.blowup->t, 5.0);
}

TEST(Simulate, RecordEveryAndNormChannels) {
  auto c = heat_config();
  c.t_end = 0.01;
  c.record_every = 3;
  const auto r = simulate(c);
  // rows at steps 0, 3, 6, 9, 10
  ASSERT_EQ(r.ledger.size(), 5u);
  EXPECT_EQ(r.ledger.back().step, 10u);
  EXPECT_EQ(r.norm_channel, "L2");
  Grid g(2, 32);
  const auto tg = make_initial(g, InitialCondition{}, true).u_hat;
  EXPECT_NEAR(evaluate_norm(g, tg, {NormSpace::L2, 2, 1}), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(evaluate_norm(g, tg, {NormSpace::Lq, 2.0, 1}), std::sqrt(0.5), 1e-14);
  EXPECT_NEAR(evaluate_norm(g, tg, {NormSpace::Hs, 2, 0.0}), std::sqrt(0.5), 1e-15);
  // H^1 with weight (1 + 4 pi^2 |k|^2), |k|^2 = 2 for every Taylor-Green mode
  EXPECT_NEAR(evaluate_norm(g, tg, {NormSpace::Hs, 2, 1.0}), std::sqrt(0.5 * (1 + 8 * kPi * kPi)), 1e-12);
  // L^4: quadrature of |u|^4 on a finer independent grid
  double acc = 0.0;
  const int m = 64;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double x = k2Pi * i / m, y = k2Pi * j / m;
      const double m2 = std::pow(std::cos(x) * std::sin(y), 2) + std::pow(std::sin(x) * std::cos(y), 2);
      acc += m2 * m2;
    }
  EXPECT_NEAR(evaluate_norm(g, tg, {NormSpace::Lq, 4.0, 1}), std::pow(acc / (m * m), 0.25), 1e-13);
  EXPECT_EQ((NormSpec{NormSpace::Lq, 4.0, 1}).label(), "Lq:4");
  EXPECT_EQ((NormSpec{NormSpace::Hs, 2, 0.5}).label(), "Hs:0.5");
}

TEST(Snapshot, RoundTripAndFileInitialData) {
  Grid g(2, 16);
  InitialCondition ic;
  ic.kind = InitialKind::random_shell;
  SpectralState s = make_initial(g, ic, true);
  s.t = 0.0;
  std::stringstream buf;
  write_snapshot(buf, s);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 16), std::string("SINGTIME-STATE\0\0", 16));
  EXPECT_EQ(bytes.size(), 16u + 1 + 4 + 4 + s.u_hat.data.size() * 16);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[17]), 2);  // little-endian d
  const auto back = read_snapshot(buf);
  EXPECT_EQ(back.d, 2);
  EXPECT_EQ(back.n, 16);
  EXPECT_EQ(max_diff(back.u_hat, s.u_hat), 0.0);

  const std::string path = testing::TempDir() + "singtime_snapshot.bin";
  {
    std::ofstream out(path, std::ios::binary);
    write_snapshot(out, s);
  }
  InitialCondition from_file;
  from_file.kind = InitialKind::file;
  from_file.path = path;
  EXPECT_LE(max_diff(make_initial(g, from_file, true).u_hat, s.u_hat), 1e-15);
  EXPECT_THROW(make_initial(Grid(2, 32), from_file, true), ConfigError);

  std::istringstream bad(std::string("NOT-A-SNAPSHOT!!") + std::string(9, '\0'));
  EXPECT_THROW(read_snapshot(bad), ConfigError);
  std::istringstream truncated(bytes.substr(0, 40));
  EXPECT_THROW(read_snapshot(truncated), ConfigError);
}

TEST(InitialData, RandomShellIsNormalizedSolenoidalAndSeeded) {
  Grid g(2, 32);
  InitialCondition ic;
  ic.kind = InitialKind::random_shell;
  ic.amplitude = 2.0;
  ic.seed = 9;
  const auto a = make_initial(g, ic, true).u_hat;
  EXPECT_NEAR(std::sqrt(spectral::norm_squared(g, a)), 2.0, 1e-14);
  EXPECT_LE(spectral::divergence_residual(g, a), 1e-14);
  for (std::size_t idx = 0; idx < g.spec_size(); ++idx) {
    const double kn = std::sqrt(g.k_squared(idx));
    if (kn < 1 || kn > 4) {
      EXPECT_EQ(a.component(0)[idx], spectral::Complex(0.0));
      EXPECT_EQ(a.component(1)[idx], spectral::Complex(0.0));
    }
  }
  EXPECT_EQ(max_diff(a, make_initial(g, ic, true).u_hat), 0.0);
  ic.seed = 10;
  EXPECT_GT(max_diff(a, make_initial(g, ic, true).u_hat), 0.0);
  ic.k_lo = 0;
  EXPECT_THROW(make_initial(g, ic, true), ConfigError);
}

TEST(BrownianPathTest, CoarseIncrementsArePairwiseSums) {
  BrownianPath path(2, 8, 0.01, 5);
  std::vector<double> fine1(2), fine2(2), coarse(2), sum(2, 0.0);
  auto f = path.coarse(1), c = path.coarse(2);
  f(3, fine1);
  f(4, fine2);
  c(2, coarse);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(coarse[i], fine1[i] + fine2[i]);
  EXPECT_THROW(path.coarse(3), ParameterError);
  auto big = path.coarse(8);
  EXPECT_THROW(big(2, coarse), ParameterError);
}

TEST(Config, ValidationAndDescribe) {
  SimConfig c;
  EXPECT_NO_THROW(validate(c));
  c.n = 24;
  EXPECT_THROW(validate(c), ConfigError);
  c.n = 32;
  c.dt = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c.dt = 1e-3;
  c.noise = std::make_shared<const noise::NoiseField>(noise::build_kraichnan(3, 1, 1.0, 1.0, 0));
  EXPECT_THROW(validate(c), ConfigError);
  const auto kv = describe(SimConfig{});
  EXPECT_TRUE(std::is_sorted(kv.begin(), kv.end()));
  EXPECT_EQ(kv.size(), sim_config_keys().size());
}
