#include "fxtqp/fxts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fxtqp {

FxtsGains::FxtsGains(double alpha1, double alpha2, double mu) : alpha1_(alpha1), alpha2_(alpha2), mu_(mu) {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0) || !std::isfinite(alpha1) || !std::isfinite(alpha2))
    throw std::invalid_argument("FxtsGains: alpha1, alpha2 must be positive and finite");
  if (!(mu > 1.0) || !std::isfinite(mu)) throw std::invalid_argument("FxtsGains: mu must be > 1");
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::GlobalWithinDeadline: return "GlobalWithinDeadline";
    case Regime::GlobalFixedTime: return "GlobalFixedTime";
    case Regime::LocalFixedTime: return "LocalFixedTime";
  }
  return "?";
}

FxtsGains alpha_from_deadline(double T_ud, double mu) {
  if (!(T_ud > 0.0)) throw std::invalid_argument("alpha_from_deadline: T_ud must be positive");
  const double a = mu * std::numbers::pi / (2.0 * T_ud);
  return FxtsGains(a, a, mu);
}

double settling_time_bound_basic(double a, double b, double p, double q) {
  if (!(a > 0.0) || !(b > 0.0) || !(p > 0.0 && p < 1.0) || !(q > 1.0))
    throw std::invalid_argument("settling_time_bound_basic: parameter out of range");
  return 1.0 / (a * (1.0 - p)) + 1.0 / (b * (q - 1.0));
}

namespace {

bool degenerate(const FxtsGains& g, double d1) {
  const double four = 4.0 * g.alpha1() * g.alpha2();
  return d1 > 0.0 && std::abs(d1 * d1 - four) <= 1e-12 * four;
}

}  // namespace

std::optional<std::pair<double, double>> gamma_roots(double alpha1, double alpha2, double delta1) {
  const double four = 4.0 * alpha1 * alpha2;
  double disc = delta1 * delta1 - four;
  if (delta1 <= 0.0 || disc < -1e-12 * four) return std::nullopt;
  disc = std::max(0.0, disc);
  const double q = 0.5 * (delta1 + std::sqrt(disc));
  const double b = q / alpha1;
  const double a = alpha2 / q;
  return std::make_pair(std::min(a, b), std::max(a, b));
}

Regime classify(const FxtsGains& g, double delta1) {
  if (delta1 <= 0.0) return Regime::GlobalWithinDeadline;
  if (delta1 >= 2.0 * std::sqrt(g.alpha1() * g.alpha2()) || degenerate(g, delta1)) return Regime::LocalFixedTime;
  return Regime::GlobalFixedTime;
}

SettlingBound settling_time_bound(const FxtsGains& g, double delta1, double k) {
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("settling_time_bound: k must lie in (0,1)");
  const double a1 = g.alpha1(), a2 = g.alpha2(), mu = g.mu();
  const Regime r = classify(g, delta1);
  switch (r) {
    case Regime::GlobalWithinDeadline:
      return {mu * std::numbers::pi / (2.0 * std::sqrt(a1 * a2)), r};
    case Regime::GlobalFixedTime: {
      const double s = std::sqrt(4.0 * a1 * a2 - delta1 * delta1);
      const double k1 = s / (2.0 * a1);
      const double k2 = -delta1 / s;
      return {mu / (a1 * k1) * (std::numbers::pi / 2.0 - std::atan(k2)), r};
    }
    case Regime::LocalFixedTime: {
      if (degenerate(g, delta1)) return {mu / std::sqrt(a1 * a2) * k / (1.0 - k), r};
      const auto roots = gamma_roots(a1, a2, delta1);
      const double a = roots->first, b = roots->second;
      // log((b - k a)/(a(1-k))) - log(b/a), written to stay accurate as b -> a
      const double T = mu / (a1 * (b - a)) * std::log1p(k * (b - a) / (b * (1.0 - k)));
      return {T, r};
    }
  }
  return {std::numeric_limits<double>::quiet_NaN(), r};
}

std::optional<double> domain_threshold(const FxtsGains& g, double delta1, double k) {
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("domain_threshold: k must lie in (0,1)");
  if (classify(g, delta1) != Regime::LocalFixedTime) return std::nullopt;
  double V1 = std::sqrt(g.alpha2() / g.alpha1());
  if (!degenerate(g, delta1)) V1 = gamma_roots(g.alpha1(), g.alpha2(), delta1)->first;
  return std::pow(k * V1, g.mu());
}

double scalar_vdot(const FxtsGains& g, double delta1, double V) {
  if (V <= 0.0) return 0.0;
  return -g.alpha1() * std::pow(V, g.gamma1()) - g.alpha2() * std::pow(V, g.gamma2()) + delta1 * V;
}

ScalarRun simulate_scalar_v(const FxtsGains& g, double delta1, double V0, double dt, std::size_t max_samples) {
  if (!(V0 >= 0.0)) throw std::invalid_argument("simulate_scalar_v: V0 must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_scalar_v: dt must be positive");
  ScalarRun out;
  out.t.push_back(0.0);
  out.V.push_back(V0);
  if (V0 <= kHitLevel) {
    out.hit_time = 0.0;
    return out;
  }
  if (scalar_vdot(g, delta1, V0) >= 0.0) return out;

  const double T = settling_time_bound(g, delta1).T;
  const double horizon = std::isfinite(T) ? 10.0 * T : 1e3;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt));
  const std::size_t stride = std::max<std::size_t>(1, steps / std::max<std::size_t>(1, max_samples));
  auto f = [&](double v) { return scalar_vdot(g, delta1, std::max(0.0, v)); };

  auto rk4 = [&](double v, double h) {
    const double k1 = f(v);
    const double k2 = f(v + 0.5 * h * k1);
    const double k3 = f(v + 0.5 * h * k2);
    const double k4 = f(v + h * k3);
    return std::max(0.0, v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  };
  // steps that would remove a large fraction of V are split, since the V^g2
  // term makes the solution non-smooth at V = 0
  auto advance = [&](auto& self, double& v, double t, double h, int depth) -> std::optional<double> {
    if (depth < 5 && h * std::abs(f(v)) > 0.25 * v) {
      for (int j = 0; j < 16; ++j)
        if (auto hit = self(self, v, t + j * h / 16.0, h / 16.0, depth + 1)) return hit;
      return std::nullopt;
    }
    const double vn = rk4(v, h);
    if (vn <= kHitLevel) {
      const double hit = t + h * (v - kHitLevel) / (v - vn);
      v = vn;
      return hit;
    }
    v = vn;
    return std::nullopt;
  };

  double V = V0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t0 = static_cast<double>(i) * dt;
    if (auto hit = advance(advance, V, t0, dt, 0)) {
      out.hit_time = hit;
      out.t.push_back(*hit);
      out.V.push_back(kHitLevel);
      return out;
    }
    if ((i + 1) % stride == 0) {
      out.t.push_back(t0 + dt);
      out.V.push_back(V);
    }
  }
  return out;
}

}  // namespace fxtqp
