#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace fxtqp {

// Gains of V' <= -a1 V^g1 - a2 V^g2 with g1 = 1 + 1/mu, g2 = 1 - 1/mu.
class FxtsGains {
 public:
  FxtsGains(double alpha1, double alpha2, double mu);

  double alpha1() const { return alpha1_; }
  double alpha2() const { return alpha2_; }
  double mu() const { return mu_; }
  double gamma1() const { return 1.0 + 1.0 / mu_; }
  double gamma2() const { return 1.0 - 1.0 / mu_; }

 private:
  double alpha1_;
  double alpha2_;
  double mu_;
};

enum class Regime { GlobalWithinDeadline, GlobalFixedTime, LocalFixedTime };

const char* to_string(Regime r);

struct SettlingBound {
  double T;
  Regime regime;
};

constexpr double kDefaultMargin = 0.9;

FxtsGains alpha_from_deadline(double T_ud, double mu);

double settling_time_bound_basic(double a, double b, double p, double q);

// Roots a <= b of a1 z^2 - d1 z + a2, if real.
std::optional<std::pair<double, double>> gamma_roots(double alpha1, double alpha2, double delta1);

Regime classify(const FxtsGains& g, double delta1);

SettlingBound settling_time_bound(const FxtsGains& g, double delta1, double k = kDefaultMargin);

// Largest V(0) for which the local bound applies; nullopt means unbounded.
std::optional<double> domain_threshold(const FxtsGains& g, double delta1, double k = kDefaultMargin);

double scalar_vdot(const FxtsGains& g, double delta1, double V);

struct ScalarRun {
  std::optional<double> hit_time;
  std::vector<double> t;
  std::vector<double> V;
};

constexpr double kHitLevel = 1e-9;

ScalarRun simulate_scalar_v(const FxtsGains& g, double delta1, double V0, double dt,
                            std::size_t max_samples = 4096);

}  // namespace fxtqp
