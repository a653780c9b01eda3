#pragma once

#include <functional>
#include <memory>
#include <string>

#include "fexp/errors.hpp"

namespace fexp::schedules {

// Interpolant coefficients kappa_t, omega_t of the conditional path
// X_t = kappa_t X_0 + omega_t X_1, with kappa_0 = omega_1 = 1 and
// kappa_1 = omega_0 = 0.
class InterpolantSchedule {
  public:
    virtual ~InterpolantSchedule() = default;
    virtual double kappa(double t) const = 0;
    virtual double omega(double t) const = 0;
    virtual double kappa_dot(double t) const = 0;
    virtual double omega_dot(double t) const = 0;
    virtual std::string name() const = 0;
};

// kappa = 1 - t, omega = t.
class LinearSchedule final : public InterpolantSchedule {
  public:
    double kappa(double t) const override { return 1.0 - t; }
    double omega(double t) const override { return t; }
    double kappa_dot(double) const override { return -1.0; }
    double omega_dot(double) const override { return 1.0; }
    std::string name() const override { return "linear"; }
};

const InterpolantSchedule& linear_schedule();

// Memoryless SDE noise level sqrt(2 kappa (omega'/omega kappa - kappa')).
// Requires 0 < t < 1 and omega_t > 0.
double sigma(const InterpolantSchedule& s, double t);

// kappa (omega' kappa - kappa' omega): the omega-multiplied denominator of
// the velocity-to-score transform, finite down to t = 0. Requires t < 1.
double score_denominator(const InterpolantSchedule& s, double t);

// beta in [0,1) -> (alpha, gamma) with alpha = beta/(1-beta) and
// gamma = gamma_tilde/(alpha+1).
struct Reparam {
    double alpha;
    double gamma;
};
Reparam reparametrize_beta(double beta, double gamma_tilde);

enum class GammaKind { constant, harmonic_decay, paper_toy };
GammaKind gamma_kind_from_string(const std::string& s);

// Step size for iteration k >= 1:
//   constant       -> base
//   harmonic_decay -> base / (1 + k)      (Robbins-Monro compatible)
//   paper_toy      -> base / (1 + 3(k-1))
double gamma_schedule(GammaKind kind, double base, int k);

enum class LambdaKind { zero_band_constant, zero_band_sigma };
LambdaKind lambda_kind_from_string(const std::string& s);

// Integral weight lambda_t: 0 on the terminal band t > 1 - band, otherwise
// the configured constant or sigma(t). The sigma variant requires t > 0
// outside the band.
double lambda_weight(LambdaKind kind, const InterpolantSchedule& s, double band, double value,
                     double t);

// Bundle of the per-run coefficient schedules consumed by the expander.
struct CoefficientSchedules {
    std::function<double(double)> lambda;  // t in [0,1] -> lambda_t >= 0
    std::function<double(double)> alpha;   // t -> alpha_t (constant here)
    std::function<double(int)> gamma;      // k >= 1 -> gamma_k > 0
    std::function<double(int)> eta;        // k >= 1 -> eta_k >= 0
};

inline std::function<double(int)> constant_per_iteration(double v) {
    return [v](int) { return v; };
}

}  // namespace fexp::schedules
