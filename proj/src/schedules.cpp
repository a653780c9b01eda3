#include "fexp/schedules.hpp"

#include <cmath>

namespace fexp::schedules {

const InterpolantSchedule& linear_schedule() {
    static const LinearSchedule s;
    return s;
}

double sigma(const InterpolantSchedule& s, double t) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("sigma: t must lie in (0,1)");
    const double w = s.omega(t);
    if (!(w > 0.0)) throw ScheduleError("sigma: omega_t must be positive");
    const double radicand = 2.0 * s.kappa(t) * (s.omega_dot(t) / w * s.kappa(t) - s.kappa_dot(t));
    if (radicand < 0.0) throw ScheduleError("sigma: negative radicand");
    return std::sqrt(radicand);
}

double score_denominator(const InterpolantSchedule& s, double t) {
    if (t >= 1.0) throw DomainError("score_denominator: vanishes at t >= 1; clip first");
    return s.kappa(t) * (s.omega_dot(t) * s.kappa(t) - s.kappa_dot(t) * s.omega(t));
}

Reparam reparametrize_beta(double beta, double gamma_tilde) {
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("reparametrize_beta: beta must be in [0,1)");
    const double alpha = beta / (1.0 - beta);
    return Reparam{alpha, gamma_tilde / (alpha + 1.0)};
}

GammaKind gamma_kind_from_string(const std::string& s) {
    if (s == "constant") return GammaKind::constant;
    if (s == "harmonic_decay") return GammaKind::harmonic_decay;
    if (s == "paper_toy") return GammaKind::paper_toy;
    throw ConfigError("unknown gamma schedule kind: " + s);
}

double gamma_schedule(GammaKind kind, double base, int k) {
    if (k < 1) throw DomainError("gamma_schedule: iteration index must be >= 1");
    switch (kind) {
        case GammaKind::constant:
            return base;
        case GammaKind::harmonic_decay:
            return base / (1.0 + static_cast<double>(k));
        case GammaKind::paper_toy:
            return base / (1.0 + 3.0 * static_cast<double>(k - 1));
    }
    throw DomainError("gamma_schedule: unreachable kind");
}

LambdaKind lambda_kind_from_string(const std::string& s) {
    if (s == "zero_band_constant") return LambdaKind::zero_band_constant;
    if (s == "zero_band_sigma") return LambdaKind::zero_band_sigma;
    throw ConfigError("unknown lambda weight kind: " + s);
}

double lambda_weight(LambdaKind kind, const InterpolantSchedule& s, double band, double value,
                     double t) {
    if (t > 1.0 - band) return 0.0;
    switch (kind) {
        case LambdaKind::zero_band_constant:
            return value;
        case LambdaKind::zero_band_sigma:
            return sigma(s, t);
    }
    throw DomainError("lambda_weight: unreachable kind");
}

}  // namespace fexp::schedules
