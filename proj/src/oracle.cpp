#include "fexp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fexp::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_measure(const DiscreteMeasure& q) {
    if (q.w.empty()) throw DomainError("discrete measure: empty");
    double total = 0.0;
    for (double v : q.w) {
        if (!(v >= 0.0)) throw DomainError("discrete measure: negative weight");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("discrete measure: mass is not 1");
}

void check_mask(const SupportMask& mask, std::size_t m) {
    if (mask.size() != m) throw DimensionError("support mask: size mismatch");
    if (std::find(mask.begin(), mask.end(), uint8_t{1}) == mask.end())
        throw DomainError("support mask: no cell enabled");
}

// L(q) = H(q) or H(q) - alpha KL(q||p), restricted to the mask support.
double objective_value(Objective obj, double alpha, const DiscreteMeasure& q,
                       const DiscreteMeasure* p_pre) {
    double val = entropy(q);
    if (obj == Objective::entropy_minus_alpha_kl) {
        if (!p_pre) throw DomainError("objective: KL term requires a reference measure");
        val -= alpha * kl(q, *p_pre);
    }
    return val;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(std::size_t m) {
    if (m == 0) throw DomainError("discrete measure: empty");
    DiscreteMeasure q;
    q.w.assign(m, 1.0 / static_cast<double>(m));
    return q;
}

DiscreteMeasure DiscreteMeasure::from_weights(std::vector<double> weights) {
    if (weights.empty()) throw DomainError("discrete measure: empty");
    double total = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DomainError("discrete measure: weights must be finite and non-negative");
        total += v;
    }
    if (!(total > 0.0)) throw DomainError("discrete measure: zero total mass");
    for (double& v : weights) v /= total;
    DiscreteMeasure q;
    q.w = std::move(weights);
    return q;
}

SupportMask full_mask(std::size_t m) { return SupportMask(m, 1); }

double entropy(const DiscreteMeasure& q) {
    check_measure(q);
    double h = 0.0;
    for (double v : q.w)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double kl(const DiscreteMeasure& q, const DiscreteMeasure& p) {
    check_measure(q);
    check_measure(p);
    if (q.w.size() != p.w.size()) throw DimensionError("kl: cell counts disagree");
    double d = 0.0;
    for (std::size_t i = 0; i < q.w.size(); ++i) {
        if (q.w[i] == 0.0) continue;
        if (p.w[i] == 0.0) return kInf;  // support violation, reported distinctly
        d += q.w[i] * std::log(q.w[i] / p.w[i]);
    }
    return d;
}

double total_variation(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.w.size() != b.w.size()) throw DimensionError("total_variation: cell counts disagree");
    double s = 0.0;
    for (std::size_t i = 0; i < a.w.size(); ++i) s += std::abs(a.w[i] - b.w[i]);
    return 0.5 * s;
}

std::vector<double> first_variation(Objective obj, double alpha, const DiscreteMeasure& q,
                                    const DiscreteMeasure* p_pre, const SupportMask& mask) {
    check_measure(q);
    check_mask(mask, q.w.size());
    if (obj == Objective::entropy_minus_alpha_kl) {
        if (!p_pre) throw DomainError("first_variation: KL term requires a reference measure");
        if (p_pre->w.size() != q.w.size())
            throw DimensionError("first_variation: reference size mismatch");
    }
    std::vector<double> g(q.w.size(), 0.0);
    for (std::size_t i = 0; i < q.w.size(); ++i) {
        if (!mask[i]) continue;
        if (!(q.w[i] > 0.0))
            throw DomainError("first_variation: zero weight on a masked cell");
        g[i] = -std::log(q.w[i]) - 1.0;
        if (obj == Objective::entropy_minus_alpha_kl) {
            if (!(p_pre->w[i] > 0.0))
                throw DomainError("first_variation: reference vanishes on a masked cell");
            g[i] -= alpha * (std::log(q.w[i] / p_pre->w[i]) + 1.0);
        }
    }
    return g;
}

namespace {

// Shared tilt: log q + gamma g on the allowed cells, log-sum-exp normalized.
DiscreteMeasure tilt(const DiscreteMeasure& q, std::span<const double> grad, double gamma,
                     const SupportMask* mask) {
    check_measure(q);
    if (grad.size() != q.w.size()) throw DimensionError("md_step: gradient size mismatch");
    if (!(gamma > 0.0)) throw DomainError("md_step: gamma must be positive");

    const std::size_t m = q.w.size();
    std::vector<double> logw(m, -kInf);
    double mx = -kInf;
    for (std::size_t i = 0; i < m; ++i) {
        const bool allowed = (!mask || (*mask)[i]) && q.w[i] > 0.0;
        if (!allowed) continue;
        logw[i] = std::log(q.w[i]) + gamma * grad[i];
        mx = std::max(mx, logw[i]);
    }
    if (mx == -kInf) throw InfeasibleError("md_step: all mass masked out");
    double z = 0.0;
    std::vector<double> wnew(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (logw[i] == -kInf) continue;
        wnew[i] = std::exp(logw[i] - mx);
        z += wnew[i];
    }
    for (double& v : wnew) v /= z;
    DiscreteMeasure out;
    out.w = std::move(wnew);
    return out;
}

}  // namespace

DiscreteMeasure md_step(const DiscreteMeasure& q, std::span<const double> grad, double gamma,
                        const SupportMask& mask) {
    check_mask(mask, q.w.size());
    return tilt(q, grad, gamma, &mask);
}

DiscreteMeasure expand_then_project_discrete(const DiscreteMeasure& q, std::span<const double> grad,
                                             double gamma, const SupportMask& mask) {
    check_mask(mask, q.w.size());
    // expansion: unconstrained tilt
    DiscreteMeasure expanded = tilt(q, grad, gamma, nullptr);
    // projection: restrict to the mask and renormalize
    double z = 0.0;
    for (std::size_t i = 0; i < expanded.w.size(); ++i) {
        if (!mask[i]) expanded.w[i] = 0.0;
        z += expanded.w[i];
    }
    if (!(z > 0.0)) throw InfeasibleError("projection: all mass masked out");
    for (double& v : expanded.w) v /= z;
    return expanded;
}

MdRun run_md(const DiscreteMeasure& q0, Objective obj, double alpha, const DiscreteMeasure* p_pre,
             const std::function<double(int)>& gamma, const SupportMask& mask, int K) {
    check_measure(q0);
    check_mask(mask, q0.w.size());
    if (K < 1) throw DomainError("run_md: K must be >= 1");
    const std::size_t m = q0.w.size();
    for (std::size_t i = 0; i < m; ++i)
        if (mask[i] && !(q0.w[i] > 0.0))
            throw DomainError("run_md: q0 must be positive on the mask");

    // Analytic optimum restricted to the mask.
    MdRun run;
    {
        std::vector<double> ws(m, 0.0);
        const double expo =
            obj == Objective::entropy ? 0.0 : alpha / (1.0 + alpha);  // q* ~ p^(alpha/(1+alpha))
        for (std::size_t i = 0; i < m; ++i) {
            if (!mask[i]) continue;
            if (obj == Objective::entropy) {
                ws[i] = 1.0;
            } else {
                if (!p_pre) throw DomainError("run_md: KL objective requires a reference");
                ws[i] = std::pow(p_pre->w[i], expo);
            }
        }
        run.q_star = DiscreteMeasure::from_weights(std::move(ws));
    }
    const double l_star = objective_value(obj, alpha, run.q_star, p_pre);

    double gamma_min = kInf;
    for (int k = 1; k <= K; ++k) {
        const double g = gamma(k);
        if (!(g > 0.0)) throw DomainError("run_md: gamma_k must be positive");
        gamma_min = std::min(gamma_min, g);
    }
    const double lambda_eff = 1.0 / gamma_min;
    const double d0 = kl(run.q_star, q0);

    run.iterates.push_back(q0);
    run.gaps.push_back(l_star - objective_value(obj, alpha, q0, p_pre));
    run.bounds.push_back(lambda_eff * d0);
    DiscreteMeasure q = q0;
    for (int k = 1; k <= K; ++k) {
        const auto grad = first_variation(obj, alpha, q, p_pre, mask);
        q = md_step(q, grad, gamma(k), mask);
        run.iterates.push_back(q);
        const double gap = l_star - objective_value(obj, alpha, q, p_pre);
        const double bound = lambda_eff * d0 / static_cast<double>(k);
        run.gaps.push_back(gap);
        run.bounds.push_back(bound);
        if (gap > bound + 1e-9) run.bound_satisfied = false;
    }
    return run;
}

}  // namespace fexp::oracle
