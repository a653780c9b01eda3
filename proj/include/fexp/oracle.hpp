#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fexp/errors.hpp"

namespace fexp::oracle {

// Probability vector over m grid cells.
struct DiscreteMeasure {
    std::vector<double> w;

    static DiscreteMeasure uniform(std::size_t m);
    // Normalizes; rejects negative weights and zero total mass.
    static DiscreteMeasure from_weights(std::vector<double> weights);

    std::size_t cells() const { return w.size(); }
};

// cell membership in the verifier set; at least one cell must be true.
using SupportMask = std::vector<uint8_t>;
SupportMask full_mask(std::size_t m);

double entropy(const DiscreteMeasure& q);
// +infinity when support(q) is not contained in support(p).
double kl(const DiscreteMeasure& q, const DiscreteMeasure& p);
double total_variation(const DiscreteMeasure& a, const DiscreteMeasure& b);

enum class Objective { entropy, entropy_minus_alpha_kl };

// Componentwise first variation on the masked cells:
//   entropy:            -log q_i - 1
//   entropy - alpha KL: -log q_i - 1 - alpha (log(q_i/p_i) + 1)
// Unmasked components are zero. A zero masked cell is a domain error.
std::vector<double> first_variation(Objective obj, double alpha, const DiscreteMeasure& q,
                                    const DiscreteMeasure* p_pre, const SupportMask& mask);

// Exact constrained MD maximiser: q'_i proportional to q_i exp(gamma g_i) on
// the mask, renormalized. Computed in log space.
DiscreteMeasure md_step(const DiscreteMeasure& q, std::span<const double> grad, double gamma,
                        const SupportMask& mask);

// Unconstrained tilt followed by information projection (restrict +
// renormalize). Equals md_step exactly.
DiscreteMeasure expand_then_project_discrete(const DiscreteMeasure& q, std::span<const double> grad,
                                             double gamma, const SupportMask& mask);

struct MdRun {
    std::vector<DiscreteMeasure> iterates;  // q^0 .. q^K
    std::vector<double> gaps;               // L(q*) - L(q^k), k = 0..K
    std::vector<double> bounds;             // lambda_eff KL(q*||q0)/max(k,1)
    DiscreteMeasure q_star;                 // analytic optimum on the mask
    bool bound_satisfied = true;            // gap(k) <= bound(k) for all k >= 1
};

// K exact MD steps from q0 with the analytic suboptimality gap per iterate.
// The reported bound uses lambda_eff = 1 / min_k gamma(k), the prescription
// gamma_k = 1/lambda* rescaled for sub-prescription step sizes.
MdRun run_md(const DiscreteMeasure& q0, Objective obj, double alpha, const DiscreteMeasure* p_pre,
             const std::function<double(int)>& gamma, const SupportMask& mask, int K);

}  // namespace fexp::oracle
