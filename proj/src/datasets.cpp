#include "fexp/datasets.hpp"

#include <cmath>
#include <limits>

#include "fexp/rng.hpp"

namespace fexp::datasets {

using diffcore::Tensor;

Tensor gen_global_setting(const GlobalSpec& spec, std::size_t n, uint64_t seed) {
    if (n < 1) throw DomainError("gen_global_setting: n must be >= 1");
    if (spec.component_centers.size() != spec.component_weights.size() ||
        spec.component_centers.empty())
        throw DomainError("gen_global_setting: component lists disagree");
    double wsum = 0.0;
    for (double w : spec.component_weights) {
        if (!(w > 0.0)) throw DomainError("gen_global_setting: non-positive component weight");
        wsum += w;
    }
    if (!(spec.spread > 0.0)) throw DomainError("gen_global_setting: spread must be positive");

    const auto ell = global_setting_verifier(spec);
    const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);

    Rng rng(Rng::derive_stream(seed, 0x61d5u));
    Tensor pts = Tensor::zeros({n, 2});
    std::size_t attempts = 0;
    const std::size_t attempt_budget = 100 * n + 1000;
    for (std::size_t i = 0; i < n; ++i) {
        for (;;) {
            if (++attempts > attempt_budget)
                throw DomainError("gen_global_setting: rejection rate exceeds 99%");
            // pick a component, sample in the ellipse frame, rotate to world
            double u = rng.uniform() * wsum;
            std::size_t comp = 0;
            while (comp + 1 < spec.component_weights.size() && u >= spec.component_weights[comp]) {
                u -= spec.component_weights[comp];
                ++comp;
            }
            const double fx = spec.component_centers[comp][0] + spec.spread * rng.normal();
            const double fy = spec.component_centers[comp][1] + spec.spread * rng.normal();
            const double x = spec.center[0] + c * fx - s * fy;
            const double y = spec.center[1] + s * fx + c * fy;
            const double p[2] = {x, y};
            if (ell->accepts({p, 2})) {
                pts.at(i, 0) = x;
                pts.at(i, 1) = y;
                break;
            }
        }
    }
    return pts;
}

verifier::VerifierPtr global_setting_verifier(const GlobalSpec& spec) {
    return verifier::ellipse(spec.center, spec.semi_axes, spec.rotation);
}

LabeledPoints gen_local_setting(const TrimodalSpec& spec, std::size_t n, uint64_t seed) {
    if (n < 1) throw DomainError("gen_local_setting: n must be >= 1");
    double wsum = 0.0;
    for (double w : spec.weights) {
        if (!(w > 0.0)) throw DomainError("gen_local_setting: non-positive mode weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw DomainError("gen_local_setting: mode weights must sum to 1");
    if (!(spec.spread > 0.0)) throw DomainError("gen_local_setting: spread must be positive");
    if (spec.invalid_mode >= spec.centers.size())
        throw DomainError("gen_local_setting: invalid mode index out of range");

    Rng rng(Rng::derive_stream(seed, 0x10ca1u));
    LabeledPoints out;
    out.points = Tensor::zeros({n, 2});
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform();
        std::size_t mode = 0;
        while (mode + 1 < spec.weights.size() && u >= spec.weights[mode]) {
            u -= spec.weights[mode];
            ++mode;
        }
        out.points.at(i, 0) = spec.centers[mode][0] + spec.spread * rng.normal();
        out.points.at(i, 1) = spec.centers[mode][1] + spec.spread * rng.normal();
        out.labels[i] = static_cast<int>(mode);
    }
    return out;
}

verifier::VerifierPtr local_setting_weak_verifier(const TrimodalSpec& spec) {
    return verifier::halfspace_band({1.0, 0.0}, spec.weak_boundary,
                                    std::numeric_limits<double>::infinity());
}

verifier::VerifierPtr local_setting_scoring_verifier(const TrimodalSpec& spec) {
    // Covers the valid modes with generous slack while staying inside the
    // weak half-space.
    double lo_x = spec.weak_boundary;
    double hi_x = spec.weak_boundary;
    for (std::size_t m = 0; m < spec.centers.size(); ++m) {
        if (m == spec.invalid_mode) continue;
        hi_x = std::max(hi_x, spec.centers[m][0] + 8.0 * spec.spread);
    }
    return verifier::box({lo_x, -8.0 * spec.spread}, {hi_x, 8.0 * spec.spread});
}

}  // namespace fexp::datasets
