#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fexp/diffcore.hpp"
#include "fexp/verifier.hpp"

namespace fexp::datasets {

// Global (strong-verifier) toy: a Gaussian mixture concentrated in the
// upper-left part of the ellipse frame, rejection-resampled so every point
// lies inside the ellipse.
struct GlobalSpec {
    std::array<double, 2> center{0.0, 0.0};
    std::array<double, 2> semi_axes{2.0, 1.2};
    double rotation = 0.4;
    // mixture components in ellipse-frame coordinates
    std::vector<std::array<double, 2>> component_centers{{-1.1, 0.45}, {-0.3, 0.75}, {-1.45, -0.05}};
    std::vector<double> component_weights{0.4, 0.35, 0.25};
    double spread = 0.28;
};

diffcore::Tensor gen_global_setting(const GlobalSpec& spec, std::size_t n, uint64_t seed);

// The paired strong verifier (the ellipse interior) for a GlobalSpec.
verifier::VerifierPtr global_setting_verifier(const GlobalSpec& spec);

// Local (weak-verifier) toy: dominant central mode plus two side modes, one
// of which sits inside the weak verifier's rejected region.
struct TrimodalSpec {
    std::array<std::array<double, 2>, 3> centers{{{0.0, 0.0}, {-3.0, 0.0}, {3.0, 0.0}}};
    std::array<double, 3> weights{0.9, 0.05, 0.05};
    double spread = 0.35;
    std::size_t invalid_mode = 1;        // index into centers
    double weak_boundary = -1.5;         // weak verifier keeps x1 >= weak_boundary
};

struct LabeledPoints {
    diffcore::Tensor points;  // n x 2
    std::vector<int> labels;  // mode index per row
};

LabeledPoints gen_local_setting(const TrimodalSpec& spec, std::size_t n, uint64_t seed);

// Weak verifier for the local toy: half-space x1 >= weak_boundary.
verifier::VerifierPtr local_setting_weak_verifier(const TrimodalSpec& spec);
// Hard validity region used for metric scoring; a strict subset of the weak
// verifier set covering the valid modes.
verifier::VerifierPtr local_setting_scoring_verifier(const TrimodalSpec& spec);

}  // namespace fexp::datasets
