#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fexp/errors.hpp"

namespace fexp::verifier {

// Hard binary verifier v: R^d -> {0,1}. The accepted set is closed: boundary
// points are valid.
class Verifier {
  public:
    virtual ~Verifier() = default;
    virtual std::size_t dim() const = 0;
    virtual bool accepts(std::span<const double> x) const = 0;
    virtual std::string describe() const = 0;
};

// Verifier additionally exposing a signed margin m(x): positive inside,
// zero on the boundary, negative outside. Needed for sigmoid smoothing.
class MarginVerifier : public Verifier {
  public:
    virtual double margin(std::span<const double> x) const = 0;
    virtual void margin_grad(std::span<const double> x, std::span<double> g) const = 0;
    bool accepts(std::span<const double> x) const override { return margin(x) >= 0.0; }
};

using VerifierPtr = std::shared_ptr<const Verifier>;

// Interior of a rotated 2-d ellipse: quadratic form q(x) <= 1, margin 1-q.
VerifierPtr ellipse(std::array<double, 2> center, std::array<double, 2> semi_axes,
                    double rotation);

// Axis-aligned box lo <= x <= hi (componentwise).
VerifierPtr box(std::vector<double> lo, std::vector<double> hi);

// Band lo <= <normal, x> <= hi. Either side may be +/- infinity for a
// half-space.
VerifierPtr halfspace_band(std::vector<double> normal, double lo, double hi);

// v(x) = min_i v_i(x); margin is the minimum of the member margins.
VerifierPtr intersect(std::vector<VerifierPtr> members);

// Differentiable surrogate v~(x) = sigmoid(tau * m(x)). Values in (0,1),
// grad log v~ finite everywhere, v~ -> v pointwise off the boundary as
// tau -> infinity.
class SmoothVerifier {
  public:
    SmoothVerifier(VerifierPtr hard, double tau);

    std::size_t dim() const { return margin_->dim(); }
    double tau() const { return tau_; }
    const Verifier& hard() const { return *hard_; }

    double value(std::span<const double> x) const;
    double log_value(std::span<const double> x) const;
    void grad_log_value(std::span<const double> x, std::span<double> g) const;

  private:
    VerifierPtr hard_;
    const MarginVerifier* margin_;
    double tau_;
};

}  // namespace fexp::verifier
