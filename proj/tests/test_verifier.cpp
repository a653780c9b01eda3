#include <doctest.h>

#include <cmath>

#include "fexp/rng.hpp"
#include "fexp/verifier.hpp"

using namespace fexp;
using namespace fexp::verifier;

TEST_CASE("ellipse membership") {
    auto v = ellipse({0.5, -0.2}, {2.0, 1.2}, 0.4);
    const double center[2] = {0.5, -0.2};
    CHECK(v->accepts({center, 2}));

    // far along the rotated major axis
    const double far_pt[2] = {0.5 + 10.0 * 2.0 * std::cos(0.4), -0.2 + 10.0 * 2.0 * std::sin(0.4)};
    CHECK_FALSE(v->accepts({far_pt, 2}));

    // boundary points are valid (closed-set convention); tested exactly on
    // an axis-aligned ellipse where the boundary is representable
    auto axis = ellipse({0.0, 0.0}, {2.0, 1.2}, 0.0);
    for (const auto& p : {std::array<double, 2>{2.0, 0.0}, std::array<double, 2>{-2.0, 0.0},
                          std::array<double, 2>{0.0, 1.2}, std::array<double, 2>{0.0, -1.2}}) {
        CHECK(axis->accepts({p.data(), 2}));
        const auto* mv = dynamic_cast<const MarginVerifier*>(axis.get());
        CHECK(mv->margin({p.data(), 2}) == 0.0);
    }
    // parametrized rotated boundary: margin vanishes to roundoff and the
    // accept decision agrees with its sign
    for (int i = 0; i < 32; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * i / 32.0;
        const double fx = 2.0 * std::cos(a), fy = 1.2 * std::sin(a);
        const double p[2] = {0.5 + std::cos(0.4) * fx - std::sin(0.4) * fy,
                             -0.2 + std::sin(0.4) * fx + std::cos(0.4) * fy};
        const auto* mv = dynamic_cast<const MarginVerifier*>(v.get());
        CHECK(std::abs(mv->margin({p, 2})) < 1e-12);
        CHECK(v->accepts({p, 2}) == (mv->margin({p, 2}) >= 0.0));
    }

    CHECK_THROWS_AS(ellipse({0, 0}, {-1.0, 1.0}, 0.0), DomainError);
}

TEST_CASE("box and halfspace band") {
    auto b = box({-1.0, -1.0}, {1.0, 1.0});
    const double in_pt[2] = {0.0, 0.0};
    const double out_pt[2] = {2.0, 0.0};
    CHECK(b->accepts({in_pt, 2}));
    CHECK_FALSE(b->accepts({out_pt, 2}));
    CHECK_THROWS_AS(box({1.0}, {0.0}), DomainError);

    auto band = halfspace_band({1.0, 1.0}, -2.0, 2.0);
    const double boundary[2] = {1.0, 1.0};  // <n,x> = 2 exactly
    CHECK(band->accepts({boundary, 2}));
    const double outside[2] = {2.0, 1.0};
    CHECK_FALSE(band->accepts({outside, 2}));
}

TEST_CASE("intersection semantics") {
    auto a = box({-1.0, -1.0}, {1.0, 1.0});
    auto e = ellipse({0.0, 0.0}, {3.0, 3.0}, 0.0);
    auto both = intersect({a, e});
    auto both_swapped = intersect({e, a});
    auto self = intersect({a, a});
    auto single = intersect({a});

    Rng rng(17);
    for (int i = 0; i < 2500; ++i) {  // 50x50-style probe grid, randomized
        const double p[2] = {8.0 * (rng.uniform() - 0.5), 8.0 * (rng.uniform() - 0.5)};
        const bool want = a->accepts({p, 2}) && e->accepts({p, 2});
        CHECK(both->accepts({p, 2}) == want);
        CHECK(both_swapped->accepts({p, 2}) == want);
        CHECK(self->accepts({p, 2}) == a->accepts({p, 2}));
        CHECK(single->accepts({p, 2}) == a->accepts({p, 2}));
    }

    // disjoint boxes have an empty intersection on a probe grid covering both
    auto left = box({-3.0, -1.0}, {-1.0, 1.0});
    auto right = box({1.0, -1.0}, {3.0, 1.0});
    auto disjoint = intersect({left, right});
    for (int ix = 0; ix < 50; ++ix)
        for (int iy = 0; iy < 50; ++iy) {
            const double p[2] = {-3.5 + 7.0 * ix / 49.0, -1.5 + 3.0 * iy / 49.0};
            CHECK_FALSE(disjoint->accepts({p, 2}));
        }

    CHECK_THROWS_AS(intersect({}), DomainError);
}

TEST_CASE("smoothing basics") {
    auto e = ellipse({0.0, 0.0}, {2.0, 1.2}, 0.0);
    SmoothVerifier sv(e, 10.0);

    // boundary: margin 0, sigmoid(0) = 1/2
    const double boundary[2] = {2.0, 0.0};
    CHECK(sv.value({boundary, 2}) == doctest::Approx(0.5).epsilon(1e-12));

    // center: margin 1, value sigmoid(10)
    const double center[2] = {0.0, 0.0};
    CHECK(sv.value({center, 2}) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
    CHECK(sv.value({center, 2}) > 0.999);

    CHECK_THROWS_AS(SmoothVerifier(e, 0.0), DomainError);
}

TEST_CASE("smoothing is monotone in tau") {
    auto e = ellipse({0.0, 0.0}, {2.0, 1.2}, 0.3);
    const double inside[2] = {0.5, 0.2};
    const double outside[2] = {3.0, 1.0};
    double prev_in = 0.0, prev_out = 1.0;
    for (double tau : {1.0, 3.0, 10.0, 30.0}) {
        SmoothVerifier sv(e, tau);
        const double vin = sv.value({inside, 2});
        const double vout = sv.value({outside, 2});
        CHECK(vin > prev_in);
        CHECK(vout < prev_out);
        prev_in = vin;
        prev_out = vout;
    }
}

TEST_CASE("grad log value matches finite differences") {
    auto e = ellipse({0.3, -0.1}, {2.0, 1.2}, 0.4);
    SmoothVerifier sv(e, 10.0);
    Rng rng(23);
    double max_rel = 0.0;
    for (int i = 0; i < 50; ++i) {
        double p[2] = {6.0 * (rng.uniform() - 0.5), 6.0 * (rng.uniform() - 0.5)};
        double g[2];
        sv.grad_log_value({p, 2}, {g, 2});
        for (int c = 0; c < 2; ++c) {
            const double h = 1e-6;
            double hi[2] = {p[0], p[1]}, lo[2] = {p[0], p[1]};
            hi[c] += h;
            lo[c] -= h;
            const double fd = (sv.log_value({hi, 2}) - sv.log_value({lo, 2})) / (2.0 * h);
            const double rel = std::abs(g[c] - fd) / std::max(1.0, std::abs(fd));
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel < 1e-6);
}

TEST_CASE("grad log value stays finite deep outside the set") {
    auto e = ellipse({0.0, 0.0}, {2.0, 1.2}, 0.0);
    SmoothVerifier sv(e, 10.0);
    const double p[2] = {50.0, 40.0};  // hard verifier is 0 here, log v = -inf
    CHECK_FALSE(e->accepts({p, 2}));
    double g[2];
    sv.grad_log_value({p, 2}, {g, 2});
    CHECK(std::isfinite(g[0]));
    CHECK(std::isfinite(g[1]));
    CHECK(std::isfinite(sv.log_value({p, 2})));
    // points further out: value tends to the hard indicator (0 off-boundary)
    CHECK(sv.value({p, 2}) < 1e-12);
}

namespace {

// verifier without a margin, for the capability error path
class Parity final : public Verifier {
  public:
    std::size_t dim() const override { return 1; }
    bool accepts(std::span<const double> x) const override {
        return static_cast<long>(std::floor(x[0])) % 2 == 0;
    }
    std::string describe() const override { return "parity"; }
};

}  // namespace

TEST_CASE("smoothing an unsupported kind is a capability error") {
    auto weird = std::make_shared<Parity>();
    CHECK_THROWS_AS(SmoothVerifier(weird, 10.0), DomainError);
}

TEST_CASE("weak-verifier containment by rejection sampling") {
    // validity region used for scoring must sit inside the weak set
    auto weak = halfspace_band({1.0, 0.0}, -1.5, std::numeric_limits<double>::infinity());
    auto scoring = box({-1.5, -2.8}, {5.8, 2.8});
    Rng rng(99);
    std::size_t tested = 0;
    while (tested < 100000) {
        const double p[2] = {-2.0 + 9.0 * rng.uniform(), -3.5 + 7.0 * rng.uniform()};
        if (!scoring->accepts({p, 2})) continue;
        ++tested;
        CHECK(weak->accepts({p, 2}));
    }
}
