#include <doctest.h>

#include <cmath>

#include "fexp/oracle.hpp"
#include "fexp/rng.hpp"

using namespace fexp;
using namespace fexp::oracle;

namespace {

DiscreteMeasure random_measure(Rng& rng, std::size_t m) {
    std::vector<double> w(m);
    for (auto& v : w) v = 0.02 + rng.uniform();
    return DiscreteMeasure::from_weights(std::move(w));
}

SupportMask random_mask(Rng& rng, std::size_t m) {
    SupportMask mask(m, 0);
    bool any = false;
    for (auto& b : mask) {
        b = rng.uniform() < 0.6 ? 1 : 0;
        any = any || b;
    }
    if (!any) mask[rng.next_u64() % m] = 1;
    return mask;
}

}  // namespace

TEST_CASE("entropy and kl basics") {
    CHECK(entropy(DiscreteMeasure::uniform(16)) == doctest::Approx(std::log(16.0)).epsilon(1e-14));

    const auto q = DiscreteMeasure::from_weights({0.75, 0.25});
    CHECK(kl(q, q) == doctest::Approx(0.0).epsilon(1e-15));

    const auto p = DiscreteMeasure::from_weights({0.5, 0.5});
    const double want = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
    CHECK(kl(q, p) == doctest::Approx(want).epsilon(1e-12));
    CHECK(kl(q, p) == doctest::Approx(0.13081).epsilon(1e-4));

    // support violation reported as +infinity
    const auto narrow = DiscreteMeasure::from_weights({1.0, 0.0});
    const auto wide = DiscreteMeasure::from_weights({0.5, 0.5});
    CHECK(std::isinf(kl(wide, narrow)));
    CHECK(kl(narrow, wide) < std::numeric_limits<double>::infinity());
}

TEST_CASE("measure construction guards") {
    CHECK_THROWS_AS(DiscreteMeasure::from_weights({}), DomainError);
    CHECK_THROWS_AS(DiscreteMeasure::from_weights({1.0, -0.5}), DomainError);
    CHECK_THROWS_AS(DiscreteMeasure::from_weights({0.0, 0.0}), DomainError);
}

TEST_CASE("first variation of entropy and the KL term") {
    const auto u = DiscreteMeasure::uniform(8);
    const auto g = first_variation(Objective::entropy, 0.0, u, nullptr, full_mask(8));
    for (double v : g) CHECK(v == doctest::Approx(std::log(8.0) - 1.0).epsilon(1e-13));

    const auto q = DiscreteMeasure::from_weights({0.75, 0.25});
    const auto ge = first_variation(Objective::entropy, 0.0, q, nullptr, full_mask(2));
    CHECK(ge[0] == doctest::Approx(-std::log(0.75) - 1.0).epsilon(1e-13));
    CHECK(ge[1] == doctest::Approx(-std::log(0.25) - 1.0).epsilon(1e-13));

    // at q = p_pre the KL part is the constant -alpha
    const auto p = DiscreteMeasure::from_weights({0.3, 0.7});
    const auto gkl =
        first_variation(Objective::entropy_minus_alpha_kl, 2.0, p, &p, full_mask(2));
    const auto gh = first_variation(Objective::entropy, 0.0, p, nullptr, full_mask(2));
    CHECK(gkl[0] - gh[0] == doctest::Approx(-2.0).epsilon(1e-13));
    CHECK(gkl[1] - gh[1] == doctest::Approx(-2.0).epsilon(1e-13));

    // zero weight on a masked cell is a domain error
    DiscreteMeasure z;
    z.w = {1.0, 0.0};
    CHECK_THROWS_AS(first_variation(Objective::entropy, 0.0, z, nullptr, full_mask(2)),
                    DomainError);
}

TEST_CASE("md step closed form") {
    Rng rng(5);
    const auto q = random_measure(rng, 6);

    // constant gradient cancels: restriction + renormalization only
    std::vector<double> flat(6, 3.7);
    SupportMask mask{1, 1, 0, 1, 0, 1};
    const auto stepped = md_step(q, flat, 0.8, mask);
    double mass = 0.0;
    for (int i : {0, 1, 3, 5}) mass += q.w[static_cast<std::size_t>(i)];
    for (std::size_t i = 0; i < 6; ++i) {
        if (mask[i])
            CHECK(stepped.w[i] == doctest::Approx(q.w[i] / mass).epsilon(1e-12));
        else
            CHECK(stepped.w[i] == 0.0);
    }

    // entropy tilt at gamma=1 reaches uniform in one step, also masked
    const auto grad = first_variation(Objective::entropy, 0.0, q, nullptr, full_mask(6));
    const auto uniform_step = md_step(q, grad, 1.0, full_mask(6));
    for (double v : uniform_step.w) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

    const auto masked_grad = first_variation(Objective::entropy, 0.0, q, nullptr, mask);
    const auto masked_uniform = md_step(q, masked_grad, 1.0, mask);
    for (std::size_t i = 0; i < 6; ++i)
        if (mask[i]) CHECK(masked_uniform.w[i] == doctest::Approx(0.25).epsilon(1e-12));

    // infeasible mask
    DiscreteMeasure corner;
    corner.w = {1.0, 0.0};
    SupportMask other{0, 1};
    std::vector<double> g2(2, 0.0);
    CHECK_THROWS_AS(md_step(corner, g2, 1.0, other), InfeasibleError);
}

TEST_CASE("proposition-1 equality on randomized instances") {
    Rng rng(42);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 199);
        const auto q = random_measure(rng, m);
        const auto mask = random_mask(rng, m);
        std::vector<double> grad(m);
        for (auto& g : grad) g = 6.0 * (rng.uniform() - 0.5);
        const double gamma = 0.05 + 1.95 * rng.uniform();
        const auto a = md_step(q, grad, gamma, mask);
        const auto b = expand_then_project_discrete(q, grad, gamma, mask);
        worst = std::max(worst, total_variation(a, b));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("expand then project edge cases") {
    Rng rng(9);
    const auto q = random_measure(rng, 5);
    std::vector<double> grad(5);
    for (auto& g : grad) g = rng.normal();

    // full mask: the projection is the identity
    const auto full = expand_then_project_discrete(q, grad, 0.7, full_mask(5));
    const auto tilt_only = md_step(q, grad, 0.7, full_mask(5));
    CHECK(total_variation(full, tilt_only) < 1e-15);

    // single-cell mask forces a point mass
    SupportMask point{0, 0, 1, 0, 0};
    const auto collapsed = expand_then_project_discrete(q, grad, 0.7, point);
    CHECK(collapsed.w[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("one-step convergence of entropy MD at gamma = 1") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 99);
        const auto q0 = random_measure(rng, m);
        const auto mask = random_mask(rng, m);
        const auto run =
            run_md(q0, Objective::entropy, 0.0, nullptr, [](int) { return 1.0; }, mask, 1);
        CHECK(std::abs(run.gaps.back()) < 1e-12);
        CHECK(run.bound_satisfied);
    }
}

TEST_CASE("theorem-1 style bound holds for sub-prescription steps") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 199);
        const auto raw = random_measure(rng, m);
        const auto mask = random_mask(rng, m);
        // feasible start: restricted to the mask, so gap(0) >= 0 and the
        // per-step tilt can only close it
        std::vector<double> w(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            if (mask[i]) w[i] = raw.w[i];
        const auto q0 = DiscreteMeasure::from_weights(std::move(w));
        const auto run =
            run_md(q0, Objective::entropy, 0.0, nullptr, [](int) { return 0.3; }, mask, 50);
        CHECK(run.bound_satisfied);  // gap(k) <= (1/0.3) KL(q*||q0)/k
        CHECK(run.gaps.front() >= -1e-12);
        // gaps shrink monotonically for gamma <= 1
        for (std::size_t k = 1; k < run.gaps.size(); ++k)
            CHECK(run.gaps[k] <= run.gaps[k - 1] + 1e-12);
    }
}

TEST_CASE("KL-regularized fixed point carries the alpha/(1+alpha) exponent") {
    Rng rng(17);
    for (const double alpha : {0.5, 1.0, 9.0}) {
        const double gamma = std::min(0.5, 1.0 / (1.0 + alpha));
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 99);
            const auto p = random_measure(rng, m);
            auto q = random_measure(rng, m);
            std::vector<double> star(m);
            for (std::size_t i = 0; i < m; ++i)
                star[i] = std::pow(p.w[i], alpha / (1.0 + alpha));
            const auto q_star = DiscreteMeasure::from_weights(std::move(star));
            double tv = 1.0;
            int iters = 0;
            while (tv >= 1e-8 && iters < 200) {
                const auto grad = first_variation(Objective::entropy_minus_alpha_kl, alpha, q, &p,
                                                  full_mask(m));
                q = md_step(q, grad, gamma, full_mask(m));
                tv = total_variation(q, q_star);
                ++iters;
            }
            CHECK(tv < 1e-8);
        }
    }
}

TEST_CASE("two-cell KL fixed point by hand") {
    // alpha = 1, p = (0.8, 0.2): q* ~ (sqrt(0.8), sqrt(0.2))
    const auto p = DiscreteMeasure::from_weights({0.8, 0.2});
    auto q = DiscreteMeasure::from_weights({0.5, 0.5});
    for (int it = 0; it < 100; ++it) {
        const auto grad =
            first_variation(Objective::entropy_minus_alpha_kl, 1.0, q, &p, full_mask(2));
        q = md_step(q, grad, 0.5, full_mask(2));
    }
    // normalize(sqrt(0.8), sqrt(0.2)) is exactly (2/3, 1/3): sqrt(0.8) = 2 sqrt(0.2)
    const double z = std::sqrt(0.8) + std::sqrt(0.2);
    CHECK(q.w[0] == doctest::Approx(std::sqrt(0.8) / z).epsilon(1e-10));
    CHECK(q.w[1] == doctest::Approx(std::sqrt(0.2) / z).epsilon(1e-10));
    CHECK(q.w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    CHECK(q.w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("mass conservation and non-negativity after every step") {
    Rng rng(23);
    auto q = random_measure(rng, 64);
    const auto mask = random_mask(rng, 64);
    for (int it = 0; it < 300; ++it) {
        std::vector<double> grad(64);
        for (auto& g : grad) g = 4.0 * (rng.uniform() - 0.5);
        q = md_step(q, grad, 0.5, mask);
        double total = 0.0;
        for (double v : q.w) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}
