#pragma once

#include <cstdint>
#include <vector>

#include "fexp/diffcore.hpp"
#include "fexp/flowmodel.hpp"
#include "fexp/schedules.hpp"

namespace fexp::sampler {

// One memoryless-SDE path. The grid is uniform on [h/2, 1-h/2] with
// h = 1/steps: the first state is drawn from p0 directly because the drift
// term (omega'/omega) x is singular at t = 0. states is (steps+1) x d and
// noises is steps x d (the draw injected when leaving grid point i).
struct Trajectory {
    std::vector<double> times;
    diffcore::Tensor states;
    diffcore::Tensor noises;

    std::size_t grid_points() const { return times.size(); }
};

struct ScoreConfig {
    double epsilon_clip = 0.02;  // terminal clipping, in (0, 0.5)
};
void validate(const ScoreConfig& cfg);

// Deterministic flow: X0 ~ N(0,I), explicit Euler with h = 1/steps on [0,1].
// Returns the n x d endpoint batch.
diffcore::Tensor sample_ode(const flowmodel::Field& field, std::size_t n, std::size_t steps,
                            uint64_t seed);

// Memoryless-SDE trajectories:
//   X_{t+h} = X_t + h (2 u(X_t,t) - (omega'/omega) X_t) + sqrt(h) sigma(t) eps.
// All n paths share the grid; noises are stored for reproducibility.
std::vector<Trajectory> sample_memoryless_sde(const flowmodel::Field& field, std::size_t n,
                                              std::size_t steps,
                                              const schedules::InterpolantSchedule& sched,
                                              uint64_t seed);

// Velocity-to-score transform in the omega-multiplied stable form,
//   s_t(x) = (omega_t u(x,t) - omega'_t x) / (kappa_t (omega'_t kappa_t - kappa'_t omega_t)),
// evaluated at t' = min(t, 1 - epsilon_clip).
void score(const flowmodel::Field& field, const schedules::InterpolantSchedule& sched,
           const diffcore::Tensor& X, double t, const ScoreConfig& cfg, diffcore::Tensor& out);

std::vector<double> score_point(const flowmodel::Field& field,
                                const schedules::InterpolantSchedule& sched,
                                std::span<const double> x, double t, const ScoreConfig& cfg);

// Appends each trajectory as a block of rows (t, x_1..x_d) to a CSV stream.
void dump_trajectories_csv(const std::vector<Trajectory>& trajs, const std::string& path);

}  // namespace fexp::sampler
