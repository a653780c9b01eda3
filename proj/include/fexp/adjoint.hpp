#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fexp/diffcore.hpp"
#include "fexp/flowmodel.hpp"
#include "fexp/sampler.hpp"
#include "fexp/schedules.hpp"

namespace fexp::adjoint {

// Reward pieces entering the lean adjoint ODE. Gradients are evaluated
// batched: X is m x d, out is filled with one gradient row per trajectory.
// Null callables mean identically zero.
struct RewardSpec {
    std::function<void(const diffcore::Tensor& X, double t, diffcore::Tensor& out)> running_grad;
    std::function<void(const diffcore::Tensor& X, diffcore::Tensor& out)> terminal_grad;
    std::function<double(double)> running_weight;  // gamma_k * lambda_t premultiplier
    double terminal_weight = 0.0;
};

// Adjoint vectors for a batch of trajectories sharing one grid:
// a[i] is m x d, aligned with grid point i.
struct AdjointState {
    std::vector<diffcore::Tensor> a;
};

// Solves the lean adjoint ODE backwards over a batch of trajectories:
//   a_{t_N}     = -terminal_weight * grad f_1(X_{t_N})
//   a_{t_{i-1}} = a_{t_i} + dt * (d drift/dx)^T a_{t_i}
//                 - dt * running_weight(t_i) * grad f_{t_i}(X_{t_i})
// with drift(x,t) = 2 u_base(x,t) - (omega'/omega) x. Rewards enter as
// co-states of the control cost (both terms negated), so the matching
// objective's minimizer u_base - (sigma^2/2) a climbs the reward. The drift
// VJP goes through the tape of the base field with parameters frozen.
AdjointState lean_adjoint_backward_batch(const std::vector<sampler::Trajectory>& trajs,
                                         const flowmodel::VelocityField& base,
                                         const schedules::InterpolantSchedule& sched,
                                         const RewardSpec& reward);

// Single-trajectory adjoint: rows of the returned tensors are grid points.
AdjointState lean_adjoint_backward(const sampler::Trajectory& traj,
                                   const flowmodel::VelocityField& base,
                                   const schedules::InterpolantSchedule& sched,
                                   const RewardSpec& reward);

struct ObjectiveEval {
    double value = 0.0;
    std::vector<diffcore::Tensor> grad;  // per tuned-field parameter tensor
};

// Adjoint Matching objective
//   sum_traj sum_{i<N} || (2/sigma(t_i)) (u_tuned - u_base)(X_{t_i}, t_i)
//                         + sigma(t_i) a_{t_i} ||^2
// with states and adjoints treated as constants. Returns the value and the
// gradient w.r.t. the tuned parameters.
ObjectiveEval am_objective(const std::vector<sampler::Trajectory>& trajs,
                           const AdjointState& adjoints, const flowmodel::VelocityField& tuned,
                           const flowmodel::VelocityField& base,
                           const schedules::InterpolantSchedule& sched);

struct FinetuneConfig {
    int outer_iters = 4;      // trajectory resampling rounds
    std::size_t batch = 4;    // trajectories per round
    std::size_t steps = 40;   // trajectory length
    int inner_steps = 1;      // optimizer steps per round
    double lr = 5.5e-4;
    double clip_norm = 10.0;  // global-norm gradient clip; 0 disables
    uint64_t seed = 0;
};
void validate(const FinetuneConfig& cfg);

// Adjoint Matching fine-tuning: initializes tuned := base, then each round
// samples trajectories under the current tuned field, solves the adjoint
// under the base drift, and optimizes the matching objective.
flowmodel::VelocityField finetune(const flowmodel::VelocityField& base,
                                  const schedules::InterpolantSchedule& sched,
                                  const RewardSpec& reward, const FinetuneConfig& cfg);

}  // namespace fexp::adjoint
