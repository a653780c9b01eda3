#include "fexp/adjoint.hpp"

#include <cmath>
#include <string>

#include "fexp/rng.hpp"
#include "fexp/threads.hpp"

namespace fexp::adjoint {

using diffcore::Tensor;
using diffcore::TensorPtr;
using diffcore::Var;
using flowmodel::VelocityField;

namespace {

// States of all trajectories at grid point i, as an m x d batch.
Tensor gather_states(const std::vector<sampler::Trajectory>& trajs, std::size_t i) {
    const std::size_t m = trajs.size();
    const std::size_t d = trajs.front().states.cols();
    Tensor X = Tensor::zeros({m, d});
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t c = 0; c < d; ++c) X.at(p, c) = trajs[p].states.at(i, c);
    return X;
}

void check_aligned(const std::vector<sampler::Trajectory>& trajs) {
    if (trajs.empty()) throw DomainError("adjoint: empty trajectory batch");
    const auto& t0 = trajs.front().times;
    for (const auto& tr : trajs)
        if (tr.times != t0) throw DimensionError("adjoint: trajectory grids are not aligned");
}

}  // namespace

AdjointState lean_adjoint_backward_batch(const std::vector<sampler::Trajectory>& trajs,
                                         const VelocityField& base,
                                         const schedules::InterpolantSchedule& sched,
                                         const RewardSpec& reward) {
    check_aligned(trajs);
    const std::size_t m = trajs.size();
    const std::size_t d = trajs.front().states.cols();
    if (base.dim() != d) throw DimensionError("adjoint: field and trajectory dimensions disagree");
    const auto& times = trajs.front().times;
    const std::size_t n_pts = times.size();
    if (n_pts < 2) throw DimensionError("adjoint: trajectory needs at least two grid points");
    const double dt = times[1] - times[0];

    AdjointState st;
    st.a.assign(n_pts, Tensor::zeros({m, d}));

    // Terminal co-state of the reward: enters negatively, as does the
    // running forcing below, so the matching objective's minimizer moves the
    // tuned drift toward higher reward.
    if (reward.terminal_grad && reward.terminal_weight != 0.0) {
        Tensor Xn = gather_states(trajs, n_pts - 1);
        Tensor g = Tensor::zeros({m, d});
        reward.terminal_grad(Xn, g);
        for (std::size_t j = 0; j < g.size(); ++j)
            st.a[n_pts - 1].data[j] = -reward.terminal_weight * g.data[j];
    }

    Tensor rg = Tensor::zeros({m, d});
    for (std::size_t i = n_pts - 1; i >= 1; --i) {
        const double t = times[i];
        const Tensor& at = st.a[i];
        Tensor& prev = st.a[i - 1];
        prev = at;

        bool any_nonzero = false;
        for (double v : at.data)
            if (v != 0.0) {
                any_nonzero = true;
                break;
            }
        const Tensor X = gather_states(trajs, i);
        if (any_nonzero) {
            // dt * d/dx <a, 2 u_base(x,t) - (w'/w) x>
            diffcore::Tape tape;
            auto fwd = base.forward(&tape, diffcore::make_tensor(X),
                                    diffcore::make_tensor(Tensor::filled({m, 1}, t)));
            auto gm = tape.backward(fwd.out, at);
            const Tensor& vjp = gm.at(fwd.x_id);
            const double wr = sched.omega_dot(t) / sched.omega(t);
            for (std::size_t j = 0; j < prev.size(); ++j)
                prev.data[j] += dt * (2.0 * vjp.data[j] - wr * at.data[j]);
        }
        if (reward.running_grad && reward.running_weight) {
            const double w = reward.running_weight(t);
            if (w != 0.0) {
                reward.running_grad(X, t, rg);
                for (std::size_t j = 0; j < prev.size(); ++j) prev.data[j] -= dt * w * rg.data[j];
            }
        }
        if (!prev.all_finite())
            throw NumericError("adjoint: non-finite adjoint at step " + std::to_string(i - 1));
    }
    return st;
}

AdjointState lean_adjoint_backward(const sampler::Trajectory& traj, const VelocityField& base,
                                   const schedules::InterpolantSchedule& sched,
                                   const RewardSpec& reward) {
    return lean_adjoint_backward_batch({traj}, base, sched, reward);
}

ObjectiveEval am_objective(const std::vector<sampler::Trajectory>& trajs,
                           const AdjointState& adjoints, const VelocityField& tuned,
                           const VelocityField& base,
                           const schedules::InterpolantSchedule& sched) {
    check_aligned(trajs);
    const std::size_t m = trajs.size();
    const std::size_t d = trajs.front().states.cols();
    const auto& times = trajs.front().times;
    const std::size_t n_pts = times.size();
    if (adjoints.a.size() != n_pts) throw DimensionError("am_objective: adjoint grid mismatch");

    ObjectiveEval ev;
    ev.grad.reserve(tuned.params().size());
    for (const auto& p : tuned.params()) ev.grad.push_back(Tensor::zeros(p.shape));

    // The terminal grid point carries no residual: the sum runs over the
    // points a step departs from.
    const std::size_t slices = n_pts - 1;
    std::vector<double> slice_value(slices, 0.0);
    std::vector<std::vector<Tensor>> slice_grad(slices);

    // sigma is validated up front; worker threads must not throw
    std::vector<double> sigmas(slices);
    for (std::size_t i = 0; i < slices; ++i) {
        sigmas[i] = schedules::sigma(sched, times[i]);
        if (!(sigmas[i] > 0.0)) throw ScheduleError("am_objective: sigma vanished on the grid");
    }

    parallel_for(slices, 4, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double t = times[i];
            const double sig = sigmas[i];
            const Tensor X = gather_states(trajs, i);
            auto Xp = diffcore::make_tensor(X);
            auto tcol = diffcore::make_tensor(Tensor::filled({m, 1}, t));

            Tensor base_out;
            base.eval(X, t, base_out);
            // constant part: -(2/sigma) u_base + sigma a
            Tensor shift = Tensor::zeros({m, d});
            for (std::size_t j = 0; j < shift.size(); ++j)
                shift.data[j] =
                    -(2.0 / sig) * base_out.data[j] + sig * adjoints.a[i].data[j];

            diffcore::Tape tape;
            auto fwd = tuned.forward(&tape, Xp, tcol);
            Var resid = diffcore::add(diffcore::scale(fwd.out, 2.0 / sig, &tape),
                                      diffcore::constant(std::move(shift)), &tape);
            Var obj = diffcore::sum_squares(resid, &tape);
            slice_value[i] = obj.value().data[0];
            auto gm = tape.backward(obj, Tensor::scalar(1.0));
            auto& dst = slice_grad[i];
            dst.reserve(fwd.param_ids.size());
            for (int id : fwd.param_ids) dst.push_back(gm.at(id));
        }
    });

    // fixed-order reduction keeps the result independent of the thread count
    for (std::size_t i = 0; i < slices; ++i) {
        ev.value += slice_value[i];
        for (std::size_t p = 0; p < ev.grad.size(); ++p)
            for (std::size_t j = 0; j < ev.grad[p].size(); ++j)
                ev.grad[p].data[j] += slice_grad[i][p].data[j];
    }
    return ev;
}

void validate(const FinetuneConfig& cfg) {
    if (cfg.outer_iters < 1 || cfg.batch < 1 || cfg.steps < 2 || cfg.inner_steps < 1)
        throw ConfigError("finetune: iteration, batch and step counts must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("finetune: lr must be positive");
    if (cfg.clip_norm < 0.0) throw ConfigError("finetune: clip_norm must be >= 0");
}

VelocityField finetune(const VelocityField& base, const schedules::InterpolantSchedule& sched,
                       const RewardSpec& reward, const FinetuneConfig& cfg) {
    validate(cfg);
    VelocityField tuned = base;
    flowmodel::Adam opt(tuned.param_count(),
                        flowmodel::Adam::Config{cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm});
    for (int round = 0; round < cfg.outer_iters; ++round) {
        const uint64_t round_seed = Rng::derive_stream(cfg.seed, 0xF17Eu + static_cast<uint64_t>(round));
        auto trajs = sampler::sample_memoryless_sde(tuned, cfg.batch, cfg.steps, sched, round_seed);
        const auto adjoints = lean_adjoint_backward_batch(trajs, base, sched, reward);
        for (int step = 0; step < cfg.inner_steps; ++step) {
            auto ev = am_objective(trajs, adjoints, tuned, base, sched);
            if (!std::isfinite(ev.value))
                throw NumericError("finetune: objective diverged in round " +
                                   std::to_string(round));
            opt.step(tuned.params(), ev.grad);
        }
    }
    return tuned;
}

}  // namespace fexp::adjoint
