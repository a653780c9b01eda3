#include "fexp/sampler.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "fexp/rng.hpp"

namespace fexp::sampler {

using diffcore::Tensor;

void validate(const ScoreConfig& cfg) {
    if (!(cfg.epsilon_clip > 0.0 && cfg.epsilon_clip < 0.5))
        throw DomainError("score config: epsilon_clip must lie in (0, 0.5)");
}

namespace {

void check_finite(const Tensor& X, std::size_t step, const char* what) {
    if (!X.all_finite())
        throw NumericError(std::string(what) + ": non-finite state at step " +
                           std::to_string(step));
}

Tensor draw_normal(Rng& rng, std::size_t n, std::size_t d) {
    Tensor X = Tensor::zeros({n, d});
    for (double& v : X.data) v = rng.normal();
    return X;
}

}  // namespace

Tensor sample_ode(const flowmodel::Field& field, std::size_t n, std::size_t steps, uint64_t seed) {
    if (n < 1 || steps < 1) throw DomainError("sample_ode: n and steps must be >= 1");
    const std::size_t d = field.dim();
    Rng rng(Rng::derive_stream(seed, 0x0dEu));
    Tensor X = draw_normal(rng, n, d);
    const double h = 1.0 / static_cast<double>(steps);
    Tensor U;
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * h;
        field.eval(X, t, U);
        for (std::size_t j = 0; j < X.size(); ++j) X.data[j] += h * U.data[j];
        check_finite(X, i, "sample_ode");
    }
    return X;
}

std::vector<Trajectory> sample_memoryless_sde(const flowmodel::Field& field, std::size_t n,
                                              std::size_t steps,
                                              const schedules::InterpolantSchedule& sched,
                                              uint64_t seed) {
    if (n < 1) throw DomainError("sample_memoryless_sde: n must be >= 1");
    if (steps < 2) throw DomainError("sample_memoryless_sde: steps must be >= 2");
    const std::size_t d = field.dim();
    const double h = 1.0 / static_cast<double>(steps);
    const double t0 = 0.5 * h;
    const double dt = (1.0 - h) / static_cast<double>(steps);

    std::vector<double> times(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) times[i] = t0 + static_cast<double>(i) * dt;

    Rng rng(Rng::derive_stream(seed, 0x5deu));
    // Batch the integration; per-path tensors are split out at the end.
    Tensor X = draw_normal(rng, n, d);
    std::vector<Tensor> states(steps + 1), noises(steps);
    states[0] = X;
    Tensor U;
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = times[i];
        const double sig = schedules::sigma(sched, t);
        const double wratio = sched.omega_dot(t) / sched.omega(t);
        field.eval(X, t, U);
        Tensor eps = draw_normal(rng, n, d);
        const double noise_scale = std::sqrt(dt) * sig;
        for (std::size_t j = 0; j < X.size(); ++j)
            X.data[j] += dt * (2.0 * U.data[j] - wratio * X.data[j]) + noise_scale * eps.data[j];
        check_finite(X, i, "sample_memoryless_sde");
        noises[i] = std::move(eps);
        states[i + 1] = X;
    }

    std::vector<Trajectory> out(n);
    for (std::size_t p = 0; p < n; ++p) {
        Trajectory& tr = out[p];
        tr.times = times;
        tr.states = Tensor::zeros({steps + 1, d});
        tr.noises = Tensor::zeros({steps, d});
        for (std::size_t i = 0; i <= steps; ++i)
            for (std::size_t c = 0; c < d; ++c) tr.states.at(i, c) = states[i].at(p, c);
        for (std::size_t i = 0; i < steps; ++i)
            for (std::size_t c = 0; c < d; ++c) tr.noises.at(i, c) = noises[i].at(p, c);
    }
    return out;
}

void score(const flowmodel::Field& field, const schedules::InterpolantSchedule& sched,
           const Tensor& X, double t, const ScoreConfig& cfg, Tensor& out) {
    validate(cfg);
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("score: t must lie in [0,1]");
    if (!X.all_finite()) throw DomainError("score: non-finite input");
    const double tc = std::min(t, 1.0 - cfg.epsilon_clip);
    const double denom = schedules::score_denominator(sched, tc);
    if (!(denom != 0.0)) throw NumericError("score: clipped denominator vanished");
    const double w = sched.omega(tc);
    const double wd = sched.omega_dot(tc);
    field.eval(X, tc, out);
    for (std::size_t j = 0; j < X.size(); ++j)
        out.data[j] = (w * out.data[j] - wd * X.data[j]) / denom;
}

std::vector<double> score_point(const flowmodel::Field& field,
                                const schedules::InterpolantSchedule& sched,
                                std::span<const double> x, double t, const ScoreConfig& cfg) {
    Tensor X = Tensor::matrix(1, x.size(), std::vector<double>(x.begin(), x.end()));
    Tensor out;
    score(field, sched, X, t, cfg, out);
    return out.data;
}

void dump_trajectories_csv(const std::vector<Trajectory>& trajs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("trajectory dump: cannot open " + path);
    if (trajs.empty()) return;
    const std::size_t d = trajs.front().states.cols();
    os << "t";
    for (std::size_t c = 1; c <= d; ++c) os << ",x" << c;
    os << "\n";
    os.precision(17);
    for (const auto& tr : trajs) {
        for (std::size_t i = 0; i < tr.grid_points(); ++i) {
            os << tr.times[i];
            for (std::size_t c = 0; c < d; ++c) os << "," << tr.states.at(i, c);
            os << "\n";
        }
    }
}

}  // namespace fexp::sampler
