#include "fexp/expander.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fexp/csv.hpp"
#include "fexp/rng.hpp"

namespace fexp::expander {

using diffcore::Tensor;
using flowmodel::VelocityField;

Mode mode_from_string(const std::string& s) {
    if (s == "global") return Mode::global;
    if (s == "local") return Mode::local;
    if (s == "nse") return Mode::nse;
    if (s == "terminal_only") return Mode::terminal_only;
    if (s == "constr") return Mode::constr;
    throw ConfigError("unknown expander mode: " + s);
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::global: return "global";
        case Mode::local: return "local";
        case Mode::nse: return "nse";
        case Mode::terminal_only: return "terminal_only";
        case Mode::constr: return "constr";
    }
    return "?";
}

void ExpanderConfig::validate() const {
    if (iterations < 1) throw ConfigError("expander: iterations must be >= 1");
    if (!coeffs.lambda || !coeffs.alpha || !coeffs.gamma || !coeffs.eta)
        throw ConfigError("expander: all coefficient schedules must be set");
    sampler::validate(score);
    adjoint::validate(solver);
    if (solver_project) adjoint::validate(*solver_project);
    if (mode == Mode::global || mode == Mode::nse || mode == Mode::terminal_only) {
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
            if (coeffs.alpha(t) != 0.0)
                throw ConfigError("expander: mode requires alpha_t = 0");
    }
    if (mode == Mode::nse) {
        for (int k = 1; k <= iterations; ++k)
            if (coeffs.eta(k) != 0.0) throw ConfigError("expander: nse requires eta_k = 0");
    }
    if ((mode == Mode::global || mode == Mode::local || mode == Mode::constr) && !smooth)
        throw ConfigError("expander: projection modes need a smooth verifier");
}

void running_cost_grad(Mode mode, const flowmodel::Field& current, const flowmodel::Field& pre,
                       const schedules::InterpolantSchedule& sched,
                       const std::function<double(double)>& alpha, const Tensor& X, double t,
                       const sampler::ScoreConfig& score_cfg, Tensor& out) {
    sampler::score(current, sched, X, t, score_cfg, out);
    const bool local = (mode == Mode::local || mode == Mode::nse);
    const double a = local && alpha ? alpha(t) : 0.0;
    if (a == 0.0) {
        for (double& v : out.data) v = -v;
        return;
    }
    Tensor spre;
    sampler::score(pre, sched, X, t, score_cfg, spre);
    // -(1+a) s + a s_pre
    for (std::size_t j = 0; j < out.size(); ++j)
        out.data[j] = -(1.0 + a) * out.data[j] + a * spre.data[j];
}

namespace {

adjoint::RewardSpec expansion_reward(const VelocityField& field_in, const VelocityField& pre_field,
                                     const ExpanderConfig& cfg, double gamma_k) {
    adjoint::RewardSpec reward;
    // The first variation is frozen at the entering iterate for the whole
    // fine-tuning solve (mirror descent linearizes at the previous iterate).
    reward.running_grad = [&field_in, &pre_field, &cfg](const Tensor& X, double t, Tensor& out) {
        running_cost_grad(cfg.mode, field_in, pre_field, schedules::linear_schedule(),
                          cfg.coeffs.alpha, X, t, cfg.score, out);
    };
    reward.running_weight = [gamma_k, &cfg](double t) { return gamma_k * cfg.coeffs.lambda(t); };
    return reward;
}

std::string checkpoint_name(const std::string& dir, int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%03d.fexp", k);
    return dir + "/" + buf;
}

struct Snapshot {
    double entropy, validity, vendi;
};

Snapshot take_snapshot(const VelocityField& field, const ExpanderConfig& cfg, uint64_t eval_seed) {
    const auto& mc = cfg.metric_cfg;
    Tensor samples = sampler::sample_ode(field, mc.samples, mc.ode_steps, eval_seed);
    Snapshot s{};
    s.entropy = metrics::knn_entropy(samples, mc.knn_k);
    s.validity = cfg.scoring_verifier ? metrics::validity(samples, *cfg.scoring_verifier)
                                      : std::numeric_limits<double>::quiet_NaN();
    if (mc.vendi_samples > 0) {
        const std::size_t nv = std::min(mc.vendi_samples, samples.rows());
        Tensor sub = Tensor::zeros({nv, samples.cols()});
        std::copy_n(samples.data.begin(), nv * samples.cols(), sub.data.begin());
        s.vendi = metrics::vendi(sub, cfg.vendi_kernel);
    } else {
        s.vendi = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

}  // namespace

VelocityField expand_step(const VelocityField& field_in, const VelocityField& pre_field,
                          const ExpanderConfig& cfg, int k) {
    if (k < 1) throw DomainError("expand_step: k must be >= 1");
    const double gamma_k = cfg.coeffs.gamma(k);
    auto reward = expansion_reward(field_in, pre_field, cfg, gamma_k);
    auto solver = cfg.solver;
    solver.seed = Rng::derive_stream(cfg.seed, 2 * static_cast<uint64_t>(k));
    return adjoint::finetune(field_in, schedules::linear_schedule(), reward, solver);
}

VelocityField project_step(const VelocityField& field_in, const verifier::SmoothVerifier& smooth,
                           double eta_k, const ExpanderConfig& cfg, int k) {
    if (eta_k < 0.0) throw DomainError("project_step: eta must be >= 0");
    adjoint::RewardSpec reward;
    reward.terminal_weight = eta_k;
    reward.terminal_grad = [&smooth](const Tensor& X, Tensor& out) {
        const std::size_t d = X.cols();
        for (std::size_t i = 0; i < X.rows(); ++i)
            smooth.grad_log_value({&X.data[i * d], d}, {&out.data[i * d], d});
    };
    auto solver = cfg.solver_project ? *cfg.solver_project : cfg.solver;
    solver.seed = Rng::derive_stream(cfg.seed, 2 * static_cast<uint64_t>(k) + 1);
    return adjoint::finetune(field_in, schedules::linear_schedule(), reward, solver);
}

RunResult run(const VelocityField& pre_field, const ExpanderConfig& cfg) {
    cfg.validate();
    const auto& sched = schedules::linear_schedule();
    const uint64_t eval_seed = Rng::derive_stream(cfg.seed, 0xEA57u);
    const bool to_disk = !cfg.out_dir.empty();
    if (to_disk) std::filesystem::create_directories(cfg.out_dir);

    RunResult result;
    result.field = pre_field;

    auto note = [&](int k, const std::string& phase, const VelocityField& field, bool snapshot,
                    double wall) {
        IterateRecord rec;
        rec.k = k;
        rec.phase = phase;
        rec.wall_seconds = wall;
        if (snapshot) {
            const Snapshot s = take_snapshot(field, cfg, eval_seed);
            rec.entropy = s.entropy;
            rec.validity = s.validity;
            rec.vendi = s.vendi;
        }
        if (to_disk && (phase == "pretrained" || phase == "project" || phase == "terminal" ||
                        (phase == "expand" && (cfg.mode == Mode::nse)))) {
            rec.checkpoint = checkpoint_name(cfg.out_dir, k);
            field.save(rec.checkpoint);
        }
        result.records.push_back(std::move(rec));
    };

    auto want_snapshot = [&](int k) {
        if (k == 0 || k == cfg.iterations) return true;
        return cfg.metric_cfg.every > 0 && k % cfg.metric_cfg.every == 0;
    };

    note(0, "pretrained", result.field, want_snapshot(0), 0.0);

    for (int k = 1; k <= cfg.iterations; ++k) {
        using clock = std::chrono::steady_clock;
        switch (cfg.mode) {
            case Mode::global:
            case Mode::local: {
                auto t0 = clock::now();
                VelocityField expanded = expand_step(result.field, pre_field, cfg, k);
                const double w1 = std::chrono::duration<double>(clock::now() - t0).count();
                note(k, "expand", expanded, want_snapshot(k), w1);
                t0 = clock::now();
                VelocityField projected =
                    project_step(expanded, *cfg.smooth, cfg.coeffs.eta(k), cfg, k);
                const double w2 = std::chrono::duration<double>(clock::now() - t0).count();
                result.field = std::move(projected);
                note(k, "project", result.field, want_snapshot(k), w2);
                break;
            }
            case Mode::nse: {
                const auto t0 = clock::now();
                result.field = expand_step(result.field, pre_field, cfg, k);
                const double w = std::chrono::duration<double>(clock::now() - t0).count();
                note(k, "expand", result.field, want_snapshot(k), w);
                break;
            }
            case Mode::terminal_only: {
                const auto t0 = clock::now();
                // Terminal entropy reward via the clipped score of the
                // entering iterate; no running cost.
                const VelocityField base = result.field;
                adjoint::RewardSpec reward;
                reward.terminal_weight = cfg.coeffs.gamma(k);
                reward.terminal_grad = [&base, &cfg, &sched](const Tensor& X, Tensor& out) {
                    sampler::score(base, sched, X, 1.0, cfg.score, out);
                    for (double& v : out.data) v = -v;
                };
                auto solver = cfg.solver;
                solver.seed = Rng::derive_stream(cfg.seed, 2 * static_cast<uint64_t>(k));
                result.field = adjoint::finetune(base, sched, reward, solver);
                const double w = std::chrono::duration<double>(clock::now() - t0).count();
                note(k, "terminal", result.field, want_snapshot(k), w);
                break;
            }
            case Mode::constr: {
                const auto t0 = clock::now();
                result.field = project_step(result.field, *cfg.smooth, cfg.coeffs.eta(k), cfg, k);
                const double w = std::chrono::duration<double>(clock::now() - t0).count();
                note(k, "project", result.field, want_snapshot(k), w);
                break;
            }
        }
    }

    if (to_disk) {
        csv::Writer metrics_csv(cfg.out_dir + "/metrics.csv",
                                {"k", "phase", "entropy", "validity", "vendi", "wall_seconds"});
        for (const auto& r : result.records)
            metrics_csv.row({csv::cell(r.k), r.phase, csv::cell(r.entropy), csv::cell(r.validity),
                             csv::cell(r.vendi), csv::cell(r.wall_seconds)});

        const Tensor samples =
            sampler::sample_ode(result.field, cfg.metric_cfg.samples, cfg.metric_cfg.ode_steps,
                                eval_seed);
        csv::write_matrix(cfg.out_dir + "/samples.csv", samples);
    }
    return result;
}

}  // namespace fexp::expander
