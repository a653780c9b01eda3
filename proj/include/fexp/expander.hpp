#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <memory>
#include <string>
#include <vector>

#include "fexp/adjoint.hpp"
#include "fexp/flowmodel.hpp"
#include "fexp/metrics.hpp"
#include "fexp/sampler.hpp"
#include "fexp/schedules.hpp"
#include "fexp/verifier.hpp"

namespace fexp::expander {

enum class Mode { global, local, nse, terminal_only, constr };
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct MetricsConfig {
    std::size_t samples = 5000;
    std::size_t ode_steps = 200;
    std::size_t vendi_samples = 1000;  // kernel matrix cap; 0 disables VENDI
    std::size_t knn_k = 5;
    int every = 1;  // snapshot cadence in iterations; 0 = initial and final only
};

struct ExpanderConfig {
    Mode mode = Mode::global;
    int iterations = 10;  // K
    schedules::CoefficientSchedules coeffs;
    sampler::ScoreConfig score;
    std::shared_ptr<const verifier::SmoothVerifier> smooth;  // projection reward
    verifier::VerifierPtr scoring_verifier;                  // hard verifier for metrics
    adjoint::FinetuneConfig solver;
    // The projection step may carry its own solver budget; unset fields fall
    // back to `solver`. The expansion tilt is already damped by the few-step
    // solve, while the projection has to chase the sharper v~^eta tilt.
    std::optional<adjoint::FinetuneConfig> solver_project;
    metrics::KernelSpec vendi_kernel;
    MetricsConfig metric_cfg;
    uint64_t seed = 0;
    std::string out_dir;  // empty: keep everything in memory

    void validate() const;
};

struct IterateRecord {
    int k = 0;
    std::string phase;  // pretrained | expand | project | terminal
    std::string checkpoint;
    double entropy = std::numeric_limits<double>::quiet_NaN();
    double validity = std::numeric_limits<double>::quiet_NaN();
    double vendi = std::numeric_limits<double>::quiet_NaN();
    double wall_seconds = 0.0;
};

struct RunResult {
    flowmodel::VelocityField field;
    std::vector<IterateRecord> records;
};

// grad_x of the first variation of the iteration-k functional at (x, t):
//   global: -s^{current}_t(x)
//   local:  -s^{current}_t(x) - alpha_t (s^{current}_t(x) - s^{pre}_t(x))
// Scores use the configured terminal clipping.
void running_cost_grad(Mode mode, const flowmodel::Field& current, const flowmodel::Field& pre,
                       const schedules::InterpolantSchedule& sched,
                       const std::function<double(double)>& alpha, const diffcore::Tensor& X,
                       double t, const sampler::ScoreConfig& score_cfg, diffcore::Tensor& out);

// One expansion step: fine-tunes field_in with the running reward
// gamma_k lambda_t * running_cost_grad and no terminal reward.
flowmodel::VelocityField expand_step(const flowmodel::VelocityField& field_in,
                                     const flowmodel::VelocityField& pre_field,
                                     const ExpanderConfig& cfg, int k);

// One projection step: fine-tunes field_in with terminal reward
// eta_k * grad log v~ and no running reward.
flowmodel::VelocityField project_step(const flowmodel::VelocityField& field_in,
                                      const verifier::SmoothVerifier& smooth, double eta_k,
                                      const ExpanderConfig& cfg, int k);

// The outer loop over k = 1..K; per mode:
//   global/local    expand then project
//   nse             expand only
//   terminal_only   terminal reward -gamma_k s_{1-eps}, no running cost
//   constr          project only
RunResult run(const flowmodel::VelocityField& pre_field, const ExpanderConfig& cfg);

}  // namespace fexp::expander
