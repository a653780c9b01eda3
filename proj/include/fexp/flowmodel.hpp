#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fexp/diffcore.hpp"
#include "fexp/schedules.hpp"

namespace fexp::flowmodel {

// Anything evaluable as a velocity field u(x,t). Lets tests drive the
// samplers with closed-form fields.
class Field {
  public:
    virtual ~Field() = default;
    virtual std::size_t dim() const = 0;
    // X is n x d, out is resized to n x d with out[i] = u(X[i], t).
    virtual void eval(const diffcore::Tensor& X, double t, diffcore::Tensor& out) const = 0;
};

enum class Activation : uint32_t { tanh = 0, silu = 1 };
Activation activation_from_string(const std::string& s);

// MLP u_theta(x,t) on the concatenated input (x, t). Hidden layers use the
// configured activation, the output layer is linear. Parameters are stored
// as bias-augmented matrices [(in+1) x out]; the bias is the last row.
class VelocityField final : public Field {
  public:
    VelocityField() = default;
    // widths includes input (= d+1) and output (= d), e.g. {3,128,128,128,2}.
    VelocityField(std::vector<std::size_t> widths, Activation act, uint64_t seed);

    std::size_t dim() const override { return widths_.empty() ? 0 : widths_.back(); }
    std::size_t layer_count() const { return params_.size(); }
    Activation activation() const { return act_; }
    const std::vector<std::size_t>& widths() const { return widths_; }

    std::vector<diffcore::Tensor>& params() { return params_; }
    const std::vector<diffcore::Tensor>& params() const { return params_; }
    std::size_t param_count() const;

    diffcore::Tensor weight(std::size_t layer) const;  // [in x out]
    diffcore::Tensor bias(std::size_t layer) const;    // [out]

    struct Forward {
        diffcore::Var out;             // n x d
        std::vector<int> param_ids;    // tape ids of the augmented matrices
        int x_id = -1;                 // tape id of the input batch
    };

    // Taped (or plain, tape == nullptr) forward. t_col is n x 1 and is
    // treated as a constant.
    Forward forward(diffcore::Tape* tape, diffcore::TensorPtr X, diffcore::TensorPtr t_col) const;

    void eval(const diffcore::Tensor& X, double t, diffcore::Tensor& out) const override;
    std::vector<double> evaluate(std::span<const double> x, double t) const;

    void save(const std::string& path) const;
    static VelocityField load(const std::string& path);

    bool same_parameters(const VelocityField& o) const;

  private:
    std::vector<std::size_t> widths_;
    std::vector<diffcore::Tensor> params_;  // per layer, [(in+1) x out]
    Activation act_ = Activation::silu;
};

// kappa'_t x0 + omega'_t x1.
std::vector<double> conditional_target(const schedules::InterpolantSchedule& s,
                                       std::span<const double> x0, std::span<const double> x1,
                                       double t);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch = 256;
    double lr = 1e-3;
    uint64_t seed = 0;
    std::size_t data_count = 0;  // 0 = use all provided rows
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean squared residual norm per epoch
};

// Conditional flow-matching regression of `field` onto the data rows
// (n x d). Throws NumericError naming the epoch if the loss diverges.
TrainReport pretrain(VelocityField& field, const diffcore::Tensor& data,
                     const schedules::InterpolantSchedule& sched, const TrainConfig& cfg);

// The toy architecture: hidden 128,128,128, silu, time as the last input.
VelocityField default_toy_field(std::size_t d, uint64_t seed);

// Adam with optional global-norm gradient clipping. State is flat over the
// parameter tensors passed to step(), which must keep a fixed layout.
class Adam {
  public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double clip_norm = 0.0;  // 0 disables clipping
    };

    Adam(std::size_t total_params, Config cfg);
    void step(std::vector<diffcore::Tensor>& params, const std::vector<diffcore::Tensor>& grads);

  private:
    Config cfg_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

}  // namespace fexp::flowmodel
