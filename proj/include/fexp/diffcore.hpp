#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "fexp/errors.hpp"

namespace fexp::diffcore {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 or 2.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> v);                            // shape {n}
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> d);
    static Tensor filled(std::vector<std::size_t> shape, double v);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return rank() >= 1 ? shape[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? shape[1] : 1; }
    bool is_scalar() const { return size() == 1; }

    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

using TensorPtr = std::shared_ptr<const Tensor>;

inline TensorPtr make_tensor(Tensor t) { return std::make_shared<const Tensor>(std::move(t)); }

class Tape;

// A tensor value, optionally tracked on a tape (id >= 0). Untracked values
// (id < 0) act as constants: ops accept them but no gradient flows back.
struct Var {
    TensorPtr val;
    const Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const { return *val; }
    bool tracked() const { return id >= 0; }
};

inline Var constant(Tensor t) { return Var{make_tensor(std::move(t)), nullptr, -1}; }
inline Var constant(TensorPtr t) { return Var{std::move(t), nullptr, -1}; }

enum class Op : int {
    leaf,
    matmul,
    add,
    sub,
    scale,
    tanh_fn,
    silu_fn,
    sum,
    sum_squares,
    concat_cols,
};

// Gradients of every recorded node, indexed by node id. Nodes the seed does
// not reach have an empty tensor.
struct GradMap {
    std::vector<Tensor> grads;
    bool has(int id) const {
        return id >= 0 && static_cast<std::size_t>(id) < grads.size() &&
               !grads[static_cast<std::size_t>(id)].data.empty();
    }
    const Tensor& at(int id) const;
};

// Single-use record of primitive ops in topological order. Confined to one
// thread from construction through backward().
class Tape {
  public:
    Var input(Tensor t);
    Var input(TensorPtr t);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    // d<seed, output>/dx for every recorded node x. Seed must match the
    // output shape; an output not produced by this tape is a lookup error.
    GradMap backward(const Var& output, const Tensor& seed) const;

    // Implementation detail of the primitive ops; not for direct use.
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        TensorPtr va;  // operand values saved for the backward rules
        TensorPtr vb;
        TensorPtr out;
        double c = 0.0;  // scalar for Op::scale
    };

    Var record(Node n);

  private:
    std::vector<Node> nodes_;
};

// Primitives. `tape == nullptr` is the un-recorded fast path; the arithmetic
// is identical either way.
Var matmul(const Var& a, const Var& b, Tape* tape);
Var add(const Var& a, const Var& b, Tape* tape);  // same shape, or one scalar
Var sub(const Var& a, const Var& b, Tape* tape);
Var scale(const Var& a, double c, Tape* tape);
Var tanh(const Var& a, Tape* tape);
Var silu(const Var& a, Tape* tape);
Var sum(const Var& a, Tape* tape);          // -> scalar
Var sum_squares(const Var& a, Tape* tape);  // -> scalar
Var concat_cols(const Var& a, const Var& b, Tape* tape);

// Row-major GEMM, C (m x n) += / = A (m x k) * B (k x n). Parallelised over
// rows; each output element is produced by exactly one chunk so results are
// identical for any thread count.
void matmul_kernel(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate);

}  // namespace fexp::diffcore
