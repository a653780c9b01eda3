#include "fexp/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fexp/threads.hpp"

namespace fexp::diffcore {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& s) {
    std::size_t p = 1;
    for (auto v : s) p *= v;
    return p;
}

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionError(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != data.size())
        throw DimensionError("tensor: shape does not match element count");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::vector<double> d(shape_product(shape), 0.0);
    return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::row(std::vector<double> v) {
    std::vector<std::size_t> s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> d) {
    return Tensor({r, c}, std::move(d));
}

Tensor Tensor::filled(std::vector<std::size_t> shape, double v) {
    std::vector<double> d(shape_product(shape), v);
    return Tensor(std::move(shape), std::move(d));
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

const Tensor& GradMap::at(int id) const {
    if (!has(id)) throw DomainError("gradient map: node has no gradient");
    return grads[static_cast<std::size_t>(id)];
}

void matmul_kernel(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate) {
    const std::size_t grain = std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, k * n) + 1);
    parallel_for(m, std::max<std::size_t>(grain, 8), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            double* ci = c + i * n;
            if (!accumulate) std::memset(ci, 0, n * sizeof(double));
            const double* ai = a + i * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = ai[kk];
                const double* bk = b + kk * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
            }
        }
    });
}

Var Tape::record(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.back().out, this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor t) { return input(make_tensor(std::move(t))); }

Var Tape::input(TensorPtr t) {
    Node n;
    n.op = Op::leaf;
    n.out = std::move(t);
    return record(std::move(n));
}

namespace {

Var emit(Tape* tape, Op op, const Var& a, const Var& b, Tensor out, double c = 0.0) {
    TensorPtr outp = make_tensor(std::move(out));
    if (!tape) return Var{std::move(outp), nullptr, -1};
    Tape::Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.va = a.val;
    n.vb = b.val;
    n.out = std::move(outp);
    n.c = c;
    return tape->record(std::move(n));
}

}  // namespace

Var matmul(const Var& a, const Var& b, Tape* tape) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.rank() == 2 && B.rank() == 2, "matmul: operands must be rank-2");
    require(A.cols() == B.rows(), "matmul: inner dimensions disagree");
    Tensor C = Tensor::zeros({A.rows(), B.cols()});
    matmul_kernel(A.data.data(), B.data.data(), C.data.data(), A.rows(), A.cols(), B.cols(),
                  false);
    return emit(tape, Op::matmul, a, b, std::move(C));
}

namespace {

// add/sub allow equal shapes or a scalar on either side.
Tensor elementwise_binary(const Tensor& A, const Tensor& B, bool subtract) {
    if (A.same_shape(B) || (A.is_scalar() && B.is_scalar())) {
        Tensor C = A;
        const double s = subtract ? -1.0 : 1.0;
        for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += s * B.data[i];
        return C;
    }
    if (B.is_scalar()) {
        Tensor C = A;
        const double v = subtract ? -B.data[0] : B.data[0];
        for (double& x : C.data) x += v;
        return C;
    }
    if (A.is_scalar()) {
        Tensor C = B;
        const double v = A.data[0];
        for (double& x : C.data) x = subtract ? v - x : v + x;
        return C;
    }
    throw DimensionError("add/sub: shapes incompatible (only scalar broadcast supported)");
}

}  // namespace

Var add(const Var& a, const Var& b, Tape* tape) {
    return emit(tape, Op::add, a, b, elementwise_binary(a.value(), b.value(), false));
}

Var sub(const Var& a, const Var& b, Tape* tape) {
    return emit(tape, Op::sub, a, b, elementwise_binary(a.value(), b.value(), true));
}

Var scale(const Var& a, double c, Tape* tape) {
    Tensor C = a.value();
    for (double& x : C.data) x *= c;
    return emit(tape, Op::scale, a, Var{}, std::move(C), c);
}

Var tanh(const Var& a, Tape* tape) {
    Tensor C = a.value();
    for (double& x : C.data) x = std::tanh(x);
    return emit(tape, Op::tanh_fn, a, Var{}, std::move(C));
}

Var silu(const Var& a, Tape* tape) {
    Tensor C = a.value();
    for (double& x : C.data) x = x * sigmoid(x);
    return emit(tape, Op::silu_fn, a, Var{}, std::move(C));
}

Var sum(const Var& a, Tape* tape) {
    double acc = 0.0;
    for (double v : a.value().data) acc += v;
    return emit(tape, Op::sum, a, Var{}, Tensor::scalar(acc));
}

Var sum_squares(const Var& a, Tape* tape) {
    double acc = 0.0;
    for (double v : a.value().data) acc += v * v;
    return emit(tape, Op::sum_squares, a, Var{}, Tensor::scalar(acc));
}

Var concat_cols(const Var& a, const Var& b, Tape* tape) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require(A.rank() == 2 && B.rank() == 2, "concat_cols: operands must be rank-2");
    require(A.rows() == B.rows(), "concat_cols: row counts disagree");
    const std::size_t r = A.rows(), ca = A.cols(), cb = B.cols();
    Tensor C = Tensor::zeros({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        std::memcpy(&C.data[i * (ca + cb)], &A.data[i * ca], ca * sizeof(double));
        std::memcpy(&C.data[i * (ca + cb) + ca], &B.data[i * cb], cb * sizeof(double));
    }
    return emit(tape, Op::concat_cols, a, b, std::move(C));
}

namespace {

void accumulate_into(Tensor& dst, const Tensor& src) {
    if (dst.data.empty()) {
        dst = src;
        return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

// Gradient of a broadcast operand: collapse to scalar when the operand was.
Tensor reduce_for(const Tensor& operand, const Tensor& grad) {
    if (operand.same_shape(grad)) return grad;
    double acc = 0.0;
    for (double v : grad.data) acc += v;
    Tensor g = Tensor::zeros(operand.shape);
    g.data[0] = acc;
    return g;
}

}  // namespace

GradMap Tape::backward(const Var& output, const Tensor& seed) const {
    if (output.tape != this || output.id < 0 || output.id >= num_nodes())
        throw DomainError("backward: output node is not on this tape");
    if (!seed.same_shape(*nodes_[static_cast<std::size_t>(output.id)].out))
        throw DimensionError("backward: seed shape does not match output shape");

    GradMap gm;
    gm.grads.resize(nodes_.size());
    gm.grads[static_cast<std::size_t>(output.id)] = seed;

    for (int id = output.id; id >= 0; --id) {
        Tensor& g = gm.grads[static_cast<std::size_t>(id)];
        if (g.data.empty()) continue;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul: {
                const Tensor& A = *n.va;
                const Tensor& B = *n.vb;
                const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
                if (n.a >= 0) {
                    // dA = g * B^T, through the parallel kernel
                    Tensor bt = Tensor::zeros({p, k});
                    for (std::size_t j = 0; j < k; ++j)
                        for (std::size_t l = 0; l < p; ++l) bt.data[l * k + j] = B.data[j * p + l];
                    Tensor da = Tensor::zeros(A.shape);
                    matmul_kernel(g.data.data(), bt.data.data(), da.data.data(), m, p, k, false);
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                if (n.b >= 0) {
                    // dB = A^T * g
                    Tensor at = Tensor::zeros({k, m});
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < k; ++j) at.data[j * m + i] = A.data[i * k + j];
                    Tensor db = Tensor::zeros(B.shape);
                    matmul_kernel(at.data.data(), g.data.data(), db.data.data(), k, m, p, false);
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.b)], db);
                }
                break;
            }
            case Op::add: {
                if (n.a >= 0)
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], reduce_for(*n.va, g));
                if (n.b >= 0)
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.b)], reduce_for(*n.vb, g));
                break;
            }
            case Op::sub: {
                if (n.a >= 0)
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], reduce_for(*n.va, g));
                if (n.b >= 0) {
                    Tensor neg = g;
                    for (double& v : neg.data) v = -v;
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.b)], reduce_for(*n.vb, neg));
                }
                break;
            }
            case Op::scale: {
                if (n.a >= 0) {
                    Tensor da = g;
                    for (double& v : da.data) v *= n.c;
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                break;
            }
            case Op::tanh_fn: {
                if (n.a >= 0) {
                    Tensor da = g;
                    const Tensor& y = *n.out;
                    for (std::size_t i = 0; i < da.size(); ++i)
                        da.data[i] *= 1.0 - y.data[i] * y.data[i];
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                break;
            }
            case Op::silu_fn: {
                if (n.a >= 0) {
                    Tensor da = g;
                    const Tensor& x = *n.va;
                    for (std::size_t i = 0; i < da.size(); ++i) {
                        const double s = sigmoid(x.data[i]);
                        da.data[i] *= s * (1.0 + x.data[i] * (1.0 - s));
                    }
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                break;
            }
            case Op::sum: {
                if (n.a >= 0) {
                    Tensor da = Tensor::filled(n.va->shape, g.data[0]);
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                break;
            }
            case Op::sum_squares: {
                if (n.a >= 0) {
                    Tensor da = *n.va;
                    for (double& v : da.data) v *= 2.0 * g.data[0];
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                break;
            }
            case Op::concat_cols: {
                const std::size_t r = n.va->rows(), ca = n.va->cols(), cb = n.vb->cols();
                if (n.a >= 0) {
                    Tensor da = Tensor::zeros({r, ca});
                    for (std::size_t i = 0; i < r; ++i)
                        std::memcpy(&da.data[i * ca], &g.data[i * (ca + cb)], ca * sizeof(double));
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.a)], da);
                }
                if (n.b >= 0) {
                    Tensor db = Tensor::zeros({r, cb});
                    for (std::size_t i = 0; i < r; ++i)
                        std::memcpy(&db.data[i * cb], &g.data[i * (ca + cb) + ca],
                                    cb * sizeof(double));
                    accumulate_into(gm.grads[static_cast<std::size_t>(n.b)], db);
                }
                break;
            }
        }
    }
    return gm;
}

}  // namespace fexp::diffcore
