#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fexp/diffcore.hpp"
#include "fexp/verifier.hpp"

namespace fexp::metrics {

double digamma(double x);

// Kozachenko-Leonenko estimate in nats:
//   H = psi(n) - psi(k) + log V_d + (d/n) sum_i log r_i
// with r_i the distance from point i to its k-th neighbour and V_d the unit
// d-ball volume. Exact duplicate points get 1e-9-scale jitter before the
// neighbour search (a warning is printed once per call).
double knn_entropy(const diffcore::Tensor& samples, std::size_t k);

// Fraction of rows accepted by the hard verifier.
double validity(const diffcore::Tensor& samples, const verifier::Verifier& v);

struct KernelSpec {
    enum class Kind { rbf, neg_dist_exp };
    Kind kind = Kind::rbf;
    // rbf: lengthscale; <= 0 selects the median pairwise distance.
    // neg_dist_exp: k(x,y) = exp(-|x-y| / scale).
    double bandwidth = 0.0;
};
KernelSpec::Kind kernel_kind_from_string(const std::string& s);

// VENDI score exp(-sum lambda_i log lambda_i) over the eigenvalues of K/n,
// K_ij = k(x_i, x_j). Lies in [1, n].
double vendi(const diffcore::Tensor& samples, const KernelSpec& kernel);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
// ascending. Optionally accumulates eigenvectors (columns of V).
std::vector<double> symmetric_eigenvalues(const diffcore::Tensor& m,
                                          diffcore::Tensor* eigenvectors = nullptr);

}  // namespace fexp::metrics
