#include "fexp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <unordered_map>

#include "fexp/rng.hpp"
#include "fexp/threads.hpp"

namespace fexp::metrics {

using diffcore::Tensor;

double digamma(double x) {
    if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
    // Shift into the asymptotic regime, then the standard series. The shift
    // bound keeps the truncation error below 1e-13.
    double result = 0.0;
    while (x < 12.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const double diff = a[c] - b[c];
        s += diff * diff;
    }
    return s;
}

// Largest-of-k running set; keeps the k smallest squared distances.
struct KSmallest {
    explicit KSmallest(std::size_t k) : vals(k, std::numeric_limits<double>::infinity()) {}
    void offer(double v) {
        if (v >= vals.back()) return;
        auto it = std::upper_bound(vals.begin(), vals.end(), v);
        vals.insert(it, v);
        vals.pop_back();
    }
    double kth() const { return vals.back(); }
    std::vector<double> vals;
};

}  // namespace

double knn_entropy(const Tensor& samples, std::size_t k) {
    if (samples.rank() != 2) throw DimensionError("knn_entropy: samples must be n x d");
    const std::size_t n = samples.rows(), d = samples.cols();
    if (k < 1 || n <= k) throw DomainError("knn_entropy: need n > k >= 1");

    // Jitter exact duplicates so every k-th neighbour distance is positive.
    Tensor pts = samples;
    {
        std::unordered_map<std::string, std::size_t> seen;
        seen.reserve(n);
        bool warned = false;
        Rng rng(0x9d17e4u);
        for (std::size_t i = 0; i < n; ++i) {
            std::string key(reinterpret_cast<const char*>(&pts.data[i * d]), d * sizeof(double));
            auto [it, inserted] = seen.emplace(std::move(key), i);
            if (!inserted) {
                if (!warned) {
                    std::fprintf(stderr, "knn_entropy: duplicate points found, applying jitter\n");
                    warned = true;
                }
                for (std::size_t c = 0; c < d; ++c)
                    pts.data[i * d + c] += 1e-9 * (rng.uniform() - 0.5);
            }
        }
    }

    std::vector<double> log_r(n);
    parallel_for(n, 64, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            KSmallest best(k);
            const double* xi = &pts.data[i * d];
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                best.offer(squared_distance(xi, &pts.data[j * d], d));
            }
            log_r[i] = 0.5 * std::log(best.kth());
        }
    });

    double sum_log_r = 0.0;
    for (double v : log_r) sum_log_r += v;

    const double dd = static_cast<double>(d);
    const double log_unit_ball =
        0.5 * dd * std::log(3.14159265358979323846) - std::lgamma(0.5 * dd + 1.0);
    return digamma(static_cast<double>(n)) - digamma(static_cast<double>(k)) + log_unit_ball +
           dd / static_cast<double>(n) * sum_log_r;
}

double validity(const Tensor& samples, const verifier::Verifier& v) {
    if (samples.rank() != 2) throw DimensionError("validity: samples must be n x d");
    if (samples.cols() != v.dim()) throw DimensionError("validity: dimension mismatch");
    const std::size_t n = samples.rows(), d = samples.cols();
    if (n == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (v.accepts({&samples.data[i * d], d})) ++ok;
    return static_cast<double>(ok) / static_cast<double>(n);
}

KernelSpec::Kind kernel_kind_from_string(const std::string& s) {
    if (s == "rbf") return KernelSpec::Kind::rbf;
    if (s == "neg_dist_exp") return KernelSpec::Kind::neg_dist_exp;
    throw ConfigError("unknown kernel kind: " + s);
}

double vendi(const Tensor& samples, const KernelSpec& kernel) {
    if (samples.rank() != 2 || samples.rows() == 0)
        throw DimensionError("vendi: samples must be a non-empty n x d matrix");
    const std::size_t n = samples.rows(), d = samples.cols();
    if (n == 1) return 1.0;

    std::vector<double> dist(n * n, 0.0);
    parallel_for(n, 32, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dist[i * n + j] =
                    std::sqrt(squared_distance(&samples.data[i * d], &samples.data[j * d], d));
    });

    double bandwidth = kernel.bandwidth;
    if (kernel.kind == KernelSpec::Kind::rbf && !(bandwidth > 0.0)) {
        // median heuristic over off-diagonal pairs
        std::vector<double> off;
        off.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off.push_back(dist[i * n + j]);
        std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
        bandwidth = off[off.size() / 2];
        if (!(bandwidth > 0.0)) bandwidth = 1.0;
    }
    if (kernel.kind == KernelSpec::Kind::neg_dist_exp && !(bandwidth > 0.0)) bandwidth = 1.0;

    Tensor K = Tensor::zeros({n, n});
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double r = dist[i * n + j];
            const double kij = kernel.kind == KernelSpec::Kind::rbf
                                   ? std::exp(-r * r / (2.0 * bandwidth * bandwidth))
                                   : std::exp(-r / bandwidth);
            K.at(i, j) = kij * inv_n;  // eigenvalues of K/n sum to 1
        }

    const auto eig = symmetric_eigenvalues(K);
    double h = 0.0;
    for (double lam : eig) {
        if (lam <= 1e-14) continue;  // 0 log 0 = 0; tiny negatives are roundoff
        h -= lam * std::log(lam);
    }
    return std::exp(h);
}

std::vector<double> symmetric_eigenvalues(const Tensor& m, Tensor* eigenvectors) {
    if (m.rank() != 2 || m.rows() != m.cols())
        throw DimensionError("symmetric_eigenvalues: matrix must be square");
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m.at(i, j) - m.at(j, i)) > 1e-10 * std::max(1.0, std::abs(m.at(i, j))))
                throw DomainError("symmetric_eigenvalues: matrix is not symmetric");

    Tensor a = m;
    Tensor v;
    if (eigenvectors) {
        v = Tensor::zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a.at(i, i)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, std::abs(a.at(i, j)));
    if (scale == 0.0) return std::vector<double>(n, 0.0);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (std::sqrt(off) <= 1e-13 * scale * static_cast<double>(n)) {
            std::vector<double> eig(n);
            for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
            if (eigenvectors) {
                // sort eigenpairs together
                std::vector<std::size_t> order(n);
                for (std::size_t i = 0; i < n; ++i) order[i] = i;
                std::sort(order.begin(), order.end(),
                          [&](std::size_t x, std::size_t y) { return eig[x] < eig[y]; });
                Tensor vs = Tensor::zeros({n, n});
                std::vector<double> es(n);
                for (std::size_t c = 0; c < n; ++c) {
                    es[c] = eig[order[c]];
                    for (std::size_t r = 0; r < n; ++r) vs.at(r, c) = v.at(r, order[c]);
                }
                *eigenvectors = std::move(vs);
                return es;
            }
            std::sort(eig.begin(), eig.end());
            return eig;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double app = a.at(p, p), aqq = a.at(q, q);
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a.at(r, p), arq = a.at(r, q);
                        a.at(r, p) = arp - s * (arq + tau * arp);
                        a.at(p, r) = a.at(r, p);
                        a.at(r, q) = arq + s * (arp - tau * arq);
                        a.at(q, r) = a.at(r, q);
                    }
                    if (eigenvectors) {
                        const double vrp = v.at(r, p), vrq = v.at(r, q);
                        v.at(r, p) = vrp - s * (vrq + tau * vrp);
                        v.at(r, q) = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }
    }
    throw NumericError("symmetric_eigenvalues: no convergence within " +
                       std::to_string(max_sweeps) + " sweeps");
}

}  // namespace fexp::metrics
