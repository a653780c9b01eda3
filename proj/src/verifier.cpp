#include "fexp/verifier.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fexp::verifier {

namespace {

class EllipseVerifier final : public MarginVerifier {
  public:
    EllipseVerifier(std::array<double, 2> center, std::array<double, 2> axes, double rotation)
        : center_(center), axes_(axes), cos_(std::cos(rotation)), sin_(std::sin(rotation)) {
        if (!(axes[0] > 0.0 && axes[1] > 0.0))
            throw DomainError("ellipse: semi-axes must be positive");
    }

    std::size_t dim() const override { return 2; }

    double margin(std::span<const double> x) const override { return 1.0 - quad(x); }

    void margin_grad(std::span<const double> x, std::span<double> g) const override {
        // frame coords xi = R^T (x - c); q = (xi1/a)^2 + (xi2/b)^2
        const double dx = x[0] - center_[0];
        const double dy = x[1] - center_[1];
        const double xi1 = cos_ * dx + sin_ * dy;
        const double xi2 = -sin_ * dx + cos_ * dy;
        const double q1 = 2.0 * xi1 / (axes_[0] * axes_[0]);
        const double q2 = 2.0 * xi2 / (axes_[1] * axes_[1]);
        g[0] = -(q1 * cos_ - q2 * sin_);
        g[1] = -(q1 * sin_ + q2 * cos_);
    }

    std::string describe() const override {
        std::ostringstream os;
        os << "ellipse(center=(" << center_[0] << "," << center_[1] << "), axes=(" << axes_[0]
           << "," << axes_[1] << "))";
        return os.str();
    }

  private:
    double quad(std::span<const double> x) const {
        const double dx = x[0] - center_[0];
        const double dy = x[1] - center_[1];
        const double xi1 = cos_ * dx + sin_ * dy;
        const double xi2 = -sin_ * dx + cos_ * dy;
        return (xi1 / axes_[0]) * (xi1 / axes_[0]) + (xi2 / axes_[1]) * (xi2 / axes_[1]);
    }

    std::array<double, 2> center_;
    std::array<double, 2> axes_;
    double cos_, sin_;
};

class BoxVerifier final : public MarginVerifier {
  public:
    BoxVerifier(std::vector<double> lo, std::vector<double> hi)
        : lo_(std::move(lo)), hi_(std::move(hi)) {
        if (lo_.size() != hi_.size() || lo_.empty())
            throw DomainError("box: bound dimensions disagree");
        for (std::size_t i = 0; i < lo_.size(); ++i)
            if (!(lo_[i] < hi_[i])) throw DomainError("box: lo must be below hi");
    }

    std::size_t dim() const override { return lo_.size(); }

    double margin(std::span<const double> x) const override {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lo_.size(); ++i)
            m = std::min(m, std::min(x[i] - lo_[i], hi_[i] - x[i]));
        return m;
    }

    void margin_grad(std::span<const double> x, std::span<double> g) const override {
        std::fill(g.begin(), g.end(), 0.0);
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        double sign = 1.0;
        for (std::size_t i = 0; i < lo_.size(); ++i) {
            if (x[i] - lo_[i] < best) {
                best = x[i] - lo_[i];
                arg = i;
                sign = 1.0;
            }
            if (hi_[i] - x[i] < best) {
                best = hi_[i] - x[i];
                arg = i;
                sign = -1.0;
            }
        }
        g[arg] = sign;
    }

    std::string describe() const override {
        std::ostringstream os;
        os << "box(d=" << lo_.size() << ")";
        return os.str();
    }

  private:
    std::vector<double> lo_, hi_;
};

class HalfspaceBandVerifier final : public MarginVerifier {
  public:
    HalfspaceBandVerifier(std::vector<double> normal, double lo, double hi)
        : n_(std::move(normal)), lo_(lo), hi_(hi) {
        if (n_.empty()) throw DomainError("halfspace_band: empty normal");
        if (!(lo < hi)) throw DomainError("halfspace_band: lo must be below hi");
        double norm2 = 0.0;
        for (double v : n_) norm2 += v * v;
        if (!(norm2 > 0.0)) throw DomainError("halfspace_band: zero normal");
    }

    std::size_t dim() const override { return n_.size(); }

    double margin(std::span<const double> x) const override {
        double p = 0.0;
        for (std::size_t i = 0; i < n_.size(); ++i) p += n_[i] * x[i];
        return std::min(p - lo_, hi_ - p);
    }

    void margin_grad(std::span<const double> x, std::span<double> g) const override {
        double p = 0.0;
        for (std::size_t i = 0; i < n_.size(); ++i) p += n_[i] * x[i];
        const double sign = (p - lo_ <= hi_ - p) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n_.size(); ++i) g[i] = sign * n_[i];
    }

    std::string describe() const override { return "halfspace_band"; }

  private:
    std::vector<double> n_;
    double lo_, hi_;
};

class IntersectVerifier final : public MarginVerifier {
  public:
    explicit IntersectVerifier(std::vector<VerifierPtr> members) : members_(std::move(members)) {
        if (members_.empty()) throw DomainError("intersect: empty verifier list");
        for (const auto& m : members_) {
            if (m->dim() != members_.front()->dim())
                throw DimensionError("intersect: member dimensions disagree");
            margins_.push_back(dynamic_cast<const MarginVerifier*>(m.get()));
        }
    }

    std::size_t dim() const override { return members_.front()->dim(); }

    bool accepts(std::span<const double> x) const override {
        for (const auto& m : members_)
            if (!m->accepts(x)) return false;
        return true;
    }

    double margin(std::span<const double> x) const override {
        double m = std::numeric_limits<double>::infinity();
        for (const auto* mv : margins_) {
            if (!mv) throw DomainError("intersect: member without a signed margin");
            m = std::min(m, mv->margin(x));
        }
        return m;
    }

    void margin_grad(std::span<const double> x, std::span<double> g) const override {
        double best = std::numeric_limits<double>::infinity();
        const MarginVerifier* arg = nullptr;
        for (const auto* mv : margins_) {
            if (!mv) throw DomainError("intersect: member without a signed margin");
            const double m = mv->margin(x);
            if (m < best) {
                best = m;
                arg = mv;
            }
        }
        arg->margin_grad(x, g);
    }

    std::string describe() const override {
        std::string s = "intersect(";
        for (std::size_t i = 0; i < members_.size(); ++i)
            s += (i ? "," : "") + members_[i]->describe();
        return s + ")";
    }

  private:
    std::vector<VerifierPtr> members_;
    std::vector<const MarginVerifier*> margins_;
};

}  // namespace

VerifierPtr ellipse(std::array<double, 2> center, std::array<double, 2> semi_axes,
                    double rotation) {
    return std::make_shared<EllipseVerifier>(center, semi_axes, rotation);
}

VerifierPtr box(std::vector<double> lo, std::vector<double> hi) {
    return std::make_shared<BoxVerifier>(std::move(lo), std::move(hi));
}

VerifierPtr halfspace_band(std::vector<double> normal, double lo, double hi) {
    return std::make_shared<HalfspaceBandVerifier>(std::move(normal), lo, hi);
}

VerifierPtr intersect(std::vector<VerifierPtr> members) {
    return std::make_shared<IntersectVerifier>(std::move(members));
}

SmoothVerifier::SmoothVerifier(VerifierPtr hard, double tau) : hard_(std::move(hard)), tau_(tau) {
    if (!(tau > 0.0)) throw DomainError("smooth: temperature must be positive");
    margin_ = dynamic_cast<const MarginVerifier*>(hard_.get());
    if (!margin_) throw DomainError("smooth: verifier kind does not expose a signed margin");
}

double SmoothVerifier::value(std::span<const double> x) const {
    return 1.0 / (1.0 + std::exp(-tau_ * margin_->margin(x)));
}

double SmoothVerifier::log_value(std::span<const double> x) const {
    const double z = tau_ * margin_->margin(x);
    // -log(1 + exp(-z)), stable on both tails
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

void SmoothVerifier::grad_log_value(std::span<const double> x, std::span<double> g) const {
    const double z = tau_ * margin_->margin(x);
    const double w = tau_ / (1.0 + std::exp(z));  // tau * sigmoid(-z)
    margin_->margin_grad(x, g);
    for (auto& v : g) v *= w;
}

}  // namespace fexp::verifier
