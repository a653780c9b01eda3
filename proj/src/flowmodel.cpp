#include "fexp/flowmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fexp/rng.hpp"

namespace fexp::flowmodel {

using diffcore::Tensor;
using diffcore::TensorPtr;
using diffcore::Var;

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "silu") return Activation::silu;
    throw ConfigError("unknown activation: " + s);
}

namespace {

// Aliasing pointer into a tensor owned elsewhere; the caller guarantees the
// owner outlives every tape that recorded it.
TensorPtr borrow(const Tensor& t) {
    return TensorPtr(&t, [](const Tensor*) {});
}

}  // namespace

VelocityField::VelocityField(std::vector<std::size_t> widths, Activation act, uint64_t seed)
    : widths_(std::move(widths)), act_(act) {
    if (widths_.size() < 2) throw DomainError("velocity field: need at least input and output widths");
    for (auto w : widths_)
        if (w == 0) throw DomainError("velocity field: zero layer width");
    if (widths_.front() != widths_.back() + 1)
        throw DomainError("velocity field: input width must be dim+1 for the (x,t) input");
    Rng rng(Rng::derive_stream(seed, 0x1e17u));
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::size_t in = widths_[l], out = widths_[l + 1];
        Tensor w = Tensor::zeros({in + 1, out});
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
        for (std::size_t i = 0; i < in; ++i)
            for (std::size_t j = 0; j < out; ++j) w.at(i, j) = std_dev * rng.normal();
        // bias row (index in) stays zero
        params_.push_back(std::move(w));
    }
}

std::size_t VelocityField::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

Tensor VelocityField::weight(std::size_t layer) const {
    const Tensor& p = params_.at(layer);
    const std::size_t in = p.rows() - 1, out = p.cols();
    Tensor w = Tensor::zeros({in, out});
    std::memcpy(w.data.data(), p.data.data(), in * out * sizeof(double));
    return w;
}

Tensor VelocityField::bias(std::size_t layer) const {
    const Tensor& p = params_.at(layer);
    const std::size_t in = p.rows() - 1, out = p.cols();
    Tensor b = Tensor::zeros({out});
    std::memcpy(b.data.data(), p.data.data() + in * out, out * sizeof(double));
    return b;
}

VelocityField::Forward VelocityField::forward(diffcore::Tape* tape, TensorPtr X,
                                              TensorPtr t_col) const {
    if (X->rank() != 2 || X->cols() != dim())
        throw DimensionError("velocity field: input batch has wrong width");
    if (t_col->rank() != 2 || t_col->cols() != 1 || t_col->rows() != X->rows())
        throw DimensionError("velocity field: time column has wrong shape");

    Forward f;
    Var x = tape ? tape->input(X) : diffcore::constant(X);
    f.x_id = x.id;
    const Var ones = diffcore::constant(Tensor::filled({X->rows(), 1}, 1.0));
    Var h = diffcore::concat_cols(x, diffcore::constant(t_col), tape);
    for (std::size_t l = 0; l < params_.size(); ++l) {
        Var w = tape ? tape->input(borrow(params_[l])) : diffcore::constant(borrow(params_[l]));
        f.param_ids.push_back(w.id);
        Var z = diffcore::matmul(diffcore::concat_cols(h, ones, tape), w, tape);
        if (l + 1 < params_.size())
            h = act_ == Activation::silu ? diffcore::silu(z, tape) : diffcore::tanh(z, tape);
        else
            h = z;
    }
    f.out = h;
    return f;
}

void VelocityField::eval(const Tensor& X, double t, Tensor& out) const {
    auto t_col = diffcore::make_tensor(Tensor::filled({X.rows(), 1}, t));
    out = forward(nullptr, borrow(X), t_col).out.value();
}

std::vector<double> VelocityField::evaluate(std::span<const double> x, double t) const {
    if (x.size() != dim()) throw DimensionError("evaluate: point has wrong dimension");
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("evaluate: non-finite input");
    if (!std::isfinite(t)) throw DomainError("evaluate: non-finite time");
    Tensor X = Tensor::matrix(1, x.size(), std::vector<double>(x.begin(), x.end()));
    Tensor out;
    eval(X, t, out);
    return out.data;
}

namespace {

constexpr char kMagic[6] = {'F', 'E', 'X', 'P', '1', '\n'};

void put_u32(std::ofstream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ofstream& os, const double* v, std::size_t n) {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_f64(std::ifstream& is, double* v, std::size_t n) {
    if (!is.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double))))
        throw FormatError("checkpoint: truncated file");
}

}  // namespace

void VelocityField::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, static_cast<uint32_t>(params_.size()));
    for (const auto& p : params_) {
        put_u32(os, static_cast<uint32_t>(p.rows() - 1));
        put_u32(os, static_cast<uint32_t>(p.cols()));
    }
    for (std::size_t l = 0; l < params_.size(); ++l) {
        const Tensor w = weight(l);
        put_f64(os, w.data.data(), w.size());
    }
    for (std::size_t l = 0; l < params_.size(); ++l) {
        const Tensor b = bias(l);
        put_f64(os, b.data.data(), b.size());
    }
    put_u32(os, static_cast<uint32_t>(act_));
    if (!os) throw FormatError("checkpoint: write failed for " + path);
}

VelocityField VelocityField::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open " + path);
    char magic[6];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("checkpoint: bad magic");
    const uint32_t layers = get_u32(is);
    if (layers == 0 || layers > 4096) throw FormatError("checkpoint: implausible layer count");
    std::vector<std::pair<uint32_t, uint32_t>> dims(layers);
    for (auto& d : dims) {
        d.first = get_u32(is);
        d.second = get_u32(is);
        if (d.first == 0 || d.second == 0) throw FormatError("checkpoint: zero layer dimension");
    }
    for (std::size_t l = 1; l < dims.size(); ++l)
        if (dims[l].first != dims[l - 1].second)
            throw FormatError("checkpoint: layer dimensions do not chain");
    if (dims.front().first != dims.back().second + 1)
        throw FormatError("checkpoint: input width must be output width + 1");

    VelocityField f;
    f.widths_.push_back(dims.front().first);
    for (const auto& d : dims) f.widths_.push_back(d.second);
    for (const auto& d : dims) f.params_.push_back(Tensor::zeros({d.first + 1, d.second}));
    for (std::size_t l = 0; l < dims.size(); ++l)
        get_f64(is, f.params_[l].data.data(), static_cast<std::size_t>(dims[l].first) * dims[l].second);
    for (std::size_t l = 0; l < dims.size(); ++l)
        get_f64(is, f.params_[l].data.data() + static_cast<std::size_t>(dims[l].first) * dims[l].second,
                dims[l].second);
    const uint32_t act = get_u32(is);
    if (act > 1) throw FormatError("checkpoint: unknown activation code");
    f.act_ = static_cast<Activation>(act);
    is.peek();
    if (!is.eof()) throw FormatError("checkpoint: trailing bytes");
    return f;
}

bool VelocityField::same_parameters(const VelocityField& o) const {
    if (widths_ != o.widths_ || act_ != o.act_) return false;
    for (std::size_t l = 0; l < params_.size(); ++l)
        if (params_[l].data != o.params_[l].data) return false;
    return true;
}

std::vector<double> conditional_target(const schedules::InterpolantSchedule& s,
                                       std::span<const double> x0, std::span<const double> x1,
                                       double t) {
    if (x0.size() != x1.size()) throw DimensionError("conditional_target: dimensions disagree");
    const double kd = s.kappa_dot(t), wd = s.omega_dot(t);
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kd * x0[i] + wd * x1[i];
    return out;
}

TrainReport pretrain(VelocityField& field, const Tensor& data,
                     const schedules::InterpolantSchedule& sched, const TrainConfig& cfg) {
    if (data.rank() != 2 || data.rows() == 0) throw DomainError("pretrain: empty dataset");
    if (!data.all_finite()) throw DomainError("pretrain: non-finite data");
    if (cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr > 0.0))
        throw ConfigError("pretrain: epochs, batch and lr must be positive");
    const std::size_t d = data.cols();
    if (field.dim() != d) throw DimensionError("pretrain: field and data dimensions disagree");
    const std::size_t n =
        cfg.data_count == 0 ? data.rows() : std::min<std::size_t>(cfg.data_count, data.rows());

    Rng rng(Rng::derive_stream(cfg.seed, 0x7241u));
    Adam opt(field.param_count(), Adam::Config{cfg.lr, 0.9, 0.999, 1e-8, 0.0});

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    report.epoch_loss.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t b = std::min(cfg.batch, n - start);
            Tensor Xt = Tensor::zeros({b, d});
            Tensor Tc = Tensor::zeros({b, 1});
            Tensor Tg = Tensor::zeros({b, d});
            for (std::size_t r = 0; r < b; ++r) {
                const double* x1 = &data.data[order[start + r] * d];
                const double t = rng.uniform();
                const double k = sched.kappa(t), w = sched.omega(t);
                const double kd = sched.kappa_dot(t), wd = sched.omega_dot(t);
                Tc.data[r] = t;
                for (std::size_t c = 0; c < d; ++c) {
                    const double x0 = rng.normal();
                    Xt.at(r, c) = k * x0 + w * x1[c];
                    Tg.at(r, c) = kd * x0 + wd * x1[c];
                }
            }
            diffcore::Tape tape;
            auto fwd = field.forward(&tape, diffcore::make_tensor(std::move(Xt)),
                                     diffcore::make_tensor(std::move(Tc)));
            Var resid = diffcore::sub(fwd.out, diffcore::constant(std::move(Tg)), &tape);
            Var loss = diffcore::sum_squares(resid, &tape);
            const double batch_loss = loss.value().data[0] / static_cast<double>(b);
            if (!std::isfinite(batch_loss))
                throw NumericError("pretrain: loss diverged at epoch " + std::to_string(epoch));
            auto gm = tape.backward(loss, Tensor::scalar(1.0 / static_cast<double>(b)));
            std::vector<Tensor> grads;
            grads.reserve(fwd.param_ids.size());
            for (int id : fwd.param_ids) grads.push_back(gm.at(id));
            opt.step(field.params(), grads);
            epoch_loss += batch_loss;
            ++batches;
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    }
    return report;
}

VelocityField default_toy_field(std::size_t d, uint64_t seed) {
    return VelocityField({d + 1, 128, 128, 128, d}, Activation::silu, seed);
}

Adam::Adam(std::size_t total_params, Config cfg)
    : cfg_(cfg), m_(total_params, 0.0), v_(total_params, 0.0) {}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient mismatch");
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double norm2 = 0.0;
        for (const auto& g : grads)
            for (double v : g.data) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t off = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p].data;
        const auto& g = grads[p].data;
        if (w.size() != g.size()) throw DimensionError("adam: gradient shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = scale * g[i];
            m_[off + i] = cfg_.beta1 * m_[off + i] + (1.0 - cfg_.beta1) * gi;
            v_[off + i] = cfg_.beta2 * v_[off + i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m_[off + i] / bc1;
            const double vhat = v_[off + i] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        off += w.size();
    }
}

}  // namespace fexp::flowmodel
