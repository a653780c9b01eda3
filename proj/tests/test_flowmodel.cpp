#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fexp/flowmodel.hpp"
#include "fexp/rng.hpp"
#include "support/test_support.hpp"

using namespace fexp;
using diffcore::Tensor;
using flowmodel::Activation;
using flowmodel::VelocityField;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("zero final layer gives the zero map") {
    VelocityField f({3, 16, 2}, Activation::silu, 5);
    auto& last = f.params().back();
    std::fill(last.data.begin(), last.data.end(), 0.0);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> x{rng.normal(), rng.normal()};
        const auto u = f.evaluate(x, rng.uniform());
        CHECK(u[0] == 0.0);
        CHECK(u[1] == 0.0);
    }
}

TEST_CASE("evaluation is deterministic and rejects bad input") {
    VelocityField f({3, 32, 32, 2}, Activation::silu, 7);
    const std::vector<double> x{0.3, -1.2};
    const auto a = f.evaluate(x, 0.25);
    const auto b = f.evaluate(x, 0.25);
    CHECK(a == b);

    const std::vector<double> bad{std::nan(""), 0.0};
    CHECK_THROWS_AS(f.evaluate(bad, 0.5), DomainError);
    const std::vector<double> wide{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(f.evaluate(wide, 0.5), DimensionError);
}

TEST_CASE("identical seeds give identical fields") {
    VelocityField a({3, 32, 2}, Activation::silu, 1234);
    VelocityField b({3, 32, 2}, Activation::silu, 1234);
    CHECK(a.same_parameters(b));
    VelocityField c({3, 32, 2}, Activation::silu, 1235);
    CHECK_FALSE(a.same_parameters(c));
}

TEST_CASE("conditional target under the linear schedule") {
    const auto& s = schedules::linear_schedule();
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> x0{rng.normal(), rng.normal()};
        const std::vector<double> x1{rng.normal(), rng.normal()};
        const auto tgt = flowmodel::conditional_target(s, x0, x1, rng.uniform());
        CHECK(tgt[0] == doctest::Approx(x1[0] - x0[0]).epsilon(1e-15));
        CHECK(tgt[1] == doctest::Approx(x1[1] - x0[1]).epsilon(1e-15));
    }
    // stationary interpolant
    const std::vector<double> c{0.7, -0.4};
    const auto zero = flowmodel::conditional_target(s, c, c, 0.3);
    CHECK(zero[0] == doctest::Approx(0.0));
    CHECK(zero[1] == doctest::Approx(0.0));
    // explicit example
    const std::vector<double> za{0.0, 0.0}, zb{2.0, -1.0};
    const auto v = flowmodel::conditional_target(s, za, zb, 0.9);
    CHECK(v[0] == doctest::Approx(2.0));
    CHECK(v[1] == doctest::Approx(-1.0));
}

TEST_CASE("checkpoint round trip is bit exact") {
    VelocityField f({3, 24, 24, 2}, Activation::tanh, 99);
    const std::string path = temp_path("fexp_roundtrip.fexp");
    f.save(path);
    const VelocityField g = VelocityField::load(path);
    CHECK(f.same_parameters(g));
    CHECK(g.activation() == Activation::tanh);

    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> x{rng.normal(), rng.normal()};
        const double t = rng.uniform();
        CHECK(f.evaluate(x, t) == g.evaluate(x, t));
    }
    std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are format errors") {
    VelocityField f({3, 8, 2}, Activation::silu, 1);
    const std::string path = temp_path("fexp_corrupt.fexp");
    f.save(path);

    SUBCASE("bad magic") {
        std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
        fs.seekp(0);
        fs.write("BOGUS\n", 6);
        fs.close();
        CHECK_THROWS_AS(VelocityField::load(path), FormatError);
    }
    SUBCASE("mismatched layer count truncates the stream") {
        std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
        fs.seekp(6);
        const unsigned char four[4] = {4, 0, 0, 0};  // claims 4 layers, file has 2
        fs.write(reinterpret_cast<const char*>(four), 4);
        fs.close();
        CHECK_THROWS_AS(VelocityField::load(path), FormatError);
    }
    SUBCASE("truncated payload") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 16);
        CHECK_THROWS_AS(VelocityField::load(path), FormatError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("point-mass pretraining drives the loss down") {
    // one-point dataset {c}, replicated so each minibatch draws a fresh
    // (x0, t) pair per row; the on-path target is exactly c - x0
    const std::vector<double> c{0.8, -0.5};
    Tensor data = Tensor::zeros({512, 2});
    for (std::size_t i = 0; i < 512; ++i) {
        data.at(i, 0) = c[0];
        data.at(i, 1) = c[1];
    }
    VelocityField f({3, 64, 64, 2}, Activation::silu, 21);
    flowmodel::TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch = 64;
    cfg.lr = 1.5e-3;
    cfg.seed = 21;
    const auto report = flowmodel::pretrain(f, data, schedules::linear_schedule(), cfg);
    CHECK(report.epoch_loss.size() == 500);
    CHECK(report.epoch_loss.back() < 0.05 * 2.0);

    // on-path accuracy at mid-time: u(x_t, t) should match c - x0
    Rng rng(6);
    double rms = 0.0;
    for (int i = 0; i < 32; ++i) {
        const std::vector<double> x0{rng.normal(), rng.normal()};
        const std::vector<double> xt{0.5 * x0[0] + 0.5 * c[0], 0.5 * x0[1] + 0.5 * c[1]};
        const auto u = f.evaluate(xt, 0.5);
        rms += (u[0] - (c[0] - x0[0])) * (u[0] - (c[0] - x0[0])) +
               (u[1] - (c[1] - x0[1])) * (u[1] - (c[1] - x0[1]));
    }
    CHECK(std::sqrt(rms / 32.0) < 0.35);

    // at (c, t=0.99) the analytic value is exactly 0; the fit is loosest
    // here because the target's x-sensitivity grows like 1/(1-t)
    const auto u_c = f.evaluate(c, 0.99);
    CHECK(std::hypot(u_c[0], u_c[1]) < 1.0);
}

TEST_CASE("pretraining is reproducible and trends down on the ellipse data") {
    Rng rng(2);
    Tensor data = Tensor::zeros({256, 2});
    for (std::size_t i = 0; i < 256; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * rng.uniform();
        data.at(i, 0) = 2.0 * std::cos(a) + 0.05 * rng.normal();
        data.at(i, 1) = 1.2 * std::sin(a) + 0.05 * rng.normal();
    }
    flowmodel::TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 64;
    cfg.lr = 1e-3;
    cfg.seed = 77;

    VelocityField f1({3, 32, 32, 2}, Activation::silu, 10);
    VelocityField f2({3, 32, 32, 2}, Activation::silu, 10);
    const auto r1 = flowmodel::pretrain(f1, data, schedules::linear_schedule(), cfg);
    const auto r2 = flowmodel::pretrain(f2, data, schedules::linear_schedule(), cfg);
    CHECK(f1.same_parameters(f2));
    CHECK(r1.epoch_loss == r2.epoch_loss);
    CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());
}

TEST_CASE("full-batch loss is invariant under dataset shuffling") {
    // with batch = n the epoch sees every row once; the mean loss cannot
    // depend on row order for a fixed parameter state. Checked through the
    // regression directly: epoch-0 loss of a zero-capacity (frozen) field.
    Rng rng(8);
    Tensor data = Tensor::zeros({32, 2});
    for (double& v : data.data) v = rng.normal();
    Tensor shuffled = data;
    for (std::size_t i = 32; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        for (std::size_t c = 0; c < 2; ++c)
            std::swap(shuffled.at(i - 1, c), shuffled.at(j, c));
    }
    // x0/t draws are tied to row slots, so compare the *expected* loss by
    // averaging over many epochs: the estimator must agree within noise.
    auto avg_loss = [&](const Tensor& d) {
        VelocityField f({3, 8, 2}, Activation::silu, 4);
        for (auto& p : f.params()) std::fill(p.data.begin(), p.data.end(), 0.0);
        flowmodel::TrainConfig cfg;
        cfg.epochs = 400;
        cfg.batch = 32;
        cfg.lr = 1e-12;  // effectively frozen parameters
        cfg.seed = 55;
        const auto rep = flowmodel::pretrain(f, d, schedules::linear_schedule(), cfg);
        double mean = 0.0;
        for (double v : rep.epoch_loss) mean += v;
        return mean / static_cast<double>(rep.epoch_loss.size());
    };
    const double a = avg_loss(data);
    const double b = avg_loss(shuffled);
    CHECK(a == doctest::Approx(b).epsilon(0.05));
}

TEST_CASE("rejects invalid training configs and data") {
    VelocityField f({3, 8, 2}, Activation::silu, 1);
    Tensor empty = Tensor::zeros({0, 2});
    flowmodel::TrainConfig cfg;
    CHECK_THROWS_AS(flowmodel::pretrain(f, empty, schedules::linear_schedule(), cfg),
                    DomainError);
    Tensor bad = Tensor::matrix(1, 2, {1.0, std::nan("")});
    CHECK_THROWS_AS(flowmodel::pretrain(f, bad, schedules::linear_schedule(), cfg), DomainError);
    flowmodel::TrainConfig zero_epochs;
    zero_epochs.epochs = 0;
    Tensor ok = Tensor::matrix(1, 2, {1.0, 2.0});
    CHECK_THROWS_AS(flowmodel::pretrain(f, ok, schedules::linear_schedule(), zero_epochs),
                    ConfigError);
}
