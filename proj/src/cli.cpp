#include "fexp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fexp/config.hpp"
#include "fexp/csv.hpp"
#include "fexp/datasets.hpp"
#include "fexp/expander.hpp"
#include "fexp/metrics.hpp"
#include "fexp/oracle.hpp"
#include "fexp/rng.hpp"
#include "fexp/sampler.hpp"
#include "fexp/svg.hpp"

namespace fexp::cli {

namespace {

using config::Config;
using diffcore::Tensor;

datasets::GlobalSpec global_spec_from(const Config& cfg) {
    datasets::GlobalSpec spec;
    const auto center = cfg.get_doubles("dataset.ellipse.center", {0.0, 0.0});
    const auto axes = cfg.get_doubles("dataset.ellipse.axes", {2.0, 1.2});
    if (center.size() != 2 || axes.size() != 2)
        throw ConfigError("dataset.ellipse.*: expected two comma-separated numbers");
    spec.center = {center[0], center[1]};
    spec.semi_axes = {axes[0], axes[1]};
    spec.rotation = cfg.get_double("dataset.ellipse.rotation", 0.4);
    spec.spread = cfg.get_double("dataset.spread", spec.spread);
    return spec;
}

datasets::TrimodalSpec trimodal_spec_from(const Config& cfg) {
    datasets::TrimodalSpec spec;
    const auto weights = cfg.get_doubles("dataset.weights", {0.9, 0.05, 0.05});
    if (weights.size() != 3) throw ConfigError("dataset.weights: expected three numbers");
    std::copy(weights.begin(), weights.end(), spec.weights.begin());
    spec.spread = cfg.get_double("dataset.spread", spec.spread);
    spec.invalid_mode = static_cast<std::size_t>(cfg.get_int("dataset.invalid_mode", 1));
    spec.weak_boundary = cfg.get_double("dataset.weak_boundary", spec.weak_boundary);
    return spec;
}

verifier::VerifierPtr verifier_from(const Config& cfg, const std::string& prefix) {
    const std::string kind = cfg.get_string(prefix + ".kind");
    if (kind == "ellipse") {
        const auto center = cfg.get_doubles(prefix + ".center", {0.0, 0.0});
        const auto axes = cfg.get_doubles(prefix + ".axes", {2.0, 1.2});
        if (center.size() != 2 || axes.size() != 2)
            throw ConfigError(prefix + ": expected two comma-separated numbers");
        return verifier::ellipse({center[0], center[1]}, {axes[0], axes[1]},
                                 cfg.get_double(prefix + ".rotation", 0.4));
    }
    if (kind == "box") {
        const auto lo = cfg.get_doubles(prefix + ".lo");
        const auto hi = cfg.get_doubles(prefix + ".hi");
        return verifier::box(lo, hi);
    }
    if (kind == "halfspace_band") {
        const auto normal = cfg.get_doubles(prefix + ".normal");
        return verifier::halfspace_band(
            normal, cfg.get_double(prefix + ".lo", -std::numeric_limits<double>::infinity()),
            cfg.get_double(prefix + ".hi", std::numeric_limits<double>::infinity()));
    }
    throw ConfigError(prefix + ".kind: unknown verifier kind `" + kind + "`");
}

std::vector<std::size_t> widths_from(const Config& cfg, std::size_t d) {
    std::vector<std::size_t> widths{d + 1};
    for (double w : cfg.get_doubles("model.hidden", {128, 128, 128}))
        widths.push_back(static_cast<std::size_t>(w));
    widths.push_back(d);
    return widths;
}

int cmd_pretrain(Config& cfg) {
    const uint64_t seed = cfg.get_seed("seed");
    const std::string out = cfg.get_string("out");
    std::filesystem::create_directories(out);

    const std::string kind = cfg.get_string("dataset.kind");
    const std::size_t count = static_cast<std::size_t>(cfg.get_int("dataset.count", 4000));
    Tensor data;
    if (kind == "ellipse_partial") {
        data = datasets::gen_global_setting(global_spec_from(cfg), count,
                                            Rng::derive_stream(seed, 0xDA7Au));
    } else if (kind == "trimodal") {
        data = datasets::gen_local_setting(trimodal_spec_from(cfg), count,
                                           Rng::derive_stream(seed, 0xDA7Au))
                   .points;
    } else {
        throw ConfigError("dataset.kind: unknown dataset `" + kind + "`");
    }

    flowmodel::VelocityField field(
        widths_from(cfg, data.cols()),
        flowmodel::activation_from_string(cfg.get_string("model.activation", "silu")), seed);
    flowmodel::TrainConfig tc;
    tc.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs", 200));
    tc.batch = static_cast<std::size_t>(cfg.get_int("train.batch", 256));
    tc.lr = cfg.get_double("train.lr", 1e-3);
    tc.seed = seed;
    cfg.check_consumed();

    const auto report = flowmodel::pretrain(field, data, schedules::linear_schedule(), tc);
    field.save(out + "/model.fexp");
    csv::write_matrix(out + "/data.csv", data);
    csv::Writer loss_csv(out + "/train_loss.csv", {"epoch", "loss"});
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        loss_csv.row({csv::cell(e), csv::cell(report.epoch_loss[e])});
    std::printf("pretrain: %zu points, final epoch loss %.6f -> %s/model.fexp\n", data.rows(),
                report.epoch_loss.back(), out.c_str());
    return 0;
}

int cmd_expand(Config& cfg) {
    const uint64_t seed = cfg.get_seed("seed");
    const std::string out = cfg.get_string("out");
    const auto field = flowmodel::VelocityField::load(cfg.get_string("model"));

    expander::ExpanderConfig ec;
    ec.mode = expander::mode_from_string(cfg.get_string("expander.mode"));
    ec.iterations = static_cast<int>(cfg.get_int("expander.iterations", 10));
    ec.seed = seed;
    ec.out_dir = out;

    // gamma: either direct, or the (beta, gamma_tilde) parametrization which
    // divides the step size by alpha + 1.
    double alpha = cfg.get_double("expander.alpha", 0.0);
    double gamma_base = cfg.get_double("gamma.base", 1.5);
    if (cfg.has("expander.beta")) {
        const auto rep = schedules::reparametrize_beta(cfg.get_double("expander.beta"),
                                                       cfg.get_double("gamma.tilde"));
        alpha = rep.alpha;
        gamma_base = rep.gamma;
    }
    const auto gamma_kind =
        schedules::gamma_kind_from_string(cfg.get_string("gamma.kind", "paper_toy"));
    ec.coeffs.gamma = [gamma_kind, gamma_base](int k) {
        return schedules::gamma_schedule(gamma_kind, gamma_base, k);
    };
    ec.coeffs.alpha = [alpha](double) { return alpha; };
    ec.coeffs.eta = schedules::constant_per_iteration(cfg.get_double("eta", 0.0));

    const auto lambda_kind = schedules::lambda_kind_from_string(
        cfg.get_string("lambda.kind", "zero_band_constant"));
    const double lambda_value = cfg.get_double("lambda.value", 1.2);
    const double lambda_band = cfg.get_double("lambda.band", 0.05);
    ec.coeffs.lambda = [lambda_kind, lambda_value, lambda_band](double t) {
        return schedules::lambda_weight(lambda_kind, schedules::linear_schedule(), lambda_band,
                                        lambda_value, t);
    };

    ec.score.epsilon_clip = cfg.get_double("score.epsilon", 0.02);

    if (cfg.has("verifier.kind")) {
        auto hard = verifier_from(cfg, "verifier");
        ec.smooth = std::make_shared<verifier::SmoothVerifier>(hard,
                                                               cfg.get_double("verifier.tau", 10.0));
        ec.scoring_verifier = cfg.has("scoring.kind") ? verifier_from(cfg, "scoring") : hard;
    } else if (cfg.has("scoring.kind")) {
        ec.scoring_verifier = verifier_from(cfg, "scoring");
    }

    ec.solver.outer_iters = static_cast<int>(cfg.get_int("am.rounds", 16));
    ec.solver.batch = static_cast<std::size_t>(cfg.get_int("am.batch", 16));
    ec.solver.steps = static_cast<std::size_t>(cfg.get_int("am.steps", 40));
    ec.solver.inner_steps = static_cast<int>(cfg.get_int("am.inner", 1));
    ec.solver.lr = cfg.get_double("am.lr", 5.5e-4);
    ec.solver.clip_norm = cfg.get_double("am.clip", 10.0);
    if (cfg.has("am.project.rounds") || cfg.has("am.project.batch") ||
        cfg.has("am.project.inner") || cfg.has("am.project.lr")) {
        adjoint::FinetuneConfig pp = ec.solver;
        pp.outer_iters = static_cast<int>(cfg.get_int("am.project.rounds", pp.outer_iters));
        pp.batch = static_cast<std::size_t>(cfg.get_int("am.project.batch",
                                                        static_cast<long>(pp.batch)));
        pp.inner_steps = static_cast<int>(cfg.get_int("am.project.inner", pp.inner_steps));
        pp.lr = cfg.get_double("am.project.lr", pp.lr);
        ec.solver_project = pp;
    }

    ec.metric_cfg.samples = static_cast<std::size_t>(cfg.get_int("metrics.samples", 5000));
    ec.metric_cfg.ode_steps = static_cast<std::size_t>(cfg.get_int("metrics.steps", 200));
    ec.metric_cfg.every = static_cast<int>(cfg.get_int("metrics.every", 1));
    ec.metric_cfg.vendi_samples = static_cast<std::size_t>(cfg.get_int("metrics.vendi", 1000));
    ec.metric_cfg.knn_k = static_cast<std::size_t>(cfg.get_int("metrics.k", 5));
    cfg.check_consumed();

    const auto result = expander::run(field, ec);
    const auto& last = result.records.back();
    std::printf("expand[%s]: K=%d entropy=%.4f validity=%.4f -> %s\n",
                expander::to_string(ec.mode).c_str(), ec.iterations, last.entropy, last.validity,
                out.c_str());
    return 0;
}

struct OracleChecks {
    bool prop1 = true;
    bool theorem1 = true;
    bool kl_fixed_point = true;
};

oracle::DiscreteMeasure random_measure(Rng& rng, std::size_t m) {
    std::vector<double> w(m);
    for (auto& v : w) v = 0.05 + rng.uniform();
    return oracle::DiscreteMeasure::from_weights(std::move(w));
}

oracle::SupportMask random_mask(Rng& rng, std::size_t m) {
    oracle::SupportMask mask(m, 0);
    bool any = false;
    for (auto& b : mask) {
        b = rng.uniform() < 0.7 ? 1 : 0;
        any = any || b;
    }
    if (!any) mask[static_cast<std::size_t>(rng.next_u64() % m)] = 1;
    return mask;
}

int cmd_oracle(Config& cfg) {
    const uint64_t seed = cfg.get_seed("seed");
    const std::string out = cfg.get_string("out", "");
    const std::size_t max_cells = static_cast<std::size_t>(cfg.get_int("oracle.cells", 200));
    const int prop1_instances = static_cast<int>(cfg.get_int("oracle.prop1.instances", 1000));
    const int thm1_instances = static_cast<int>(cfg.get_int("oracle.theorem1.instances", 100));
    const int thm1_K = static_cast<int>(cfg.get_int("oracle.theorem1.K", 50));
    const auto alphas = cfg.get_doubles("oracle.kl_alphas", {0.5, 1.0, 9.0});
    const int csv_K = static_cast<int>(cfg.get_int("oracle.md.K", 50));
    const double csv_gamma = cfg.get_double("oracle.md.gamma", 0.3);
    cfg.check_consumed();

    OracleChecks checks;
    Rng rng(Rng::derive_stream(seed, 0x02Ac1eu));

    // Proposition 1: expand-then-project equals constrained MD, instance-wise.
    double worst_tv = 0.0;
    for (int i = 0; i < prop1_instances; ++i) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % (max_cells - 1));
        const auto q = random_measure(rng, m);
        const auto mask = random_mask(rng, m);
        std::vector<double> grad(m);
        for (auto& g : grad) g = 6.0 * (rng.uniform() - 0.5);
        const double gamma = 0.1 + 1.9 * rng.uniform();
        const auto a = oracle::md_step(q, grad, gamma, mask);
        const auto b = oracle::expand_then_project_discrete(q, grad, gamma, mask);
        worst_tv = std::max(worst_tv, oracle::total_variation(a, b));
    }
    checks.prop1 = worst_tv < 1e-12;
    std::printf("[%s] proposition-1 equality: worst TV %.3e over %d instances (tol 1e-12)\n",
                checks.prop1 ? "PASS" : "FAIL", worst_tv, prop1_instances);

    // Theorem 1: one-step convergence at gamma = 1 and the rate bound at 0.3.
    double worst_one_step = 0.0;
    bool rate_ok = true;
    for (int i = 0; i < thm1_instances; ++i) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % (max_cells - 1));
        const auto q = random_measure(rng, m);
        const auto mask = random_mask(rng, m);
        const auto one = oracle::run_md(q, oracle::Objective::entropy, 0.0, nullptr,
                                        [](int) { return 1.0; }, mask, 1);
        worst_one_step = std::max(worst_one_step, std::abs(one.gaps.back()));
        const auto slow = oracle::run_md(q, oracle::Objective::entropy, 0.0, nullptr,
                                         [](int) { return 0.3; }, mask, thm1_K);
        rate_ok = rate_ok && slow.bound_satisfied;
    }
    checks.theorem1 = worst_one_step < 1e-12 && rate_ok;
    std::printf("[%s] theorem-1 rate: one-step gap %.3e (tol 1e-12), gamma=0.3 bound %s\n",
                checks.theorem1 ? "PASS" : "FAIL", worst_one_step, rate_ok ? "holds" : "violated");

    // KL-regularized fixed point q* ~ p^(alpha/(1+alpha)).
    for (const double alpha : alphas) {
        const double gamma = std::min(0.5, 1.0 / (1.0 + alpha));
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 99);
            const auto p = random_measure(rng, m);
            auto q = random_measure(rng, m);
            const auto mask = oracle::full_mask(m);
            std::vector<double> star(m);
            for (std::size_t c = 0; c < m; ++c) star[c] = std::pow(p.w[c], alpha / (1.0 + alpha));
            const auto q_star = oracle::DiscreteMeasure::from_weights(std::move(star));
            double tv = 1.0;
            for (int it = 0; it < 200 && tv >= 1e-8; ++it) {
                const auto grad = oracle::first_variation(
                    oracle::Objective::entropy_minus_alpha_kl, alpha, q, &p, mask);
                q = oracle::md_step(q, grad, gamma, mask);
                tv = oracle::total_variation(q, q_star);
            }
            worst = std::max(worst, tv);
        }
        const bool ok = worst < 1e-8;
        checks.kl_fixed_point = checks.kl_fixed_point && ok;
        std::printf("[%s] KL fixed point alpha=%g: worst TV %.3e within 200 iters (tol 1e-8)\n",
                    ok ? "PASS" : "FAIL", alpha, worst);
    }

    if (!out.empty()) {
        std::filesystem::create_directories(out);
        const std::size_t m = 64;
        const auto q = random_measure(rng, m);
        const auto run = oracle::run_md(q, oracle::Objective::entropy, 0.0, nullptr,
                                        [csv_gamma](int) { return csv_gamma; },
                                        oracle::full_mask(m), csv_K);
        csv::Writer w(out + "/oracle_md.csv", {"k", "gap", "bound"});
        for (std::size_t k = 0; k < run.gaps.size(); ++k)
            w.row({csv::cell(k), csv::cell(run.gaps[k]), csv::cell(run.bounds[k])});
        std::printf("oracle: wrote %s/oracle_md.csv (%d rows)\n", out.c_str(), csv_K + 1);
    }

    if (!(checks.prop1 && checks.theorem1 && checks.kl_fixed_point)) return 3;
    return 0;
}

int cmd_eval(Config& cfg) {
    const std::string samples_path = cfg.get_string("samples");
    const Tensor samples = csv::read_matrix(samples_path);

    std::vector<std::pair<std::string, double>> results;
    if (cfg.get_bool("metrics.entropy", true)) {
        const std::size_t k = static_cast<std::size_t>(cfg.get_int("metrics.k", 5));
        results.emplace_back("entropy", metrics::knn_entropy(samples, k));
    }
    if (cfg.has("verifier.kind")) {
        const auto v = verifier_from(cfg, "verifier");
        results.emplace_back("validity", metrics::validity(samples, *v));
    }
    if (cfg.get_bool("metrics.vendi", true)) {
        metrics::KernelSpec kernel;
        kernel.kind = metrics::kernel_kind_from_string(cfg.get_string("kernel.kind", "rbf"));
        kernel.bandwidth = cfg.get_double("kernel.bandwidth", 0.0);
        results.emplace_back("vendi", metrics::vendi(samples, kernel));
    }
    const std::string out = cfg.get_string("out", "");
    cfg.check_consumed();

    for (const auto& [name, value] : results) std::printf("%s,%.10g\n", name.c_str(), value);
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        csv::Writer w(out + "/eval.csv", {"metric", "value"});
        for (const auto& [name, value] : results) w.row({name, csv::cell(value)});
    }
    return 0;
}

std::vector<std::string> split_paths(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cur;
    while (std::getline(ss, cur, ','))
        if (!cur.empty()) out.push_back(cur);
    if (out.empty()) throw ConfigError("plot.input: no paths given");
    return out;
}

int cmd_plot(Config& cfg) {
    const std::string kind = cfg.get_string("plot.kind");
    const auto inputs = split_paths(cfg.get_string("plot.input"));
    const std::string out_path = cfg.get_string("plot.out");
    const std::string xlabel = cfg.get_string("plot.xlabel", "");
    const std::string ylabel = cfg.get_string("plot.ylabel", "");

    if (kind == "scatter2d") {
        const Tensor pts = csv::read_matrix(inputs.front());
        if (pts.cols() < 2) throw ConfigError("scatter2d needs at least two columns");
        double x0 = pts.at(0, 0), x1 = x0, y0 = pts.at(0, 1), y1 = y0;
        for (std::size_t i = 0; i < pts.rows(); ++i) {
            x0 = std::min(x0, pts.at(i, 0));
            x1 = std::max(x1, pts.at(i, 0));
            y0 = std::min(y0, pts.at(i, 1));
            y1 = std::max(y1, pts.at(i, 1));
        }
        svg::Canvas canvas(640, 480, x0, x1, y0, y1, xlabel, ylabel);
        if (cfg.has("overlay.kind")) {
            const std::string okind = cfg.get_string("overlay.kind");
            if (okind == "ellipse") {
                const auto center = cfg.get_doubles("overlay.center", {0.0, 0.0});
                const auto axes = cfg.get_doubles("overlay.axes", {2.0, 1.2});
                const double rot = cfg.get_double("overlay.rotation", 0.4);
                std::vector<svg::Point> outline;
                for (int i = 0; i <= 128; ++i) {
                    const double a = 2.0 * 3.14159265358979323846 * i / 128.0;
                    const double fx = axes[0] * std::cos(a), fy = axes[1] * std::sin(a);
                    outline.push_back({center[0] + std::cos(rot) * fx - std::sin(rot) * fy,
                                       center[1] + std::sin(rot) * fx + std::cos(rot) * fy});
                }
                canvas.polyline(outline, "red", 2.0);
            } else if (okind == "vline") {
                const double x = cfg.get_double("overlay.x");
                canvas.polyline({{x, y0}, {x, y1}}, "gray", 2.0);
            } else {
                throw ConfigError("overlay.kind: unknown overlay `" + okind + "`");
            }
        }
        for (std::size_t i = 0; i < pts.rows(); ++i)
            canvas.circle({pts.at(i, 0), pts.at(i, 1)}, 1.6, "#4b0082", 0.45);
        cfg.check_consumed();
        svg::write_file(out_path, canvas.finish());
    } else if (kind == "histogram1d") {
        const Tensor pts = csv::read_matrix(inputs.front());
        const std::size_t col = static_cast<std::size_t>(cfg.get_int("plot.column", 1)) - 1;
        if (col >= pts.cols()) throw ConfigError("plot.column out of range");
        std::vector<double> values(pts.rows());
        for (std::size_t i = 0; i < pts.rows(); ++i) values[i] = pts.at(i, col);
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        const double lo = *lo_it, hi = *hi_it + 1e-12;
        const std::size_t bins = static_cast<std::size_t>(cfg.get_int("plot.bins", 60));
        const auto counts = histogram(values, bins, lo, hi);
        const double peak = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
        svg::Canvas canvas(640, 480, lo, hi, 0.0, peak, xlabel, ylabel);
        const double w = (hi - lo) / static_cast<double>(bins);
        for (std::size_t b = 0; b < bins; ++b)
            canvas.rect({lo + w * static_cast<double>(b), 0.0},
                        {lo + w * static_cast<double>(b + 1), static_cast<double>(counts[b])},
                        "#4b0082", 0.8);
        cfg.check_consumed();
        svg::write_file(out_path, canvas.finish());
    } else if (kind == "curve") {
        // mean +/- 1.96 stderr across runs, per k, of one metrics column
        const std::string column = cfg.get_string("plot.column", "entropy");
        std::vector<csv::Table> tables;
        for (const auto& p : inputs) tables.push_back(csv::read_table(p));
        const std::size_t kcol = tables.front().column("k");
        const std::size_t vcol = tables.front().column(column);
        std::map<double, std::vector<double>> by_k;
        for (const auto& t : tables)
            for (const auto& row : t.rows)
                if (std::isfinite(row[vcol])) by_k[row[kcol]].push_back(row[vcol]);
        if (by_k.empty()) throw ConfigError("curve: no finite values for column " + column);
        std::vector<svg::Point> mean_pts, band_hi, band_lo;
        double ymin = 1e300, ymax = -1e300;
        for (const auto& [k, vals] : by_k) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            const double stderr_v =
                vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1) /
                                            static_cast<double>(vals.size()))
                                : 0.0;
            const double half = 1.96 * stderr_v;
            mean_pts.push_back({k, mean});
            band_hi.push_back({k, mean + half});
            band_lo.push_back({k, mean - half});
            ymin = std::min(ymin, mean - half);
            ymax = std::max(ymax, mean + half);
        }
        svg::Canvas canvas(640, 480, mean_pts.front().x, mean_pts.back().x, ymin, ymax, xlabel,
                           ylabel);
        std::vector<svg::Point> band = band_hi;
        band.insert(band.end(), band_lo.rbegin(), band_lo.rend());
        canvas.polygon(band, "#4b0082", 0.2);
        canvas.polyline(mean_pts, "#4b0082", 2.0);
        cfg.check_consumed();
        svg::write_file(out_path, canvas.finish());
    } else {
        throw ConfigError("plot.kind: unknown kind `" + kind + "`");
    }
    std::printf("plot: wrote %s\n", out_path.c_str());
    return 0;
}

}  // namespace

std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins, double lo,
                                   double hi) {
    if (bins == 0 || !(hi > lo)) throw DomainError("histogram: need bins >= 1 and hi > lo");
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        const double f = (v - lo) / (hi - lo);
        const auto b = static_cast<std::size_t>(
            std::clamp(f * static_cast<double>(bins), 0.0, static_cast<double>(bins - 1)));
        ++counts[b];
    }
    return counts;
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"flow expansion toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    long long seed_override = -1;
    bool has_seed_override = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { has_seed_override = true; });
        sub->add_option("--out", out_override, "override the output directory");
    };

    auto* sub_pretrain = app.add_subcommand("pretrain", "train a flow model on a toy dataset");
    auto* sub_expand = app.add_subcommand("expand", "run the expansion loop");
    auto* sub_oracle = app.add_subcommand("oracle", "exact discrete mirror-descent checks");
    auto* sub_eval = app.add_subcommand("eval", "metrics for a samples CSV");
    auto* sub_plot = app.add_subcommand("plot", "SVG plots from CSVs");
    for (auto* sub : {sub_pretrain, sub_expand, sub_oracle, sub_eval, sub_plot}) add_common(sub);

    std::vector<const char*> argv;
    argv.push_back("fexp");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::fflush(stdout);
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        Config cfg = Config::parse_file(config_path);
        if (has_seed_override) cfg.set("seed", std::to_string(seed_override));
        if (!out_override.empty()) cfg.set("out", out_override);
        if (sub_pretrain->parsed()) return cmd_pretrain(cfg);
        if (sub_expand->parsed()) return cmd_expand(cfg);
        if (sub_oracle->parsed()) return cmd_oracle(cfg);
        if (sub_eval->parsed()) return cmd_eval(cfg);
        if (sub_plot->parsed()) return cmd_plot(cfg);
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace fexp::cli
