#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fexp/datasets.hpp"
#include "fexp/expander.hpp"
#include "fexp/flowmodel.hpp"
#include "fexp/metrics.hpp"
#include "fexp/oracle.hpp"
#include "fexp/sampler.hpp"
#include "fexp/schedules.hpp"
#include "fexp/verifier.hpp"

namespace py = pybind11;
using namespace fexp;

namespace {

diffcore::Tensor tensor_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
    diffcore::Tensor t = diffcore::Tensor::zeros(
        {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
    std::copy(a.data(), a.data() + a.size(), t.data.begin());
    return t;
}

py::array_t<double> array_from(const diffcore::Tensor& t) {
    py::array_t<double> a({t.rows(), t.cols()});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

oracle::DiscreteMeasure measure_from(const std::vector<double>& w) {
    return oracle::DiscreteMeasure::from_weights(w);
}

oracle::SupportMask mask_from(const std::vector<int>& m) {
    oracle::SupportMask mask(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m[i] ? 1 : 0;
    return mask;
}

}  // namespace

PYBIND11_MODULE(_fexp, m) {
    m.doc() = "verifier-constrained flow expansion: core numerical operations";

    py::register_exception<Error>(m, "FexpError");

    // schedules
    m.def("sigma", [](double t) { return schedules::sigma(schedules::linear_schedule(), t); },
          py::arg("t"), "memoryless noise level for the linear schedule");
    m.def("score_denominator",
          [](double t) { return schedules::score_denominator(schedules::linear_schedule(), t); });
    m.def("reparametrize_beta", [](double beta, double gamma_tilde) {
        const auto r = schedules::reparametrize_beta(beta, gamma_tilde);
        return py::make_tuple(r.alpha, r.gamma);
    });
    m.def("gamma_schedule", [](const std::string& kind, double base, int k) {
        return schedules::gamma_schedule(schedules::gamma_kind_from_string(kind), base, k);
    });
    m.def("lambda_weight", [](const std::string& kind, double band, double value, double t) {
        return schedules::lambda_weight(schedules::lambda_kind_from_string(kind),
                                        schedules::linear_schedule(), band, value, t);
    });

    // oracle
    m.def("discrete_entropy",
          [](const std::vector<double>& q) { return oracle::entropy(measure_from(q)); });
    m.def("discrete_kl", [](const std::vector<double>& q, const std::vector<double>& p) {
        return oracle::kl(measure_from(q), measure_from(p));
    });
    m.def("md_step", [](const std::vector<double>& q, const std::vector<double>& grad, double gamma,
                        const std::vector<int>& mask) {
        return oracle::md_step(measure_from(q), grad, gamma, mask_from(mask)).w;
    });
    m.def("expand_then_project",
          [](const std::vector<double>& q, const std::vector<double>& grad, double gamma,
             const std::vector<int>& mask) {
              return oracle::expand_then_project_discrete(measure_from(q), grad, gamma,
                                                          mask_from(mask))
                  .w;
          });
    m.def("first_variation_entropy", [](const std::vector<double>& q) {
        const auto m_ = measure_from(q);
        return oracle::first_variation(oracle::Objective::entropy, 0.0, m_, nullptr,
                                       oracle::full_mask(m_.cells()));
    });
    m.def("run_md_entropy", [](const std::vector<double>& q0, double gamma, int K) {
        const auto run =
            oracle::run_md(measure_from(q0), oracle::Objective::entropy, 0.0, nullptr,
                           [gamma](int) { return gamma; }, oracle::full_mask(q0.size()), K);
        return py::make_tuple(run.gaps, run.bounds, run.bound_satisfied);
    });

    // metrics
    m.def("knn_entropy", [](const py::array_t<double>& samples, std::size_t k) {
        return metrics::knn_entropy(tensor_from(samples), k);
    });
    m.def("vendi", [](const py::array_t<double>& samples, const std::string& kind,
                      double bandwidth) {
        metrics::KernelSpec spec;
        spec.kind = metrics::kernel_kind_from_string(kind);
        spec.bandwidth = bandwidth;
        return metrics::vendi(tensor_from(samples), spec);
    }, py::arg("samples"), py::arg("kind") = "rbf", py::arg("bandwidth") = 0.0);
    m.def("symmetric_eigenvalues", [](const py::array_t<double>& m_) {
        return metrics::symmetric_eigenvalues(tensor_from(m_));
    });
    m.def("digamma", &metrics::digamma);

    // verifiers (a plain handle: shared_ptr-to-const is not a pybind holder)
    struct PyVerifier {
        verifier::VerifierPtr ptr;
    };
    py::class_<PyVerifier>(m, "Verifier")
        .def("accepts",
             [](const PyVerifier& v, const std::vector<double>& x) { return v.ptr->accepts(x); })
        .def("describe", [](const PyVerifier& v) { return v.ptr->describe(); })
        .def_property_readonly("dim", [](const PyVerifier& v) { return v.ptr->dim(); });
    m.def("ellipse_verifier",
          [](std::array<double, 2> center, std::array<double, 2> axes, double rotation) {
              return PyVerifier{verifier::ellipse(center, axes, rotation)};
          });
    m.def("box_verifier", [](const std::vector<double>& lo, const std::vector<double>& hi) {
        return PyVerifier{verifier::box(lo, hi)};
    });
    m.def("halfspace_band_verifier", [](const std::vector<double>& normal, double lo, double hi) {
        return PyVerifier{verifier::halfspace_band(normal, lo, hi)};
    });
    m.def("intersect_verifier", [](const std::vector<PyVerifier>& members) {
        std::vector<verifier::VerifierPtr> ptrs;
        for (const auto& m_ : members) ptrs.push_back(m_.ptr);
        return PyVerifier{verifier::intersect(std::move(ptrs))};
    });
    py::class_<verifier::SmoothVerifier>(m, "SmoothVerifier")
        .def(py::init([](const PyVerifier& hard, double tau) {
                 return verifier::SmoothVerifier(hard.ptr, tau);
             }),
             py::arg("hard"), py::arg("tau"))
        .def("value", [](const verifier::SmoothVerifier& v,
                         const std::vector<double>& x) { return v.value(x); })
        .def("log_value", [](const verifier::SmoothVerifier& v,
                             const std::vector<double>& x) { return v.log_value(x); })
        .def("grad_log_value", [](const verifier::SmoothVerifier& v, const std::vector<double>& x) {
            std::vector<double> g(x.size());
            v.grad_log_value(x, g);
            return g;
        });
    m.def("validity", [](const py::array_t<double>& samples, const PyVerifier& v) {
        return metrics::validity(tensor_from(samples), *v.ptr);
    });

    // datasets
    m.def("gen_global_setting", [](std::size_t n, uint64_t seed) {
        return array_from(datasets::gen_global_setting(datasets::GlobalSpec{}, n, seed));
    });
    m.def("gen_local_setting", [](std::size_t n, uint64_t seed) {
        const auto lp = datasets::gen_local_setting(datasets::TrimodalSpec{}, n, seed);
        return py::make_tuple(array_from(lp.points), lp.labels);
    });

    // flow model + sampling
    py::class_<flowmodel::VelocityField>(m, "VelocityField")
        .def(py::init([](const std::vector<std::size_t>& widths, const std::string& act,
                         uint64_t seed) {
                 return flowmodel::VelocityField(widths, flowmodel::activation_from_string(act),
                                                 seed);
             }),
             py::arg("widths"), py::arg("activation") = "silu", py::arg("seed") = 0)
        .def_property_readonly("dim", &flowmodel::VelocityField::dim)
        .def("evaluate",
             [](const flowmodel::VelocityField& f, const std::vector<double>& x, double t) {
                 return f.evaluate(x, t);
             })
        .def("save", &flowmodel::VelocityField::save)
        .def_static("load", &flowmodel::VelocityField::load);
    m.def("pretrain", [](flowmodel::VelocityField& field, const py::array_t<double>& data,
                         std::size_t epochs, std::size_t batch, double lr, uint64_t seed) {
        flowmodel::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch = batch;
        cfg.lr = lr;
        cfg.seed = seed;
        return flowmodel::pretrain(field, tensor_from(data), schedules::linear_schedule(), cfg)
            .epoch_loss;
    }, py::arg("field"), py::arg("data"), py::arg("epochs") = 50, py::arg("batch") = 128,
       py::arg("lr") = 1e-3, py::arg("seed") = 0);
    m.def("sample_ode", [](const flowmodel::VelocityField& f, std::size_t n, std::size_t steps,
                           uint64_t seed) { return array_from(sampler::sample_ode(f, n, steps, seed)); });
    m.def("score", [](const flowmodel::VelocityField& f, const py::array_t<double>& X, double t,
                      double epsilon_clip) {
        diffcore::Tensor out;
        sampler::score(f, schedules::linear_schedule(), tensor_from(X), t,
                       sampler::ScoreConfig{epsilon_clip}, out);
        return array_from(out);
    }, py::arg("field"), py::arg("x"), py::arg("t"), py::arg("epsilon_clip") = 0.02);
}
