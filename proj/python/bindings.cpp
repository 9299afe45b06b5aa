#include "rpsft/checkpoint.hpp"
#include "rpsft/diagnostics.hpp"
#include "rpsft/error.hpp"
#include "rpsft/grad_flow.hpp"
#include "rpsft/linalg.hpp"
#include "rpsft/presets.hpp"
#include "rpsft/protected_subspace.hpp"
#include "rpsft/rank_select.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

namespace py = pybind11;
using namespace rpsft;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a) {
    if (a.ndim() == 1) {
        return DenseMatrix(static_cast<std::size_t>(a.shape(0)), 1,
                           std::vector<double>(a.data(), a.data() + a.size()));
    }
    if (a.ndim() != 2) {
        throw py::value_error("expected a 1-D or 2-D array");
    }
    return DenseMatrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                       std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const DenseMatrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Array to_vector(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

CoordinateProfile profile(const Array& g, const Array& h, const Array& c) {
    return {to_matrix(g), to_matrix(h), to_matrix(c)};
}

} // namespace

PYBIND11_MODULE(_rpsft, m) {
    m.doc() = "Rotation-preserving fine-tuning: protected-subspace penalty, theory checks and diagnostics";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParameterError>(m, "ParameterError", error);
    py::register_exception<ValidationError>(m, "ValidationError", error);
    py::register_exception<NumericalError>(m, "NumericalError", error);
    py::register_exception<TrainingError>(m, "TrainingError", error);
    py::register_exception<FormatError>(m, "FormatError", error);
    py::register_exception<IoError>(m, "IoError", error);
    py::register_exception<ConfigError>(m, "ConfigError", error);

    m.def(
        "svd",
        [](const Array& a) {
            const SvdResult s = svd_full(to_matrix(a), "array");
            return py::make_tuple(to_array(s.U), to_vector(s.sigma), to_array(s.V));
        },
        "Thin SVD with descending singular values and deterministic signs.");

    m.def(
        "principal_angles",
        [](const Array& b1, const Array& b2) {
            return principal_angles(OrthonormalBasis(to_matrix(b1)), OrthonormalBasis(to_matrix(b2)));
        },
        "Principal angles in degrees, ascending.");

    py::class_<ProtectedBasis>(m, "ProtectedBasis")
        .def_property_readonly("layer", &ProtectedBasis::layer_name)
        .def_property_readonly("k", &ProtectedBasis::k)
        .def_property_readonly("U_k", [](const ProtectedBasis& b) { return to_array(b.U_k().columns()); })
        .def_property_readonly("V_k", [](const ProtectedBasis& b) { return to_array(b.V_k().columns()); })
        .def_property_readonly("S_ref", [](const ProtectedBasis& b) { return to_array(b.S_ref()); })
        .def_property_readonly("sigma_gap", &ProtectedBasis::sigma_gap)
        .def_property_readonly("degenerate", &ProtectedBasis::degenerate);

    m.def(
        "build_basis", [](const Array& w0, std::size_t k, const std::string& name) {
            return build_basis(name, to_matrix(w0), k);
        },
        py::arg("W0"), py::arg("k"), py::arg("name") = "weight");
    m.def("penalty", [](const Array& w, const ProtectedBasis& b) { return penalty(to_matrix(w), b); });
    m.def("penalty_gradient",
          [](const Array& w, const ProtectedBasis& b) { return to_array(penalty_gradient(to_matrix(w), b)); });
    m.def("protected_drift", [](const Array& w, const ProtectedBasis& b) { return protected_drift(to_matrix(w), b); });
    m.def(
        "cost_accounting",
        [](std::uint64_t rows, std::uint64_t cols, std::uint64_t k, std::uint64_t period) {
            const CostAccounting c = cost_accounting(rows, cols, k, period);
            py::dict d;
            d["flops_per_eval"] = c.flops_per_eval;
            d["amortized_flops_per_step"] = c.amortized_flops_per_step;
            d["extra_floats_per_layer"] = c.extra_floats_per_layer;
            d["heuristic_relative_overhead"] = c.heuristic_relative_overhead;
            return d;
        },
        py::arg("rows"), py::arg("cols"), py::arg("k"), py::arg("update_period") = 1);

    m.def(
        "integrate_flow",
        [](const Array& w_start, const ProtectedBasis& b, const Array& G, double lambda, double t_end, double dt) {
            FlowConfig cfg;
            cfg.lambda = lambda;
            cfg.t_end = t_end;
            cfg.dt = dt;
            const FlowTrace tr = integrate_flow(to_matrix(w_start), b, ConstantForcing(to_matrix(G)), cfg);
            const std::size_t k = b.k();
            Array A({tr.times.size(), k, k});
            double* out = A.mutable_data();
            for (const auto& a : tr.A_series) {
                out = std::copy(a.data().begin(), a.data().end(), out);
            }
            return py::make_tuple(to_vector(tr.times), A, volterra_residual(tr, lambda));
        },
        py::arg("W_start"), py::arg("basis"), py::arg("G"), py::arg("lam") = 1.0, py::arg("t_end") = 5.0,
        py::arg("dt") = 1e-3, "RK4 flow under constant forcing: (times, A[t], Volterra residual).");
    m.def(
        "closed_form_constant",
        [](const Array& G, double lambda, const Array& A0, double t) {
            return to_array(closed_form_constant(to_matrix(G), lambda, to_matrix(A0), t));
        },
        py::arg("G"), py::arg("lam"), py::arg("A0"), py::arg("t"));

    m.def(
        "tradeoff_curves",
        [](const Array& g, const Array& h, const Array& c, double lambda, double beta) {
            const TradeoffCurves t = curves(profile(g, h, c), {lambda, beta});
            py::dict d;
            d["F_ood"] = to_vector(t.F_ood);
            d["G_id"] = to_vector(t.G_id);
            d["Phi"] = to_vector(t.Phi);
            return d;
        },
        py::arg("g"), py::arg("h"), py::arg("c"), py::arg("lam") = 1.0, py::arg("beta") = 1.0);
    m.def(
        "rank_boundary",
        [](const Array& g, const Array& h, const Array& c, double lambda, double beta) {
            const RankBoundary b = rank_boundary(profile(g, h, c), {lambda, beta});
            return py::make_tuple(b.k_star, b.q);
        },
        py::arg("g"), py::arg("h"), py::arg("c"), py::arg("lam") = 1.0, py::arg("beta") = 1.0,
        "(k_star, q), q is None when only the full grid covers the OOD support.");
    m.def("threshold_decision", [](double g, double h, double c, double lambda, double beta) {
        return threshold_decision(g, h, c, lambda, beta).protect;
    });
    m.def(
        "rank_from_energy",
        [](const std::vector<std::pair<std::size_t, double>>& curve, double target) {
            const EnergyRank r = rank_from_energy(curve, target);
            return py::make_tuple(r.rank, r.reached);
        },
        py::arg("curve"), py::arg("target") = 0.2);

    m.def(
        "fisher_energy_curve",
        [](const std::vector<Array>& grads, const Array& w, std::vector<std::size_t> ranks) {
            GradientBatch batch;
            for (const auto& g : grads) {
                batch.samples.push_back(to_matrix(g));
            }
            const SvdResult svd = svd_full(to_matrix(w), "weight");
            if (ranks.empty()) {
                for (std::size_t r = 1; r <= svd.sigma.size(); ++r) {
                    ranks.push_back(r);
                }
            }
            std::vector<std::tuple<std::size_t, double, double>> out;
            for (const auto& p : fisher_energy_curve(batch, svd, ranks)) {
                out.emplace_back(p.r, p.x, p.y);
            }
            return out;
        },
        py::arg("grads"), py::arg("W"), py::arg("ranks") = std::vector<std::size_t>{},
        "[(r, r^2/R^2, y(r))] for the top r x r singular block of W.");
    m.def("mean_left_rotation", [](const Array& base, const Array& tuned, std::size_t K) {
        return mean_left_rotation(to_matrix(base), to_matrix(tuned), K);
    });
    m.def(
        "rotation_rankwise",
        [](const Array& base, const Array& tuned, const std::vector<std::size_t>& ranks) {
            std::vector<std::pair<std::size_t, double>> out;
            for (const auto& r : rotation_rankwise(to_matrix(base), to_matrix(tuned), ranks)) {
                out.emplace_back(r.r, r.degrees);
            }
            return out;
        });
    m.def(
        "hidden_drift",
        [](const std::vector<std::pair<std::string, Array>>& sets, const std::string& base) {
            std::vector<HiddenStateSet> hs;
            for (const auto& [name, rows] : sets) {
                hs.push_back({name, "data", to_matrix(rows)});
            }
            const HiddenDrift d = hidden_drift(hs, base);
            py::dict out;
            for (const auto& md : d.models) {
                out[py::str(md.model)] = py::make_tuple(md.d_hidden, md.d_pca);
            }
            return out;
        },
        py::arg("sets"), py::arg("base") = "base", "{model: (D_hidden, D_pca)} from [(model, hidden rows)].");
    m.def("kde_bandwidth", &kde_bandwidth);
    m.def(
        "sequence_entropies",
        [](const std::vector<Array>& seqs) {
            std::vector<ProbSequence> ps;
            for (const auto& a : seqs) {
                const DenseMatrix s = to_matrix(a);
                ProbSequence p;
                for (std::size_t t = 0; t < s.rows(); ++t) {
                    p.steps.emplace_back(s.row(t).begin(), s.row(t).end());
                }
                ps.push_back(std::move(p));
            }
            return entropy_profile(ps).e_values;
        },
        "Mean per-step entropy (nats) of each (steps x vocab) probability array.");

    m.def(
        "save_checkpoint",
        [](const std::filesystem::path& path, const std::vector<std::pair<std::string, Array>>& tensors) {
            NamedTensors t;
            for (const auto& [name, a] : tensors) {
                t.emplace_back(name, to_matrix(a));
            }
            save_checkpoint(path, t);
        },
        "Write [(name, 2-D array)] in tensor order.");
    m.def("load_checkpoint", [](const std::filesystem::path& path) {
        std::vector<std::pair<std::string, Array>> out;
        for (const auto& [name, mat] : load_checkpoint(path)) {
            out.emplace_back(name, to_array(mat));
        }
        return out;
    });

    m.def(
        "run_preset",
        [](const std::string& name, const std::filesystem::path& out, const std::vector<std::string>& overrides) {
            const CommandSpec& spec = find_preset(name);
            py::gil_scoped_release release;
            run_command(spec, parse_config(spec.schema, "", overrides), out);
        },
        py::arg("name"), py::arg("out_dir"), py::arg("overrides") = std::vector<std::string>{});
    m.def("preset_names", [] {
        std::vector<std::string> names;
        for (const auto& s : preset_specs()) {
            names.push_back(s.name);
        }
        return names;
    });
}
