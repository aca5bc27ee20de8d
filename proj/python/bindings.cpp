#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lpfno/model.hpp"
#include "lpfno/oracle.hpp"
#include "lpfno/service.hpp"

namespace py = pybind11;
using namespace lpfno;

namespace {

py::array_t<double> as_array(const ScalarField3& f) {
    const Grid3& g = f.grid();
    py::array_t<double> a({g.nx(), g.ny(), g.nz()});
    std::copy(f.values().begin(), f.values().end(), a.mutable_data());
    return a;
}

py::dict as_dict(const FieldBundle& b) {
    py::dict d;
    d["T"] = as_array(b.T);
    d["alpha"] = as_array(b.alpha);
    d["fl"] = as_array(b.fl);
    return d;
}

Grid3 grid_or(const std::optional<std::array<long, 3>>& shape, std::optional<Real> dx, const Grid3& fallback) {
    const Real d = dx.value_or(fallback.dx);
    if (!shape) return make_grid(long(fallback.nx()), long(fallback.ny()), long(fallback.nz()), d);
    return make_grid((*shape)[0], (*shape)[1], (*shape)[2], d);
}

py::object parse_json(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_lpfno, m) {
    m.doc() = "LP-FNO melt-pool surrogate";

    py::register_exception<Error>(m, "LpfnoError", PyExc_ValueError);

    m.def("normalized_enthalpy",
          [](Real p, Real v) { return normalized_enthalpy(p, v, MaterialTable{}); },
          py::arg("power_w"), py::arg("v_scan_m_s"));
    m.def("speed_from_enthalpy",
          [](Real h, Real p) { return speed_from_enthalpy(h, p, MaterialTable{}); },
          py::arg("h_star"), py::arg("power_w"));
    m.def(
        "build_plan",
        [](std::array<Real, 2> p, std::array<Real, 2> h, std::size_t n_p, std::size_t n_h,
           std::array<Real, 2> v, std::uint64_t seed) {
            return parse_json(to_json(build_plan(p, h, n_p, n_h, v, SplitRule{seed})));
        },
        py::arg("p_range"), py::arg("h_range"), py::arg("n_p"), py::arg("n_h"),
        py::arg("v_bounds") = std::array<Real, 2>{0.1, 2.0}, py::arg("seed") = 0);
    m.def(
        "oracle_sample",
        [](Real p, Real v, std::optional<std::array<long, 3>> shape, std::optional<Real> dx) {
            OracleConfig oc;
            oc.grid = grid_or(shape, dx, oc.grid);
            return as_dict(generate_sample(make_process_params(p, v), oc));
        },
        py::arg("power_w"), py::arg("v_scan_m_s"), py::arg("grid") = py::none(), py::arg("dx") = py::none());

    py::class_<FnoModel, std::shared_ptr<FnoModel>>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& dir) { return std::make_shared<FnoModel>(load_checkpoint(dir)); },
            py::arg("checkpoint"))
        .def_static(
            "untrained",
            [](std::array<int, 3> modes, std::size_t width, std::size_t padding,
               std::array<long, 3> shape, Real dx, std::uint64_t seed) {
                ModelConfig c;
                c.modes = modes;
                c.latent_width = width;
                c.padding = padding;
                c.train_grid = make_grid(shape[0], shape[1], shape[2], dx);
                return std::make_shared<FnoModel>(build_model(c, seed));
            },
            py::arg("modes"), py::arg("width"), py::arg("padding"), py::arg("grid"), py::arg("dx"),
            py::arg("seed") = 0)
        .def_property_readonly("parameter_count", &FnoModel::parameter_count)
        .def("info", [](const FnoModel& self) { return parse_json(model_info(self)); })
        .def(
            "infer",
            [](const FnoModel& self, Real p, Real v, std::optional<std::array<long, 3>> shape,
               std::optional<Real> dx) {
                const Grid3 g = grid_or(shape, dx, self.config.train_grid);
                FieldBundle b;
                {
                    py::gil_scoped_release release;
                    b = infer(self, make_process_params(p, v, self.config.material), g);
                }
                return as_dict(b);
            },
            py::arg("power_w"), py::arg("v_scan_m_s"), py::arg("grid") = py::none(),
            py::arg("dx") = py::none())
        .def(
            "meltpool",
            [](const FnoModel& self, Real p, Real v) {
                const FieldBundle b =
                    infer(self, make_process_params(p, v, self.config.material), self.config.train_grid);
                return parse_json(to_json(summarize_meltpool(b)));
            },
            py::arg("power_w"), py::arg("v_scan_m_s"));
}
