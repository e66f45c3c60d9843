#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rydsense/dynamics.hpp"
#include "rydsense/error.hpp"
#include "rydsense/geometry.hpp"
#include "rydsense/pairstate.hpp"
#include "rydsense/sensing.hpp"

namespace py = pybind11;
using namespace rydsense;

namespace {

// Uniform field for a float, per-atom values for a list.
FieldProfile profile_from(const std::variant<double, std::vector<double>>& field) {
  if (const auto* e = std::get_if<double>(&field)) return UniformField{*e};
  return TabulatedField{std::get<std::vector<double>>(field)};
}

HamiltonianSpec row_hamiltonian(int n_atoms, double spacing_um, const std::variant<double, std::vector<double>>& field,
                                const StarkTable& table, double omega, double detuning) {
  ArrayGeometry geometry;
  geometry.rows.push_back({n_atoms, spacing_um, 0.0});
  geometry.validate();
  const auto profile = profile_from(field);
  validate_profile(profile, geometry, 0, table);
  return build_hamiltonian(geometry, 0, profile, table, {omega, detuning});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the rydsense C++ core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "RydsenseError", PyExc_RuntimeError);

  py::class_<PairCoefficients>(m, "PairCoefficients")
      .def(py::init<double, double>(), py::arg("delta"), py::arg("c3"))
      .def_readwrite("delta", &PairCoefficients::delta, "energy defect, rad/us")
      .def_readwrite("c3", &PairCoefficients::c3, "dipole coefficient, rad/us um^3")
      .def("__repr__", [](const PairCoefficients& c) {
        std::ostringstream s;
        s << "PairCoefficients(delta=" << c.delta << ", c3=" << c.c3 << ")";
        return s.str();
      });

  py::class_<StarkTable>(m, "StarkTable")
      .def_property_readonly("min_field", &StarkTable::min_field)
      .def_property_readonly("max_field", &StarkTable::max_field)
      .def_property_readonly("checksum", &StarkTable::checksum)
      .def_property_readonly("metadata", &StarkTable::metadata)
      .def("__len__", &StarkTable::size)
      .def("rows", [](const StarkTable& t) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& r : t.rows()) out.emplace_back(r.field, r.delta, r.c3);
        return out;
      });

  m.def("load_stark_table", py::overload_cast<const std::filesystem::path&>(&load_stark_table), py::arg("path"));
  m.def(
      "coefficients_at", [](const StarkTable& t, double e) { return coefficients_at(t, {e}); }, py::arg("table"),
      py::arg("field_mVcm"));
  m.def(
      "resonance_field", [](const StarkTable& t) { return resonance_field(t).value; }, py::arg("table"));
  m.def("effective_interaction", &effective_interaction, py::arg("coeffs"), py::arg("r_um"));
  m.def("crossover_radius", &crossover_radius, py::arg("coeffs"));
  m.def("blockade_radius", &blockade_radius, py::arg("coeffs"), py::arg("omega"));

  py::class_<DriveSpec>(m, "DriveSpec")
      .def(py::init<double, double>(), py::arg("omega"), py::arg("detuning") = 0.0)
      .def_readwrite("omega", &DriveSpec::omega)
      .def_readwrite("detuning", &DriveSpec::detuning)
      .def_property_readonly("rabi_period", &DriveSpec::rabi_period);

  py::class_<PeakFidelity>(m, "PeakFidelity")
      .def_readonly("f_max", &PeakFidelity::f_max)
      .def_readonly("t_star", &PeakFidelity::t_star);

  m.def(
      "row_f_max",
      [](int n, double spacing, const std::variant<double, std::vector<double>>& field, const StarkTable& table,
         double omega, double detuning) {
        const auto h = row_hamiltonian(n, spacing, field, table, omega, detuning);
        py::gil_scoped_release release;
        return f_max(h);
      },
      py::arg("n_atoms"), py::arg("spacing_um"), py::arg("field_mVcm"), py::arg("table"), py::arg("omega"),
      py::arg("detuning") = 0.0,
      "Peak fully excited population of one row over one Rabi period; field is a float or per-atom list.");

  m.def(
      "row_dynamics",
      [](int n, double spacing, const std::variant<double, std::vector<double>>& field, const StarkTable& table,
         double omega, const std::vector<double>& times, std::optional<std::vector<std::string>> labels) {
        const auto h = row_hamiltonian(n, spacing, field, table, omega, 0.0);
        const auto tracked = labels ? *labels : default_tracked_labels(n);
        DynamicsResult r;
        {
          py::gil_scoped_release release;
          r = simulate_dynamics(h, times, tracked);
        }
        py::dict out;
        for (std::size_t k = 0; k < tracked.size(); ++k) out[py::str(tracked[k])] = r.fidelities[k];
        return out;
      },
      py::arg("n_atoms"), py::arg("spacing_um"), py::arg("field_mVcm"), py::arg("table"), py::arg("omega"),
      py::arg("times"), py::arg("labels") = py::none(), "Basis-state populations {label: [F(t)]} from |0...0>.");

  m.def(
      "row_correlator",
      [](int n, double spacing, const std::variant<double, std::vector<double>>& field, const StarkTable& table,
         double omega) {
        const auto h = row_hamiltonian(n, spacing, field, table, omega, 0.0);
        Correlator c;
        {
          py::gil_scoped_release release;
          c = correlator_at_peak(h);
        }
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) rows[static_cast<std::size_t>(i)].push_back(c(i, j));
        return py::make_tuple(rows, c.t_star, c.f_max);
      },
      py::arg("n_atoms"), py::arg("spacing_um"), py::arg("field_mVcm"), py::arg("table"), py::arg("omega"),
      "(<n_i n_j> matrix, t_star, f_max) at the fully excited population peak.");

  py::class_<SensorRow>(m, "SensorRow")
      .def(py::init<double, int>(), py::arg("spacing_um"), py::arg("n_atoms") = 3)
      .def_readwrite("spacing_um", &SensorRow::spacing_um)
      .def_readwrite("n_atoms", &SensorRow::n_atoms)
      .def("__eq__", [](const SensorRow& a, const SensorRow& b) { return a == b; });

  py::class_<ForwardCurve>(m, "ForwardCurve")
      .def_readonly("row", &ForwardCurve::row)
      .def_readonly("fields", &ForwardCurve::fields)
      .def_readonly("f_max", &ForwardCurve::f_max)
      .def_readonly("omega", &ForwardCurve::omega)
      .def("at", &ForwardCurve::at, py::arg("field_mVcm"));

  m.def(
      "forward_curves",
      [](const std::vector<SensorRow>& rows, const StarkTable& table, double omega, const std::vector<double>& fields,
         unsigned threads) {
        py::gil_scoped_release release;
        return forward_curves(rows, table, omega, fields, threads);
      },
      py::arg("rows"), py::arg("table"), py::arg("omega"), py::arg("fields"), py::arg("threads") = 1);

  py::class_<RowObservation>(m, "RowObservation")
      .def(py::init([](SensorRow row, std::optional<std::int64_t> shots, double frequency) {
             return RowObservation{row, shots, frequency};
           }),
           py::arg("row"), py::arg("shots"), py::arg("frequency"))
      .def_readwrite("row", &RowObservation::row)
      .def_readwrite("shots", &RowObservation::shots)
      .def_readwrite("frequency", &RowObservation::frequency);

  m.def(
      "simulate_readout",
      [](double field, const std::vector<SensorRow>& rows, const StarkTable& table, double omega,
         std::optional<std::int64_t> shots, std::uint64_t seed) {
        return simulate_readout(field, rows, table, omega, shots, seed).rows;
      },
      py::arg("field_mVcm"), py::arg("rows"), py::arg("table"), py::arg("omega"), py::arg("shots") = py::none(),
      py::arg("seed") = 0, "One observation per row; exact frequencies when shots is None.");

  py::class_<FieldEstimate>(m, "FieldEstimate")
      .def_readonly("field", &FieldEstimate::field)
      .def_readonly("lo", &FieldEstimate::lo)
      .def_readonly("hi", &FieldEstimate::hi)
      .def_readonly("residual", &FieldEstimate::residual)
      .def_readonly("gain", &FieldEstimate::gain)
      .def_readonly("alternatives", &FieldEstimate::alternatives);

  m.def(
      "estimate_field",
      [](const std::vector<RowObservation>& observations, const std::vector<ForwardCurve>& curves,
         bool allow_ambiguous) {
        EstimatorOptions options;
        options.allow_ambiguous = allow_ambiguous;
        return estimate_field(SensorReadout{observations}, curves, options);
      },
      py::arg("observations"), py::arg("curves"), py::arg("allow_ambiguous") = false);
}
