#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pndkit/dynamics.hpp"
#include "pndkit/em.hpp"
#include "pndkit/forward.hpp"
#include "pndkit/metrics.hpp"
#include "pndkit/pnd.hpp"

namespace py = pybind11;
using namespace pndkit;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Photon-number reconstruction and squeezed-source simulation";

    py::register_exception<numerical_error>(m, "NumericalError", PyExc_RuntimeError);

    py::enum_<Arm>(m, "Arm")
        .value("signal", Arm::signal)
        .value("idler", Arm::idler);

    // ---- distributions ---------------------------------------------------
    py::class_<Pnd>(m, "Pnd")
        .def(py::init<std::vector<double>>(), py::arg("weights"))
        .def_property_readonly("trunc", &Pnd::trunc)
        .def_property_readonly("probs", &Pnd::probs)
        .def("mean", &Pnd::mean)
        .def("variance", &Pnd::variance)
        .def("__getitem__", [](const Pnd& p, std::size_t n) { return p[n]; })
        .def("__len__", &Pnd::dim)
        .def_static("delta", &Pnd::delta, py::arg("trunc"), py::arg("at") = 0);

    py::class_<JointPnd>(m, "JointPnd")
        .def(py::init<std::size_t, std::vector<double>>(), py::arg("trunc"),
             py::arg("weights"))
        .def_property_readonly("trunc", &JointPnd::trunc)
        .def_property_readonly("probs", &JointPnd::probs)
        .def("at", &JointPnd::at, py::arg("n_s"), py::arg("n_i"))
        .def_static("delta", &JointPnd::delta, py::arg("trunc"), py::arg("n_s") = 0,
                    py::arg("n_i") = 0)
        .def_static("product", &JointPnd::product, py::arg("signal"), py::arg("idler"));

    m.def("thermal_pnd", &thermal_pnd, py::arg("mean"), py::arg("trunc"));
    m.def("coherent_pnd", &coherent_pnd, py::arg("mean"), py::arg("trunc"));
    m.def("tms_joint_pnd", &tms_joint_pnd, py::arg("r"), py::arg("trunc"));
    m.def("convolve_with_thermal", &convolve_with_thermal, py::arg("base"),
          py::arg("n_th_s"), py::arg("n_th_i"));
    m.def("apply_loss", &apply_loss, py::arg("input"), py::arg("eta"));
    m.def("apply_loss_joint", &apply_loss_joint, py::arg("input"), py::arg("eta_s"),
          py::arg("eta_i"));
    m.def("marginal", &marginal, py::arg("joint"), py::arg("arm"));

    py::class_<SourceModelParams>(m, "SourceModelParams")
        .def(py::init<>())
        .def_readwrite("r", &SourceModelParams::r)
        .def_readwrite("n_th_s", &SourceModelParams::n_th_s)
        .def_readwrite("n_th_i", &SourceModelParams::n_th_i)
        .def_readwrite("a", &SourceModelParams::a)
        .def_readwrite("b_s", &SourceModelParams::b_s)
        .def_readwrite("b_i", &SourceModelParams::b_i)
        .def_static("device_defaults", &SourceModelParams::device_defaults)
        .def("at_power", &SourceModelParams::at_power, py::arg("power_mw"));
    m.def("source_model_state", &source_model_state, py::arg("params"), py::arg("trunc"));

    // ---- forward model -----------------------------------------------------
    py::class_<EfficiencyLadder>(m, "EfficiencyLadder")
        .def(py::init<std::vector<double>>(), py::arg("etas"))
        .def_static("uniform", &EfficiencyLadder::uniform, py::arg("lo"), py::arg("hi"),
                    py::arg("count"))
        .def("scaled", &EfficiencyLadder::scaled, py::arg("factor"))
        .def_property_readonly("etas", &EfficiencyLadder::etas)
        .def("__len__", &EfficiencyLadder::size)
        .def("__getitem__",
             [](const EfficiencyLadder& l, std::size_t i) { return l[i]; });

    py::class_<ClickRow>(m, "ClickRow")
        .def(py::init<>())
        .def_readwrite("eta", &ClickRow::eta)
        .def_readwrite("trials", &ClickRow::trials)
        .def_readwrite("c00", &ClickRow::c00)
        .def_readwrite("c01", &ClickRow::c01)
        .def_readwrite("c10", &ClickRow::c10)
        .def_readwrite("c11", &ClickRow::c11);

    py::class_<ClickTable>(m, "ClickTable")
        .def(py::init<>())
        .def_readwrite("rows", &ClickTable::rows)
        .def("validate", &ClickTable::validate);

    py::class_<ClickProbs>(m, "ClickProbs")
        .def_readonly("p00", &ClickProbs::p00)
        .def_readonly("p01", &ClickProbs::p01)
        .def_readonly("p10", &ClickProbs::p10)
        .def_readonly("p11", &ClickProbs::p11);

    m.def("p_off", &p_off, py::arg("pnd"), py::arg("eta"));
    m.def("click_probs_joint",
          py::overload_cast<const JointPnd&, double, double>(&click_probs_joint),
          py::arg("joint"), py::arg("eta_s"), py::arg("eta_i"));
    m.def("click_probs_joint",
          py::overload_cast<const JointPnd&, double>(&click_probs_joint),
          py::arg("joint"), py::arg("eta"));
    m.def("sample_click_table", &sample_click_table, py::arg("joint"), py::arg("ladder"),
          py::arg("trials"), py::arg("seed"));
    m.def("off_frequencies", &off_frequencies, py::arg("table"), py::arg("arm"));

    // ---- reconstruction ----------------------------------------------------
    py::class_<EmConfig>(m, "EmConfig")
        .def(py::init<>())
        .def_readwrite("trunc", &EmConfig::trunc)
        .def_readwrite("rel_tol", &EmConfig::rel_tol)
        .def_readwrite("max_iters", &EmConfig::max_iters)
        .def_readwrite("plane_scale", &EmConfig::plane_scale);

    py::class_<EmDiagnostics>(m, "EmDiagnostics")
        .def_readonly("iterations", &EmDiagnostics::iterations)
        .def_readonly("epsilon_history", &EmDiagnostics::epsilon_history)
        .def_readonly("final_epsilon", &EmDiagnostics::final_epsilon)
        .def_readonly("converged", &EmDiagnostics::converged)
        .def_readonly("mass_outside_reliable_window",
                      &EmDiagnostics::mass_outside_reliable_window);

    py::class_<EmResultSingle>(m, "EmResultSingle")
        .def_readonly("pnd", &EmResultSingle::pnd)
        .def_readonly("diagnostics", &EmResultSingle::diagnostics);
    py::class_<EmResultJoint>(m, "EmResultJoint")
        .def_readonly("pnd", &EmResultJoint::pnd)
        .def_readonly("diagnostics", &EmResultJoint::diagnostics);

    m.def("error_metric", &error_metric, py::arg("frequencies"), py::arg("model_probs"));
    m.def("em_single", &em_single, py::arg("data"), py::arg("config") = EmConfig{});
    m.def("em_joint_frequencies", &em_joint_frequencies, py::arg("etas"), py::arg("f00"),
          py::arg("f01"), py::arg("f10"), py::arg("config") = EmConfig{});
    m.def("em_joint", &em_joint, py::arg("table"), py::arg("config") = EmConfig{});
    m.def("rescale_plane", &rescale_plane, py::arg("config"), py::arg("eta_seg"),
          py::arg("ladder") = std::nullopt);

    // ---- metrics -------------------------------------------------------------
    m.def("fidelity", py::overload_cast<const Pnd&, const Pnd&>(&fidelity), py::arg("p"),
          py::arg("q"));
    m.def("fidelity", py::overload_cast<const JointPnd&, const JointPnd&>(&fidelity),
          py::arg("p"), py::arg("q"));

    py::class_<Moments>(m, "Moments")
        .def_readonly("mean_s", &Moments::mean_s)
        .def_readonly("mean_i", &Moments::mean_i)
        .def_readonly("var_s", &Moments::var_s)
        .def_readonly("var_i", &Moments::var_i)
        .def_readonly("cross", &Moments::cross)
        .def_readonly("cov", &Moments::cov);
    m.def("joint_moments", &joint_moments, py::arg("joint"));

    py::class_<NrfReport>(m, "NrfReport")
        .def_readonly("v_diff", &NrfReport::v_diff)
        .def_readonly("n_tot", &NrfReport::n_tot)
        .def_readonly("nrf", &NrfReport::nrf)
        .def_readonly("nrf_db", &NrfReport::nrf_db);
    m.def("noise_reduction", &noise_reduction, py::arg("joint"));
    m.def("mandel_q", &mandel_q, py::arg("pnd"));

    py::class_<FitBounds>(m, "FitBounds")
        .def(py::init<>())
        .def_readwrite("r_lo", &FitBounds::r_lo)
        .def_readwrite("r_hi", &FitBounds::r_hi)
        .def_readwrite("n_th_lo", &FitBounds::n_th_lo)
        .def_readwrite("n_th_hi", &FitBounds::n_th_hi);
    py::class_<GridConfig>(m, "GridConfig")
        .def(py::init<>())
        .def_readwrite("points_per_axis", &GridConfig::points_per_axis)
        .def_readwrite("refine_tol", &GridConfig::refine_tol);
    py::class_<SourceModelFit>(m, "SourceModelFit")
        .def_readonly("r", &SourceModelFit::r)
        .def_readonly("n_th_s", &SourceModelFit::n_th_s)
        .def_readonly("n_th_i", &SourceModelFit::n_th_i)
        .def_readonly("fidelity", &SourceModelFit::fidelity);
    m.def("fit_source_model", &fit_source_model, py::arg("target"),
          py::arg("bounds") = FitBounds{}, py::arg("grid") = GridConfig{});

    py::class_<PowerPoint>(m, "PowerPoint")
        .def(py::init<>())
        .def_readwrite("power_mw", &PowerPoint::power_mw)
        .def_readwrite("p11", &PowerPoint::p11);
    py::class_<PowerFitBounds>(m, "PowerFitBounds")
        .def(py::init<>())
        .def_readwrite("a_lo", &PowerFitBounds::a_lo)
        .def_readwrite("a_hi", &PowerFitBounds::a_hi)
        .def_readwrite("b_lo", &PowerFitBounds::b_lo)
        .def_readwrite("b_hi", &PowerFitBounds::b_hi);
    py::class_<PowerScalingFit>(m, "PowerScalingFit")
        .def_readonly("a", &PowerScalingFit::a)
        .def_readonly("b_s", &PowerScalingFit::b_s)
        .def_readonly("b_i", &PowerScalingFit::b_i)
        .def_readonly("rss", &PowerScalingFit::rss);
    m.def("fit_power_scaling", &fit_power_scaling, py::arg("points"), py::arg("eta"),
          py::arg("trunc") = 9, py::arg("bounds") = PowerFitBounds{},
          py::arg("grid") = GridConfig{});

    m.def("squeezing_db", &squeezing_db, py::arg("r"));
    py::class_<LinearFit>(m, "LinearFit")
        .def_readonly("slope", &LinearFit::slope)
        .def_readonly("intercept", &LinearFit::intercept)
        .def_readonly("slope_err", &LinearFit::slope_err);
    m.def("linear_fit", &linear_fit, py::arg("x"), py::arg("y"));
    m.def("escape_efficiency", &escape_efficiency, py::arg("q_loaded"),
          py::arg("q_intrinsic"));

    // ---- dynamics ------------------------------------------------------------
    m.def("default_pump_coupling", &default_pump_coupling);

    py::class_<ResonatorParams>(m, "ResonatorParams")
        .def(py::init<>())
        .def_readwrite("gamma_tot_p", &ResonatorParams::gamma_tot_p)
        .def_readwrite("gamma_tot_s", &ResonatorParams::gamma_tot_s)
        .def_readwrite("gamma_tot_i", &ResonatorParams::gamma_tot_i)
        .def_readwrite("eta_es", &ResonatorParams::eta_es)
        .def_readwrite("eta_ei", &ResonatorParams::eta_ei)
        .def_readwrite("gamma_ep", &ResonatorParams::gamma_ep)
        .def_readwrite("tau_rt", &ResonatorParams::tau_rt)
        .def_readwrite("lambda_bar", &ResonatorParams::lambda_bar)
        .def_readwrite("lambda_cl", &ResonatorParams::lambda_cl)
        .def_static("table_defaults", &ResonatorParams::table_defaults)
        .def("validate", &ResonatorParams::validate);

    py::class_<PulseParams>(m, "PulseParams")
        .def(py::init<>())
        .def_readwrite("power_mw", &PulseParams::power_mw)
        .def_readwrite("rep_rate", &PulseParams::rep_rate)
        .def_readwrite("duration", &PulseParams::duration)
        .def_readwrite("detuning", &PulseParams::detuning)
        .def_readwrite("pump_freq", &PulseParams::pump_freq)
        .def_readwrite("pump_coupling", &PulseParams::pump_coupling)
        .def("validate", &PulseParams::validate);

    py::class_<PumpSeries>(m, "PumpSeries")
        .def_readonly("dt", &PumpSeries::dt)
        .def_readonly("amplitude", &PumpSeries::amplitude)
        .def("t_end", &PumpSeries::t_end)
        .def("at", &PumpSeries::at, py::arg("t"));
    m.def("solve_pump", &solve_pump, py::arg("res"), py::arg("pulse"),
          py::arg("dt") = 2.0, py::arg("spm_on") = true);

    py::class_<ScatteredMeans>(m, "ScatteredMeans")
        .def_readonly("n_s", &ScatteredMeans::n_s)
        .def_readonly("n_i", &ScatteredMeans::n_i);

    py::class_<MomentResult>(m, "MomentResult")
        .def_readonly("times", &MomentResult::times)
        .def_readonly("n_s", &MomentResult::n_s)
        .def_readonly("n_i", &MomentResult::n_i)
        .def_readonly("m", &MomentResult::m)
        .def_readonly("detected", &MomentResult::detected);
    m.def("solve_moments", &solve_moments, py::arg("res"), py::arg("pump"),
          py::arg("xpm_on") = true);

    py::class_<TrajectoryOptions>(m, "TrajectoryOptions")
        .def(py::init<>())
        .def_readwrite("n_traj", &TrajectoryOptions::n_traj)
        .def_readwrite("nf", &TrajectoryOptions::nf)
        .def_readwrite("seed", &TrajectoryOptions::seed)
        .def_readwrite("dt_fine", &TrajectoryOptions::dt_fine)
        .def_readwrite("dt_coarse", &TrajectoryOptions::dt_coarse)
        .def_readwrite("switch_lifetimes", &TrajectoryOptions::switch_lifetimes)
        .def_readwrite("window_lifetimes", &TrajectoryOptions::window_lifetimes)
        .def_readwrite("xpm_on", &TrajectoryOptions::xpm_on)
        .def_readwrite("spm_on", &TrajectoryOptions::spm_on)
        .def_readwrite("pump_dt", &TrajectoryOptions::pump_dt)
        .def_readwrite("threads", &TrajectoryOptions::threads);

    py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
        .def_readonly("counts", &TrajectoryRecord::counts)
        .def_readonly("seed", &TrajectoryRecord::seed);
    m.def("simulate_trajectories", &simulate_trajectories, py::arg("res"),
          py::arg("pulse"), py::arg("options") = TrajectoryOptions{},
          py::call_guard<py::gil_scoped_release>());
    m.def("pnd_from_trajectories", &pnd_from_trajectories, py::arg("record"),
          py::arg("trunc"));

    py::class_<G2Report>(m, "G2Report")
        .def_readonly("g2bar", &G2Report::g2bar)
        .def_readonly("schmidt_k", &G2Report::schmidt_k);
    m.def("g2bar", &g2bar, py::arg("record"), py::arg("arm"));
    m.def("g2bar_time_integrated", &g2bar_time_integrated, py::arg("res"),
          py::arg("pump"), py::arg("xpm_on") = true);
    m.def("scan_detuning", &scan_detuning, py::arg("res"), py::arg("pulse"),
          py::arg("detunings"), py::arg("spm_on") = true, py::arg("xpm_on") = true,
          py::arg("pump_dt") = 1.0);
}
