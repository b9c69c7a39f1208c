// Command-line front end: synth / reconstruct / fit / metrics / simulate /
// sweep over the pndkit library. Exit codes: 0 success, 1 validation
// error, 2 numerical failure; errors go to stderr as one-line JSON.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pndkit/dynamics.hpp"
#include "pndkit/em.hpp"
#include "pndkit/forward.hpp"
#include "pndkit/io.hpp"
#include "pndkit/metrics.hpp"
#include "pndkit/pnd.hpp"

namespace fs = std::filesystem;
using pndkit::io::format_double;
using pndkit::io::json;

namespace {

std::string error_json(const std::string& type, const std::string& what) {
    json j;
    j["error"] = {{"type", type}, {"what", what}};
    return j.dump();
}

std::uint64_t entropy_seed() {
    std::random_device rd;
    return (std::uint64_t(rd()) << 32) ^ std::uint64_t(rd());
}

/// Either --eta (linear transmission) or --loss-db; absent means lossless.
struct LossFlag {
    std::optional<double> eta;
    std::optional<double> loss_db;

    void attach(CLI::App* cmd, const std::string& what) {
        auto* e = cmd->add_option("--eta", eta, "Transmission of " + what);
        auto* d = cmd->add_option("--loss-db", loss_db, "Loss of " + what + " in dB");
        e->excludes(d);
        d->excludes(e);
    }
    bool given() const { return eta.has_value() || loss_db.has_value(); }
    double value() const {
        if (eta) return *eta;
        if (loss_db) return std::pow(10.0, -*loss_db / 10.0);
        return 1.0;
    }
};

fs::path sidecar(const fs::path& out, const char* ext) {
    fs::path p = out;
    p.replace_extension(ext);
    return p;
}

// ---------------------------------------------------------------- synth --

struct SynthOpts {
    std::string model = "family";
    double power_mw = 2.2;
    double r = 0.63;
    double mean = 1.2;
    std::size_t trunc = 9;
    std::size_t settings = 50;
    double eta_lo = 0.05;
    double eta_hi = 0.95;
    std::uint64_t trials = 1000000;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    LossFlag chain;
    std::string out;
};

void run_synth(SynthOpts& o) {
    using namespace pndkit;
    const JointPnd truth = [&] {
        if (o.model == "family")
            return source_model_state(SourceModelParams::device_defaults().at_power(o.power_mw),
                                      o.trunc);
        if (o.model == "tms") return tms_joint_pnd(o.r, o.trunc);
        if (o.model == "thermal")
            return JointPnd::product(thermal_pnd(o.mean, o.trunc), Pnd::delta(o.trunc));
        if (o.model == "coherent")
            return JointPnd::product(coherent_pnd(o.mean, o.trunc), Pnd::delta(o.trunc));
        return JointPnd::delta(o.trunc);
    }();

    const double chain = o.chain.value();
    const EfficiencyLadder ladder =
        EfficiencyLadder::uniform(o.eta_lo, o.eta_hi, o.settings).scaled(chain);
    if (o.seed_opt->count() == 0) o.seed = entropy_seed();

    const ClickTable table = sample_click_table(truth, ladder, o.trials, o.seed);
    io::write_click_table(o.out, table);

    json prov;
    prov["command"] = "synth";
    prov["seed"] = o.seed;
    prov["model"] = {{"name", o.model}};
    if (o.model == "family") prov["model"]["power_mw"] = o.power_mw;
    if (o.model == "tms") prov["model"]["r"] = o.r;
    if (o.model == "thermal" || o.model == "coherent") prov["model"]["mean"] = o.mean;
    prov["trunc"] = o.trunc;
    prov["ladder"] = {{"eta_lo", o.eta_lo},
                      {"eta_hi", o.eta_hi},
                      {"settings", o.settings},
                      {"chain_eta", chain}};
    prov["trials"] = o.trials;
    prov["out"] = o.out;
    io::write_json(sidecar(o.out, ".provenance.json"), prov);
}

// ---------------------------------------------------------- reconstruct --

struct ReconstructOpts {
    std::string table;
    std::string arm = "joint";
    std::size_t trunc = 9;
    double rel_tol = 1e-3;
    std::size_t max_iters = 100000;
    LossFlag plane; // segment between the source and the reporting plane
    std::string out;
    std::string diagnostics;
};

void run_reconstruct(ReconstructOpts& o) {
    using namespace pndkit;
    const ClickTable table = io::read_click_table(o.table);

    EmConfig cfg;
    cfg.trunc = o.trunc;
    cfg.rel_tol = o.rel_tol;
    cfg.max_iters = o.max_iters;
    if (o.plane.given()) {
        std::vector<double> etas;
        for (const ClickRow& row : table.rows) etas.push_back(row.eta);
        cfg = rescale_plane(cfg, o.plane.value(), EfficiencyLadder(std::move(etas)));
    }

    const fs::path diag_path =
        o.diagnostics.empty() ? sidecar(o.out, ".diagnostics.json") : fs::path(o.diagnostics);
    if (o.arm == "joint") {
        const EmResultJoint result = em_joint(table, cfg);
        io::write_joint_pnd(o.out, result.pnd);
        io::write_json(diag_path, io::diagnostics_json(result.diagnostics, cfg));
    } else {
        const Arm arm = o.arm == "signal" ? Arm::signal : Arm::idler;
        const EmResultSingle result = em_single(off_frequencies(table, arm), cfg);
        io::write_pnd(o.out, result.pnd);
        io::write_json(diag_path, io::diagnostics_json(result.diagnostics, cfg));
    }
}

// ------------------------------------------------------------------ fit --

struct FitOpts {
    std::string pnd;
    pndkit::FitBounds bounds;
    std::size_t grid_points = 50;
    double refine_tol = 1e-4;
    std::string out;
};

void run_fit(FitOpts& o) {
    using namespace pndkit;
    const JointPnd pnd = io::read_joint_pnd(o.pnd);
    GridConfig grid;
    grid.points_per_axis = o.grid_points;
    grid.refine_tol = o.refine_tol;
    const SourceModelFit fit = fit_source_model(pnd, o.bounds, grid);
    io::write_json(o.out, io::metrics_json(pnd, fit));
}

// -------------------------------------------------------------- metrics --

struct MetricsOpts {
    std::string pnd;
    std::string out;
};

void run_metrics(MetricsOpts& o) {
    using namespace pndkit;
    std::ifstream in(o.pnd);
    if (!in) throw std::invalid_argument("cannot open: " + o.pnd);
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    in.close();

    json j;
    if (header == "n,prob") {
        const Pnd pnd = io::read_pnd(o.pnd);
        j["mean"] = pnd.mean();
        j["variance"] = pnd.variance();
        j["mandel_q"] = mandel_q(pnd);
    } else {
        const JointPnd pnd = io::read_joint_pnd(o.pnd);
        const Moments mom = joint_moments(pnd);
        const NrfReport nrf = noise_reduction(pnd);
        j["mean_s"] = mom.mean_s;
        j["mean_i"] = mom.mean_i;
        j["var_s"] = mom.var_s;
        j["var_i"] = mom.var_i;
        j["cov"] = mom.cov;
        j["v_diff"] = nrf.v_diff;
        j["n_tot"] = nrf.n_tot;
        j["nrf"] = nrf.nrf;
        j["nrf_db"] = nrf.nrf_db;
        j["mandel_q_s"] = mandel_q(marginal(pnd, Arm::signal));
        j["mandel_q_i"] = mandel_q(marginal(pnd, Arm::idler));
    }
    io::write_json(o.out, j);
}

// ------------------------------------------------------------- simulate --

struct SimulateOpts {
    std::string params;
    std::optional<double> power_mw;
    std::optional<double> detuning;
    std::size_t n_traj = 3000;
    std::size_t nf = 12;
    std::optional<std::size_t> trunc;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    unsigned threads = 0;
    double dt_fine = 3.0;
    double dt_coarse = 12.0;
    double pump_dt = 1.0;
    bool no_xpm = false;
    bool no_spm = false;
    std::string out_traj;
    std::string out_pnd;
};

void run_simulate(SimulateOpts& o) {
    using namespace pndkit;
    ResonatorParams res = ResonatorParams::table_defaults();
    PulseParams pulse;
    if (!o.params.empty()) io::parse_params(io::read_json(o.params), res, pulse);
    if (o.power_mw) pulse.power_mw = *o.power_mw;
    if (o.detuning) pulse.detuning = *o.detuning;
    if (o.seed_opt->count() == 0) o.seed = entropy_seed();

    TrajectoryOptions opts;
    opts.n_traj = o.n_traj;
    opts.nf = o.nf;
    opts.seed = o.seed;
    opts.threads = o.threads;
    opts.dt_fine = o.dt_fine;
    opts.dt_coarse = o.dt_coarse;
    opts.pump_dt = o.pump_dt;
    opts.xpm_on = !o.no_xpm;
    opts.spm_on = !o.no_spm;

    const TrajectoryRecord record = simulate_trajectories(res, pulse, opts);
    io::write_trajectories(o.out_traj, record);
    const std::size_t trunc = o.trunc ? *o.trunc : o.nf;
    io::write_joint_pnd(o.out_pnd, pnd_from_trajectories(record, trunc));

    double sum_s = 0.0, sum_i = 0.0;
    for (const auto& [ns, ni] : record.counts) {
        sum_s += ns;
        sum_i += ni;
    }
    json prov;
    prov["command"] = "simulate";
    prov["seed"] = o.seed;
    prov["params"] = io::params_json(res, pulse);
    prov["options"] = {{"trajectories", o.n_traj}, {"nf", o.nf},
                       {"trunc", trunc},           {"dt_fine", o.dt_fine},
                       {"dt_coarse", o.dt_coarse}, {"pump_dt", o.pump_dt},
                       {"xpm_on", opts.xpm_on},    {"spm_on", opts.spm_on}};
    json summary;
    summary["mean_clicks_s"] = sum_s / double(record.counts.size());
    summary["mean_clicks_i"] = sum_i / double(record.counts.size());
    if (sum_s > 0.0) {
        const G2Report g2 = g2bar(record, Arm::signal);
        summary["g2bar_s"] = g2.g2bar;
        summary["schmidt_k_s"] = g2.schmidt_k;
    }
    if (sum_i > 0.0) {
        const G2Report g2 = g2bar(record, Arm::idler);
        summary["g2bar_i"] = g2.g2bar;
        summary["schmidt_k_i"] = g2.schmidt_k;
    }
    prov["summary"] = summary;
    io::write_json(sidecar(o.out_traj, ".provenance.json"), prov);
}

// ---------------------------------------------------------------- sweep --

struct SweepOpts {
    std::vector<double> powers;
    double a = 0.0;
    double b_s = 0.0;
    double b_i = 0.0;
    std::size_t trunc = 9;
    std::size_t settings = 50;
    double eta_lo = 0.05;
    double eta_hi = 0.95;
    LossFlag chain;
    std::uint64_t trials = 1000000;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    double rel_tol = 0.0;
    std::size_t max_iters = 200000;
    bool exact = false;
    std::string out_dir;
};

void run_sweep(SweepOpts& o) {
    using namespace pndkit;
    if (o.powers.empty()) throw std::invalid_argument("sweep needs at least one power");
    for (double p : o.powers)
        if (!(p > 0.0)) throw std::invalid_argument("powers must be positive");

    SourceModelParams base = SourceModelParams::device_defaults();
    if (o.a > 0.0) base.a = o.a;
    if (o.b_s > 0.0) base.b_s = o.b_s;
    if (o.b_i > 0.0) base.b_i = o.b_i;

    const double chain = o.chain.value();
    const EfficiencyLadder ladder =
        EfficiencyLadder::uniform(o.eta_lo, o.eta_hi, o.settings).scaled(chain);
    if (o.seed_opt->count() == 0) o.seed = entropy_seed();

    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);

    std::ofstream rcsv(dir / "r_vs_power.csv");
    std::ofstream ncsv(dir / "nrf_vs_ntot.csv");
    if (!rcsv || !ncsv) throw std::invalid_argument("cannot write into " + o.out_dir);
    rcsv << "power_mw,r,n_th_s,n_th_i,fit_fidelity\n";
    ncsv << "power_mw,n_tot,v_diff,nrf,nrf_db\n";

    std::vector<double> ps, rs, ntots, vdiffs;
    for (std::size_t k = 0; k < o.powers.size(); ++k) {
        const double p = o.powers[k];
        const JointPnd truth = source_model_state(base.at_power(p), o.trunc);
        const JointPnd recon = [&] {
            if (o.exact) return truth;
            EmConfig cfg;
            cfg.trunc = o.trunc;
            cfg.rel_tol = o.rel_tol;
            cfg.max_iters = o.max_iters;
            const ClickTable table =
                sample_click_table(truth, ladder, o.trials, detail::mix_seed(o.seed, k));
            return em_joint(table, cfg).pnd;
        }();

        io::write_joint_pnd(dir / ("pnd_p" + format_double(p) + ".csv"), recon);
        const SourceModelFit fit = fit_source_model(recon);
        const NrfReport nrf = noise_reduction(recon);
        rcsv << format_double(p) << ',' << format_double(fit.r) << ','
             << format_double(fit.n_th_s) << ',' << format_double(fit.n_th_i) << ','
             << format_double(fit.fidelity) << '\n';
        ncsv << format_double(p) << ',' << format_double(nrf.n_tot) << ','
             << format_double(nrf.v_diff) << ',' << format_double(nrf.nrf) << ','
             << format_double(nrf.nrf_db) << '\n';
        ps.push_back(p);
        rs.push_back(fit.r);
        ntots.push_back(nrf.n_tot);
        vdiffs.push_back(nrf.v_diff);
    }

    json j;
    j["command"] = "sweep";
    j["exact"] = o.exact;
    if (!o.exact) {
        j["seed"] = o.seed;
        j["trials"] = o.trials;
        j["em"] = {{"rel_tol", o.rel_tol}, {"max_iters", o.max_iters}};
    }
    j["model"] = {{"a", base.a}, {"b_s", base.b_s}, {"b_i", base.b_i}};
    j["ladder"] = {{"eta_lo", o.eta_lo},
                   {"eta_hi", o.eta_hi},
                   {"settings", o.settings},
                   {"chain_eta", chain}};
    j["points"] = ps.size();
    if (ps.size() >= 2) {
        const LinearFit rfit = linear_fit(ps, rs);
        const LinearFit vfit = linear_fit(ntots, vdiffs);
        j["r_vs_power"] = {{"slope", rfit.slope},
                           {"intercept", rfit.intercept},
                           {"slope_err", rfit.slope_err}};
        j["v_diff_vs_n_tot"] = {{"slope", vfit.slope},
                                {"intercept", vfit.intercept},
                                {"slope_err", vfit.slope_err}};
    }
    io::write_json(dir / "slopes.json", j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon-number reconstruction and squeezed-source simulation toolkit"};
    app.require_subcommand(1);

    SynthOpts synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "Sample a synthetic on/off click table");
    synth_cmd->add_option("--model", synth.model, "Source model")
        ->check(CLI::IsMember({"family", "tms", "thermal", "coherent", "vacuum"}));
    synth_cmd->add_option("--power", synth.power_mw, "Pump power for the family model, mW");
    synth_cmd->add_option("--r", synth.r, "Squeezing parameter for the tms model");
    synth_cmd->add_option("--mean", synth.mean, "Mean photon number for thermal/coherent");
    synth_cmd->add_option("--trunc", synth.trunc, "Fock truncation of the truth state");
    synth_cmd->add_option("--settings", synth.settings, "Number of attenuation settings");
    synth_cmd->add_option("--eta-lo", synth.eta_lo, "Lowest variable transmission");
    synth_cmd->add_option("--eta-hi", synth.eta_hi, "Highest variable transmission");
    synth_cmd->add_option("--trials", synth.trials, "Pulses per setting");
    synth.seed_opt = synth_cmd->add_option("--seed", synth.seed,
                                           "RNG seed (entropy + provenance echo if absent)");
    synth.chain.attach(synth_cmd, "the fixed chain in front of the variable attenuator");
    synth_cmd->add_option("--out", synth.out, "Output click-table CSV")->required();

    ReconstructOpts rec;
    CLI::App* rec_cmd =
        app.add_subcommand("reconstruct", "EM reconstruction from a click table");
    rec_cmd->add_option("--table", rec.table, "Input click-table CSV")->required();
    rec_cmd->add_option("--arm", rec.arm, "Which distribution to reconstruct")
        ->check(CLI::IsMember({"joint", "signal", "idler"}));
    rec_cmd->add_option("--trunc", rec.trunc, "Fock truncation");
    rec_cmd->add_option("--rel-tol", rec.rel_tol, "Relative plateau stopping tolerance");
    rec_cmd->add_option("--max-iters", rec.max_iters, "Iteration budget");
    rec.plane.attach(rec_cmd, "the segment between the source and the reporting plane");
    rec_cmd->add_option("--out", rec.out, "Output PND CSV")->required();
    rec_cmd->add_option("--diagnostics", rec.diagnostics,
                        "Diagnostics JSON path (default: alongside --out)");

    FitOpts fit;
    CLI::App* fit_cmd =
        app.add_subcommand("fit", "Fit the squeezing-plus-background model to a joint PND");
    fit_cmd->add_option("--pnd", fit.pnd, "Input joint PND CSV")->required();
    fit_cmd->add_option("--r-lo", fit.bounds.r_lo, "Lower squeezing bound");
    fit_cmd->add_option("--r-hi", fit.bounds.r_hi, "Upper squeezing bound");
    fit_cmd->add_option("--nth-lo", fit.bounds.n_th_lo, "Lower thermal-mean bound");
    fit_cmd->add_option("--nth-hi", fit.bounds.n_th_hi, "Upper thermal-mean bound");
    fit_cmd->add_option("--grid", fit.grid_points, "Coarse grid points per axis");
    fit_cmd->add_option("--refine-tol", fit.refine_tol, "Refinement step tolerance");
    fit_cmd->add_option("--out", fit.out, "Output metrics JSON")->required();

    MetricsOpts met;
    CLI::App* met_cmd =
        app.add_subcommand("metrics", "Scalar summaries of a stored distribution");
    met_cmd->add_option("--pnd", met.pnd, "Input PND CSV (single or joint)")->required();
    met_cmd->add_option("--out", met.out, "Output metrics JSON")->required();

    SimulateOpts sim;
    CLI::App* sim_cmd =
        app.add_subcommand("simulate", "Photodetection trajectories of the pulsed source");
    sim_cmd->add_option("--params", sim.params, "Resonator/pulse parameter JSON");
    sim_cmd->add_option("--power", sim.power_mw, "Override pump power, mW");
    sim_cmd->add_option("--detuning", sim.detuning, "Override pump detuning, rad/ps");
    sim_cmd->add_option("--trajectories", sim.n_traj, "Number of trajectories");
    sim_cmd->add_option("--nf", sim.nf, "Fock levels per mode in the solver");
    sim_cmd->add_option("--trunc", sim.trunc, "Truncation of the binned PND (default: nf)");
    sim.seed_opt = sim_cmd->add_option("--seed", sim.seed,
                                       "RNG seed (entropy + provenance echo if absent)");
    sim_cmd->add_option("--threads", sim.threads, "Worker threads (0 = hardware)");
    sim_cmd->add_option("--dt-fine", sim.dt_fine, "Step while the pump rings, ps");
    sim_cmd->add_option("--dt-coarse", sim.dt_coarse, "Step during ring-down, ps");
    sim_cmd->add_option("--pump-dt", sim.pump_dt, "Classical pump grid step, ps");
    sim_cmd->add_flag("--no-xpm", sim.no_xpm, "Disable the cross-phase shift");
    sim_cmd->add_flag("--no-spm", sim.no_spm, "Disable pump self-phase modulation");
    sim_cmd->add_option("--out-traj", sim.out_traj, "Output trajectory CSV")->required();
    sim_cmd->add_option("--out-pnd", sim.out_pnd, "Output binned joint PND CSV")->required();

    SweepOpts sweep;
    CLI::App* sweep_cmd = app.add_subcommand(
        "sweep", "Power sweep: per-power reconstruction tables and slope fits");
    sweep_cmd->add_option("--powers", sweep.powers, "Pump powers in mW")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--a", sweep.a, "Squeezing slope override, 1/mW");
    sweep_cmd->add_option("--b-s", sweep.b_s, "Signal thermal slope override, 1/mW");
    sweep_cmd->add_option("--b-i", sweep.b_i, "Idler thermal slope override, 1/mW");
    sweep_cmd->add_option("--trunc", sweep.trunc, "Fock truncation");
    sweep_cmd->add_option("--settings", sweep.settings, "Number of attenuation settings");
    sweep_cmd->add_option("--eta-lo", sweep.eta_lo, "Lowest variable transmission");
    sweep_cmd->add_option("--eta-hi", sweep.eta_hi, "Highest variable transmission");
    sweep.chain.attach(sweep_cmd, "the fixed chain in front of the variable attenuator");
    sweep_cmd->add_option("--trials", sweep.trials, "Pulses per setting");
    sweep.seed_opt = sweep_cmd->add_option("--seed", sweep.seed,
                                           "RNG seed (entropy + provenance echo if absent)");
    sweep_cmd->add_option("--rel-tol", sweep.rel_tol, "EM plateau stopping tolerance");
    sweep_cmd->add_option("--max-iters", sweep.max_iters, "EM iteration budget");
    sweep_cmd->add_flag("--exact", sweep.exact,
                        "Skip sampling and EM; evaluate the exact model states");
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << error_json("validation", e.what()) << '\n';
        return 1;
    }

    try {
        if (synth_cmd->parsed()) run_synth(synth);
        if (rec_cmd->parsed()) run_reconstruct(rec);
        if (fit_cmd->parsed()) run_fit(fit);
        if (met_cmd->parsed()) run_metrics(met);
        if (sim_cmd->parsed()) run_simulate(sim);
        if (sweep_cmd->parsed()) run_sweep(sweep);
    } catch (const std::invalid_argument& e) {
        std::cerr << error_json("validation", e.what()) << '\n';
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << error_json("validation", e.what()) << '\n';
        return 1;
    } catch (const pndkit::numerical_error& e) {
        std::cerr << error_json("numerical", e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << error_json("internal", e.what()) << '\n';
        return 2;
    }
    return 0;
}
