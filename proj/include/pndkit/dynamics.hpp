#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "pndkit/pnd.hpp"
#include "pndkit/util.hpp"

namespace pndkit {

/// Planck constant over 2*pi, J*s.
inline constexpr double kHbar = 1.054571817e-34;
/// Speed of light, nm/ps.
inline constexpr double kSpeedOfLight = 2.99792458e5;

/// Dimensionless factor multiplying the nominal injected photon flux.
/// Calibrated so that the simulated low-power detected pair rate per
/// pulse reproduces the device's fitted squeezing slope (r = aP with
/// a = 0.6363/2.2 mW^-1) at 0.25 mW; see PulseParams::pump_coupling.
double default_pump_coupling();

/// Ring parameters: half linewidths in 1/ps, escape efficiencies,
/// Kerr strengths in the units they are usually quoted in.
struct ResonatorParams {
    double gamma_tot_p = 1.84e-3; // 1/ps
    double gamma_tot_s = 2.25e-3; // 1/ps
    double gamma_tot_i = 2.25e-3; // 1/ps
    double eta_es = 0.926;
    double eta_ei = 0.926;
    /// Pump bus-coupling rate, 1/ps; <= 0 selects the default
    /// escape-weighted value 0.5*(eta_es+eta_ei)*gamma_tot_p.
    double gamma_ep = 0.0;
    double tau_rt = 5.0;        // round-trip time, ps
    double lambda_bar = 1.72;   // photon-number Kerr shift, 1/s
    double lambda_cl = 6.72e7;  // classical SPM coefficient, 1/J

    static ResonatorParams table_defaults() { return {}; }
    double pump_coupling_rate() const;
    double gamma_es() const { return eta_es * gamma_tot_s; }
    double gamma_ei() const { return eta_ei * gamma_tot_i; }
    /// lambda_bar in 1/ps, the unit the solvers work in.
    double lambda_bar_ps() const { return lambda_bar * 1e-12; }
    void validate() const;
};

/// One top-hat pump pulse. Powers are average powers; the instantaneous
/// injected photon flux during the pulse is
/// pump_coupling * P / (rep_rate * hbar * omega_p * duration).
struct PulseParams {
    double power_mw = 1.0;
    double rep_rate = 2.5e6;  // 1/s
    double duration = 300.0;  // ps
    double detuning = 0.0;    // rad/ps
    double pump_freq = 2.0 * 3.14159265358979323846 * kSpeedOfLight / 1544.5; // rad/ps
    double pump_coupling = -1.0; // < 0 selects default_pump_coupling()

    double coupling() const;
    double photon_energy() const { return kHbar * pump_freq * 1e12; } // J
    /// Injected photons per pulse before the coupling factor.
    double photons_per_pulse() const;
    void validate() const;
};

/// Classical pump amplitude on a uniform grid starting at t = 0.
struct PumpSeries {
    double dt = 0.0; // ps
    std::vector<std::complex<double>> amplitude;

    double t_end() const { return dt * double(amplitude.size() - 1); }
    std::complex<double> at(double t) const; // linear interpolation, 0 outside
};

/// Integrate the classical intracavity pump amplitude over
/// [0, duration + 10/gamma_tot_p] with a fourth-order stepper. The
/// pulse edge is kept on the grid by splitting at t = duration.
PumpSeries solve_pump(const ResonatorParams& res, const PulseParams& pulse,
                      double dt = 2.0, bool spm_on = true);

/// Two-mode density operator on Fock levels 0..nf per mode, row-major
/// over the flattened index (n_s*(nf+1) + n_i).
struct QuantumState {
    std::size_t nf = 0;
    double time = 0.0;
    std::vector<std::complex<double>> rho;

    std::size_t mode_dim() const { return nf + 1; }
    std::size_t dim() const { return mode_dim() * mode_dim(); }
    double trace() const;
    double mean_n(Arm arm) const;
    /// Population of the highest Fock level of one mode's marginal.
    double top_level_population(Arm arm) const;
    JointPnd joint_pnd() const;

    static QuantumState vacuum(std::size_t nf);
};

struct EvolveOptions {
    std::size_t nf = 12;
    double dt = 2.0; // ps
    bool xpm_on = true;
};

struct EvolveResult {
    std::vector<double> times;
    std::vector<double> mean_ns;
    std::vector<double> mean_ni;
    std::vector<double> trace_error;
    /// Joint PND snapshot at the time of peak intracavity <n_s>.
    JointPnd peak_pnd = JointPnd::delta(0);
    QuantumState final_state;
    double max_top_population = 0.0;
};

/// Unconditioned two-mode master equation driven by the classical pump:
/// pair creation G = lambda_bar <a_p*>^2 and, when xpm_on, the shift
/// 2 lambda_bar |<a_p>|^2 on each mode; full-rate photon loss.
EvolveResult evolve(const ResonatorParams& res, const PumpSeries& pump,
                    const EvolveOptions& options = {});

struct ScatteredMeans {
    double n_s = 0.0;
    double n_i = 0.0;
};

/// Photons per pulse delivered to the bus waveguide,
/// 2 eta_e gamma_tot * integral of <n> dt by the trapezoidal rule.
ScatteredMeans mean_scattered(const ResonatorParams& res, const EvolveResult& result);

struct TrajectoryOptions {
    std::size_t n_traj = 3000;
    std::size_t nf = 12;
    std::uint64_t seed = 1;
    double dt_fine = 3.0;    // ps, while the pump rings
    double dt_coarse = 12.0; // ps, during ring-down
    /// Switch to the coarse step this many signal lifetimes after the
    /// pulse ends; stop twice as many lifetimes later again.
    double switch_lifetimes = 3.0;
    double window_lifetimes = 6.0;
    bool xpm_on = true;
    bool spm_on = true;
    double pump_dt = 1.0; // ps
    unsigned threads = 0; // 0 -> hardware concurrency
};

struct TrajectoryRecord {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
    std::uint64_t seed = 0;
};

/// Photodetection unraveling: the conditioned density operator evolves
/// under the no-click generator (full Lindblad minus the monitored
/// recycling terms 2 eta_e gamma a rho a†, renormalized), and each
/// monitored channel clicks with first-order probability
/// 2 eta_e gamma <n> dt per step. Deterministic per (seed, index);
/// thread count never changes results.
TrajectoryRecord simulate_trajectories(const ResonatorParams& res,
                                       const PulseParams& pulse,
                                       const TrajectoryOptions& options = {});

/// Normalized histogram of per-pulse counts; counts above trunc land in
/// the top bin so the grid always sums to one.
JointPnd pnd_from_trajectories(const TrajectoryRecord& record, std::size_t trunc);

struct G2Report {
    double g2bar = 0.0;
    double schmidt_k = 0.0; // 1/(g2bar - 1)
};

/// Time-integrated unheralded autocorrelation from per-pulse counts:
/// <n(n-1)>/<n>^2 over the record.
G2Report g2bar(const TrajectoryRecord& record, Arm arm);

/// First and second moments of the two-mode Gaussian dynamics driven by
/// the classical pump: n_s, n_i and m = <a_s a_i> on the pump grid.
/// Exact for this model; the cheap cross-check for evolve().
struct MomentResult {
    std::vector<double> times;
    std::vector<double> n_s;
    std::vector<double> n_i;
    std::vector<std::complex<double>> m;
    ScatteredMeans detected; // 2 eta_e gamma_tot integral of n dt
};

MomentResult solve_moments(const ResonatorParams& res, const PumpSeries& pump,
                           bool xpm_on = true);

/// Deterministic time-integrated g2bar of one arm via the two-time
/// correlator <a_s†(t) a_s(t')> propagated by the same linear system.
G2Report g2bar_time_integrated(const ResonatorParams& res, const PumpSeries& pump,
                               bool xpm_on = true);

/// Detected mean photons per pulse across pump detunings (moment route).
std::vector<ScatteredMeans> scan_detuning(const ResonatorParams& res,
                                          const PulseParams& pulse,
                                          const std::vector<double>& detunings,
                                          bool spm_on = true, bool xpm_on = true,
                                          double pump_dt = 1.0);

} // namespace pndkit
