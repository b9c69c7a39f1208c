#include "pndkit/em.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pndkit {

namespace {

constexpr double kProbFloor = 1e-300;
constexpr std::size_t kReliableWindow = 5;

std::vector<double> effective_etas(const std::vector<double>& etas, double plane_scale,
                                   const char* what) {
    if (!(plane_scale > 0.0) || !std::isfinite(plane_scale))
        throw std::invalid_argument(std::string(what) + ": plane_scale must be positive");
    std::vector<double> out;
    out.reserve(etas.size());
    for (double e : etas) {
        double eff = e * plane_scale;
        if (!(eff > 0.0) || !(eff <= 1.0))
            throw std::invalid_argument(
                std::string(what) + ": effective efficiency outside (0, 1]");
        out.push_back(eff);
    }
    return out;
}

void validate_frequency(double f, const char* what) {
    if (!(f >= 0.0) || !(f <= 1.0))
        throw std::invalid_argument(std::string(what) + ": frequency outside [0, 1]");
}

bool stop_check(std::vector<double>& history, double rel_tol) {
    std::size_t n = history.size();
    if (n < 2) return false;
    double cur = history[n - 1], prev = history[n - 2];
    if (cur == 0.0 && prev == 0.0) return true;
    if (cur == 0.0) return false;
    return std::abs(prev - cur) / cur < rel_tol;
}

} // namespace

double error_metric(const std::vector<double>& frequencies,
                    const std::vector<double>& model_probs) {
    if (frequencies.empty() || frequencies.size() != model_probs.size())
        throw std::invalid_argument("error_metric: need equal-length non-empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < frequencies.size(); ++i)
        acc += std::abs(frequencies[i] - model_probs[i]);
    return acc / double(frequencies.size());
}

EmResultSingle em_single(const std::vector<std::pair<double, double>>& data,
                         const EmConfig& config) {
    if (data.size() < 2)
        throw std::invalid_argument("em_single: need at least two attenuation settings");
    std::size_t M = data.size(), d = config.trunc + 1;
    std::vector<double> etas(M), f(M);
    for (std::size_t mu = 0; mu < M; ++mu) {
        etas[mu] = data[mu].first;
        f[mu] = data[mu].second;
        validate_frequency(f[mu], "em_single");
    }
    std::vector<double> eff = effective_etas(etas, config.plane_scale, "em_single");
    Matrix B = b_matrix_single(eff, config.trunc);

    std::vector<double> colsum(d, 0.0);
    for (std::size_t mu = 0; mu < M; ++mu)
        for (std::size_t n = 0; n < d; ++n) colsum[n] += B(mu, n);
    for (double c : colsum)
        if (!(c > 0.0))
            throw std::invalid_argument("em_single: degenerate ladder leaves a Fock "
                                        "level unconstrained");

    std::vector<double> rho(d, 1.0 / double(d));
    std::vector<double> model(M);
    EmDiagnostics diag;
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        for (std::size_t mu = 0; mu < M; ++mu) {
            double p = 0.0;
            for (std::size_t n = 0; n < d; ++n) p += B(mu, n) * rho[n];
            model[mu] = std::max(p, kProbFloor);
        }
        double norm = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
            double gain = 0.0;
            for (std::size_t mu = 0; mu < M; ++mu)
                gain += B(mu, n) * f[mu] / model[mu];
            rho[n] *= gain / colsum[n];
            norm += rho[n];
        }
        for (double& x : rho) x /= norm;

        double eps = 0.0;
        for (std::size_t mu = 0; mu < M; ++mu) {
            double p = 0.0;
            for (std::size_t n = 0; n < d; ++n) p += B(mu, n) * rho[n];
            eps += std::abs(f[mu] - p);
        }
        eps /= double(M);
        diag.epsilon_history.push_back(eps);
        diag.iterations = it + 1;
        if (stop_check(diag.epsilon_history, config.rel_tol)) {
            diag.converged = true;
            break;
        }
    }
    diag.final_epsilon = diag.epsilon_history.back();
    double tail = 0.0;
    for (std::size_t n = kReliableWindow + 1; n < d; ++n) tail += rho[n];
    diag.mass_outside_reliable_window = tail > 1e-2;
    return {Pnd(std::move(rho)), std::move(diag)};
}

EmResultJoint em_joint_frequencies(const std::vector<double>& etas,
                                   const std::vector<double>& f00,
                                   const std::vector<double>& f01,
                                   const std::vector<double>& f10,
                                   const EmConfig& config) {
    std::size_t M = etas.size();
    if (M < 2)
        throw std::invalid_argument("em_joint: need at least two attenuation settings");
    if (f00.size() != M || f01.size() != M || f10.size() != M)
        throw std::invalid_argument("em_joint: frequency vectors must match ladder size");
    for (std::size_t mu = 0; mu < M; ++mu) {
        validate_frequency(f00[mu], "em_joint");
        validate_frequency(f01[mu], "em_joint");
        validate_frequency(f10[mu], "em_joint");
        if (f00[mu] + f01[mu] + f10[mu] > 1.0 + 1e-12)
            throw std::invalid_argument("em_joint: outcome frequencies exceed 1");
    }
    std::vector<double> eff = effective_etas(etas, config.plane_scale, "em_joint");

    std::size_t d = config.trunc + 1, D = d * d, R = 3 * M;
    Matrix A = b_matrix_joint(eff, config.trunc);
    std::vector<double> freq(R);
    for (std::size_t mu = 0; mu < M; ++mu) {
        freq[mu] = f00[mu];
        freq[M + mu] = f01[mu];
        freq[2 * M + mu] = f10[mu];
    }

    std::vector<double> colsum(D, 0.0);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < D; ++c) colsum[c] += A(r, c);
    for (double c : colsum)
        if (!(c > 0.0))
            throw std::invalid_argument("em_joint: degenerate ladder leaves a Fock "
                                        "level unconstrained");

    std::vector<double> rho(D, 1.0 / double(D));
    std::vector<double> model(R);
    EmDiagnostics diag;
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        for (std::size_t r = 0; r < R; ++r) {
            double p = 0.0;
            for (std::size_t c = 0; c < D; ++c) p += A(r, c) * rho[c];
            model[r] = std::max(p, kProbFloor);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < D; ++c) {
            double gain = 0.0;
            for (std::size_t r = 0; r < R; ++r) gain += A(r, c) * freq[r] / model[r];
            rho[c] *= gain / colsum[c];
            norm += rho[c];
        }
        for (double& x : rho) x /= norm;

        double eps = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            double p = 0.0;
            for (std::size_t c = 0; c < D; ++c) p += A(r, c) * rho[c];
            eps += std::abs(freq[r] - p);
        }
        eps /= double(R);
        diag.epsilon_history.push_back(eps);
        diag.iterations = it + 1;
        if (stop_check(diag.epsilon_history, config.rel_tol)) {
            diag.converged = true;
            break;
        }
    }
    diag.final_epsilon = diag.epsilon_history.back();
    double tail = 0.0;
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k < d; ++k)
            if (n > kReliableWindow || k > kReliableWindow) tail += rho[n * d + k];
    diag.mass_outside_reliable_window = tail > 1e-2;
    return {JointPnd(config.trunc, std::move(rho)), std::move(diag)};
}

EmResultJoint em_joint(const ClickTable& table, const EmConfig& config) {
    table.validate();
    std::size_t M = table.rows.size();
    std::vector<double> etas(M), f00(M), f01(M), f10(M);
    for (std::size_t mu = 0; mu < M; ++mu) {
        const ClickRow& r = table.rows[mu];
        double t = double(r.trials);
        etas[mu] = r.eta;
        f00[mu] = double(r.c00) / t;
        f01[mu] = double(r.c01) / t;
        f10[mu] = double(r.c10) / t;
    }
    return em_joint_frequencies(etas, f00, f01, f10, config);
}

EmConfig rescale_plane(const EmConfig& config, double eta_seg,
                       const std::optional<EfficiencyLadder>& ladder) {
    if (!(eta_seg > 0.0) || !(eta_seg <= 1.0))
        throw std::invalid_argument("rescale_plane: segment transmission outside (0, 1]");
    EmConfig out = config;
    out.plane_scale = config.plane_scale / eta_seg;
    if (ladder)
        effective_etas(ladder->etas(), out.plane_scale, "rescale_plane");
    return out;
}

} // namespace pndkit
