#include "pndkit/pnd.hpp"

#include <cmath>
#include <numeric>

namespace pndkit {

namespace {

void validate_weights(const std::vector<double>& w, const char* what) {
    if (w.empty())
        throw std::invalid_argument(std::string(what) + ": empty weight vector");
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument(std::string(what) +
                                        ": weights must be finite and non-negative");
    }
}

std::vector<double> normalized(std::vector<double> w, const char* what) {
    validate_weights(w, what);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0)
        throw std::invalid_argument(std::string(what) + ": total mass must be positive");
    for (double& x : w) x /= total;
    return w;
}

} // namespace

double binomial_pmf(unsigned n, unsigned k, double eta) {
    if (!(eta >= 0.0) || !(eta <= 1.0))
        throw std::domain_error("binomial_pmf: eta must lie in [0, 1]");
    if (k > n) return 0.0;
    if (eta == 0.0) return k == 0 ? 1.0 : 0.0;
    if (eta == 1.0) return k == n ? 1.0 : 0.0;
    if (n <= 20) {
        double c = 1.0;
        for (unsigned j = 0; j < k; ++j) c = c * double(n - j) / double(j + 1);
        return c * std::pow(eta, double(k)) * std::pow(1.0 - eta, double(n - k));
    }
    double lg = std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                std::lgamma(double(n - k) + 1.0);
    return std::exp(lg + double(k) * std::log(eta) +
                    double(n - k) * std::log1p(-eta));
}

Pnd::Pnd(std::vector<double> weights)
    : probs_(normalized(std::move(weights), "Pnd")) {}

double Pnd::mean() const {
    double m = 0.0;
    for (std::size_t n = 1; n < probs_.size(); ++n) m += double(n) * probs_[n];
    return m;
}

double Pnd::variance() const {
    double m = mean(), m2 = 0.0;
    for (std::size_t n = 1; n < probs_.size(); ++n)
        m2 += double(n) * double(n) * probs_[n];
    return m2 - m * m;
}

Pnd Pnd::delta(std::size_t trunc, std::size_t at) {
    if (at > trunc) throw std::invalid_argument("Pnd::delta: level beyond truncation");
    std::vector<double> w(trunc + 1, 0.0);
    w[at] = 1.0;
    return Pnd(std::move(w));
}

JointPnd::JointPnd(std::size_t trunc, std::vector<double> weights) : trunc_(trunc) {
    if (weights.size() != (trunc + 1) * (trunc + 1))
        throw std::invalid_argument("JointPnd: weight vector size must be (trunc+1)^2");
    probs_ = normalized(std::move(weights), "JointPnd");
}

JointPnd JointPnd::delta(std::size_t trunc, std::size_t n_s, std::size_t n_i) {
    if (n_s > trunc || n_i > trunc)
        throw std::invalid_argument("JointPnd::delta: level beyond truncation");
    std::vector<double> w((trunc + 1) * (trunc + 1), 0.0);
    w[n_s * (trunc + 1) + n_i] = 1.0;
    return JointPnd(trunc, std::move(w));
}

JointPnd JointPnd::product(const Pnd& signal, const Pnd& idler) {
    if (signal.trunc() != idler.trunc())
        throw std::invalid_argument("JointPnd::product: arm truncations differ");
    std::size_t d = signal.dim();
    std::vector<double> w(d * d);
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k < d; ++k) w[n * d + k] = signal[n] * idler[k];
    return JointPnd(signal.trunc(), std::move(w));
}

Pnd thermal_pnd(double mean, std::size_t trunc) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::domain_error("thermal_pnd: mean must be finite and non-negative");
    std::vector<double> w(trunc + 1);
    double p = 1.0 / (1.0 + mean);
    double q = mean / (1.0 + mean);
    for (std::size_t n = 0; n <= trunc; ++n) {
        w[n] = p;
        p *= q;
    }
    return Pnd(std::move(w));
}

Pnd coherent_pnd(double mean, std::size_t trunc) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::domain_error("coherent_pnd: mean must be finite and non-negative");
    std::vector<double> w(trunc + 1);
    double p = std::exp(-mean);
    for (std::size_t n = 0; n <= trunc; ++n) {
        w[n] = p;
        p *= mean / double(n + 1);
    }
    return Pnd(std::move(w));
}

JointPnd tms_joint_pnd(double r, std::size_t trunc) {
    if (!(r >= 0.0) || !std::isfinite(r))
        throw std::domain_error("tms_joint_pnd: r must be finite and non-negative");
    std::size_t d = trunc + 1;
    std::vector<double> w(d * d, 0.0);
    double t = std::tanh(r);
    double q = t * t;
    double p = 1.0 / (std::cosh(r) * std::cosh(r));
    for (std::size_t n = 0; n < d; ++n) {
        w[n * d + n] = p;
        p *= q;
    }
    return JointPnd(trunc, std::move(w));
}

JointPnd convolve_with_thermal(const JointPnd& base, double n_th_s, double n_th_i) {
    std::size_t d = base.dim();
    Pnd th_s = thermal_pnd(n_th_s, base.trunc());
    Pnd th_i = thermal_pnd(n_th_i, base.trunc());

    // Separable: convolve along the signal axis, then the idler axis.
    std::vector<double> mid(d * d, 0.0);
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k <= n; ++k) {
            double f = th_s[n - k];
            for (std::size_t j = 0; j < d; ++j)
                mid[n * d + j] += base.at(k, j) * f;
        }
    std::vector<double> out(d * d, 0.0);
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m <= j; ++m) acc += mid[n * d + m] * th_i[j - m];
            out[n * d + j] = acc;
        }
    return JointPnd(base.trunc(), std::move(out));
}

Pnd apply_loss(const Pnd& input, double eta) {
    if (!(eta >= 0.0) || !(eta <= 1.0))
        throw std::domain_error("apply_loss: eta must lie in [0, 1]");
    std::size_t d = input.dim();
    std::vector<double> out(d, 0.0);
    for (std::size_t n = 0; n < d; ++n) {
        double p = input[n];
        if (p == 0.0) continue;
        for (std::size_t k = 0; k <= n; ++k)
            out[k] += p * binomial_pmf(unsigned(n), unsigned(k), eta);
    }
    return Pnd(std::move(out));
}

JointPnd apply_loss_joint(const JointPnd& input, double eta_s, double eta_i) {
    if (!(eta_s >= 0.0) || !(eta_s <= 1.0) || !(eta_i >= 0.0) || !(eta_i <= 1.0))
        throw std::domain_error("apply_loss_joint: efficiencies must lie in [0, 1]");
    std::size_t d = input.dim();
    std::vector<double> mid(d * d, 0.0);
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k <= n; ++k) {
            double b = binomial_pmf(unsigned(n), unsigned(k), eta_s);
            for (std::size_t j = 0; j < d; ++j) mid[k * d + j] += input.at(n, j) * b;
        }
    std::vector<double> out(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t m = 0; m <= j; ++m) {
            double b = binomial_pmf(unsigned(j), unsigned(m), eta_i);
            for (std::size_t n = 0; n < d; ++n) out[n * d + m] += mid[n * d + j] * b;
        }
    return JointPnd(input.trunc(), std::move(out));
}

Pnd marginal(const JointPnd& joint, Arm arm) {
    std::size_t d = joint.dim();
    std::vector<double> w(d, 0.0);
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k < d; ++k)
            w[arm == Arm::signal ? n : k] += joint.at(n, k);
    return Pnd(std::move(w));
}

SourceModelParams SourceModelParams::device_defaults() {
    SourceModelParams p;
    p.a = 0.63 / 2.2;
    p.b_s = 0.11 / 2.2;
    p.b_i = 0.10 / 2.2;
    return p.at_power(2.2);
}

SourceModelParams SourceModelParams::at_power(double power_mw) const {
    if (!(power_mw >= 0.0) || !std::isfinite(power_mw))
        throw std::domain_error("SourceModelParams::at_power: power must be non-negative");
    SourceModelParams p = *this;
    p.r = a * power_mw;
    p.n_th_s = b_s * power_mw;
    p.n_th_i = b_i * power_mw;
    return p;
}

JointPnd source_model_state(const SourceModelParams& params, std::size_t trunc) {
    if (!(params.r >= 0.0) || !(params.n_th_s >= 0.0) || !(params.n_th_i >= 0.0))
        throw std::domain_error("source_model_state: negative state parameter");
    return convolve_with_thermal(tms_joint_pnd(params.r, trunc), params.n_th_s,
                                 params.n_th_i);
}

} // namespace pndkit
