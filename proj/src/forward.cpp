#include "pndkit/forward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace pndkit {

namespace {

void validate_eta_open_unit(double eta, const char* what) {
    if (!(eta > 0.0) || !(eta <= 1.0))
        throw std::invalid_argument(std::string(what) + ": eta must lie in (0, 1]");
}

double uniform01(std::mt19937_64& eng) {
    return double(eng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF walk outward from the mode. O(sigma) expected draws-free
// steps; bit-for-bit reproducible across platforms, unlike
// std::binomial_distribution.
std::uint64_t sample_binomial(std::uint64_t n, double p, std::mt19937_64& eng) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    const double u = uniform01(eng);
    const double nd = double(n);
    std::uint64_t mode = std::uint64_t(std::min(nd, std::floor((nd + 1.0) * p)));
    double lp = std::lgamma(nd + 1.0) - std::lgamma(double(mode) + 1.0) -
                std::lgamma(nd - double(mode) + 1.0) +
                double(mode) * std::log(p) + (nd - double(mode)) * std::log1p(-p);
    const double ratio = p / (1.0 - p);

    std::uint64_t lo = mode, hi = mode;
    double pmf_lo = std::exp(lp), pmf_hi = pmf_lo;
    double cum = pmf_lo;
    std::uint64_t last = mode;
    while (cum < u) {
        double down = lo > 0 ? pmf_lo * (double(lo) / (nd - double(lo) + 1.0)) / ratio
                             : -1.0;
        double up = hi < n ? pmf_hi * ((nd - double(hi)) / (double(hi) + 1.0)) * ratio
                           : -1.0;
        if (down < 0.0 && up < 0.0) break; // support exhausted; rounding residue
        if (down >= up) {
            --lo;
            pmf_lo = down;
            cum += down;
            last = lo;
        } else {
            ++hi;
            pmf_hi = up;
            cum += up;
            last = hi;
        }
    }
    return last;
}

std::array<std::uint64_t, 4> sample_multinomial4(std::uint64_t trials,
                                                 const std::array<double, 4>& p,
                                                 std::mt19937_64& eng) {
    std::array<std::uint64_t, 4> c{0, 0, 0, 0};
    std::uint64_t rem = trials;
    double mass = 1.0;
    for (std::size_t j = 0; j < 3; ++j) {
        if (rem == 0) break;
        double q = mass > 0.0 ? std::clamp(p[j] / mass, 0.0, 1.0) : 0.0;
        c[j] = sample_binomial(rem, q, eng);
        rem -= c[j];
        mass -= p[j];
    }
    c[3] = rem;
    return c;
}

} // namespace

EfficiencyLadder::EfficiencyLadder(std::vector<double> etas) : etas_(std::move(etas)) {
    if (etas_.size() < 2)
        throw std::invalid_argument("EfficiencyLadder: need at least two settings");
    for (double e : etas_) validate_eta_open_unit(e, "EfficiencyLadder");
}

EfficiencyLadder EfficiencyLadder::uniform(double lo, double hi, std::size_t count) {
    if (count < 2) throw std::invalid_argument("EfficiencyLadder::uniform: count < 2");
    if (!(lo < hi)) throw std::invalid_argument("EfficiencyLadder::uniform: lo must be < hi");
    std::vector<double> e(count);
    for (std::size_t i = 0; i < count; ++i)
        e[i] = lo + (hi - lo) * double(i) / double(count - 1);
    return EfficiencyLadder(std::move(e));
}

EfficiencyLadder EfficiencyLadder::scaled(double factor) const {
    if (!(factor > 0.0) || !(factor <= 1.0))
        throw std::invalid_argument("EfficiencyLadder::scaled: factor must lie in (0, 1]");
    std::vector<double> e = etas_;
    for (double& x : e) x *= factor;
    return EfficiencyLadder(std::move(e));
}

void ClickTable::validate() const {
    if (rows.empty()) throw std::invalid_argument("ClickTable: no rows");
    for (const ClickRow& r : rows) {
        validate_eta_open_unit(r.eta, "ClickTable");
        if (r.trials == 0) throw std::invalid_argument("ClickTable: row with zero trials");
        if (r.c00 + r.c01 + r.c10 + r.c11 != r.trials)
            throw std::invalid_argument("ClickTable: counts do not sum to trials");
    }
}

double p_off(const Pnd& pnd, double eta) {
    validate_eta_open_unit(eta, "p_off");
    double b = 1.0, acc = 0.0;
    for (std::size_t n = 0; n < pnd.dim(); ++n) {
        acc += b * pnd[n];
        b *= 1.0 - eta;
    }
    return acc;
}

ClickProbs click_probs_joint(const JointPnd& joint, double eta_s, double eta_i) {
    validate_eta_open_unit(eta_s, "click_probs_joint");
    validate_eta_open_unit(eta_i, "click_probs_joint");
    std::size_t d = joint.dim();
    std::vector<double> bs(d), bi(d);
    bs[0] = bi[0] = 1.0;
    for (std::size_t n = 1; n < d; ++n) {
        bs[n] = bs[n - 1] * (1.0 - eta_s);
        bi[n] = bi[n - 1] * (1.0 - eta_i);
    }
    ClickProbs cp;
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k < d; ++k) {
            double p = joint.at(n, k);
            cp.p00 += p * bs[n] * bi[k];
            cp.p01 += p * bs[n] * (1.0 - bi[k]);
            cp.p10 += p * (1.0 - bs[n]) * bi[k];
        }
    cp.p11 = std::max(0.0, 1.0 - cp.p00 - cp.p01 - cp.p10);
    return cp;
}

Matrix b_matrix_single(const std::vector<double>& etas, std::size_t trunc) {
    Matrix m(etas.size(), trunc + 1);
    for (std::size_t mu = 0; mu < etas.size(); ++mu) {
        validate_eta_open_unit(etas[mu], "b_matrix_single");
        double b = 1.0;
        for (std::size_t n = 0; n <= trunc; ++n) {
            m(mu, n) = b;
            b *= 1.0 - etas[mu];
        }
    }
    return m;
}

Matrix b_matrix_joint(const std::vector<double>& etas, std::size_t trunc) {
    std::size_t M = etas.size(), d = trunc + 1;
    Matrix m(3 * M, d * d);
    for (std::size_t mu = 0; mu < M; ++mu) {
        validate_eta_open_unit(etas[mu], "b_matrix_joint");
        std::vector<double> b(d);
        b[0] = 1.0;
        for (std::size_t n = 1; n < d; ++n) b[n] = b[n - 1] * (1.0 - etas[mu]);
        for (std::size_t n = 0; n < d; ++n)
            for (std::size_t k = 0; k < d; ++k) {
                std::size_t col = n * d + k;
                m(mu, col) = b[n] * b[k];
                m(M + mu, col) = b[n] * (1.0 - b[k]);
                m(2 * M + mu, col) = (1.0 - b[n]) * b[k];
            }
    }
    return m;
}

ClickTable sample_click_table(const JointPnd& joint, const EfficiencyLadder& ladder,
                              std::uint64_t trials, std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("sample_click_table: trials must be >= 1");
    ClickTable table;
    table.rows.reserve(ladder.size());
    for (std::size_t mu = 0; mu < ladder.size(); ++mu) {
        ClickProbs cp = click_probs_joint(joint, ladder[mu]);
        std::mt19937_64 eng(detail::mix_seed(seed, mu));
        auto c = sample_multinomial4(trials, {cp.p00, cp.p01, cp.p10, cp.p11}, eng);
        table.rows.push_back({ladder[mu], trials, c[0], c[1], c[2], c[3]});
    }
    return table;
}

std::vector<std::pair<double, double>> off_frequencies(const ClickTable& table, Arm arm) {
    table.validate();
    std::vector<std::pair<double, double>> out;
    out.reserve(table.rows.size());
    for (const ClickRow& r : table.rows) {
        double off = double(r.c00 + (arm == Arm::signal ? r.c01 : r.c10));
        out.emplace_back(r.eta, off / double(r.trials));
    }
    return out;
}

} // namespace pndkit
