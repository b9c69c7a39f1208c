#include "pndkit/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "pndkit/forward.hpp"

namespace pndkit {

namespace {

double bhattacharyya(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::sqrt(p[i] * q[i]);
    return std::min(acc, 1.0);
}

std::vector<double> axis_grid(double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1);
    return g;
}

// Coordinate descent with step halving around a seed point. `score`
// must be higher-better; bounds are clamped per axis.
template <typename Score>
std::array<double, 3> refine3(std::array<double, 3> x,
                              const std::array<std::pair<double, double>, 3>& box,
                              double step0_frac, double tol, Score&& score) {
    std::array<double, 3> step;
    for (std::size_t a = 0; a < 3; ++a)
        step[a] = (box[a].second - box[a].first) * step0_frac;
    double best = score(x);
    while (*std::max_element(step.begin(), step.end()) > tol) {
        bool moved = false;
        for (std::size_t a = 0; a < 3; ++a) {
            for (double dir : {-1.0, 1.0}) {
                std::array<double, 3> y = x;
                y[a] = std::clamp(y[a] + dir * step[a], box[a].first, box[a].second);
                if (y[a] == x[a]) continue;
                double s = score(y);
                if (s > best) {
                    best = s;
                    x = y;
                    moved = true;
                }
            }
        }
        if (!moved)
            for (double& s : step) s *= 0.5;
    }
    return x;
}

} // namespace

double fidelity(const Pnd& p, const Pnd& q) {
    if (p.trunc() != q.trunc())
        throw std::invalid_argument("fidelity: truncations differ");
    return bhattacharyya(p.probs(), q.probs());
}

double fidelity(const JointPnd& p, const JointPnd& q) {
    if (p.trunc() != q.trunc())
        throw std::invalid_argument("fidelity: truncations differ");
    return bhattacharyya(p.probs(), q.probs());
}

Moments joint_moments(const JointPnd& joint) {
    std::size_t d = joint.dim();
    Moments m;
    double ss = 0.0, ii = 0.0, si = 0.0;
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t k = 0; k < d; ++k) {
            double p = joint.at(n, k);
            m.mean_s += double(n) * p;
            m.mean_i += double(k) * p;
            ss += double(n) * double(n) * p;
            ii += double(k) * double(k) * p;
            si += double(n) * double(k) * p;
        }
    m.var_s = ss - m.mean_s * m.mean_s;
    m.var_i = ii - m.mean_i * m.mean_i;
    m.cross = si;
    m.cov = si - m.mean_s * m.mean_i;
    return m;
}

NrfReport noise_reduction(const JointPnd& joint) {
    Moments m = joint_moments(joint);
    NrfReport r;
    r.v_diff = m.var_s + m.var_i - 2.0 * m.cov;
    r.n_tot = m.mean_s + m.mean_i;
    if (!(r.n_tot > 0.0))
        throw std::domain_error("noise_reduction: mean total photon number is zero");
    r.nrf = r.v_diff / r.n_tot;
    r.nrf_db = 10.0 * std::log10(r.nrf);
    return r;
}

double mandel_q(const Pnd& pnd) {
    double m = pnd.mean();
    if (!(m > 0.0)) throw std::domain_error("mandel_q: mean photon number is zero");
    return (pnd.variance() - m) / m;
}

SourceModelFit fit_source_model(const JointPnd& target, const FitBounds& bounds,
                                const GridConfig& grid) {
    if (grid.points_per_axis < 2)
        throw std::invalid_argument("fit_source_model: need at least two grid points");
    std::size_t trunc = target.trunc();
    auto score = [&](const std::array<double, 3>& x) {
        SourceModelParams p;
        p.r = x[0];
        p.n_th_s = x[1];
        p.n_th_i = x[2];
        return fidelity(source_model_state(p, trunc), target);
    };

    auto rg = axis_grid(bounds.r_lo, bounds.r_hi, grid.points_per_axis);
    auto sg = axis_grid(bounds.n_th_lo, bounds.n_th_hi, grid.points_per_axis);
    auto ig = axis_grid(bounds.n_th_lo, bounds.n_th_hi, grid.points_per_axis);
    std::array<double, 3> best{rg[0], sg[0], ig[0]};
    double best_score = -1.0;
    for (double r : rg)
        for (double s : sg)
            for (double i : ig) {
                double v = score({r, s, i});
                if (v > best_score) {
                    best_score = v;
                    best = {r, s, i};
                }
            }

    std::array<std::pair<double, double>, 3> box{
        std::pair{bounds.r_lo, bounds.r_hi},
        std::pair{bounds.n_th_lo, bounds.n_th_hi},
        std::pair{bounds.n_th_lo, bounds.n_th_hi}};
    double step0 = 1.0 / double(grid.points_per_axis - 1);
    best = refine3(best, box, step0, grid.refine_tol, score);

    SourceModelFit fit;
    fit.r = best[0];
    fit.n_th_s = best[1];
    fit.n_th_i = best[2];
    fit.fidelity = score(best);
    return fit;
}

PowerScalingFit fit_power_scaling(const std::vector<PowerPoint>& points, double eta,
                                  std::size_t trunc, const PowerFitBounds& bounds,
                                  const GridConfig& grid) {
    if (points.size() < 3)
        throw std::invalid_argument("fit_power_scaling: need at least three powers");
    for (const PowerPoint& pt : points)
        if (!(pt.power_mw > 0.0) || !(pt.p11 >= 0.0) || !(pt.p11 <= 1.0))
            throw std::invalid_argument("fit_power_scaling: point outside valid range");

    auto neg_rss = [&](const std::array<double, 3>& x) {
        SourceModelParams base;
        base.a = x[0];
        base.b_s = x[1];
        base.b_i = x[2];
        double rss = 0.0;
        for (const PowerPoint& pt : points) {
            JointPnd state = source_model_state(base.at_power(pt.power_mw), trunc);
            double resid = click_probs_joint(state, eta).p11 - pt.p11;
            rss += resid * resid;
        }
        return -rss;
    };

    std::size_t npts = std::max<std::size_t>(grid.points_per_axis / 2, 8);
    auto ag = axis_grid(bounds.a_lo, bounds.a_hi, npts);
    auto bg = axis_grid(bounds.b_lo, bounds.b_hi, npts);
    std::array<double, 3> best{ag[0], bg[0], bg[0]};
    double best_score = -std::numeric_limits<double>::infinity();
    for (double a : ag)
        for (double bs : bg)
            for (double bi : bg) {
                double v = neg_rss({a, bs, bi});
                if (v > best_score) {
                    best_score = v;
                    best = {a, bs, bi};
                }
            }

    std::array<std::pair<double, double>, 3> box{
        std::pair{bounds.a_lo, bounds.a_hi},
        std::pair{bounds.b_lo, bounds.b_hi},
        std::pair{bounds.b_lo, bounds.b_hi}};
    best = refine3(best, box, 1.0 / double(npts - 1), grid.refine_tol, neg_rss);

    PowerScalingFit fit;
    fit.a = best[0];
    fit.b_s = best[1];
    fit.b_i = best[2];
    fit.rss = -neg_rss(best);
    return fit;
}

double squeezing_db(double r) {
    if (!(r >= 0.0) || !std::isfinite(r))
        throw std::domain_error("squeezing_db: r must be finite and non-negative");
    return 20.0 * r * std::log10(std::exp(1.0));
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need matching vectors of size >= 2");
    double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: abscissae are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double resid = y[i] - fit.intercept - fit.slope * x[i];
        rss += resid * resid;
    }
    fit.slope_err = x.size() > 2
                        ? std::sqrt(rss / (n - 2.0) / sxx)
                        : std::numeric_limits<double>::quiet_NaN();
    return fit;
}

double escape_efficiency(double q_loaded, double q_intrinsic) {
    if (!(q_loaded > 0.0) || !(q_intrinsic > 0.0))
        throw std::domain_error("escape_efficiency: quality factors must be positive");
    if (q_loaded > q_intrinsic)
        throw std::domain_error("escape_efficiency: loaded Q cannot exceed intrinsic Q");
    return (q_intrinsic - q_loaded) / q_intrinsic;
}

} // namespace pndkit
