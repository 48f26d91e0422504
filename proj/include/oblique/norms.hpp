#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "oblique/grid.hpp"
#include "oblique/quadrature.hpp"

/// Norm and seminorm estimators: L_p / W^1_p / W^2_p on grids, the Gagliardo
/// fractional seminorm and Holder seminorm on boundary traces, BMO mean
/// oscillation, and the two Hardy-type inequality verifiers used by the
/// boundary-flattening estimates.

namespace oblique {

struct degenerate_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Named scalar results, each tagged with the resolution it was computed at.
struct NormReport {
    struct Entry {
        double value = 0.0;
        std::string grid;
    };
    std::map<std::string, Entry> entries;
    std::map<std::string, std::string> meta;

    void put(const std::string& name, double value, const std::string& grid) {
        entries[name] = Entry{value, grid};
    }
    double get(const std::string& name) const { return entries.at(name).value; }
};

template <int D>
double lp_norm(const GridFunction<D>& f, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
    const double vol = f.cellvol();
    double acc = 0.0;
    for (size_t i = 0; i < f.size(); ++i)
        if (f.inside(i)) acc += std::pow(std::abs(f.values[i]), p) * vol;
    return std::pow(acc, 1.0 / p);
}

template <int D>
struct SobolevNorms {
    double lp = 0.0;
    double grad_lp = 0.0;  ///< L_p of the Euclidean |Du|
    double hess_lp = 0.0;  ///< L_p of the Frobenius |D^2 u|
    double w1p = 0.0;
    double w2p = 0.0;
    std::array<GridFunction<D>, D> grad;
};

/// First and second differences everywhere on the mask (one-sided at edges),
/// assembled into the usual sum-of-powers Sobolev norms. The Hessian is the
/// symmetrized derivative of the gradient fields.
template <int D>
SobolevNorms<D> sobolev_norms(const GridFunction<D>& u, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("sobolev_norms: p must be >= 1");
    SobolevNorms<D> out;
    for (int a = 0; a < D; ++a) out.grad[a] = derivative_field<D>(u, a);
    std::array<std::array<GridFunction<D>, D>, D> hess;
    for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) {
            hess[a][b] = derivative_field<D>(out.grad[b], a);
            if (a != b) {
                GridFunction<D> other = derivative_field<D>(out.grad[a], b);
                for (size_t i = 0; i < other.size(); ++i)
                    hess[a][b].values[i] = 0.5 * (hess[a][b].values[i] + other.values[i]);
            }
        }

    const double vol = u.cellvol();
    double su = 0.0, sg = 0.0, sh = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        if (!u.inside(i)) continue;
        su += std::pow(std::abs(u.values[i]), p) * vol;
        double g2 = 0.0, h2 = 0.0;
        for (int a = 0; a < D; ++a) {
            g2 += sqr(out.grad[a].values[i]);
            for (int b = 0; b < D; ++b) {
                double v = b >= a ? hess[a][b].values[i] : hess[b][a].values[i];
                h2 += sqr(v);
            }
        }
        sg += std::pow(g2, 0.5 * p) * vol;
        sh += std::pow(h2, 0.5 * p) * vol;
    }
    out.lp = std::pow(su, 1.0 / p);
    out.grad_lp = std::pow(sg, 1.0 / p);
    out.hess_lp = std::pow(sh, 1.0 / p);
    out.w1p = std::pow(su + sg, 1.0 / p);
    out.w2p = std::pow(su + sg + sh, 1.0 / p);
    return out;
}

/// Gagliardo seminorm of order 1 - 1/p on a boundary trace:
///   ( sum_{|s_i - s_j| > h} |g_i - g_j|^p / |s_i - s_j|^p  w_i w_j )^{1/p}
/// The diagonal strip |s - t| <= h (h = the largest sample gap) is excluded
/// with no correction term; whether the quantity is finite shows up as
/// stability vs growth under refinement, which is exactly how it is used.
inline double gagliardo_seminorm(const BoundaryTrace& g, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("gagliardo_seminorm: need p > 1");
    const size_t n = g.s.size();
    if (n < 4) throw resolution_error("gagliardo_seminorm: need at least 4 samples");
    double hcut = 0.0;
    for (size_t i = 1; i < n; ++i) hcut = std::max(hcut, std::abs(g.s[i] - g.s[i - 1]));
    const double expo = p;  // 1 + p*(1 - 1/p)
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d = std::abs(g.s[i] - g.s[j]);
            if (d <= hcut) continue;
            acc += 2.0 * std::pow(std::abs(g.values[i] - g.values[j]), p) / std::pow(d, expo) *
                   g.weights[i] * g.weights[j];
        }
    return std::pow(acc, 1.0 / p);
}

inline double holder_seminorm(const BoundaryTrace& g, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("holder_seminorm: alpha in (0,1]");
    if (g.s.size() < 2) throw resolution_error("holder_seminorm: need >= 2 samples");
    double sup = 0.0;
    for (size_t i = 0; i < g.s.size(); ++i)
        for (size_t j = i + 1; j < g.s.size(); ++j) {
            double d = std::abs(g.s[i] - g.s[j]);
            if (d == 0.0) continue;
            sup = std::max(sup, std::abs(g.values[i] - g.values[j]) / std::pow(d, alpha));
        }
    return sup;
}

/// Mean oscillation sup over every inside node as center and dyadic radii
/// r0, r0/2, ... down to 2h: mean |a - mean(a)| over the discrete ball
/// B_r(x) intersected with the mask.
template <int D>
double bmo_seminorm(const GridFunction<D>& a, double r0) {
    double hmax = 0.0;
    for (int i = 0; i < D; ++i) hmax = std::max(hmax, a.h[i]);
    if (!(r0 >= 2.0 * hmax)) throw std::invalid_argument("bmo_seminorm: need r0 >= 2h");

    std::vector<double> radii;
    for (double r = r0; r >= 2.0 * hmax - 1e-14; r *= 0.5) radii.push_back(r);

    double sup = 0.0;
    for (double r : radii) {
        // Precompute the index offsets of the ball stencil once per radius.
        std::array<int, D> reach{};
        for (int i = 0; i < D; ++i) reach[i] = static_cast<int>(std::floor(r / a.h[i]));
        std::vector<std::array<int, D>> offsets;
        std::array<int, D> off{};
        for (int i = 0; i < D; ++i) off[i] = -reach[i];
        while (true) {
            double d2 = 0.0;
            for (int i = 0; i < D; ++i) d2 += sqr(off[i] * a.h[i]);
            if (d2 <= r * r) offsets.push_back(off);
            int c = 0;
            while (c < D && ++off[c] > reach[c]) {
                off[c] = -reach[c];
                ++c;
            }
            if (c == D) break;
        }

        for (size_t center = 0; center < a.size(); ++center) {
            if (!a.inside(center)) continue;
            std::array<int, D> ci{};
            for (int i = 0; i < D; ++i) ci[i] = a.axis_index(center, i);
            double sum = 0.0;
            int count = 0;
            for (const auto& o : offsets) {
                long long flat = 0;
                bool ok = true;
                for (int i = 0; i < D; ++i) {
                    int idx = ci[i] + o[i];
                    if (idx < 0 || idx >= a.n[i]) {
                        ok = false;
                        break;
                    }
                    flat += static_cast<long long>(idx) * static_cast<long long>(a.stride(i));
                }
                if (!ok || !a.inside(static_cast<size_t>(flat))) continue;
                sum += a.values[static_cast<size_t>(flat)];
                ++count;
            }
            if (count == 0) continue;
            const double mean = sum / count;
            double osc = 0.0;
            for (const auto& o : offsets) {
                long long flat = 0;
                bool ok = true;
                for (int i = 0; i < D; ++i) {
                    int idx = ci[i] + o[i];
                    if (idx < 0 || idx >= a.n[i]) {
                        ok = false;
                        break;
                    }
                    flat += static_cast<long long>(idx) * static_cast<long long>(a.stride(i));
                }
                if (!ok || !a.inside(static_cast<size_t>(flat))) continue;
                osc += std::abs(a.values[static_cast<size_t>(flat)] - mean);
            }
            sup = std::max(sup, osc / count);
        }
    }
    return sup;
}

/// Hardy averaging ratio || (1/x) \int_0^x h ||_p / ||h||_p for h sampled on
/// the midpoint grid of (0,1). The classical sharp constant is p/(p-1).
inline double hardy_check(const std::vector<double>& h, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("hardy_check: need p > 1");
    const size_t n = h.size();
    if (n < 2) throw resolution_error("hardy_check: need >= 2 samples");
    const double dt = 1.0 / n;
    double cum = 0.0, num = 0.0, den = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double t = (i + 0.5) * dt;
        const double upto = cum + 0.5 * h[i] * dt;  // integral to the node
        cum += h[i] * dt;
        num += std::pow(std::abs(upto / t), p) * dt;
        den += std::pow(std::abs(h[i]), p) * dt;
    }
    if (den == 0.0) throw degenerate_input_error("hardy_check: ||h||_p = 0");
    return std::pow(num / den, 1.0 / p);
}

/// Dual Hardy ratio || \int_0^x h(t)/(1-t) dt ||_p / ||h||_p with the
/// endpoint handled by panels graded toward t = 1 (ratio 1/2, 40 levels).
/// h must be evaluable on (0,1).
inline double dual_hardy_check(const std::function<double(double)>& h, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("dual_hardy_check: need p >= 1");
    const auto panels = graded_panels(0.0, 1.0, /*toward_b=*/true);
    auto integrand = [&h](double t) { return h(t) / (1.0 - t); };

    // Prefix integrals of h/(1-t) at panel starts.
    std::vector<double> prefix(panels.size() + 1, 0.0);
    for (size_t m = 0; m < panels.size(); ++m)
        prefix[m + 1] = prefix[m] + integrate_gauss(integrand, panels[m].first, panels[m].second);

    double num = 0.0, den = 0.0;
    for (size_t m = 0; m < panels.size(); ++m) {
        const auto [a, b] = panels[m];
        const GaussRule& gl = gauss_legendre(8);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t q = 0; q < gl.nodes.size(); ++q) {
            const double x = mid + half * gl.nodes[q];
            const double w = gl.weights[q] * half;
            const double F = prefix[m] + integrate_gauss(integrand, a, x);
            num += std::pow(std::abs(F), p) * w;
            den += std::pow(std::abs(h(x)), p) * w;
        }
    }
    if (den == 0.0) throw degenerate_input_error("dual_hardy_check: ||h||_p = 0");
    return std::pow(num, 1.0 / p) / std::pow(den, 1.0 / p);
}

inline double lp_trace_norm(const BoundaryTrace& g, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_trace_norm: p must be >= 1");
    double acc = 0.0;
    for (size_t i = 0; i < g.values.size(); ++i)
        acc += std::pow(std::abs(g.values[i]), p) * g.weights[i];
    return std::pow(acc, 1.0 / p);
}

}  // namespace oblique
