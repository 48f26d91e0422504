#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <map>
#include <utility>
#include <vector>

#include "oblique/base.hpp"

/// Quadrature building blocks: Gauss-Legendre panels, geometrically graded
/// panel decompositions (for endpoint singularities), and the smooth bump
/// kernel on the unit ball used by the regularized-distance machinery.

namespace oblique {

struct GaussRule {
    std::vector<double> nodes;    // on (-1, 1), symmetric
    std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre rule with n points, cached per order. Newton iteration on
/// the Legendre recurrence converges to machine precision from the Chebyshev
/// guess for every order allowed here.
inline const GaussRule& gauss_legendre(int n) {
    if (n < 1 || n > 4096) throw std::invalid_argument("gauss_legendre: order out of range");
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev-flavored initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.nodes[i] = x;
        r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

/// Integrate f over [a, b] with a single Gauss-Legendre panel.
inline double integrate_gauss(const std::function<double(double)>& f, double a, double b, int order = 8) {
    const GaussRule& g = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * f(mid + half * g.nodes[i]);
    return s * half;
}

/// Panels of [a, b] accumulating geometrically toward one endpoint. With
/// ratio 1/2 and L levels the finest panel has width (b-a)/2^L; the stub
/// touching the endpoint is kept as its own final panel.
inline std::vector<std::pair<double, double>> graded_panels(double a, double b, bool toward_b,
                                                            double ratio = 0.5, int levels = 40) {
    if (!(b > a) || !(ratio > 0.0 && ratio < 1.0) || levels < 1)
        throw std::invalid_argument("graded_panels: bad arguments");
    std::vector<std::pair<double, double>> out;
    double len = b - a;
    double cut = len;
    if (toward_b) {
        double lo = a;
        for (int k = 0; k < levels; ++k) {
            cut *= ratio;
            double hi = b - cut;
            out.emplace_back(lo, hi);
            lo = hi;
        }
        out.emplace_back(lo, b);
    } else {
        double hi = b;
        for (int k = 0; k < levels; ++k) {
            cut *= ratio;
            double lo = a + cut;
            out.emplace_back(lo, hi);
            hi = lo;
        }
        out.emplace_back(a, hi);
        std::reverse(out.begin(), out.end());
    }
    return out;
}

inline double integrate_panels(const std::function<double(double)>& f,
                               const std::vector<std::pair<double, double>>& panels, int order = 8) {
    double s = 0.0;
    for (const auto& [a, b] : panels) s += integrate_gauss(f, a, b, order);
    return s;
}

/// Smooth bump kernel phi(w) = c * exp(-1/(1-|w|^2)) on the unit ball with a
/// fixed quadrature rule baked in. The discrete mass is renormalized to be
/// exactly 1, and the node set is symmetric under w -> -w per axis, so all
/// discrete odd moments vanish; affine inputs are then reproduced exactly.
///
/// Node k carries:
///   mass[k]   ~ phi(w_k) * cellvol * c        (sum = 1)
///   dmass[k]  ~ Dphi(w_k) * cellvol * c       (per-component sum = 0)
/// so Σ f(w_k) mass[k] discretizes ∫ f φ and Σ f(w_k) dmass[k][j] discretizes
/// ∫ f D_jφ.
template <int D>
struct MollifierKernel {
    std::vector<Vec<D>> nodes;
    std::vector<double> mass;
    std::vector<Vec<D>> dmass;
    int nodes_per_axis = 0;

    size_t size() const { return nodes.size(); }

    /// Tensor midpoint rule masked to the ball (the production rule).
    static MollifierKernel make(int per_axis = 33) { return build(per_axis, false); }

    /// Tensor Gauss-Legendre masked to the ball; a structurally different
    /// rule reserved for oracle cross-checks.
    static MollifierKernel make_gauss(int per_axis) { return build(per_axis, true); }

    double mass_total() const {
        double s = 0.0;
        for (double m : mass) s += m;
        return s;
    }

    Vec<D> first_moment() const {
        Vec<D> s{};
        for (size_t k = 0; k < nodes.size(); ++k)
            for (int i = 0; i < D; ++i) s[i] += nodes[k][i] * mass[k];
        return s;
    }

  private:
    static MollifierKernel build(int per_axis, bool gauss) {
        if (per_axis < 3) throw std::invalid_argument("MollifierKernel: per_axis too small");
        MollifierKernel k;
        k.nodes_per_axis = per_axis;

        std::vector<double> x1(per_axis), w1(per_axis);
        if (gauss) {
            const GaussRule& g = gauss_legendre(per_axis);
            x1.assign(g.nodes.begin(), g.nodes.end());
            w1.assign(g.weights.begin(), g.weights.end());
        } else {
            const double h = 2.0 / per_axis;
            for (int i = 0; i < per_axis; ++i) {
                x1[i] = -1.0 + (i + 0.5) * h;
                w1[i] = h;
            }
        }
        const int npts = x1.size();

        std::array<int, D> idx{};
        double raw_total = 0.0;
        while (true) {
            Vec<D> w{};
            double vol = 1.0;
            for (int i = 0; i < D; ++i) {
                w[i] = x1[idx[i]];
                vol *= w1[idx[i]];
            }
            const double r2 = dot<D>(w, w);
            if (r2 < 1.0 - 1e-13) {
                const double q = 1.0 - r2;
                const double phi = std::exp(-1.0 / q);
                // Nodes in the outermost shell underflow phi to zero; they
                // contribute nothing and are dropped to keep all masses > 0.
                if (phi >= 1e-290) {
                    k.nodes.push_back(w);
                    k.mass.push_back(phi * vol);
                    // Dphi = phi * (-2 w / q^2)
                    k.dmass.push_back(scal<D>(phi * vol * (-2.0 / (q * q)), w));
                    raw_total += phi * vol;
                }
            }
            int c = 0;
            while (c < D && ++idx[c] == npts) idx[c++] = 0;
            if (c == D) break;
        }
        const double cnorm = 1.0 / raw_total;
        for (auto& m : k.mass) m *= cnorm;
        for (auto& dm : k.dmass) dm = scal<D>(cnorm, dm);
        return k;
    }
};

}  // namespace oblique
