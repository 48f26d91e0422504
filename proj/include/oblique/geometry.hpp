#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oblique/base.hpp"

/// Graph domains {y^d < psi(y')} with small Lipschitz constant, oblique
/// boundary fields, rotated chart frames, and the cylindrical neighborhoods
/// the estimates are localized to. Conventions used throughout:
///   g(y)   = psi(y') - y^d        (positive inside the domain)
///   n(y')  = (Dpsi, -1)/sqrt(|Dpsi|^2+1)
/// and oblique fields satisfy b·n >= delta*|b| pointwise on the graph.

namespace oblique {

struct non_differentiable_error : std::domain_error {
    using std::domain_error::domain_error;
};
struct geometry_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_field_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct out_of_chart_error : std::domain_error {
    using std::domain_error::domain_error;
};

template <int D>
struct GraphDomain {
    static constexpr int dim = D;
    using Prime = Vec<D - 1>;

    std::function<double(const Prime&)> psi;
    /// Derivative of psi where it exists; at a kink the closure returns a
    /// one-sided limit (harmless under quadrature, which never weights a
    /// single point). Pointwise consumers must consult `kink` first.
    std::function<Prime(const Prime&)> dpsi;
    std::function<bool(const Prime&)> kink = [](const Prime&) { return false; };

    double eps0 = 0.0;   ///< claimed Lipschitz constant of psi
    double R0 = 1.0;     ///< chart radius on which psi is trusted
    double delta = 1.0;  ///< obliqueness margin, in (0, 1]

    double g(const Vec<D>& y) const {
        Prime yp{};
        for (int i = 0; i < D - 1; ++i) yp[i] = y[i];
        return psi(yp) - y[D - 1];
    }
    bool inside(const Vec<D>& y) const { return g(y) > 0.0; }
};

template <int D>
typename GraphDomain<D>::Prime prime(const Vec<D>& y) {
    typename GraphDomain<D>::Prime p{};
    for (int i = 0; i < D - 1; ++i) p[i] = y[i];
    return p;
}

template <int D>
Vec<D> unprime(const typename GraphDomain<D>::Prime& yp, double yd) {
    Vec<D> y{};
    for (int i = 0; i < D - 1; ++i) y[i] = yp[i];
    y[D - 1] = yd;
    return y;
}

template <int D>
Vec<D> boundary_point(const GraphDomain<D>& dom, const typename GraphDomain<D>::Prime& yp) {
    return unprime<D>(yp, dom.psi(yp));
}

/// Oblique boundary operator data: Bu = b0*u + b·Du on the graph.
template <int D>
struct ObliqueField {
    std::function<Vec<D>(const Vec<D>&)> b;
    std::function<double(const Vec<D>&)> b0 = [](const Vec<D>&) { return 0.0; };
    double holder_exponent = 1.0;
};

// ---------------------------------------------------------------------------
// Domain factories. All planar (d = 2) except the flat/sine d = 3 variants.
// ---------------------------------------------------------------------------

inline GraphDomain<2> flat_domain2(double height, double delta = 1.0, double R0 = 1.0) {
    GraphDomain<2> d;
    d.psi = [height](const Vec<1>&) { return height; };
    d.dpsi = [](const Vec<1>&) { return Vec<1>{0.0}; };
    d.eps0 = 0.0;
    d.R0 = R0;
    d.delta = delta;
    return d;
}

inline GraphDomain<2> tilted_domain2(double slope, double height, double delta = 1.0, double R0 = 1.0) {
    GraphDomain<2> d;
    d.psi = [=](const Vec<1>& s) { return height + slope * s[0]; };
    d.dpsi = [=](const Vec<1>&) { return Vec<1>{slope}; };
    d.eps0 = std::abs(slope);
    d.R0 = R0;
    d.delta = delta;
    return d;
}

/// Triangle wave of slope +-eps0 and the given period. Kinks sit at the
/// extrema; `phase` shifts them off any grid the caller plans to use.
inline GraphDomain<2> sawtooth_domain2(double eps0, double period, double height, double phase = 0.0,
                                       double delta = 1.0, double R0 = 1.0) {
    if (!(period > 0.0)) throw std::invalid_argument("sawtooth_domain2: period must be positive");
    auto wrap = [period, phase](double s) {
        double u = std::fmod(s - phase, period);
        if (u < 0) u += period;
        return u;  // in [0, period)
    };
    GraphDomain<2> d;
    d.psi = [=](const Vec<1>& s) {
        double u = wrap(s[0]);
        return height + eps0 * (std::abs(u - 0.5 * period) - 0.25 * period);
    };
    d.dpsi = [=](const Vec<1>& s) {
        double u = wrap(s[0]);
        return Vec<1>{u < 0.5 * period ? -eps0 : eps0};
    };
    d.kink = [=](const Vec<1>& s) {
        double u = wrap(s[0]);
        double m = std::min({u, std::abs(u - 0.5 * period), period - u});
        return m < 1e-12 * std::max(1.0, period);
    };
    d.eps0 = eps0;
    d.R0 = R0;
    d.delta = delta;
    return d;
}

inline GraphDomain<2> sine_domain2(double amplitude, double frequency, double height, double delta = 1.0,
                                   double R0 = 1.0) {
    GraphDomain<2> d;
    d.psi = [=](const Vec<1>& s) { return height + amplitude * std::sin(frequency * s[0]); };
    d.dpsi = [=](const Vec<1>& s) { return Vec<1>{amplitude * frequency * std::cos(frequency * s[0])}; };
    d.eps0 = std::abs(amplitude * frequency);
    d.R0 = R0;
    d.delta = delta;
    return d;
}

inline GraphDomain<3> flat_domain3(double height, double delta = 1.0, double R0 = 1.0) {
    GraphDomain<3> d;
    d.psi = [height](const Vec<2>&) { return height; };
    d.dpsi = [](const Vec<2>&) { return Vec<2>{0.0, 0.0}; };
    d.eps0 = 0.0;
    d.R0 = R0;
    d.delta = delta;
    return d;
}

inline GraphDomain<3> sine_domain3(double amplitude, double f1, double f2, double height, double delta = 1.0,
                                   double R0 = 1.0) {
    GraphDomain<3> d;
    d.psi = [=](const Vec<2>& s) { return height + amplitude * std::sin(f1 * s[0]) * std::cos(f2 * s[1]); };
    d.dpsi = [=](const Vec<2>& s) {
        return Vec<2>{amplitude * f1 * std::cos(f1 * s[0]) * std::cos(f2 * s[1]),
                      -amplitude * f2 * std::sin(f1 * s[0]) * std::sin(f2 * s[1])};
    };
    d.eps0 = std::abs(amplitude) * std::hypot(f1, f2);
    d.R0 = R0;
    d.delta = delta;
    return d;
}

/// Piecewise-linear graph through tabulated (s, psi) pairs; knots are kinks.
inline GraphDomain<2> table_domain2(std::vector<std::pair<double, double>> knots, double delta = 1.0,
                                    double R0 = 1.0) {
    if (knots.size() < 2) throw std::invalid_argument("table_domain2: need >= 2 knots");
    std::sort(knots.begin(), knots.end());
    double lip = 0.0;
    for (size_t i = 1; i < knots.size(); ++i) {
        double ds = knots[i].first - knots[i - 1].first;
        if (!(ds > 0)) throw std::invalid_argument("table_domain2: duplicate abscissa");
        lip = std::max(lip, std::abs(knots[i].second - knots[i - 1].second) / ds);
    }
    auto segment = [knots](double s) -> size_t {
        size_t lo = 0, hi = knots.size() - 1;
        if (s <= knots.front().first) return 0;
        if (s >= knots.back().first) return knots.size() - 2;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            (knots[mid].first <= s ? lo : hi) = mid;
        }
        return lo;
    };
    GraphDomain<2> d;
    d.psi = [knots, segment](const Vec<1>& sp) {
        size_t i = segment(sp[0]);
        double t = (sp[0] - knots[i].first) / (knots[i + 1].first - knots[i].first);
        return knots[i].second + t * (knots[i + 1].second - knots[i].second);
    };
    d.dpsi = [knots, segment](const Vec<1>& sp) {
        size_t i = segment(sp[0]);
        return Vec<1>{(knots[i + 1].second - knots[i].second) / (knots[i + 1].first - knots[i].first)};
    };
    d.kink = [knots](const Vec<1>& sp) {
        for (const auto& k : knots)
            if (std::abs(sp[0] - k.first) < 1e-12) return true;
        return false;
    };
    d.eps0 = lip;
    d.R0 = R0;
    d.delta = delta;
    return d;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Sampled Lipschitz constant of a 1-D graph over [lo, hi]: the sup of
/// adjacent difference quotients on a uniform grid. Under nested (dyadic)
/// refinement the value is monotone nondecreasing and converges to [psi]_1.
inline double lipschitz_constant(const std::function<double(const Vec<1>&)>& psi, double lo, double hi,
                                 int n = 10000) {
    if (n < 2 || !(hi > lo)) throw std::invalid_argument("lipschitz_constant: need >= 2 samples");
    double sup = 0.0;
    double prev = psi(Vec<1>{lo});
    const double h = (hi - lo) / (n - 1);
    for (int i = 1; i < n; ++i) {
        double cur = psi(Vec<1>{lo + i * h});
        sup = std::max(sup, std::abs(cur - prev) / h);
        prev = cur;
    }
    return sup;
}

/// 2-D variant over the box [lo, hi]^2, quotients along both axes.
inline double lipschitz_constant(const std::function<double(const Vec<2>&)>& psi, Vec<2> lo, Vec<2> hi,
                                 int n = 200) {
    if (n < 2 || !(hi[0] > lo[0]) || !(hi[1] > lo[1]))
        throw std::invalid_argument("lipschitz_constant: need >= 2 samples per axis");
    const double h0 = (hi[0] - lo[0]) / (n - 1), h1 = (hi[1] - lo[1]) / (n - 1);
    double sup = 0.0;
    std::vector<double> prev_row(n);
    for (int j = 0; j < n; ++j) prev_row[j] = psi(Vec<2>{lo[0], lo[1] + j * h1});
    for (int i = 0; i < n; ++i) {
        double prev = 0.0;
        for (int j = 0; j < n; ++j) {
            double cur = psi(Vec<2>{lo[0] + i * h0, lo[1] + j * h1});
            if (j > 0) sup = std::max(sup, std::abs(cur - prev) / h1);
            if (i > 0) sup = std::max(sup, std::abs(cur - prev_row[j]) / h0);
            prev = cur;
            prev_row[j] = cur;
        }
    }
    return sup;
}

template <int D>
double lipschitz_constant(const GraphDomain<D>& dom, int n = 0) {
    if constexpr (D == 2) {
        return lipschitz_constant(dom.psi, -dom.R0, dom.R0, n > 0 ? n : 10000);
    } else {
        return lipschitz_constant(dom.psi, Vec<2>{-dom.R0, -dom.R0}, Vec<2>{dom.R0, dom.R0},
                                  n > 0 ? n : 200);
    }
}

/// Unit normal (Dpsi, -1)/sqrt(|Dpsi|^2+1) at a differentiability point.
template <int D>
Vec<D> outward_normal(const GraphDomain<D>& dom, const typename GraphDomain<D>::Prime& yp) {
    if (dom.kink && dom.kink(yp))
        throw non_differentiable_error("outward_normal: psi is not differentiable here");
    auto dp = dom.dpsi(yp);
    Vec<D> n{};
    double s2 = 1.0;
    for (int i = 0; i < D - 1; ++i) {
        n[i] = dp[i];
        s2 += dp[i] * dp[i];
    }
    n[D - 1] = -1.0;
    return scal<D>(1.0 / std::sqrt(s2), n);
}

struct ObliquenessReport {
    double min_ratio = 0.0;
    bool pass = false;
};

/// Min over samples of (b·n)/|b|; kink samples are skipped (Dpsi exists a.e.).
template <int D>
ObliquenessReport check_obliqueness(const GraphDomain<D>& dom, const ObliqueField<D>& field,
                                    const std::vector<typename GraphDomain<D>::Prime>& samples) {
    ObliquenessReport rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& yp : samples) {
        if (dom.kink && dom.kink(yp)) continue;
        Vec<D> x = boundary_point<D>(dom, yp);
        Vec<D> bv = field.b(x);
        double bn = norm<D>(bv);
        if (bn < 1e-14) throw degenerate_field_error("check_obliqueness: |b| = 0 at a sample");
        Vec<D> n = outward_normal<D>(dom, yp);
        rep.min_ratio = std::min(rep.min_ratio, dot<D>(bv, n) / bn);
        any = true;
    }
    if (!any) throw std::invalid_argument("check_obliqueness: no differentiable samples");
    rep.pass = rep.min_ratio >= dom.delta;
    return rep;
}

/// Orthonormal frame with the last axis along a prescribed direction.
/// Rows of `axes` are the new basis vectors in old coordinates; new
/// coordinates of x are axes * (x - origin).
template <int D>
struct Frame {
    Mat<D> axes = identity<D>();
    Vec<D> origin{};

    Vec<D> to_local(const Vec<D>& x) const { return apply<D>(axes, sub<D>(x, origin)); }
    Vec<D> to_global(const Vec<D>& y) const { return add<D>(apply<D>(transpose<D>(axes), y), origin); }
};

namespace detail {

/// Orthonormal completion of a unit vector into a positively oriented basis
/// whose last row is `axis`.
template <int D>
Mat<D> complete_axis(const Vec<D>& axis) {
    Mat<D> m{};
    if constexpr (D == 2) {
        m[0] = Vec<2>{axis[1], -axis[0]};
        m[1] = axis;
    } else {
        Vec<3> seed = std::abs(axis[0]) < 0.9 ? Vec<3>{1, 0, 0} : Vec<3>{0, 1, 0};
        Vec<3> u = sub<3>(seed, scal<3>(dot<3>(seed, axis), axis));
        u = normalized<3>(u);
        Vec<3> v{axis[1] * u[2] - axis[2] * u[1], axis[2] * u[0] - axis[0] * u[2],
                 axis[0] * u[1] - axis[1] * u[0]};
        m[0] = u;
        m[1] = v;
        m[2] = axis;
    }
    return m;
}

}  // namespace detail

/// Rotated chart: a new GraphDomain whose vertical axis is the direction of
/// b(x0), with the graph recovered by root-finding along the new vertical
/// fibers. The chart is centered at x0 (new origin), so psi_new(0) = 0.
///
/// The sign of the new vertical is chosen so that the domain stays a
/// subgraph: if b(x0) has a negative last component (it does whenever b is
/// oblique under the (Dpsi, -1) normal convention), the axis is flipped.
template <int D>
GraphDomain<D> oblique_frame(const GraphDomain<D>& dom, const Vec<D>& x0, const Vec<D>& b_at_x0,
                             Frame<D>* frame_out = nullptr) {
    if (norm<D>(b_at_x0) < 1e-14) throw degenerate_field_error("oblique_frame: |b(x0)| = 0");
    if (std::abs(dom.g(x0)) > 1e-9 * std::max(1.0, dom.R0))
        throw std::invalid_argument("oblique_frame: x0 is not on the graph");

    Vec<D> axis = normalized<D>(b_at_x0);
    if (axis[D - 1] < 0.0) axis = scal<D>(-1.0, axis);

    // Obliqueness of b at x0 against the chart normal, |cos| >= delta.
    {
        Vec<D> n = outward_normal<D>(dom, prime<D>(x0));
        if (std::abs(dot<D>(axis, n)) < dom.delta - 1e-12)
            throw geometry_error("oblique_frame: field not oblique at x0");
    }

    Frame<D> fr;
    fr.axes = detail::complete_axis<D>(axis);
    fr.origin = x0;
    if (frame_out) *frame_out = fr;

    // psi_new(s') = the t solving  (old height) - psi_old(old horizontal) = 0
    // along the fiber x = origin + s'*u_tangent + t*axis. The map is strictly
    // monotone in t as long as |Dpsi| stays below the representability
    // threshold 2/delta, which the caller guarantees. Closures copy the
    // source domain so the returned chart owns everything it needs.
    const double t_span = 6.0 * dom.R0;
    const double R0_old = dom.R0;
    auto fiber_gap = [fr, dom](const typename GraphDomain<D>::Prime& sp, double t) {
        Vec<D> local = unprime<D>(sp, t);
        Vec<D> x = fr.to_global(local);
        return x[D - 1] - dom.psi(prime<D>(x));
    };

    auto solve_fiber = [fiber_gap, t_span, R0_old](const typename GraphDomain<D>::Prime& sp) {
        double lo = -t_span, hi = t_span;
        double flo = fiber_gap(sp, lo), fhi = fiber_gap(sp, hi);
        if (flo * fhi > 0.0) throw geometry_error("oblique_frame: failed to bracket the rotated graph");
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = fiber_gap(sp, mid);
            if (fm == 0.0) return mid;
            if ((fm > 0) == (fhi > 0)) {
                hi = mid;
                fhi = fm;
            } else {
                lo = mid;
                flo = fm;
            }
            if (hi - lo < 1e-12 * std::max(1.0, R0_old)) break;
        }
        // Secant polish inside the final bracket.
        double a = lo, b = hi, fa = flo, fb = fhi;
        for (int it = 0; it < 8 && std::abs(fb - fa) > 0; ++it) {
            double c = b - fb * (b - a) / (fb - fa);
            if (c <= lo || c >= hi) break;
            double fc = fiber_gap(sp, c);
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            if (std::abs(fc) < 1e-15 * std::max(1.0, R0_old)) break;
        }
        return b;
    };

    GraphDomain<D> out;
    out.psi = [solve_fiber](const typename GraphDomain<D>::Prime& sp) { return solve_fiber(sp); };
    out.dpsi = [solve_fiber, fr, dom](const typename GraphDomain<D>::Prime& sp) ->
        typename GraphDomain<D>::Prime {
            // Implicit differentiation of fiber_gap(s', t(s')) = 0.
            double t = solve_fiber(sp);
            Vec<D> x = fr.to_global(unprime<D>(sp, t));
            auto dp_old = dom.dpsi(prime<D>(x));
            typename GraphDomain<D>::Prime grad{};
            // dF/dcoord for a unit step along new basis vector u:
            //   u_D_old_component - Dpsi_old . u'_old
            auto dF = [&](const Vec<D>& u) {
                double v = u[D - 1];
                for (int i = 0; i < D - 1; ++i) v -= dp_old[i] * u[i];
                return v;
            };
            Mat<D> rows = fr.axes;
            double Ft = dF(rows[D - 1]);
            if (std::abs(Ft) < 1e-12) throw geometry_error("oblique_frame: degenerate fiber direction");
            for (int i = 0; i < D - 1; ++i) grad[i] = -dF(rows[i]) / Ft;
            return grad;
        };
    out.kink = [solve_fiber, fr, dom](const typename GraphDomain<D>::Prime& sp) {
        if (!dom.kink) return false;
        double t = solve_fiber(sp);
        Vec<D> x = fr.to_global(unprime<D>(sp, t));
        return dom.kink(prime<D>(x));
    };
    out.R0 = 0.5 * dom.R0;
    out.delta = dom.delta;
    out.eps0 = lipschitz_constant<D>(out, D == 2 ? 4001 : 101);
    return out;
}

/// Cylindrical neighborhood around a boundary chart, shifted so the center
/// sits at height 3R/delta:
///   Omega_R = {|y'| < R, 0 < y^d < psi(y')},  Gamma_R = {y^d = psi(y')},
///   Q_R     = {|y'| < R, 0 < y^d < 6R/delta}.
template <int D>
struct CylNeighborhood {
    GraphDomain<D> dom;  ///< shifted graph; psi in (R/delta, 5R/delta) on B'_R
    double R = 0.0;
    double delta = 1.0;

    bool in_omega(const Vec<D>& y, double shrink = 1.0) const {
        typename GraphDomain<D>::Prime yp = prime<D>(y);
        double rp = norm<D - 1>(yp);
        return rp < shrink * R && y[D - 1] > 0.0 && y[D - 1] < dom.psi(yp);
    }
    bool in_q(const Vec<D>& y) const {
        typename GraphDomain<D>::Prime yp = prime<D>(y);
        return norm<D - 1>(yp) < R && y[D - 1] > 0.0 && y[D - 1] < 6.0 * R / delta;
    }
};

/// Shift an oblique-frame chart so the center boundary point lands at
/// (0, 3R/delta) and verify the two-sided height bound on B'_R.
template <int D>
CylNeighborhood<D> cyl_neighborhood(const GraphDomain<D>& dom_in_frame, double R, int check_samples = 4096) {
    if (!(R > 0.0) || R >= dom_in_frame.delta * dom_in_frame.R0)
        throw std::invalid_argument("cyl_neighborhood: need 0 < R < delta*R0");
    const double shift = 3.0 * R / dom_in_frame.delta;

    CylNeighborhood<D> nb;
    nb.R = R;
    nb.delta = dom_in_frame.delta;
    nb.dom = dom_in_frame;
    auto base_psi = dom_in_frame.psi;
    nb.dom.psi = [base_psi, shift](const typename GraphDomain<D>::Prime& sp) { return base_psi(sp) + shift; };

    const double lo_bound = R / nb.delta, hi_bound = 5.0 * R / nb.delta;
    auto check = [&](const typename GraphDomain<D>::Prime& sp) {
        double v = nb.dom.psi(sp);
        if (!(v > lo_bound && v < hi_bound))
            throw geometry_error("cyl_neighborhood: height bound R/delta < psi < 5R/delta violated");
    };
    if constexpr (D == 2) {
        for (int i = 0; i <= check_samples; ++i)
            check(Vec<1>{-R + 2.0 * R * i / check_samples});
    } else {
        int n = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(check_samples))));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                Vec<2> sp{-R + 2.0 * R * i / n, -R + 2.0 * R * j / n};
                if (norm<2>(sp) < R) check(sp);
            }
    }
    return nb;
}

}  // namespace oblique
