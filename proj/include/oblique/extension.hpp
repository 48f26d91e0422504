#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "oblique/geometry.hpp"
#include "oblique/grid.hpp"
#include "oblique/mollification.hpp"
#include "oblique/norms.hpp"

/// Neumann-data extension on a cylindrical boundary patch: the datum g on
/// the graph is pushed to the interior fiber-constantly, cut off near the
/// cylinder floor, mollified at the regularized-distance scale, and
/// integrated along vertical fibers. The result v has normal derivative g
/// on the graph (the mollification collapses there) and its W^2_p size is
/// controlled by the fractional boundary norm of g; the measured quotient
/// is recorded, not assumed.

namespace oblique {

struct extension_failure_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Quintic ramp: 0 for tau <= 1/12, 1 for tau >= 1/3. C^2 at both knees.
inline double vertical_cutoff(double tau) {
    const double lo = 1.0 / 12.0, hi = 1.0 / 3.0;
    if (tau <= lo) return 0.0;
    if (tau >= hi) return 1.0;
    const double u = (tau - lo) / (hi - lo);
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

/// Lateral cutoff for boundary data: 1 on |s| <= 2R, 0 at |s| >= 3R,
/// quintic in between, so |d eta/ds| <= 15/(8R) < 3/R.
inline double boundary_cutoff(double s, double R) {
    const double a = std::abs(s);
    if (a <= 2.0 * R) return 1.0;
    if (a >= 3.0 * R) return 0.0;
    const double u = (a - 2.0 * R) / R;
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

inline BoundaryTrace localize_boundary_datum(const BoundaryTrace& g, double R) {
    BoundaryTrace out = g;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= boundary_cutoff(out.s[i], R);
    return out;
}

/// Piecewise-linear interpolant of a trace, clamped beyond the samples.
inline std::function<double(double)> trace_interpolant(const BoundaryTrace& tr) {
    if (tr.s.size() < 2) throw resolution_error("trace_interpolant: need >= 2 samples");
    auto s = tr.s;
    auto v = tr.values;
    return [s, v](double x) {
        if (x <= s.front()) return v.front();
        if (x >= s.back()) return v.back();
        size_t lo = 0, hi = s.size() - 1;
        while (hi - lo > 1) {
            const size_t mid = (lo + hi) / 2;
            (s[mid] <= x ? lo : hi) = mid;
        }
        const double t = (x - s[lo]) / (s[lo + 1] - s[lo]);
        return (1.0 - t) * v[lo] + t * v[lo + 1];
    };
}

/// Fiber-constant interior extension with the vertical cutoff: the value of
/// g over y' fills the whole fiber above the cutoff knee and dies out
/// toward the floor, so the extension is supported away from y^d = 0.
inline std::function<double(const Vec<2>&)> interior_extension_E(
    const CylNeighborhood<2>& cyl, std::function<double(double)> g) {
    auto psi = cyl.dom.psi;
    return [psi, g](const Vec<2>& y) {
        const double ps = psi(Vec<1>{y[0]});
        return g(y[0]) * vertical_cutoff(y[1] / ps);
    };
}

inline std::function<double(const Vec<2>&)> interior_extension_E(const CylNeighborhood<2>& cyl,
                                                                 const BoundaryTrace& g) {
    return interior_extension_E(cyl, trace_interpolant(g));
}

struct ExtensionOptions {
    double p = 2.0;
    int columns = 25;            ///< grid nodes across [-R, R]
    int rows = 101;              ///< grid nodes across [0, max psi]
    int kernel_n = 17;
    int trace_samples = 41;      ///< residual samples on the graph
    int boundary_samples = 181;  ///< samples for the Gamma_{3R} norms
    double residual_threshold = std::numeric_limits<double>::infinity();
};

struct ExtensionResult {
    GridFunction<2> v;
    std::vector<double> trace_s;
    std::vector<double> trace_residual;
    double residual_sup = 0.0;
    SobolevNorms<2> vnorms;
    double g_lp_boundary = 0.0;         ///< ||g||_{L_p} on Gamma_{3R}
    double g_gagliardo_boundary = 0.0;  ///< fractional seminorm on Gamma_{3R}
    double n_ext = 0.0;
    double R = 0.0;
    double p = 0.0;
};

/// v(y', y^d) = integral of the mollified extension from the floor to y^d.
/// The datum is eta-localized to Gamma_{3R} first so every mollification
/// stencil point sees a defined source. The measured constant compares
/// ||v||_{W^2_p} on the patch against the fractional-seminorm bundle of the
/// raw datum on Gamma_{3R}.
inline ExtensionResult extend_neumann(const CylNeighborhood<2>& cyl,
                                      const std::function<double(double)>& g,
                                      const ExtensionOptions& opt = {}) {
    if (!(cyl.R < cyl.delta * cyl.dom.R0 / 8.0))
        throw std::invalid_argument("extend_neumann: need R < delta*R0/8");
    if (!(opt.p > 1.0)) throw std::invalid_argument("extend_neumann: need p > 1");
    const double R = cyl.R;

    auto gloc = [g, R](double s) { return boundary_cutoff(s, R) * g(s); };
    auto E = interior_extension_E(cyl, gloc);

    double psi_hi = 0.0;
    for (int i = 0; i <= 1000; ++i)
        psi_hi = std::max(psi_hi, cyl.dom.psi(Vec<1>{-R + 2.0 * R * i / 1000.0}));
    const double field_R = 1.05 * psi_hi;
    auto field = make_mollified<2>(cyl.dom, field_R, E, {}, opt.kernel_n);

    ExtensionResult out;
    out.R = R;
    out.p = opt.p;
    out.v = GridFunction<2>::zeros({-R, 0.0}, {R, psi_hi}, {opt.columns, opt.rows});
    out.v.with_mask([&cyl](const Vec<2>& q) { return cyl.in_omega(q); });

    const double hrow = out.v.h[1];
    for (int i = 0; i < opt.columns; ++i) {
        const double s = out.v.origin[0] + i * out.v.h[0];
        const double top = cyl.dom.psi(Vec<1>{s});
        double acc = 0.0;
        double fa = mollify<2>(field, Vec<2>{s, 0.0});
        out.v.values[out.v.stride(0) * static_cast<size_t>(i)] = 0.0;
        for (int j = 1; j < opt.rows; ++j) {
            const double b = j * hrow;
            if (b >= top) break;
            const double fm = mollify<2>(field, Vec<2>{s, b - 0.5 * hrow});
            const double fb = mollify<2>(field, Vec<2>{s, b});
            acc += hrow / 6.0 * (fa + 4.0 * fm + fb);
            fa = fb;
            out.v.values[out.v.stride(0) * static_cast<size_t>(i) + static_cast<size_t>(j)] = acc;
        }
    }

    out.vnorms = sobolev_norms<2>(out.v, opt.p);

    auto tr = sample_trace(cyl.dom, -3.0 * R, 3.0 * R, opt.boundary_samples,
                           [&g](double s) { return g(s); });
    out.g_lp_boundary = lp_trace_norm(tr, opt.p);
    out.g_gagliardo_boundary = gagliardo_seminorm(tr, opt.p);
    const double denom =
        out.g_gagliardo_boundary + std::pow(R, -1.0 + 1.0 / opt.p) * out.g_lp_boundary;
    out.n_ext = denom > 0.0 ? out.vnorms.w2p / denom : 0.0;

    // One-sided difference of v across the last grid step under the graph:
    // (v(top) - v(top - h))/h is the Simpson value of the final cell over h.
    for (int k = 0; k < opt.trace_samples; ++k) {
        const double s = -R + 2.0 * R * k / (opt.trace_samples - 1);
        const double top = cyl.dom.psi(Vec<1>{s});
        const double extra =
            hrow / 6.0 *
            (mollify<2>(field, Vec<2>{s, top - hrow}) +
             4.0 * mollify<2>(field, Vec<2>{s, top - 0.5 * hrow}) + mollify<2>(field, Vec<2>{s, top}));
        const double res = std::abs(extra / hrow - gloc(s));
        out.trace_s.push_back(s);
        out.trace_residual.push_back(res);
        out.residual_sup = std::max(out.residual_sup, res);
    }
    if (out.residual_sup > opt.residual_threshold)
        throw extension_failure_error("extend_neumann: boundary trace residual " +
                                      std::to_string(out.residual_sup) + " above threshold");
    return out;
}

}  // namespace oblique
