#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "oblique/geometry.hpp"
#include "oblique/grid.hpp"
#include "oblique/norms.hpp"
#include "oblique/regdist.hpp"
#include "oblique/sparse.hpp"

/// Mapped-rectangle finite differences for oblique boundary problems on
/// graph bands (d = 2). The patch below the graph is flattened either by
/// the regularized distance, z = (y', rho0(y)) with the graph landing on
/// z^d = 0, or by the shear (y', y^d/psi) on smooth positive graphs with
/// the graph landing on the top edge. In the distance chart the map's
/// second derivatives enter as the drift-like term
///     a_ij D_ij rho0 * d(u~)/dz^d,
/// which is kept out of the transformed coefficients and absorbed by an
/// outer Picard iteration on the right-hand side, so its size relative to
/// the full Hessian can be measured.
///
/// Interior nodes carry a 9-point second-order stencil; graph nodes carry
/// a one-sided 3-point stencil along the transformed oblique direction
/// (entries interpolated on the two rows facing the interior); the
/// artificial edges of the rectangle get a Dirichlet closure. Probes keep
/// their data supported away from the closure so it cannot pollute the
/// measured ratios. Assembled systems are immutable; whole solves may run
/// concurrently.

namespace oblique {

struct flattening_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EllipticOperator {
    using Field = std::function<double(const Vec<2>&)>;
    Field a11, a12, a22;  ///< symmetric second-order coefficients
    Field a1, a2;         ///< drift
    Field a0;             ///< zero-order coefficient, <= 0 where enforced
    double nu = 1.0;      ///< claimed ellipticity constant, in (0, 1]
};

inline EllipticOperator laplacian_op() {
    EllipticOperator op;
    auto one = [](const Vec<2>&) { return 1.0; };
    auto zero = [](const Vec<2>&) { return 0.0; };
    op.a11 = one;
    op.a12 = zero;
    op.a22 = one;
    op.a1 = zero;
    op.a2 = zero;
    op.a0 = zero;
    op.nu = 1.0;
    return op;
}

namespace detail {

inline std::pair<double, double> eig_bounds_2x2(double a11, double a12, double a22) {
    const double mid = 0.5 * (a11 + a22);
    const double rad = std::sqrt(sqr(0.5 * (a11 - a22)) + sqr(a12));
    return {mid - rad, mid + rad};
}

/// Bilinear value of a rectangle grid at an arbitrary point, clamped to
/// the grid box. Values only; never differentiate the result.
inline double interp_bilinear(const GridFunction<2>& g, const Vec<2>& x) {
    double s[2];
    int i0[2];
    for (int a = 0; a < 2; ++a) {
        double t = (x[a] - g.origin[a]) / g.h[a];
        t = std::min(std::max(t, 0.0), static_cast<double>(g.n[a] - 1));
        i0[a] = std::min(static_cast<int>(t), g.n[a] - 2);
        s[a] = t - i0[a];
    }
    const size_t base = g.stride(0) * static_cast<size_t>(i0[0]) + static_cast<size_t>(i0[1]);
    const double v00 = g.values[base], v01 = g.values[base + 1];
    const double v10 = g.values[base + g.stride(0)], v11 = g.values[base + g.stride(0) + 1];
    return (1 - s[0]) * ((1 - s[1]) * v00 + s[1] * v01) + s[0] * ((1 - s[1]) * v10 + s[1] * v11);
}

}  // namespace detail

struct EllipticityReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    bool pass = false;
};

/// Eigenvalue bounds of the second-order coefficient matrix over sample
/// points, compared against [nu, 1/nu].
inline EllipticityReport check_ellipticity(const EllipticOperator& op,
                                           const std::vector<Vec<2>>& points) {
    if (points.empty()) throw std::invalid_argument("check_ellipticity: no sample points");
    EllipticityReport rep;
    rep.lambda_min = std::numeric_limits<double>::infinity();
    rep.lambda_max = -rep.lambda_min;
    for (const auto& x : points) {
        auto [lo, hi] = detail::eig_bounds_2x2(op.a11(x), op.a12(x), op.a22(x));
        rep.lambda_min = std::min(rep.lambda_min, lo);
        rep.lambda_max = std::max(rep.lambda_max, hi);
    }
    const double slack = 1e-9;
    rep.pass = rep.lambda_min >= op.nu - slack && rep.lambda_max <= 1.0 / op.nu + slack;
    return rep;
}

struct FlattenSpec {
    double R = 0.0;     ///< lateral half-width of the rectangle
    double H = 0.0;     ///< rectangle height in z (shear chart: forced to 1)
    int n1 = 49;        ///< lateral nodes
    int n2 = 33;        ///< vertical nodes
    int kernel_n = 17;  ///< regularized-distance kernel nodes per axis
    bool shear = false;
};

struct FlattenedProblem {
    FlattenSpec spec;
    GraphDomain<2> dom;
    RegDistField<2> rho;  ///< meaningful only for the distance chart
    int graph_row = 0;    ///< grid row of the graph edge
    int jdir = 1;         ///< +1 if interior rows have larger j than the graph

    GridFunction<2> yd;                  ///< y^d at nodes (z rectangle layout)
    GridFunction<2> q1, q2;              ///< D_y z^d at nodes
    GridFunction<2> h11, h12, h22;       ///< D^2_y z^d at nodes
    GridFunction<2> a11t, a12t, a22t;    ///< transformed second-order coefficients
    GridFunction<2> a1t, a2t, a0t;       ///< transformed drift + zero order
    GridFunction<2> csing;               ///< a_ij D_ij rho0 (zero on the shear chart)
    double lambda_min = 0.0, lambda_max = 0.0;  ///< measured ellipticity of the transform

    double z1(int i) const { return yd.origin[0] + yd.h[0] * i; }
    double z2(int j) const { return yd.origin[1] + yd.h[1] * j; }
    Vec<2> ypoint(int i, int j) const {
        return {z1(i), yd.values[yd.stride(0) * static_cast<size_t>(i) + static_cast<size_t>(j)]};
    }
};

namespace detail {

/// Depth y^d with rho0(z1, y^d) = target, found by bracketed Newton. The
/// shallow end of the bracket comes in from the previous grid row, which
/// also certifies monotonicity along the fiber as inversion proceeds.
inline double invert_fiber(const RegDistField<2>& rho, double z1, double target, double shallow,
                           double scale) {
    const double tol = 1e-11 * std::max(1.0, scale);
    double step = 0.5 * scale;
    double deep = shallow - step;
    for (int k = 0;; ++k) {
        if (regularized_distance<2>(rho, {z1, deep}) >= target) break;
        step *= 2.0;
        deep -= step;
        if (k >= 60) throw flattening_error("invert_fiber: rho0 never reaches the target depth");
    }
    double x = 0.5 * (deep + shallow);
    for (int k = 0; k < 80; ++k) {
        const double val = regularized_distance<2>(rho, {z1, x});
        const double r = val - target;
        if (std::abs(r) <= tol) return x;
        (r > 0.0 ? deep : shallow) = x;
        const double q = grad_regdist_at<2>(rho, {z1, x}, val)[1];  // < 0 along fibers
        double next = x - r / q;
        if (!(next > deep && next < shallow)) next = 0.5 * (deep + shallow);
        x = next;
    }
    throw flattening_error("invert_fiber: Newton stalled; rho0 may not be monotone here");
}

}  // namespace detail

/// Transform the operator onto the z rectangle. The distance chart keeps
/// the map's second-derivative term in `csing`; the shear chart folds it
/// into the drift (it is bounded there) and leaves `csing` zero.
inline FlattenedProblem flatten(const GraphDomain<2>& dom, const EllipticOperator& op,
                                const FlattenSpec& spec_in) {
    FlattenSpec spec = spec_in;
    if (!(spec.R > 0.0)) throw std::invalid_argument("flatten: R must be positive");
    if (spec.shear) spec.H = 1.0;
    if (!(spec.H > 0.0)) throw std::invalid_argument("flatten: H must be positive");
    if (spec.n1 < 7 || spec.n2 < 5) throw std::invalid_argument("flatten: grid too small");

    FlattenedProblem fp;
    fp.spec = spec;
    fp.dom = dom;
    fp.graph_row = spec.shear ? spec.n2 - 1 : 0;
    fp.jdir = spec.shear ? -1 : 1;

    auto mkgrid = [&spec]() {
        return GridFunction<2>::zeros({-spec.R, 0.0}, {spec.R, spec.H}, {spec.n1, spec.n2});
    };
    fp.yd = mkgrid();
    fp.q1 = mkgrid();
    fp.q2 = mkgrid();
    fp.h11 = mkgrid();
    fp.h12 = mkgrid();
    fp.h22 = mkgrid();
    fp.a11t = mkgrid();
    fp.a12t = mkgrid();
    fp.a22t = mkgrid();
    fp.a1t = mkgrid();
    fp.a2t = mkgrid();
    fp.a0t = mkgrid();
    fp.csing = mkgrid();

    const double h2 = fp.yd.h[1];
    fp.lambda_min = std::numeric_limits<double>::infinity();
    fp.lambda_max = -fp.lambda_min;

    auto fd_psi2 = [&dom](double s) {
        const double he = 1e-5 * std::max(1.0, std::abs(s));
        return (dom.dpsi(Vec<1>{s + he})[0] - dom.dpsi(Vec<1>{s - he})[0]) / (2.0 * he);
    };

    if (!spec.shear) fp.rho = make_regdist(dom, spec.kernel_n);

    for (int i = 0; i < spec.n1; ++i) {
        const double s = fp.z1(i);
        const double psi = dom.psi(Vec<1>{s});
        if (spec.shear && !(psi > 0.0))
            throw std::invalid_argument("flatten: shear chart needs a positive graph");
        double prev_yd = psi;
        for (int j = 0; j < spec.n2; ++j) {
            const size_t at = fp.yd.stride(0) * static_cast<size_t>(i) + static_cast<size_t>(j);
            double ydv, q1v, q2v, m11, m12, m22;
            if (spec.shear) {
                const double w = fp.z2(j);
                ydv = w * psi;
                const double dp = dom.dpsi(Vec<1>{s})[0];
                q1v = -ydv * dp / sqr(psi);
                q2v = 1.0 / psi;
                m11 = ydv * (2.0 * sqr(dp) - fd_psi2(s) * psi) / (sqr(psi) * psi);
                m12 = -dp / sqr(psi);
                m22 = 0.0;
            } else {
                const double target = fp.z2(j);
                ydv = j == 0 ? psi
                             : detail::invert_fiber(fp.rho, s, target, prev_yd, std::max(h2, spec.H));
                prev_yd = ydv;
                const Vec<2> y{s, ydv};
                const auto grad = grad_regdist_at<2>(fp.rho, y, target);
                q1v = grad[0];
                q2v = grad[1];
                if (j == 0) {
                    m11 = m12 = m22 = 0.0;  // filled from row 1 below
                } else {
                    const auto H = hess_regdist_at<2>(fp.rho, y, target, grad);
                    m11 = H[0][0];
                    m12 = H[0][1];
                    m22 = H[1][1];
                }
            }
            const Vec<2> y{s, ydv};
            const double A11 = op.a11(y), A12 = op.a12(y), A22 = op.a22(y);
            const double d1 = op.a1(y), d2 = op.a2(y);
            const double maph = A11 * m11 + 2.0 * A12 * m12 + A22 * m22;

            fp.yd.values[at] = ydv;
            fp.q1.values[at] = q1v;
            fp.q2.values[at] = q2v;
            fp.h11.values[at] = m11;
            fp.h12.values[at] = m12;
            fp.h22.values[at] = m22;
            fp.a11t.values[at] = A11;
            fp.a12t.values[at] = A11 * q1v + A12 * q2v;
            fp.a22t.values[at] = sqr(q1v) * A11 + 2.0 * q1v * q2v * A12 + sqr(q2v) * A22;
            fp.a1t.values[at] = d1;
            fp.a2t.values[at] = d1 * q1v + d2 * q2v + (spec.shear ? maph : 0.0);
            fp.a0t.values[at] = op.a0(y);
            fp.csing.values[at] = spec.shear ? 0.0 : maph;

            auto [lo, hi] =
                detail::eig_bounds_2x2(fp.a11t.values[at], fp.a12t.values[at], fp.a22t.values[at]);
            fp.lambda_min = std::min(fp.lambda_min, lo);
            fp.lambda_max = std::max(fp.lambda_max, hi);
        }
        if (!spec.shear) {
            // the boundary row cannot carry D^2 rho0 (it degenerates there);
            // give it the nearest interior sample so pullback interpolation
            // stays defined on the thinnest boundary layer
            const size_t row0 = fp.yd.stride(0) * static_cast<size_t>(i);
            for (auto* g : {&fp.h11, &fp.h12, &fp.h22, &fp.csing})
                g->values[row0] = g->values[row0 + 1];
        }
    }
    return fp;
}

struct ObliqueSolveOptions {
    FlattenSpec grid;
    SolveSettings linear;
    double picard_tol = 1e-8;  ///< relative W2_2 change that stops the outer loop
    int picard_max = 50;
    std::function<double(const Vec<2>&)> dirichlet;  ///< closure data in y; default 0
    bool enforce_surrogate = true;
};

struct ObliqueSolution {
    FlattenedProblem fp;
    GridFunction<2> u;  ///< on the z rectangle
    SolveDiagnostics linear;
    int picard_iters = 0;
    std::vector<double> picard_changes;
};

namespace detail {

struct AssembledOblique {
    CsrMatrix A;
    std::vector<double> rhs_fixed;    ///< oblique + Dirichlet rows
    std::vector<uint8_t> is_interior; ///< rows whose rhs is f~
};

/// One matrix for the whole Picard iteration: the singular term only ever
/// touches the right-hand side.
inline AssembledOblique assemble_oblique(const FlattenedProblem& fp, const ObliqueField<2>& bc,
                                         const std::function<double(const Vec<2>&)>& g,
                                         const std::function<double(const Vec<2>&)>& dirichlet) {
    const int n1 = fp.spec.n1, n2 = fp.spec.n2;
    const double h1 = fp.yd.h[0], h2 = fp.yd.h[1];
    const int N = n1 * n2;
    auto idx = [n2](int i, int j) { return i * n2 + j; };

    std::vector<Triplet> trip;
    trip.reserve(static_cast<size_t>(N) * 9);
    AssembledOblique out;
    out.rhs_fixed.assign(static_cast<size_t>(N), 0.0);
    out.is_interior.assign(static_cast<size_t>(N), 0);

    const int jfar = fp.graph_row == 0 ? n2 - 1 : 0;
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            const int P = idx(i, j);
            const size_t at = static_cast<size_t>(P);
            const bool side = i == 0 || i == n1 - 1;
            if (side || j == jfar) {
                trip.push_back({P, P, 1.0});
                out.rhs_fixed[at] = dirichlet(fp.ypoint(i, j));
                continue;
            }
            if (j == fp.graph_row) {
                const Vec<2> x = fp.ypoint(i, j);  // y^d = psi on the graph row
                const Vec<2> bv = bc.b(x);
                Vec<2> bt{bv[0], fp.q1.values[at] * bv[0] + fp.q2.values[at] * bv[1]};
                const double bn = norm<2>(bt);
                if (!(fp.jdir * bt[1] > 1e-12 * bn))
                    throw degenerate_field_error(
                        "assemble_oblique: transformed oblique direction grazes the graph");
                const Vec<2> hat = scal<2>(1.0 / bn, bt);
                const double tau = h2 / std::abs(hat[1]);
                // 3-point one-sided derivative along hat: (-3u(P) + 4u(Q1) - u(Q2)) / (2 tau);
                // the Q's sit on the first two interior-parallel rows and are
                // interpolated laterally to quadratic order, since their
                // weights carry a 1/tau that would otherwise cost an order
                trip.push_back({P, P, -3.0 * bn / (2.0 * tau) + bc.b0(x)});
                for (int m = 1; m <= 2; ++m) {
                    double zm = fp.z1(i) + m * tau * hat[0];
                    // clamp beside the Dirichlet columns; an O(h) direction
                    // perturbation confined to the outermost graph nodes
                    zm = std::min(std::max(zm, fp.yd.origin[0]), fp.yd.origin[0] + (n1 - 1) * h1);
                    const double t = (zm - fp.yd.origin[0]) / h1;
                    const int c = std::min(std::max(static_cast<int>(t + 0.5), 1), n1 - 2);
                    const double s = t - c;
                    const double w = m == 1 ? 4.0 * bn / (2.0 * tau) : -bn / (2.0 * tau);
                    const int jm = j + m * fp.jdir;
                    trip.push_back({P, idx(c - 1, jm), w * 0.5 * s * (s - 1.0)});
                    trip.push_back({P, idx(c, jm), w * (1.0 - s) * (1.0 + s)});
                    trip.push_back({P, idx(c + 1, jm), w * 0.5 * s * (s + 1.0)});
                }
                out.rhs_fixed[at] = g(x);
                continue;
            }
            const double c11 = fp.a11t.values[at] / sqr(h1);
            const double c22 = fp.a22t.values[at] / sqr(h2);
            const double c12 = fp.a12t.values[at] / (2.0 * h1 * h2);
            const double d1 = fp.a1t.values[at] / (2.0 * h1);
            const double d2 = fp.a2t.values[at] / (2.0 * h2);
            trip.push_back({P, P, -2.0 * c11 - 2.0 * c22 + fp.a0t.values[at]});
            trip.push_back({P, idx(i + 1, j), c11 + d1});
            trip.push_back({P, idx(i - 1, j), c11 - d1});
            trip.push_back({P, idx(i, j + 1), c22 + d2});
            trip.push_back({P, idx(i, j - 1), c22 - d2});
            trip.push_back({P, idx(i + 1, j + 1), c12});
            trip.push_back({P, idx(i - 1, j - 1), c12});
            trip.push_back({P, idx(i + 1, j - 1), -c12});
            trip.push_back({P, idx(i - 1, j + 1), -c12});
            // the pure second-order weights cancel on constants by
            // construction; keep an assembly-time guard on that identity
            const double csum = (-2.0 * c11 - 2.0 * c22) + 2.0 * c11 + 2.0 * c22;
            if (!(std::abs(csum) <= 1e-9 * (std::abs(c11) + std::abs(c22) + 1.0)))
                throw flattening_error("assemble_oblique: second-order stencil lost consistency");
            out.is_interior[at] = 1;
        }
    }
    out.A = CsrMatrix::from_triplets(N, std::move(trip));
    return out;
}

}  // namespace detail

/// Full oblique solve on the flattened rectangle. Preconditions follow the
/// well-posedness surrogate: ellipticity within [nu, 1/nu], obliqueness
/// b.n >= delta|b| against the graph normal (Dpsi, -1)/sqrt(..), a0 <= 0
/// and b0 <= 0 with not both identically zero. With the patch sitting
/// below the graph the admissible b enter the domain, which flips the sign
/// the zero-order boundary coefficient must have for a comparison
/// principle (1-D check: u'' = 0, -u'(c) + b0 u(c) = 0 loses uniqueness at
/// b0 c = 1 for b0 > 0, never for b0 <= 0).
inline ObliqueSolution solve_oblique(const GraphDomain<2>& dom, const EllipticOperator& op,
                                     const ObliqueField<2>& bc,
                                     const std::function<double(const Vec<2>&)>& g,
                                     const std::function<double(const Vec<2>&)>& f,
                                     const ObliqueSolveOptions& opt) {
    FlattenedProblem fp = flatten(dom, op, opt.grid);

    std::vector<Vec<2>> ypts;
    std::vector<Vec<1>> bpts;
    for (int i = 0; i < fp.spec.n1; i += 2)
        for (int j = 0; j < fp.spec.n2; j += 2) ypts.push_back(fp.ypoint(i, j));
    for (int k = 0; k <= 200; ++k) {
        const double s = -fp.spec.R + 2.0 * fp.spec.R * k / 200.0;
        if (!(dom.kink && dom.kink(Vec<1>{s}))) bpts.push_back(Vec<1>{s});
    }
    auto ell = check_ellipticity(op, ypts);
    if (!ell.pass)
        throw std::invalid_argument("solve_oblique: coefficient eigenvalues escape [nu, 1/nu]");
    auto obl = check_obliqueness<2>(dom, bc, bpts);
    if (!obl.pass)
        throw std::invalid_argument("solve_oblique: obliqueness margin under delta");
    if (opt.enforce_surrogate) {
        double a0max = 0.0, a0min = 0.0, b0max = 0.0, b0min = 0.0;
        for (const auto& y : ypts) {
            a0max = std::max(a0max, op.a0(y));
            a0min = std::min(a0min, op.a0(y));
        }
        for (const auto& sp : bpts) {
            const double v = bc.b0(boundary_point<2>(dom, sp));
            b0max = std::max(b0max, v);
            b0min = std::min(b0min, v);
        }
        if (a0max > 1e-12 || b0max > 1e-12)
            throw std::invalid_argument("solve_oblique: surrogate needs a0 <= 0 and b0 <= 0");
        if (a0min > -1e-12 && b0min > -1e-12)
            throw std::invalid_argument("solve_oblique: surrogate needs a0 or b0 nontrivial");
    }

    auto dirichlet = opt.dirichlet ? opt.dirichlet : [](const Vec<2>&) { return 0.0; };
    auto sys = detail::assemble_oblique(fp, bc, g, dirichlet);

    const int N = fp.spec.n1 * fp.spec.n2;
    std::vector<double> fbase(static_cast<size_t>(N), 0.0);
    double csing_sup = 0.0;
    for (int i = 0; i < fp.spec.n1; ++i)
        for (int j = 0; j < fp.spec.n2; ++j) {
            const size_t at = static_cast<size_t>(i * fp.spec.n2 + j);
            if (sys.is_interior[at]) {
                fbase[at] = f(fp.ypoint(i, j));
                csing_sup = std::max(csing_sup, std::abs(fp.csing.values[at]));
            }
        }

    const bool direct = opt.linear.method == SolveSettings::Method::banded ||
                        (opt.linear.method == SolveSettings::Method::automatic && N <= 129 * 129);
    BandedLU lu;
    if (direct) lu = BandedLU::factor(sys.A);

    ObliqueSolution sol;
    sol.fp = std::move(fp);
    sol.u = GridFunction<2>::zeros({-sol.fp.spec.R, 0.0}, {sol.fp.spec.R, sol.fp.spec.H},
                                   {sol.fp.spec.n1, sol.fp.spec.n2});

    std::vector<double> rhs(static_cast<size_t>(N));
    const int rounds = csing_sup > 0.0 ? opt.picard_max : 1;
    for (int k = 0; k < rounds; ++k) {
        auto du = derivative_field<2>(sol.u, 1);
        for (size_t at = 0; at < rhs.size(); ++at)
            rhs[at] = sys.is_interior[at]
                          ? fbase[at] - sol.fp.csing.values[at] * du.values[at]
                          : sys.rhs_fixed[at];
        std::vector<double> x;
        if (direct) {
            x = lu.solve(rhs);
            const double rr = sys.A.rel_residual(x, rhs);
            if (!(rr <= std::max(opt.linear.tol, 1e-9)))
                throw solver_error("solve_oblique: banded solve left relative residual " +
                                   std::to_string(rr));
            sol.linear = {"banded", 1, rr, {rr}};
        } else {
            x = bicgstab_jacobi(sys.A, rhs, opt.linear, &sol.linear);
        }
        GridFunction<2> diff = sol.u;
        for (size_t at = 0; at < x.size(); ++at) {
            diff.values[at] = x[at] - sol.u.values[at];
            sol.u.values[at] = x[at];
        }
        sol.picard_iters = k + 1;
        if (rounds == 1) break;
        const double change = sobolev_norms<2>(diff, 2.0).w2p;
        const double scale = std::max(1.0, sobolev_norms<2>(sol.u, 2.0).w2p);
        sol.picard_changes.push_back(change / scale);
        const auto& ch = sol.picard_changes;
        if (change <= opt.picard_tol * scale) break;
        // updates contract geometrically until they hit the linear solver's
        // h^-2-amplified roundoff; two successive non-halvings that far down
        // are that floor, not a stalled iteration
        if (ch.size() >= 4 && change <= 1e-5 * scale && ch.end()[-1] > 0.5 * ch.end()[-2] &&
            ch.end()[-2] > 0.5 * ch.end()[-3])
            break;
        if (ch.size() >= 3 && ch.end()[-1] > 1.2 * ch.end()[-2] && ch.end()[-2] > 1.2 * ch.end()[-3])
            throw solver_error("solve_oblique: smallness violated, Picard updates grew",
                               sol.picard_changes);
        if (k + 1 == rounds)
            throw solver_error("solve_oblique: Picard loop exhausted before the tolerance",
                               sol.picard_changes);
    }
    return sol;
}

/// Derivative pullbacks of a rectangle solution: y-gradient and y-Hessian
/// component grids on the z nodes, by the chain rule through the chart.
struct PullbackFields {
    GridFunction<2> du1, du2;
    GridFunction<2> H11, H12, H22;
    GridFunction<2> dz1, dz2;           ///< plain z-derivatives
    GridFunction<2> z11, z12, z22;      ///< plain z-Hessian
};

inline PullbackFields pullback_fields(const FlattenedProblem& fp, const GridFunction<2>& u) {
    PullbackFields pf;
    pf.dz1 = derivative_field<2>(u, 0);
    pf.dz2 = derivative_field<2>(u, 1);
    pf.z11 = derivative_field<2>(pf.dz1, 0);
    pf.z22 = derivative_field<2>(pf.dz2, 1);
    pf.z12 = derivative_field<2>(pf.dz1, 1);
    auto z21 = derivative_field<2>(pf.dz2, 0);
    for (size_t a = 0; a < pf.z12.values.size(); ++a)
        pf.z12.values[a] = 0.5 * (pf.z12.values[a] + z21.values[a]);
    pf.du1 = u;
    pf.du2 = u;
    pf.H11 = u;
    pf.H12 = u;
    pf.H22 = u;
    for (size_t a = 0; a < u.values.size(); ++a) {
        const double q1 = fp.q1.values[a], q2 = fp.q2.values[a];
        const double uz1 = pf.dz1.values[a], uz2 = pf.dz2.values[a];
        const double z11 = pf.z11.values[a], z12 = pf.z12.values[a], z22 = pf.z22.values[a];
        pf.du1.values[a] = uz1 + q1 * uz2;
        pf.du2.values[a] = q2 * uz2;
        pf.H11.values[a] = z11 + 2.0 * q1 * z12 + sqr(q1) * z22 + fp.h11.values[a] * uz2;
        pf.H12.values[a] = q2 * (z12 + q1 * z22) + fp.h12.values[a] * uz2;
        pf.H22.values[a] = sqr(q2) * z22 + fp.h22.values[a] * uz2;
    }
    return pf;
}

struct ModelProbeOptions {
    double p = 2.0;
    int n1 = 81, n2 = 49;    ///< rectangle resolution (solve patch radius 2r)
    int ny = 61;             ///< pullback grid nodes per axis
    int kernel_n = 17;
    SolveSettings linear;
    double side_value = 0.0; ///< Dirichlet closure constant
};

/// Model problem on the half-ball pair: solve with vanishing vertical
/// derivative on the graph, then measure
///   |D^2 u|_{p, B_{r/2}} / (r^{-2} |u|_{p, B_r} + |f|_{p, B_r})
/// together with the Hardy quotient |du~/dz^d / z^d|_p / |D^2_z u~|_p and
/// the singular-coupling quotient |csing du~/dz^d|_p / |D^2_z u~|_p on the
/// inner half of the rectangle.
inline NormReport probe_model_problem(const GraphDomain<2>& dom, const EllipticOperator& op,
                                      const std::function<double(const Vec<2>&)>& f, double r,
                                      const ModelProbeOptions& mo = {}) {
    if (!(r > 0.0)) throw std::invalid_argument("probe_model_problem: r must be positive");
    ObliqueSolveOptions so;
    so.grid.R = 2.0 * r;
    so.grid.H = 2.4 * r;
    so.grid.n1 = mo.n1;
    so.grid.n2 = mo.n2;
    so.grid.kernel_n = mo.kernel_n;
    so.linear = mo.linear;
    so.enforce_surrogate = false;  // Dirichlet closure pins this problem
    const double side = mo.side_value;
    so.dirichlet = [side](const Vec<2>&) { return side; };

    ObliqueField<2> bc;
    bc.b = [](const Vec<2>&) { return Vec<2>{0.0, -1.0}; };  // d u / d y^d = 0
    bc.b0 = [](const Vec<2>&) { return 0.0; };
    auto zero = [](const Vec<2>&) { return 0.0; };
    auto sol = solve_oblique(dom, op, bc, zero, f, so);
    const auto& fp = sol.fp;

    auto pf = pullback_fields(fp, sol.u);

    // pullback box around the boundary ball
    const Vec<2> x0{0.0, dom.psi(Vec<1>{0.0})};
    double psi_lo = x0[1], psi_hi = x0[1];
    for (int k = 0; k <= 500; ++k) {
        const double s = -1.05 * r + 2.1 * r * k / 500.0;
        const double v = dom.psi(Vec<1>{s});
        psi_lo = std::min(psi_lo, v);
        psi_hi = std::max(psi_hi, v);
    }
    auto ug = GridFunction<2>::zeros({-1.05 * r, psi_lo - 1.05 * r}, {1.05 * r, psi_hi},
                                     {mo.ny, mo.ny});
    auto fg = ug, hg = ug;
    std::vector<uint8_t> ball(ug.size(), 0), half(ug.size(), 0);
    for (size_t a = 0; a < ug.size(); ++a) {
        const Vec<2> y = ug.point(a);
        if (!dom.inside(y)) continue;
        const double rho0 = regularized_distance<2>(fp.rho, y);
        if (rho0 > 0.97 * fp.spec.H || std::abs(y[0]) > 0.97 * fp.spec.R) continue;
        const double d = norm<2>(sub<2>(y, x0));
        const Vec<2> z{y[0], rho0};
        ug.values[a] = detail::interp_bilinear(sol.u, z);
        fg.values[a] = f(y);
        const double h11 = detail::interp_bilinear(pf.H11, z);
        const double h12 = detail::interp_bilinear(pf.H12, z);
        const double h22 = detail::interp_bilinear(pf.H22, z);
        hg.values[a] = std::sqrt(sqr(h11) + 2.0 * sqr(h12) + sqr(h22));
        if (d < r) ball[a] = 1;
        if (d < 0.5 * r) half[a] = 1;
    }
    auto with = [](GridFunction<2> g, const std::vector<uint8_t>& m) {
        g.mask = m;
        return g;
    };
    const double u_r = lp_norm<2>(with(ug, ball), mo.p);
    const double f_r = lp_norm<2>(with(fg, ball), mo.p);
    const double hess_half = lp_norm<2>(with(hg, half), mo.p);
    const double den = u_r / sqr(r) + f_r;

    // Hardy and coupling quotients live on the inner half of the rectangle
    GridFunction<2> hardy_num = sol.u, coup_num = sol.u, zhess = sol.u;
    std::vector<uint8_t> inner(sol.u.size(), 0);
    for (size_t a = 0; a < sol.u.size(); ++a) {
        const int i = static_cast<int>(a / sol.u.stride(0));
        const int j = static_cast<int>(a % sol.u.stride(0));
        const double z1 = fp.z1(i), z2 = fp.z2(j);
        hardy_num.values[a] = j > 0 ? pf.dz2.values[a] / z2 : 0.0;
        coup_num.values[a] = fp.csing.values[a] * pf.dz2.values[a];
        zhess.values[a] =
            std::sqrt(sqr(pf.z11.values[a]) + 2.0 * sqr(pf.z12.values[a]) + sqr(pf.z22.values[a]));
        inner[a] = j >= 1 && std::abs(z1) <= r && z2 <= 0.9 * fp.spec.H ? 1 : 0;
    }
    const double zh = lp_norm<2>(with(zhess, inner), mo.p);
    const double hardy = zh > 0.0 ? lp_norm<2>(with(hardy_num, inner), mo.p) / zh : 0.0;
    const double coup = zh > 0.0 ? lp_norm<2>(with(coup_num, inner), mo.p) / zh : 0.0;

    NormReport rep;
    const std::string yg = std::to_string(mo.ny) + "^2 pullback";
    const std::string zg = std::to_string(mo.n1) + "x" + std::to_string(mo.n2) + " rectangle";
    rep.put("ratio", den > 0.0 ? hess_half / den : 0.0, yg);
    rep.put("hess_half", hess_half, yg);
    rep.put("u_ball", u_r, yg);
    rep.put("f_ball", f_r, yg);
    rep.put("hardy_ratio", hardy, zg);
    rep.put("coupling_ratio", coup, zg);
    rep.put("lambda_min", fp.lambda_min, zg);
    rep.put("lambda_max", fp.lambda_max, zg);
    rep.meta["p"] = std::to_string(mo.p);
    rep.meta["r"] = std::to_string(r);
    rep.meta["eps0"] = std::to_string(dom.eps0);
    rep.meta["picard_iters"] = std::to_string(sol.picard_iters);
    return rep;
}

struct MainProbeOptions {
    double R = 0.25;     ///< patch half-width
    int n1 = 65, n2 = 49;
    int ny = 61;
    int kernel_n = 17;
    SolveSettings linear;
    double eps0_warn = 0.3;
    double theta_warn = 0.1;   ///< BMO smallness threshold for the warning flag
    double holder_warn = 50.0; ///< Holder seminorm cap for b before warning
};

/// Full-estimate probe: solve, then form
///   N_emp = |u|_{W^2_p} / (|u|_p + |f|_p + |g|_{boundary bundle})
/// on the measurement patch, plus the boundary subtraction
///   h = g - (b - b(x0)).Du - b0 u
/// whose boundary norms show how much of g survives freezing b at the
/// patch center. Hypothesis violations set warning flags; the probe runs
/// either way so blow-up remains observable.
inline NormReport probe_main_estimate(const GraphDomain<2>& dom, const EllipticOperator& op,
                                      const ObliqueField<2>& bc,
                                      const std::function<double(const Vec<2>&)>& f,
                                      const std::function<double(const Vec<2>&)>& g, double p,
                                      const MainProbeOptions& mo = {}) {
    if (!(p > 1.0)) throw std::invalid_argument("probe_main_estimate: p must exceed 1");
    ObliqueSolveOptions so;
    so.grid.R = mo.R;
    so.grid.H = 1.2 * mo.R;
    so.grid.n1 = mo.n1;
    so.grid.n2 = mo.n2;
    so.grid.kernel_n = mo.kernel_n;
    so.linear = mo.linear;
    so.enforce_surrogate = false;
    auto sol = solve_oblique(dom, op, bc, g, f, so);
    const auto& fp = sol.fp;
    auto pf = pullback_fields(fp, sol.u);

    NormReport rep;
    // hypothesis checks; failures flag, never stop
    const double eps_meas = lipschitz_constant<2>(dom);
    std::vector<Vec<1>> bpts;
    for (int k = 0; k <= 180; ++k) {
        const double s = -mo.R + 2.0 * mo.R * k / 180.0;
        if (!(dom.kink && dom.kink(Vec<1>{s}))) bpts.push_back(Vec<1>{s});
    }
    const auto obl = check_obliqueness<2>(dom, bc, bpts);
    std::vector<Vec<2>> ypts;
    for (int i = 0; i < fp.spec.n1; i += 2)
        for (int j = 0; j < fp.spec.n2; j += 2) ypts.push_back(fp.ypoint(i, j));
    const auto ell = check_ellipticity(op, ypts);

    double bmo_max = 0.0;
    {
        const double box = 0.8 * mo.R;
        auto cg = GridFunction<2>::zeros({-box, dom.psi(Vec<1>{0.0}) - box},
                                         {box, dom.psi(Vec<1>{0.0})}, {33, 33});
        for (const auto* field : {&op.a11, &op.a12, &op.a22}) {
            auto were = cg;
            for (size_t a = 0; a < were.size(); ++a) were.values[a] = (*field)(were.point(a));
            bmo_max = std::max(bmo_max, bmo_seminorm<2>(were, box / 4.0));
        }
    }
    const double alpha = std::min(1.0, 1.0 - 1.0 / p + 0.05);
    BoundaryTrace b1t = sample_trace(dom, -mo.R, mo.R, 181,
                                        [&bc, &dom](double s) {
                                            return bc.b(boundary_point<2>(dom, Vec<1>{s}))[0];
                                        });
    BoundaryTrace b2t = sample_trace(dom, -mo.R, mo.R, 181,
                                        [&bc, &dom](double s) {
                                            return bc.b(boundary_point<2>(dom, Vec<1>{s}))[1];
                                        });
    const double holder_b =
        std::max(holder_seminorm(b1t, alpha), holder_seminorm(b2t, alpha));

    rep.meta["warn_eps0"] = eps_meas > mo.eps0_warn ? "1" : "0";
    rep.meta["warn_oblique"] = obl.pass ? "0" : "1";
    rep.meta["warn_ellipticity"] = ell.pass ? "0" : "1";
    rep.meta["warn_bmo"] = bmo_max > mo.theta_warn ? "1" : "0";
    rep.meta["warn_holder"] = holder_b > mo.holder_warn ? "1" : "0";
    rep.put("eps0_measured", eps_meas, "graph samples");
    rep.put("obliqueness_min", obl.min_ratio, "graph samples");
    rep.put("bmo_max", bmo_max, "33^2 patch");
    rep.put("holder_b", holder_b, "181 trace");

    // measurement patch: inner rectangle of the chart, pulled back to y
    double psi_lo = dom.psi(Vec<1>{0.0}), psi_hi = psi_lo;
    for (int k = 0; k <= 400; ++k) {
        const double s = -mo.R + 2.0 * mo.R * k / 400.0;
        const double v = dom.psi(Vec<1>{s});
        psi_lo = std::min(psi_lo, v);
        psi_hi = std::max(psi_hi, v);
    }
    auto ug = GridFunction<2>::zeros({-0.8 * mo.R, psi_lo - 0.9 * fp.spec.H},
                                     {0.8 * mo.R, psi_hi}, {mo.ny, mo.ny});
    auto fg = ug, gr = ug, hs = ug;
    std::vector<uint8_t> m(ug.size(), 0);
    for (size_t a = 0; a < ug.size(); ++a) {
        const Vec<2> y = ug.point(a);
        if (!dom.inside(y)) continue;
        const double rho0 = regularized_distance<2>(fp.rho, y);
        if (rho0 > 0.8 * fp.spec.H) continue;
        m[a] = 1;
        const Vec<2> z{y[0], rho0};
        ug.values[a] = detail::interp_bilinear(sol.u, z);
        fg.values[a] = f(y);
        const double d1 = detail::interp_bilinear(pf.du1, z);
        const double d2 = detail::interp_bilinear(pf.du2, z);
        gr.values[a] = std::hypot(d1, d2);
        const double h11 = detail::interp_bilinear(pf.H11, z);
        const double h12 = detail::interp_bilinear(pf.H12, z);
        const double h22 = detail::interp_bilinear(pf.H22, z);
        hs.values[a] = std::sqrt(sqr(h11) + 2.0 * sqr(h12) + sqr(h22));
    }
    ug.mask = fg.mask = gr.mask = hs.mask = m;
    const double u_lp = lp_norm<2>(ug, p);
    const double w2p = std::pow(std::pow(u_lp, p) + std::pow(lp_norm<2>(gr, p), p) +
                                    std::pow(lp_norm<2>(hs, p), p),
                                1.0 / p);
    const double f_lp = lp_norm<2>(fg, p);

    auto gtr = sample_trace(dom, -0.8 * mo.R, 0.8 * mo.R, 181,
                               [&g, &dom](double s) { return g(boundary_point<2>(dom, Vec<1>{s})); });
    const double g_bundle = gagliardo_seminorm(gtr, p) + lp_trace_norm(gtr, p);
    const double den = u_lp + f_lp + g_bundle;

    // subtraction step: freeze b at the patch center and see what is left
    const Vec<2> x0{0.0, dom.psi(Vec<1>{0.0})};
    const Vec<2> b_at0 = bc.b(x0);
    const int jg = fp.graph_row;
    std::vector<double> hvals(static_cast<size_t>(fp.spec.n1));
    for (int i = 0; i < fp.spec.n1; ++i) {
        const size_t at = fp.yd.stride(0) * static_cast<size_t>(i) + static_cast<size_t>(jg);
        const Vec<2> x = fp.ypoint(i, jg);
        const Vec<2> bx = bc.b(x);
        hvals[static_cast<size_t>(i)] = g(x) - (bx[0] - b_at0[0]) * pf.du1.values[at] -
                                        (bx[1] - b_at0[1]) * pf.du2.values[at] -
                                        bc.b0(x) * sol.u.values[at];
    }
    auto hfun = [&hvals, &fp](double s) {
        const double t = (s - fp.yd.origin[0]) / fp.yd.h[0];
        const int c = std::min(std::max(static_cast<int>(t), 0), fp.spec.n1 - 2);
        const double w = t - c;
        return (1.0 - w) * hvals[static_cast<size_t>(c)] + w * hvals[static_cast<size_t>(c) + 1];
    };
    auto htr = sample_trace(dom, -0.8 * mo.R, 0.8 * mo.R, 181, hfun);

    const std::string yg = std::to_string(mo.ny) + "^2 pullback";
    rep.put("n_emp", den > 0.0 ? w2p / den : 0.0, yg);
    rep.put("u_w2p", w2p, yg);
    rep.put("u_lp", u_lp, yg);
    rep.put("f_lp", f_lp, yg);
    rep.put("g_lp", lp_trace_norm(gtr, p), "181 trace");
    rep.put("g_gagliardo", gagliardo_seminorm(gtr, p), "181 trace");
    rep.put("h_lp", lp_trace_norm(htr, p), "181 trace");
    rep.put("h_gagliardo", gagliardo_seminorm(htr, p), "181 trace");
    rep.put("lambda_min", fp.lambda_min, "rectangle");
    rep.put("lambda_max", fp.lambda_max, "rectangle");
    rep.meta["p"] = std::to_string(p);
    rep.meta["picard_iters"] = std::to_string(sol.picard_iters);
    return rep;
}

}  // namespace oblique
