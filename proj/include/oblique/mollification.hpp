#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "oblique/base.hpp"
#include "oblique/geometry.hpp"
#include "oblique/grid.hpp"
#include "oblique/norms.hpp"
#include "oblique/regdist.hpp"

/// Boundary-adapted mollification: g is averaged over a ball whose radius
/// shrinks like the regularized distance, so the average collapses to the
/// raw value on the graph itself while smoothing at depth. The shift scale
/// M1 is large enough that the map y -> y - (rho0(y)/M1) w is a
/// diffeomorphism with Jacobian at least 1/2, which is what transfers L_p
/// bounds from the source region to the mollified field.

namespace oblique {

struct containment_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Working region conventions, for a field with radius R:
///   near patch  {|y'| < R,  0 < psi(y') - y^d < R}   where evaluations live
///   source patch {|y'| < 2R, 0 < psi(y') - y^d < 2R} where g must be defined
/// The shift reach rho0/M1 <= depth * delta/3 keeps every stencil point of a
/// near-patch evaluation strictly inside the source patch; mollify checks
/// that instead of assuming it.
template <int D>
struct MollifiedField {
    GraphDomain<D> dom;
    RegDistField<D> rho;
    double R = 0.0;
    double M1 = 0.0;
    std::function<double(const Vec<D>&)> g;
    std::function<Vec<D>(const Vec<D>&)> dg;  ///< may be empty if gradients are never asked for
};

/// Sup of |D rho0| sampled over the near patch, for the measured branch of
/// M1. The analytic Lipschitz bound is M, so the 3M/delta branch dominates
/// unless delta is close to 1 and the sample is inflated past M.
template <int D>
double sampled_grad_sup(const RegDistField<D>& f, double R, int nper = 15) {
    double sup = 0.0;
    std::array<int, D - 1> idx{};
    for (int i = 0; i < D - 1; ++i) idx[i] = 0;
    while (true) {
        Vec<D - 1> yp{};
        for (int i = 0; i < D - 1; ++i) yp[i] = -R + 2.0 * R * idx[i] / (nper - 1);
        const double top = f.dom.psi(yp);
        for (int j = 0; j < 10; ++j) {
            const double depth = R * (j + 0.5) / 10.0;
            Vec<D> y = unprime<D>(yp, top - depth);
            sup = std::max(sup, norm<D>(grad_regdist<D>(f, y)));
        }
        int c = 0;
        while (c < D - 1 && ++idx[c] >= nper) idx[c++] = 0;
        if (c == D - 1) break;
    }
    return sup;
}

template <int D>
MollifiedField<D> make_mollified(const GraphDomain<D>& dom, double R,
                                 std::function<double(const Vec<D>&)> g = {},
                                 std::function<Vec<D>(const Vec<D>&)> dg = {},
                                 int nodes_per_axis = 33) {
    if (!(R > 0.0) || R > dom.R0)
        throw std::invalid_argument("make_mollified: need 0 < R <= R0");
    MollifiedField<D> f;
    f.dom = dom;
    f.rho = make_regdist<D>(dom, nodes_per_axis);
    f.R = R;
    f.g = std::move(g);
    f.dg = std::move(dg);
    const double measured = 1.05 * sampled_grad_sup<D>(f.rho, R);
    f.M1 = std::max(3.0 * f.rho.M / dom.delta, 2.0 * measured);
    return f;
}

namespace detail {

/// Shifted stencil for one evaluation point: rho0, its gradient on demand,
/// and the points y - (rho0/M1) w for every kernel node, each verified to
/// lie in the source patch.
template <int D>
struct ShiftPlan {
    double rho0 = 0.0;
    Vec<D> grad{};
    std::vector<Vec<D>> z;
};

template <int D>
ShiftPlan<D> make_plan(const MollifiedField<D>& f, const Vec<D>& y, bool with_grad) {
    const double lateral = norm<D - 1>(prime<D>(y));
    const double tol = 1e-12 * std::max(1.0, f.dom.R0);
    if (lateral > f.R + tol)
        throw std::invalid_argument("mollify: evaluation point outside the near patch");
    if (f.dom.g(y) < -tol)
        throw std::invalid_argument("mollify: evaluation point outside the closed domain");

    ShiftPlan<D> plan;
    plan.rho0 = regularized_distance<D>(f.rho, y);
    if (with_grad) plan.grad = grad_regdist_at<D>(f.rho, y, plan.rho0);
    const double c = plan.rho0 / f.M1;
    plan.z.resize(f.rho.kernel.nodes.size());
    for (size_t k = 0; k < plan.z.size(); ++k) {
        const Vec<D> z = sub<D>(y, scal<D>(c, f.rho.kernel.nodes[k]));
        if (f.dom.g(z) < -tol || f.dom.g(z) > 2.0 * f.R + tol ||
            norm<D - 1>(prime<D>(z)) > 2.0 * f.R + tol)
            throw containment_error("mollify: shifted point left the source patch; M1 too small");
        plan.z[k] = z;
    }
    return plan;
}

}  // namespace detail

template <int D>
double mollify(const MollifiedField<D>& f, const Vec<D>& y) {
    const auto plan = detail::make_plan<D>(f, y, false);
    double acc = 0.0;
    for (size_t k = 0; k < plan.z.size(); ++k) acc += f.rho.kernel.mass[k] * f.g(plan.z[k]);
    return acc;
}

/// D g~(y) = int (I - D rho0 (x) w / M1) Dg(y - (rho0/M1) w) phi(w) dw:
/// the chain rule pushed through the shrinking-ball shift.
template <int D>
Vec<D> mollify_gradient(const MollifiedField<D>& f, const Vec<D>& y) {
    if (!f.dg) throw std::invalid_argument("mollify_gradient: no gradient source configured");
    const auto plan = detail::make_plan<D>(f, y, true);
    Vec<D> acc{};
    for (size_t k = 0; k < plan.z.size(); ++k) {
        const Vec<D> v = f.dg(plan.z[k]);
        const double wv = dot<D>(f.rho.kernel.nodes[k], v);
        for (int i = 0; i < D; ++i)
            acc[i] += f.rho.kernel.mass[k] * (v[i] - plan.grad[i] * wv / f.M1);
    }
    return acc;
}

/// Jacobian determinant of y -> y - (rho0(y)/M1) w, which is the rank-one
/// update formula 1 - (D rho0 . w)/M1. The M1 convention keeps it >= 1/2.
template <int D>
double shift_jacobian(const MollifiedField<D>& f, const Vec<D>& y, const Vec<D>& w) {
    return 1.0 - dot<D>(grad_regdist<D>(f.rho, y), w) / f.M1;
}

struct YoungReport {
    double p = 0.0;
    int trials = 0;
    unsigned seed = 0;
    double lp_ratio_max = 0.0;
    double grad_ratio_max = 0.0;
    int containment_failures = 0;
};

/// Property sweep for the averaging bounds: random trigonometric sources
/// (4 waves, integer frequencies <= 8, unit directions, amplitudes in
/// [-1,1]) are mollified on the near patch and their L_p norms compared
/// against the source patch. The proof's constant is 2^{1/p}, from the
/// Jacobian floor 1/2; ratios above that signal a broken shift.
inline YoungReport verify_young_bounds(const GraphDomain<2>& dom, double R, double p, int trials,
                                       unsigned seed, int inner_n = 25, int outer_n = 33,
                                       int kernel_n = 17) {
    MollifiedField<2> field = make_mollified<2>(dom, R, {}, {}, kernel_n);
    YoungReport rep;
    rep.p = p;
    rep.trials = trials;
    rep.seed = seed;

    double psi_lo = 0.0, psi_hi = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double s = -2.0 * R + 4.0 * R * i / 1000.0;
        const double v = dom.psi({s});
        psi_lo = i == 0 ? v : std::min(psi_lo, v);
        psi_hi = i == 0 ? v : std::max(psi_hi, v);
    }

    auto inner = GridFunction<2>::zeros({-R, psi_lo - R}, {R, psi_hi}, {inner_n, inner_n});
    inner.with_mask([&dom, R](const Vec<2>& q) {
        return std::abs(q[0]) < R && dom.g(q) > 0.0 && dom.g(q) < R;
    });
    auto outer = GridFunction<2>::zeros({-2.0 * R, psi_lo - 2.0 * R}, {2.0 * R, psi_hi},
                                        {outer_n, outer_n});
    outer.with_mask([&dom, R](const Vec<2>& q) {
        return std::abs(q[0]) < 2.0 * R && dom.g(q) > 0.0 && dom.g(q) < 2.0 * R;
    });

    // rho0 and the shifted stencils do not depend on g: plan once per node.
    std::vector<size_t> live;
    std::vector<detail::ShiftPlan<2>> plans;
    for (size_t i = 0; i < inner.size(); ++i) {
        if (!inner.inside(i)) continue;
        try {
            plans.push_back(detail::make_plan<2>(field, inner.point(i), true));
            live.push_back(i);
        } catch (const containment_error&) {
            ++rep.containment_failures;
        }
    }

    Rng rng(seed);
    auto inner_g = inner, inner_dg = inner, outer_g = outer, outer_dg = outer;
    for (int t = 0; t < trials; ++t) {
        struct Wave {
            double a, k, cx, cy, phase;
        };
        std::vector<Wave> waves(4);
        for (auto& w : waves) {
            const double chi = rng.uniform(0.0, 6.283185307179586);
            w = {rng.uniform(-1.0, 1.0), static_cast<double>(rng.uniform_int(1, 8)),
                 std::cos(chi), std::sin(chi), rng.uniform(0.0, 6.283185307179586)};
        }
        auto gfun = [&waves](const Vec<2>& q) {
            double s = 0.0;
            for (const auto& w : waves) s += w.a * std::cos(w.k * (w.cx * q[0] + w.cy * q[1]) + w.phase);
            return s;
        };
        auto dgfun = [&waves](const Vec<2>& q) {
            Vec<2> v{};
            for (const auto& w : waves) {
                const double s = -w.a * w.k * std::sin(w.k * (w.cx * q[0] + w.cy * q[1]) + w.phase);
                v[0] += s * w.cx;
                v[1] += s * w.cy;
            }
            return v;
        };

        for (size_t i = 0; i < outer.size(); ++i) {
            if (!outer.inside(i)) continue;
            outer_g.values[i] = gfun(outer.point(i));
            outer_dg.values[i] = norm<2>(dgfun(outer.point(i)));
        }
        for (size_t m = 0; m < live.size(); ++m) {
            const auto& plan = plans[m];
            double acc = 0.0;
            Vec<2> gacc{};
            for (size_t k = 0; k < plan.z.size(); ++k) {
                acc += field.rho.kernel.mass[k] * gfun(plan.z[k]);
                const Vec<2> v = dgfun(plan.z[k]);
                const double wv = dot<2>(field.rho.kernel.nodes[k], v);
                for (int j = 0; j < 2; ++j)
                    gacc[j] += field.rho.kernel.mass[k] * (v[j] - plan.grad[j] * wv / field.M1);
            }
            inner_g.values[live[m]] = acc;
            inner_dg.values[live[m]] = norm<2>(gacc);
        }

        const double den_g = lp_norm<2>(outer_g, p), den_dg = lp_norm<2>(outer_dg, p);
        if (den_g > 0.0)
            rep.lp_ratio_max = std::max(rep.lp_ratio_max, lp_norm<2>(inner_g, p) / den_g);
        if (den_dg > 0.0)
            rep.grad_ratio_max = std::max(rep.grad_ratio_max, lp_norm<2>(inner_dg, p) / den_dg);
    }
    return rep;
}

}  // namespace oblique
