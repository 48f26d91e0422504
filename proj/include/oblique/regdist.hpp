#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "oblique/geometry.hpp"
#include "oblique/quadrature.hpp"

/// Regularized distance to the graph. rho0 is the fixed point of
///   rho = G(y, rho),   G(y, tau) = \int_{|w|<1} g(y - (tau/M) w) phi(w) dw
/// with g(y) = psi(y') - y^d and M = 2(4/delta^2 + 1)^{1/2}. G is a
/// contraction in tau with factor <= 1/2, which drives everything below:
/// convergence of the iteration, the 2/3 <= rho0/g <= 2 sandwich, and the
/// denominators in the derivative formulas.
///
/// Evaluation is pure: the field carries only immutable domain + kernel
/// data, so concurrent callers need no synchronization.

namespace oblique {

struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contraction_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct boundary_singularity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <int D>
struct RegDistField {
    GraphDomain<D> dom;
    MollifierKernel<D> kernel;
    double M = 0.0;
    double tol = 1e-12;  ///< fixed-point stop: |dtau| < tol * max(1, |g(y)|)
    int max_iters = 80;
};

template <int D>
RegDistField<D> make_regdist(GraphDomain<D> dom, int nodes_per_axis = 33, double tol = 1e-12) {
    RegDistField<D> f;
    f.dom = std::move(dom);
    f.kernel = MollifierKernel<D>::make(nodes_per_axis);
    f.M = 2.0 * std::sqrt(4.0 / sqr(f.dom.delta) + 1.0);
    f.tol = tol;
    return f;
}

/// G(y, tau): the graph gap g mollified at scale tau/M. G(y, 0) = g(y) up to
/// accumulation rounding, and for affine psi the symmetric node set makes G
/// independent of tau to machine precision.
template <int D>
double mollified_graph_G(const RegDistField<D>& f, const Vec<D>& y, double tau) {
    const double reach = norm<D - 1>(prime<D>(y)) + std::abs(tau) / f.M;
    if (reach > 4.0 * f.dom.R0)
        throw out_of_chart_error("mollified_graph_G: mollification stencil leaves the chart");
    double acc = 0.0;
    for (size_t k = 0; k < f.kernel.size(); ++k) {
        Vec<D> z = sub<D>(y, scal<D>(tau / f.M, f.kernel.nodes[k]));
        acc += f.kernel.mass[k] * f.dom.g(z);
    }
    return acc;
}

struct FixedPointTrace {
    std::vector<double> tau;  ///< iterates, starting from tau0 = g(y)
    double rho = 0.0;
    double residual = 0.0;  ///< |rho - G(y, rho)| after convergence
    int iters = 0;
};

template <int D>
FixedPointTrace fixed_point_trace(const RegDistField<D>& f, const Vec<D>& y) {
    FixedPointTrace tr;
    double tau = f.dom.g(y);
    const double stop = f.tol * std::max(1.0, std::abs(tau));
    tr.tau.push_back(tau);
    for (int k = 0; k < f.max_iters; ++k) {
        double next = mollified_graph_G<D>(f, y, tau);
        tr.tau.push_back(next);
        double dt = std::abs(next - tau);
        tau = next;
        if (dt < stop) {
            tr.rho = tau;
            tr.iters = k + 1;
            tr.residual = std::abs(tau - mollified_graph_G<D>(f, y, tau));
            return tr;
        }
    }
    throw convergence_error("regularized_distance: fixed point did not settle; kernel or M is off");
}

template <int D>
double regularized_distance(const RegDistField<D>& f, const Vec<D>& y) {
    return fixed_point_trace<D>(f, y).rho;
}

namespace detail {

/// d/dtau of G at (y, tau): the full chain rule through g, i.e.
/// -(1/M) sum_i D_i psi(y'-tau w'/M) w^i + w^d/M integrated against phi.
/// The w^d term integrates to zero but is kept for fidelity to the calculus.
template <int D>
double regdist_Gtau(const RegDistField<D>& f, const typename GraphDomain<D>::Prime& yp, double tau) {
    double Gt = 0.0;
    for (size_t k = 0; k < f.kernel.size(); ++k) {
        const Vec<D>& w = f.kernel.nodes[k];
        typename GraphDomain<D>::Prime sp;
        for (int i = 0; i < D - 1; ++i) sp[i] = yp[i] - (tau / f.M) * w[i];
        auto dp = f.dom.dpsi(sp);
        double s = 0.0;
        for (int i = 0; i < D - 1; ++i) s += dp[i] * w[i];
        Gt += f.kernel.mass[k] * (w[D - 1] - s) / f.M;
    }
    return Gt;
}

}  // namespace detail

/// D rho0 at a point whose rho0 is already known. Implicit differentiation of
/// rho = G(y, rho) gives D_i rho0 = G_i / (1 - G_tau) with G_d = -1 exactly;
/// |1 - G_tau| >= 1/2 by the contraction property.
template <int D>
Vec<D> grad_regdist_at(const RegDistField<D>& f, const Vec<D>& y, double rho) {
    const auto yp = prime<D>(y);
    Vec<D - 1> Gi{};
    double Gt = 0.0;
    for (size_t k = 0; k < f.kernel.size(); ++k) {
        const Vec<D>& w = f.kernel.nodes[k];
        typename GraphDomain<D>::Prime sp;
        for (int i = 0; i < D - 1; ++i) sp[i] = yp[i] - (rho / f.M) * w[i];
        auto dp = f.dom.dpsi(sp);
        double s = 0.0;
        for (int i = 0; i < D - 1; ++i) {
            Gi[i] += f.kernel.mass[k] * dp[i];
            s += dp[i] * w[i];
        }
        Gt += f.kernel.mass[k] * (w[D - 1] - s) / f.M;
    }
    const double denom = 1.0 - Gt;
    if (std::abs(denom) < 0.5 - f.tol)
        throw contraction_error("grad_regdist: |1 - G_tau| fell under 1/2");
    Vec<D> g{};
    for (int i = 0; i < D - 1; ++i) g[i] = Gi[i] / denom;
    g[D - 1] = -1.0 / denom;
    return g;
}

template <int D>
Vec<D> grad_regdist(const RegDistField<D>& f, const Vec<D>& y) {
    return grad_regdist_at<D>(f, y, regularized_distance<D>(f, y));
}

/// D^2 rho0. Every second derivative of G is pushed onto the kernel by parts,
/// so only D psi is ever evaluated. With q_i(w) = D_i psi(y' - rho w'/M) -
/// D_i psi(y') and tau = rho0(y):
///   A_ij     = (M/tau) \int q_i D_j phi
///   A_i,tau  = -(1/tau) \int q_i [ (d-1) phi + w'.D'phi ]
///   A_tt     = (1/(M tau)) \int (q.w') [ d phi + w'.D'phi ]
/// and the implicit relation solved for D_ij rho0 divides by (1 - G_tau)
/// once more. The q_i subtraction is valid because each bracketed kernel
/// factor integrates to zero, and it makes affine graphs return exactly 0.
template <int D>
Mat<D> hess_regdist_at(const RegDistField<D>& f, const Vec<D>& y, double rho, const Vec<D>& grad) {
    if (std::abs(rho) < 1e-10 * std::max(1.0, f.dom.R0))
        throw boundary_singularity_error("hess_regdist: rho0 vanishes here");
    const auto yp = prime<D>(y);
    const auto dp0 = f.dom.dpsi(yp);

    Mat<D - 1> Aij{};
    Vec<D - 1> Ait{};
    double Att = 0.0;
    for (size_t k = 0; k < f.kernel.size(); ++k) {
        const Vec<D>& w = f.kernel.nodes[k];
        typename GraphDomain<D>::Prime sp;
        for (int i = 0; i < D - 1; ++i) sp[i] = yp[i] - (rho / f.M) * w[i];
        auto dp = f.dom.dpsi(sp);

        double wdphi = 0.0;  // w'.D'phi weight at this node
        for (int j = 0; j < D - 1; ++j) wdphi += w[j] * f.kernel.dmass[k][j];
        const double div_prime = (D - 1) * f.kernel.mass[k] + wdphi;
        const double div_full = D * f.kernel.mass[k] + wdphi;

        double qw = 0.0;
        for (int i = 0; i < D - 1; ++i) {
            const double qi = dp[i] - dp0[i];
            for (int j = 0; j < D - 1; ++j) Aij[i][j] += qi * f.kernel.dmass[k][j];
            Ait[i] += qi * div_prime;
            qw += qi * w[i];
        }
        Att += qw * div_full;
    }
    for (int i = 0; i < D - 1; ++i) {
        for (int j = 0; j < D - 1; ++j) Aij[i][j] *= f.M / rho;
        Ait[i] *= -1.0 / rho;
    }
    Att *= 1.0 / (f.M * rho);

    const double denom = -1.0 / grad[D - 1];  // equals 1 - G_tau
    Mat<D> H{};
    for (int i = 0; i < D - 1; ++i) {
        for (int j = 0; j < D - 1; ++j) {
            const double sym = 0.5 * (Aij[i][j] + Aij[j][i]);
            H[i][j] = (sym + Ait[i] * grad[j] + Ait[j] * grad[i] + Att * grad[i] * grad[j]) / denom;
        }
        H[i][D - 1] = H[D - 1][i] =
            (Ait[i] * grad[D - 1] + Att * grad[i] * grad[D - 1]) / denom;
    }
    H[D - 1][D - 1] = Att * grad[D - 1] * grad[D - 1] / denom;
    return H;
}

template <int D>
Mat<D> hess_regdist(const RegDistField<D>& f, const Vec<D>& y) {
    double rho = regularized_distance<D>(f, y);
    return hess_regdist_at<D>(f, y, rho, grad_regdist_at<D>(f, y, rho));
}

}  // namespace oblique
