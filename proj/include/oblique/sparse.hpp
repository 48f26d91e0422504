#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oblique/base.hpp"

/// Sparse linear algebra for the mapped finite-difference systems: CSR
/// assembly from triplets, a banded LU with partial pivoting for the
/// direct path, and BiCGStab with diagonal preconditioning for larger
/// grids. Systems are immutable once assembled; factorizations and solves
/// never mutate the matrix, so whole solves can run concurrently.

namespace oblique {

struct solver_error : std::runtime_error {
    std::vector<double> history;  ///< relative residuals per iteration
    solver_error(const std::string& what, std::vector<double> hist = {})
        : std::runtime_error(what), history(std::move(hist)) {}
};

struct Triplet {
    int r = 0;
    int c = 0;
    double v = 0.0;
};

struct CsrMatrix {
    int n = 0;
    std::vector<size_t> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    /// Duplicate (r, c) entries are summed.
    static CsrMatrix from_triplets(int n, std::vector<Triplet> t) {
        if (n <= 0) throw std::invalid_argument("CsrMatrix: n must be positive");
        for (const auto& e : t)
            if (e.r < 0 || e.r >= n || e.c < 0 || e.c >= n)
                throw std::invalid_argument("CsrMatrix: triplet index out of range");
        std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return a.r != b.r ? a.r < b.r : a.c < b.c;
        });
        CsrMatrix m;
        m.n = n;
        m.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
        for (size_t k = 0; k < t.size();) {
            size_t j = k;
            double s = 0.0;
            while (j < t.size() && t[j].r == t[k].r && t[j].c == t[k].c) s += t[j++].v;
            m.col.push_back(t[k].c);
            m.val.push_back(s);
            m.row_ptr[static_cast<size_t>(t[k].r) + 1]++;
            k = j;
        }
        for (int r = 0; r < n; ++r) m.row_ptr[static_cast<size_t>(r) + 1] += m.row_ptr[r];
        return m;
    }

    void matvec(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(static_cast<size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (size_t k = row_ptr[r]; k < row_ptr[static_cast<size_t>(r) + 1]; ++k)
                s += val[k] * x[static_cast<size_t>(col[k])];
            y[static_cast<size_t>(r)] = s;
        }
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<size_t>(n), 0.0);
        for (int r = 0; r < n; ++r)
            for (size_t k = row_ptr[r]; k < row_ptr[static_cast<size_t>(r) + 1]; ++k)
                if (col[k] == r) d[static_cast<size_t>(r)] = val[k];
        return d;
    }

    /// Largest |r - c| over stored entries, one number per side.
    std::pair<int, int> bandwidths() const {
        int kl = 0, ku = 0;
        for (int r = 0; r < n; ++r)
            for (size_t k = row_ptr[r]; k < row_ptr[static_cast<size_t>(r) + 1]; ++k) {
                kl = std::max(kl, r - col[k]);
                ku = std::max(ku, col[k] - r);
            }
        return {kl, ku};
    }

    double rel_residual(const std::vector<double>& x, const std::vector<double>& b) const {
        std::vector<double> ax;
        matvec(x, ax);
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < ax.size(); ++i) {
            num = std::max(num, std::abs(ax[i] - b[i]));
            den = std::max(den, std::abs(b[i]));
        }
        return den > 0.0 ? num / den : num;
    }
};

/// LAPACK-style band storage with row pivoting: entry (r, c) lives at
/// ab[kl + ku + r - c][c] and elimination may fill kl extra superdiagonals,
/// hence the 2*kl + ku + 1 leading dimension.
struct BandedLU {
    int n = 0, kl = 0, ku = 0;
    std::vector<double> ab;  ///< (2*kl + ku + 1) x n, column-major
    std::vector<int> piv;

    double& at(int shifted_row, int c) { return ab[static_cast<size_t>(c) * ldab() + shifted_row]; }
    size_t ldab() const { return static_cast<size_t>(2 * kl + ku + 1); }

    static BandedLU factor(const CsrMatrix& A) {
        BandedLU f;
        auto [kl, ku] = A.bandwidths();
        f.n = A.n;
        f.kl = kl;
        f.ku = ku;
        f.ab.assign(f.ldab() * static_cast<size_t>(f.n), 0.0);
        f.piv.assign(static_cast<size_t>(f.n), 0);
        const int kv = kl + ku;  // row offset of the diagonal in ab
        for (int r = 0; r < A.n; ++r)
            for (size_t k = A.row_ptr[r]; k < A.row_ptr[static_cast<size_t>(r) + 1]; ++k)
                f.at(kv + r - A.col[k], A.col[k]) = A.val[k];

        for (int j = 0; j < f.n; ++j) {
            const int km = std::min(kl, f.n - 1 - j);  // subdiagonal count
            int jp = 0;
            for (int t = 1; t <= km; ++t)
                if (std::abs(f.at(kv + t, j)) > std::abs(f.at(kv + jp, j))) jp = t;
            f.piv[static_cast<size_t>(j)] = j + jp;
            if (f.at(kv + jp, j) == 0.0)
                throw solver_error("BandedLU: exact zero pivot at column " + std::to_string(j));
            const int jend = std::min(f.n - 1, j + kv);
            if (jp != 0)
                for (int q = j; q <= jend; ++q)
                    std::swap(f.at(kv + j - q, q), f.at(kv + j + jp - q, q));
            for (int t = 1; t <= km; ++t) {
                const double mult = f.at(kv + t, j) / f.at(kv, j);
                f.at(kv + t, j) = mult;
                for (int q = j + 1; q <= jend; ++q)
                    f.at(kv + t + j - q, q) -= mult * f.at(kv + j - q, q);
            }
        }
        return f;
    }

    std::vector<double> solve(std::vector<double> b) const {
        if (static_cast<int>(b.size()) != n) throw std::invalid_argument("BandedLU: size mismatch");
        const int kv = kl + ku;
        auto entry = [this](int sr, int c) { return ab[static_cast<size_t>(c) * ldab() + sr]; };
        for (int j = 0; j < n - 1; ++j) {
            std::swap(b[static_cast<size_t>(j)], b[static_cast<size_t>(piv[static_cast<size_t>(j)])]);
            const int km = std::min(kl, n - 1 - j);
            for (int t = 1; t <= km; ++t)
                b[static_cast<size_t>(j + t)] -= entry(kv + t, j) * b[static_cast<size_t>(j)];
        }
        for (int j = n - 1; j >= 0; --j) {
            b[static_cast<size_t>(j)] /= entry(kv, j);
            const int top = std::max(0, j - kv);
            for (int r = top; r < j; ++r)
                b[static_cast<size_t>(r)] -= entry(kv + r - j, j) * b[static_cast<size_t>(j)];
        }
        return b;
    }
};

struct SolveSettings {
    enum class Method { automatic, banded, bicgstab };
    Method method = Method::automatic;
    double tol = 1e-10;  ///< relative residual target
    int max_iters = 0;   ///< 0: 10n
};

struct SolveDiagnostics {
    std::string method;
    int iters = 0;
    double rel_residual = 0.0;
    std::vector<double> history;
};

namespace detail {

inline double dot_v(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_v(const std::vector<double>& a) { return std::sqrt(dot_v(a, a)); }

inline std::string history_tail(const std::vector<double>& h) {
    std::ostringstream os;
    os << "residual history (last " << std::min<size_t>(8, h.size()) << " of " << h.size() << "):";
    for (size_t i = h.size() > 8 ? h.size() - 8 : 0; i < h.size(); ++i) os << " " << h[i];
    return os.str();
}

}  // namespace detail

/// van der Vorst's BiCGStab, preconditioned by the inverse diagonal. One
/// restart on breakdown, then failure with the residual history attached.
inline std::vector<double> bicgstab_jacobi(const CsrMatrix& A, const std::vector<double>& b,
                                           const SolveSettings& st, SolveDiagnostics* out = nullptr) {
    const size_t n = static_cast<size_t>(A.n);
    const int maxit = st.max_iters > 0 ? st.max_iters : 10 * A.n;
    std::vector<double> dinv = A.diagonal();
    for (auto& d : dinv) d = std::abs(d) > 1e-300 ? 1.0 / d : 1.0;

    std::vector<double> x(n, 0.0), r = b, rhat = b, p(n, 0.0), v(n, 0.0);
    std::vector<double> phat(n), shat(n), s(n), t(n), tmp(n);
    const double bnorm = std::max(detail::norm_v(b), 1e-300);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::vector<double> history;
    bool restarted = false;

    auto fail = [&](const char* why) {
        throw solver_error(std::string("bicgstab_jacobi: ") + why + "; " + detail::history_tail(history),
                           history);
    };

    for (int it = 1; it <= maxit; ++it) {
        const double rho1 = detail::dot_v(rhat, r);
        if (std::abs(rho1) < 1e-300) {
            if (restarted) fail("rho breakdown");
            rhat = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            restarted = true;
            continue;
        }
        const double beta = (rho1 / rho) * (alpha / omega);
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        for (size_t i = 0; i < n; ++i) phat[i] = dinv[i] * p[i];
        A.matvec(phat, v);
        const double rv = detail::dot_v(rhat, v);
        if (std::abs(rv) < 1e-300) fail("alpha breakdown");
        alpha = rho1 / rv;
        for (size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (detail::norm_v(s) / bnorm < st.tol) {
            for (size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
            history.push_back(detail::norm_v(s) / bnorm);
            if (out) *out = {"bicgstab", it, history.back(), history};
            return x;
        }
        for (size_t i = 0; i < n; ++i) shat[i] = dinv[i] * s[i];
        A.matvec(shat, t);
        const double tt = detail::dot_v(t, t);
        if (tt < 1e-300) fail("omega breakdown");
        omega = detail::dot_v(t, s) / tt;
        for (size_t i = 0; i < n; ++i) x[i] += alpha * phat[i] + omega * shat[i];
        for (size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
        history.push_back(detail::norm_v(r) / bnorm);
        if (history.back() < st.tol) {
            if (out) *out = {"bicgstab", it, history.back(), history};
            return x;
        }
        rho = rho1;
    }
    fail("stagnated before reaching the residual target");
    return {};
}

/// Direct banded path for factorizable sizes, BiCGStab beyond. The direct
/// result is still checked against the requested residual target.
inline std::vector<double> solve_sparse(const CsrMatrix& A, const std::vector<double>& b,
                                        const SolveSettings& st, SolveDiagnostics* out = nullptr) {
    const bool banded = st.method == SolveSettings::Method::banded ||
                        (st.method == SolveSettings::Method::automatic && A.n <= 129 * 129);
    if (!banded) return bicgstab_jacobi(A, b, st, out);
    auto lu = BandedLU::factor(A);
    auto x = lu.solve(b);
    const double rr = A.rel_residual(x, b);
    if (!(rr <= std::max(st.tol, 1e-9)))
        throw solver_error("solve_sparse: banded factorization left relative residual " +
                           std::to_string(rr));
    if (out) *out = {"banded", 1, rr, {rr}};
    return x;
}

}  // namespace oblique
