#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

/// Small fixed-dimension vector/matrix helpers shared across the library.
/// Dimension is a compile-time parameter; d = 2 and d = 3 are the supported
/// instantiations. Everything here is value-semantic and allocation-free.

namespace oblique {

template <int N>
using Vec = std::array<double, N>;

template <int N>
using Mat = std::array<std::array<double, N>, N>;

inline double sqr(double x) { return x * x; }

template <int N>
double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <int N>
double norm(const Vec<N>& a) {
    return std::sqrt(dot<N>(a, a));
}

template <int N>
Vec<N> add(const Vec<N>& a, const Vec<N>& b) {
    Vec<N> r{};
    for (int i = 0; i < N; ++i) r[i] = a[i] + b[i];
    return r;
}

template <int N>
Vec<N> sub(const Vec<N>& a, const Vec<N>& b) {
    Vec<N> r{};
    for (int i = 0; i < N; ++i) r[i] = a[i] - b[i];
    return r;
}

template <int N>
Vec<N> scal(double c, const Vec<N>& a) {
    Vec<N> r{};
    for (int i = 0; i < N; ++i) r[i] = c * a[i];
    return r;
}

template <int N>
double dist(const Vec<N>& a, const Vec<N>& b) {
    return norm<N>(sub<N>(a, b));
}

template <int N>
Vec<N> normalized(const Vec<N>& a) {
    double n = norm<N>(a);
    if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
    return scal<N>(1.0 / n, a);
}

template <int N>
Mat<N> identity() {
    Mat<N> m{};
    for (int i = 0; i < N; ++i) m[i][i] = 1.0;
    return m;
}

template <int N>
Vec<N> apply(const Mat<N>& m, const Vec<N>& v) {
    Vec<N> r{};
    for (int i = 0; i < N; ++i) r[i] = dot<N>(m[i], v);
    return r;
}

template <int N>
Mat<N> matmul(const Mat<N>& a, const Mat<N>& b) {
    Mat<N> r{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < N; ++k) s += a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

template <int N>
Mat<N> transpose(const Mat<N>& a) {
    Mat<N> r{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) r[i][j] = a[j][i];
    return r;
}

template <int N>
Mat<N> outer(const Vec<N>& a, const Vec<N>& b) {
    Mat<N> r{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) r[i][j] = a[i] * b[j];
    return r;
}

/// Frobenius norm; the convention used for |D^2 u| throughout.
template <int N>
double frob(const Mat<N>& a) {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += dot<N>(a[i], a[i]);
    return std::sqrt(s);
}

/// Least-squares line y = slope*x + intercept. r2 is the usual coefficient of
/// determination; callers treat r2 near 1 as "the model explains the data".
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / n;
    for (size_t i = 0; i < x.size(); ++i) {
        ss_res += sqr(y[i] - (f.slope * x[i] + f.intercept));
        ss_tot += sqr(y[i] - ybar);
    }
    f.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

/// Deterministic RNG wrapper. All randomized sweeps take an explicit seed so
/// identical configs reproduce byte-identical reports.
struct Rng {
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform(double a, double b) {
        std::uniform_real_distribution<double> d(a, b);
        return d(engine);
    }

    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(engine);
    }

    std::mt19937_64 engine;
};

}  // namespace oblique
