#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "oblique/geometry.hpp"

/// Uniform tensor-grid carrier for discrete fields plus the finite-difference
/// machinery the norm estimators run on. Nodes include both endpoints of each
/// axis; integration weights are the plain cell volume h^d per inside node.

namespace oblique {

struct resolution_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <int D>
struct GridFunction {
    Vec<D> origin{};
    Vec<D> h{};
    std::array<int, D> n{};
    std::vector<double> values;
    std::vector<uint8_t> mask;  ///< 1 = inside; empty means everything inside

    size_t size() const {
        size_t s = 1;
        for (int i = 0; i < D; ++i) s *= static_cast<size_t>(n[i]);
        return s;
    }
    /// Row-major with the last axis contiguous.
    size_t stride(int axis) const {
        size_t s = 1;
        for (int i = axis + 1; i < D; ++i) s *= static_cast<size_t>(n[i]);
        return s;
    }
    int axis_index(size_t flat, int axis) const {
        return static_cast<int>((flat / stride(axis)) % static_cast<size_t>(n[axis]));
    }
    Vec<D> point(size_t flat) const {
        Vec<D> p{};
        for (int i = 0; i < D; ++i) p[i] = origin[i] + h[i] * axis_index(flat, i);
        return p;
    }
    bool inside(size_t flat) const { return mask.empty() || mask[flat] != 0; }
    double cellvol() const {
        double v = 1.0;
        for (int i = 0; i < D; ++i) v *= h[i];
        return v;
    }

    static GridFunction zeros(const Vec<D>& lo, const Vec<D>& hi, const std::array<int, D>& n) {
        GridFunction g;
        g.origin = lo;
        g.n = n;
        for (int i = 0; i < D; ++i) {
            if (n[i] < 1 || !(hi[i] > lo[i])) throw std::invalid_argument("GridFunction: bad extent");
            g.h[i] = n[i] > 1 ? (hi[i] - lo[i]) / (n[i] - 1) : (hi[i] - lo[i]);
        }
        g.values.assign(g.size(), 0.0);
        return g;
    }

    template <typename F>
    static GridFunction sample(const Vec<D>& lo, const Vec<D>& hi, const std::array<int, D>& n, F f) {
        GridFunction g = zeros(lo, hi, n);
        for (size_t i = 0; i < g.size(); ++i) g.values[i] = f(g.point(i));
        return g;
    }

    template <typename Pred>
    GridFunction& with_mask(Pred pred) {
        mask.assign(size(), 0);
        for (size_t i = 0; i < size(); ++i) mask[i] = pred(point(i)) ? 1 : 0;
        return *this;
    }
};

/// Finite-difference derivative along one axis: central where both neighbors
/// are inside, second-order one-sided at mask edges, two-point one-sided as
/// the last resort. Values at outside nodes are left at zero.
template <int D>
GridFunction<D> derivative_field(const GridFunction<D>& u, int axis) {
    GridFunction<D> out = u;
    const size_t st = u.stride(axis);
    const double hh = u.h[axis];
    auto shifted = [&](size_t flat, int off) -> size_t {
        return static_cast<size_t>(static_cast<long long>(flat) +
                                   static_cast<long long>(off) * static_cast<long long>(st));
    };
    auto avail = [&](size_t flat, int off) -> bool {
        int i = u.axis_index(flat, axis) + off;
        if (i < 0 || i >= u.n[axis]) return false;
        return u.inside(shifted(flat, off));
    };
    auto at = [&](size_t flat, int off) { return u.values[shifted(flat, off)]; };

    for (size_t i = 0; i < u.size(); ++i) {
        if (!u.inside(i)) {
            out.values[i] = 0.0;
            continue;
        }
        const bool m1 = avail(i, -1), p1 = avail(i, 1);
        if (m1 && p1) {
            out.values[i] = (at(i, 1) - at(i, -1)) / (2.0 * hh);
        } else if (p1 && avail(i, 2)) {
            out.values[i] = (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * hh);
        } else if (m1 && avail(i, -2)) {
            out.values[i] = (3.0 * at(i, 0) - 4.0 * at(i, -1) + at(i, -2)) / (2.0 * hh);
        } else if (p1) {
            out.values[i] = (at(i, 1) - at(i, 0)) / hh;
        } else if (m1) {
            out.values[i] = (at(i, 0) - at(i, -1)) / hh;
        } else {
            throw resolution_error("derivative_field: mask too thin for any stencil");
        }
    }
    return out;
}

/// Boundary datum sampled along the graph with arclength weights.
struct BoundaryTrace {
    std::vector<double> s;
    std::vector<double> values;
    std::vector<double> weights;  ///< trapezoid ds scaled by sqrt(1 + |Dpsi|^2)
};

template <typename F>
BoundaryTrace sample_trace(const GraphDomain<2>& dom, double lo, double hi, int n, F g) {
    if (n < 2 || !(hi > lo)) throw std::invalid_argument("sample_trace: need >= 2 samples");
    BoundaryTrace tr;
    const double ds = (hi - lo) / (n - 1);
    tr.s.resize(n);
    tr.values.resize(n);
    tr.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double s = lo + i * ds;
        tr.s[i] = s;
        tr.values[i] = g(s);
        double dp = dom.dpsi(Vec<1>{s})[0];
        double arc = std::sqrt(1.0 + dp * dp);
        tr.weights[i] = arc * ds * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
    }
    return tr;
}

}  // namespace oblique
