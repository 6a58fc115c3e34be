#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rhflow {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Uniform periodic grid on a flat m-torus, m in {1,2}. Indexing wraps exactly:
// node i and i+n are the same node.
struct GridGeometry {
    int dim = 2;
    int nodes_per_axis = 32;
    double period = two_pi;

    GridGeometry() = default;
    GridGeometry(int m, int n, double length = two_pi)
        : dim(m), nodes_per_axis(n), period(length) {
        if (dim < 1 || dim > 2)
            throw std::invalid_argument("GridGeometry: dim must be 1 or 2");
        if (nodes_per_axis < 8)
            throw std::invalid_argument("GridGeometry: need >= 8 nodes per axis");
        if (!(period > 0.0))
            throw std::invalid_argument("GridGeometry: period must be positive");
    }

    double spacing() const { return period / nodes_per_axis; }

    int node_count() const {
        int c = 1;
        for (int a = 0; a < dim; ++a) c *= nodes_per_axis;
        return c;
    }

    int wrap(int i) const {
        const int n = nodes_per_axis;
        i %= n;
        return i < 0 ? i + n : i;
    }

    // Row-major node index; axis 0 is i, axis 1 is j.
    int index(int i, int j = 0) const {
        if (dim == 1) return wrap(i);
        return wrap(i) * nodes_per_axis + wrap(j);
    }

    void unpack(int node, int& i, int& j) const {
        if (dim == 1) {
            i = node;
            j = 0;
        } else {
            i = node / nodes_per_axis;
            j = node % nodes_per_axis;
        }
    }

    double coord(int i) const { return spacing() * i; }

    bool same_shape(const GridGeometry& o) const {
        return dim == o.dim && nodes_per_axis == o.nodes_per_axis && period == o.period;
    }
};

namespace fd {

// 4th-order central difference weights for d/dx: (-f2 + 8f1 - 8f_1 + f_2)/(12h)
// and d2/dx2: (-f2 + 16f1 - 30f0 + 16f_1 - f_2)/(12h^2).

// First derivative of component c of a `comps`-per-node array along `axis`.
inline double d1(const GridGeometry& g, const std::vector<double>& a, int comps, int c,
                 int i, int j, int axis) {
    const double h = g.spacing();
    auto v = [&](int s) {
        int ii = i, jj = j;
        (axis == 0 ? ii : jj) += s;
        return a[static_cast<size_t>(g.index(ii, jj)) * comps + c];
    };
    return (-v(2) + 8.0 * v(1) - 8.0 * v(-1) + v(-2)) / (12.0 * h);
}

// Pure second derivative along `axis`.
inline double d2(const GridGeometry& g, const std::vector<double>& a, int comps, int c,
                 int i, int j, int axis) {
    const double h = g.spacing();
    auto v = [&](int s) {
        int ii = i, jj = j;
        (axis == 0 ? ii : jj) += s;
        return a[static_cast<size_t>(g.index(ii, jj)) * comps + c];
    };
    return (-v(2) + 16.0 * v(1) - 30.0 * v(0) + 16.0 * v(-1) - v(-2)) / (12.0 * h * h);
}

// Mixed or pure second derivative d^2/(dx_a dx_b); mixed case composes two
// first-derivative stencils (5x5 cross product), staying 4th order.
inline double d2m(const GridGeometry& g, const std::vector<double>& a, int comps, int c,
                  int i, int j, int a1, int a2) {
    if (a1 == a2) return d2(g, a, comps, c, i, j, a1);
    const double h = g.spacing();
    const double w[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
    double acc = 0.0;
    for (int s = -2; s <= 2; ++s) {
        if (s == 0) continue;
        double row = 0.0;
        for (int t = -2; t <= 2; ++t) {
            if (t == 0) continue;
            int ii = i, jj = j;
            (a1 == 0 ? ii : jj) += s;
            (a2 == 0 ? ii : jj) += t;
            row += w[t + 2] * a[static_cast<size_t>(g.index(ii, jj)) * comps + c];
        }
        acc += w[s + 2] * row;
    }
    return acc / (144.0 * h * h);
}

} // namespace fd

} // namespace rhflow
