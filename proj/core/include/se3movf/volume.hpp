#pragma once

// Dense multi-channel volumes on a unit grid, exact grid rotations (the
// 24-element octahedral group as signed axis permutations) and interpolated
// rotations/resampling. Volumes are immutable by convention once built; all
// operations here return fresh volumes.

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "se3movf/errors.hpp"

namespace se3movf {

enum class Axis { X = 0, Y = 1, Z = 2 };

template <typename T>
struct VolumeT {
    int w = 0, h = 0, d = 0, c = 0;
    std::vector<T> data; // row-major, shape (w, h, d, c), channel fastest

    VolumeT() = default;
    VolumeT(int w_, int h_, int d_, int c_, T fill = T(0))
        : w(w_), h(h_), d(d_), c(c_),
          data(static_cast<std::size_t>(w_) * h_ * d_ * c_, fill) {
        assert(w_ >= 1 && h_ >= 1 && d_ >= 1 && c_ >= 1);
    }

    std::size_t index(int x, int y, int z, int ch) const {
        return ((static_cast<std::size_t>(x) * h + y) * d + z) * c + ch;
    }
    T& at(int x, int y, int z, int ch) { return data[index(x, y, z, ch)]; }
    T at(int x, int y, int z, int ch) const { return data[index(x, y, z, ch)]; }

    T* voxel(int x, int y, int z) { return data.data() + index(x, y, z, 0); }
    const T* voxel(int x, int y, int z) const { return data.data() + index(x, y, z, 0); }

    std::size_t voxels() const { return static_cast<std::size_t>(w) * h * d; }
    std::size_t size() const { return data.size(); }
    std::array<int, 3> dims() const { return {w, h, d}; }

    bool same_shape(const VolumeT& o) const {
        return w == o.w && h == o.h && d == o.d && c == o.c;
    }

    template <typename U>
    VolumeT<U> cast() const {
        VolumeT<U> out(w, h, d, c);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Volume = VolumeT<float>;
using VolumeD = VolumeT<double>;

// An element of the octahedral rotation group, stored as a signed axis
// permutation: output coordinate i reads input axis perm[i] with sign[i].
// Equivalently the rotation matrix R has R[i][perm[i]] = sign[i], det R = +1.
struct GridRotation {
    std::array<int, 3> perm{0, 1, 2};
    std::array<int, 3> sign{1, 1, 1};

    static GridRotation identity() { return {}; }

    // quarter_turns counterclockwise quarter turns about the given axis
    // (right-handed, looking down the positive axis).
    static GridRotation about(Axis axis, int quarter_turns) {
        GridRotation q;
        switch (axis) {
            case Axis::Z: q.perm = {1, 0, 2}; q.sign = {-1, 1, 1}; break;  // (x,y,z)->(-y,x,z)
            case Axis::X: q.perm = {0, 2, 1}; q.sign = {1, -1, 1}; break;  // (x,y,z)->(x,-z,y)
            case Axis::Y: q.perm = {2, 1, 0}; q.sign = {1, 1, -1}; break;  // (x,y,z)->(z,y,-x)
        }
        GridRotation r;
        int n = ((quarter_turns % 4) + 4) % 4;
        for (int i = 0; i < n; ++i) r = q.compose(r);
        return r;
    }

    // (a.compose(b)) acts as a after b.
    GridRotation compose(const GridRotation& b) const {
        GridRotation r;
        for (int i = 0; i < 3; ++i) {
            r.perm[i] = b.perm[perm[i]];
            r.sign[i] = sign[i] * b.sign[perm[i]];
        }
        return r;
    }

    GridRotation inverse() const {
        GridRotation r;
        for (int i = 0; i < 3; ++i) {
            r.perm[perm[i]] = i;
            r.sign[perm[i]] = sign[i];
        }
        return r;
    }

    std::array<std::array<double, 3>, 3> matrix() const {
        std::array<std::array<double, 3>, 3> m{};
        for (int i = 0; i < 3; ++i) m[i][perm[i]] = sign[i];
        return m;
    }

    bool operator==(const GridRotation& o) const {
        return perm == o.perm && sign == o.sign;
    }
};

// The 24 proper rotations of the cube, enumerated once.
inline const std::vector<GridRotation>& octahedral_group() {
    static const std::vector<GridRotation> table = [] {
        std::vector<GridRotation> elems;
        auto add = [&](const GridRotation& g) {
            for (const auto& e : elems)
                if (e == g) return;
            elems.push_back(g);
        };
        add(GridRotation::identity());
        // close under the axis quarter-turn generators
        bool grew = true;
        while (grew) {
            grew = false;
            std::size_t n = elems.size();
            for (std::size_t i = 0; i < n; ++i) {
                for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
                    GridRotation g = GridRotation::about(a, 1).compose(elems[i]);
                    std::size_t before = elems.size();
                    add(g);
                    if (elems.size() != before) grew = true;
                }
            }
        }
        assert(elems.size() == 24);
        return elems;
    }();
    return table;
}

// Exact rotation by index permutation; lossless. The pivot is the geometric
// center, so coordinates are handled in doubled centered form to stay integral.
template <typename T>
VolumeT<T> rotate_grid(const VolumeT<T>& v, const GridRotation& g) {
    const int din[3] = {v.w, v.h, v.d};
    int dout[3];
    for (int i = 0; i < 3; ++i) dout[i] = din[g.perm[i]];
    VolumeT<T> out(dout[0], dout[1], dout[2], v.c);
    GridRotation inv = g.inverse();
    for (int x = 0; x < dout[0]; ++x) {
        for (int y = 0; y < dout[1]; ++y) {
            for (int z = 0; z < dout[2]; ++z) {
                const int oc[3] = {2 * x - (dout[0] - 1), 2 * y - (dout[1] - 1),
                                   2 * z - (dout[2] - 1)};
                int ic[3];
                for (int i = 0; i < 3; ++i) ic[i] = inv.sign[i] * oc[inv.perm[i]];
                const int xi = (ic[0] + din[0] - 1) / 2;
                const int yi = (ic[1] + din[1] - 1) / 2;
                const int zi = (ic[2] + din[2] - 1) / 2;
                const T* src = v.voxel(xi, yi, zi);
                T* dst = out.voxel(x, y, z);
                for (int ch = 0; ch < v.c; ++ch) dst[ch] = src[ch];
            }
        }
    }
    return out;
}

// Inverse-mapping trilinear rotation about the geometric center; samples
// outside the grid read 0.
template <typename T>
VolumeT<T> rotate_interp(const VolumeT<T>& v, Axis axis, double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    // inverse rotation applied to centered output coordinates
    double r[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    switch (axis) {
        case Axis::Z: r[0][0] = ca;  r[0][1] = sa;  r[1][0] = -sa; r[1][1] = ca; break;
        case Axis::X: r[1][1] = ca;  r[1][2] = sa;  r[2][1] = -sa; r[2][2] = ca; break;
        case Axis::Y: r[2][2] = ca;  r[2][0] = sa;  r[0][2] = -sa; r[0][0] = ca; break;
    }
    const double cx = 0.5 * (v.w - 1), cy = 0.5 * (v.h - 1), cz = 0.5 * (v.d - 1);
    VolumeT<T> out(v.w, v.h, v.d, v.c);
    for (int x = 0; x < v.w; ++x) {
        for (int y = 0; y < v.h; ++y) {
            for (int z = 0; z < v.d; ++z) {
                const double oc[3] = {x - cx, y - cy, z - cz};
                const double sx = r[0][0] * oc[0] + r[0][1] * oc[1] + r[0][2] * oc[2] + cx;
                const double sy = r[1][0] * oc[0] + r[1][1] * oc[1] + r[1][2] * oc[2] + cy;
                const double sz = r[2][0] * oc[0] + r[2][1] * oc[1] + r[2][2] * oc[2] + cz;
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const int z0 = static_cast<int>(std::floor(sz));
                const double fx = sx - x0, fy = sy - y0, fz = sz - z0;
                T* dst = out.voxel(x, y, z);
                for (int ch = 0; ch < v.c; ++ch) dst[ch] = T(0);
                for (int dx = 0; dx < 2; ++dx) {
                    const int xs = x0 + dx;
                    if (xs < 0 || xs >= v.w) continue;
                    const double wx = dx ? fx : 1.0 - fx;
                    for (int dy = 0; dy < 2; ++dy) {
                        const int ys = y0 + dy;
                        if (ys < 0 || ys >= v.h) continue;
                        const double wy = dy ? fy : 1.0 - fy;
                        for (int dz = 0; dz < 2; ++dz) {
                            const int zs = z0 + dz;
                            if (zs < 0 || zs >= v.d) continue;
                            const double wgt = wx * wy * (dz ? fz : 1.0 - fz);
                            if (wgt == 0.0) continue;
                            const T* src = v.voxel(xs, ys, zs);
                            for (int ch = 0; ch < v.c; ++ch)
                                dst[ch] += static_cast<T>(wgt * src[ch]);
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Corner-aligned trilinear resize; channels independent. Constant volumes map
// to constant volumes and the identity resize is bit-exact.
template <typename T>
VolumeT<T> resize_trilinear(const VolumeT<T>& v, int nw, int nh, int nd) {
    if (nw < 1 || nh < 1 || nd < 1)
        throw ShapeMismatch("resize_trilinear: target dims must be >= 1");
    if (nw == v.w && nh == v.h && nd == v.d) return v;
    auto src_coord = [](int i, int n_out, int n_in) {
        if (n_out == 1) return 0.5 * (n_in - 1);
        return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
    };
    VolumeT<T> out(nw, nh, nd, v.c);
    for (int x = 0; x < nw; ++x) {
        const double sx = src_coord(x, nw, v.w);
        const int x0 = std::min(static_cast<int>(sx), v.w - 1);
        const int x1 = std::min(x0 + 1, v.w - 1);
        const double fx = sx - x0;
        for (int y = 0; y < nh; ++y) {
            const double sy = src_coord(y, nh, v.h);
            const int y0 = std::min(static_cast<int>(sy), v.h - 1);
            const int y1 = std::min(y0 + 1, v.h - 1);
            const double fy = sy - y0;
            for (int z = 0; z < nd; ++z) {
                const double sz = src_coord(z, nd, v.d);
                const int z0 = std::min(static_cast<int>(sz), v.d - 1);
                const int z1 = std::min(z0 + 1, v.d - 1);
                const double fz = sz - z0;
                T* dst = out.voxel(x, y, z);
                for (int ch = 0; ch < v.c; ++ch) {
                    const double c00 = v.at(x0, y0, z0, ch) * (1 - fx) + v.at(x1, y0, z0, ch) * fx;
                    const double c01 = v.at(x0, y0, z1, ch) * (1 - fx) + v.at(x1, y0, z1, ch) * fx;
                    const double c10 = v.at(x0, y1, z0, ch) * (1 - fx) + v.at(x1, y1, z0, ch) * fx;
                    const double c11 = v.at(x0, y1, z1, ch) * (1 - fx) + v.at(x1, y1, z1, ch) * fx;
                    const double c0 = c00 * (1 - fy) + c10 * fy;
                    const double c1 = c01 * (1 - fy) + c11 * fy;
                    dst[ch] = static_cast<T>(c0 * (1 - fz) + c1 * fz);
                }
            }
        }
    }
    return out;
}

// Keeps even indices along every spatial axis; requires odd dims so the
// center voxel survives (that is what keeps 90-degree equivariance exact).
template <typename T>
VolumeT<T> subsample2(const VolumeT<T>& v) {
    if (v.w % 2 == 0 || v.h % 2 == 0 || v.d % 2 == 0)
        throw EvenDimensionWithStride("stride-2 subsampling requires odd spatial dims");
    VolumeT<T> out((v.w + 1) / 2, (v.h + 1) / 2, (v.d + 1) / 2, v.c);
    for (int x = 0; x < out.w; ++x)
        for (int y = 0; y < out.h; ++y)
            for (int z = 0; z < out.d; ++z) {
                const T* src = v.voxel(2 * x, 2 * y, 2 * z);
                T* dst = out.voxel(x, y, z);
                for (int ch = 0; ch < v.c; ++ch) dst[ch] = src[ch];
            }
    return out;
}

} // namespace se3movf
