#pragma once

// Sampled Gaussian derivative kernels (orders 0..2), separable 3D convolution
// and the Gaussian 2-jet. Kernels are calibrated so that low-order polynomials
// get exact responses: order 0 sums to 1, order 1 maps the ramp i -> 1,
// order 2 maps i^2/2 -> 1. Sampling symmetry is preserved by the calibration,
// which is what makes octahedral equivariance of the jet exact.

#include <cmath>
#include <vector>

#include "se3movf/errors.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

enum class Padding { Reflect, Zero };

template <typename T>
struct Kernel1DT {
    double sigma = 1.0;
    int order = 0;
    int radius = 0;
    std::vector<T> coeffs; // 2*radius+1 taps, index t+radius holds tap t

    T tap(int t) const { return coeffs[t + radius]; }
};

using Kernel1D = Kernel1DT<float>;

template <typename T>
Kernel1DT<T> make_kernel(double sigma, int order, int radius = -1) {
    if (!(sigma > 0)) throw NonPositiveSigma("sigma must be > 0");
    if (order < 0 || order > 2) throw Error("kernel order must be 0, 1 or 2");
    if (radius < 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (radius < 1 && order > 0) radius = 1;

    const int n = 2 * radius + 1;
    std::vector<double> k(n);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int t = -radius; t <= radius; ++t) {
        const double g = std::exp(-t * t * inv2s2);
        double val = g;
        if (order == 1) val = -t / (sigma * sigma) * g;
        if (order == 2) val = (t * t / (sigma * sigma) - 1.0) / (sigma * sigma) * g;
        k[t + radius] = val;
    }

    // calibrate: convolution response out[i] = sum_t k[t] in[i-t]
    if (order == 0) {
        double s = 0;
        for (double v : k) s += v;
        for (double& v : k) v /= s;
    } else if (order == 1) {
        // response to ramp f(i)=i is -sum_t t k[t]; normalize it to 1
        double s = 0;
        for (int t = -radius; t <= radius; ++t) s -= t * k[t + radius];
        for (double& v : k) v /= s;
    } else {
        // zero the DC response (keeps evenness), then normalize the response
        // to f(i)=i^2/2, which is sum_t t^2 k[t] / 2
        double s = 0;
        for (double v : k) s += v;
        const double mean = s / n;
        for (double& v : k) v -= mean;
        double s2 = 0;
        for (int t = -radius; t <= radius; ++t) s2 += t * t * k[t + radius];
        for (double& v : k) v /= s2 / 2.0;
    }

    Kernel1DT<T> out;
    out.sigma = sigma;
    out.order = order;
    out.radius = radius;
    out.coeffs.resize(n);
    for (int i = 0; i < n; ++i) out.coeffs[i] = static_cast<T>(k[i]);
    return out;
}

namespace detail {

inline int reflect_index(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
}

// Apply a 1D kernel along one spatial axis, channels vectorized in the inner
// loop. adjoint=true computes the exact transpose (scatter instead of gather),
// which is what the backward pass convolves with.
template <typename T>
VolumeT<T> conv_axis_impl(const VolumeT<T>& v, const Kernel1DT<T>& k, int axis,
                          Padding pad, bool adjoint) {
    const int dims[3] = {v.w, v.h, v.d};
    const int n = dims[axis];
    if (pad == Padding::Reflect && k.radius > n)
        throw KernelLargerThanAxisWithReflect(
            "kernel radius " + std::to_string(k.radius) + " exceeds axis length " +
            std::to_string(n) + " with Reflect padding");

    VolumeT<T> out(v.w, v.h, v.d, v.c);
    const int c = v.c;
    // strides in elements
    const std::size_t sc[3] = {static_cast<std::size_t>(v.h) * v.d * c,
                               static_cast<std::size_t>(v.d) * c,
                               static_cast<std::size_t>(c)};
    const std::size_t axis_stride = sc[axis];
    const int oa = axis == 0 ? 1 : 0;           // first other axis
    const int ob = axis == 2 ? 1 : 2;           // second other axis

    for (int a = 0; a < dims[oa]; ++a) {
        for (int b = 0; b < dims[ob]; ++b) {
            const std::size_t line = a * sc[oa] + b * sc[ob];
            const T* src = v.data.data() + line;
            T* dst = out.data.data() + line;
            for (int i = 0; i < n; ++i) {
                for (int t = -k.radius; t <= k.radius; ++t) {
                    const int j = i - t;
                    int js = j;
                    if (j < 0 || j >= n) {
                        if (pad == Padding::Zero) continue;
                        js = reflect_index(j, n);
                    }
                    const T kt = k.tap(t);
                    if (!adjoint) {
                        const T* s = src + js * axis_stride;
                        T* o = dst + i * axis_stride;
                        for (int ch = 0; ch < c; ++ch) o[ch] += kt * s[ch];
                    } else {
                        const T* s = src + i * axis_stride;
                        T* o = dst + js * axis_stride;
                        for (int ch = 0; ch < c; ++ch) o[ch] += kt * s[ch];
                    }
                }
            }
        }
    }
    return out;
}

} // namespace detail

template <typename T>
VolumeT<T> conv_axis(const VolumeT<T>& v, const Kernel1DT<T>& k, int axis,
                     Padding pad = Padding::Reflect) {
    return detail::conv_axis_impl(v, k, axis, pad, false);
}

template <typename T>
VolumeT<T> conv_axis_adjoint(const VolumeT<T>& dout, const Kernel1DT<T>& k, int axis,
                             Padding pad = Padding::Reflect) {
    return detail::conv_axis_impl(dout, k, axis, pad, true);
}

template <typename T>
VolumeT<T> conv_separable(const VolumeT<T>& v, const Kernel1DT<T>& kx,
                          const Kernel1DT<T>& ky, const Kernel1DT<T>& kz,
                          Padding pad = Padding::Reflect) {
    return conv_axis(conv_axis(conv_axis(v, kx, 0, pad), ky, 1, pad), kz, 2, pad);
}

// Fixed channel order of a 2-jet (per input channel).
// u, u_x, u_y, u_z, u_xx, u_xy, u_yy, u_xz, u_yz, u_zz
inline constexpr int kJetChannels = 10;
inline constexpr int kJetOrders[kJetChannels][3] = {
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0},
    {1, 1, 0}, {0, 2, 0}, {1, 0, 1}, {0, 1, 1}, {0, 0, 2},
};

template <typename T>
struct JetKernels {
    Kernel1DT<T> k[3]; // per derivative order
    explicit JetKernels(double sigma, int radius = -1) {
        for (int o = 0; o < 3; ++o) k[o] = make_kernel<T>(sigma, o, radius);
    }
};

// Gaussian 2-jet: all derivatives with i+j+k <= 2 for every channel.
// Output channel layout: in-channel-major, derivative minor (ch*10 + jet).
// Partial results along x then xy are shared between derivative combos.
template <typename T>
VolumeT<T> jet2(const VolumeT<T>& v, double sigma, Padding pad = Padding::Reflect,
                int radius = -1) {
    const JetKernels<T> ker(sigma, radius);
    VolumeT<T> out(v.w, v.h, v.d, v.c * kJetChannels);

    VolumeT<T> vx[3];
    for (int ox = 0; ox <= 2; ++ox) vx[ox] = conv_axis(v, ker.k[ox], 0, pad);
    for (int ox = 0; ox <= 2; ++ox) {
        for (int oy = 0; oy + ox <= 2; ++oy) {
            const VolumeT<T> vxy = conv_axis(vx[ox], ker.k[oy], 1, pad);
            for (int oz = 0; oz + oy + ox <= 2; ++oz) {
                const VolumeT<T> vxyz = conv_axis(vxy, ker.k[oz], 2, pad);
                int jet = -1;
                for (int j = 0; j < kJetChannels; ++j)
                    if (kJetOrders[j][0] == ox && kJetOrders[j][1] == oy &&
                        kJetOrders[j][2] == oz)
                        jet = j;
                for (std::size_t vox = 0; vox < v.voxels(); ++vox) {
                    const T* s = vxyz.data.data() + vox * v.c;
                    T* o = out.data.data() + vox * out.c;
                    for (int ch = 0; ch < v.c; ++ch) o[ch * kJetChannels + jet] = s[ch];
                }
            }
        }
    }
    return out;
}

// Adjoint of jet2 with respect to the input volume: routes each jet channel's
// cotangent back through the transposed separable convolutions.
template <typename T>
VolumeT<T> jet2_adjoint(const VolumeT<T>& djet, double sigma,
                        Padding pad = Padding::Reflect, int radius = -1) {
    if (djet.c % kJetChannels != 0)
        throw ShapeMismatch("jet cotangent channel count must be a multiple of 10");
    const int c = djet.c / kJetChannels;
    const JetKernels<T> ker(sigma, radius);
    VolumeT<T> din(djet.w, djet.h, djet.d, c);
    VolumeT<T> scratch(djet.w, djet.h, djet.d, c);
    for (int jet = 0; jet < kJetChannels; ++jet) {
        for (std::size_t vox = 0; vox < djet.voxels(); ++vox) {
            const T* s = djet.data.data() + vox * djet.c;
            T* o = scratch.data.data() + vox * c;
            for (int ch = 0; ch < c; ++ch) o[ch] = s[ch * kJetChannels + jet];
        }
        VolumeT<T> g = conv_axis_adjoint(scratch, ker.k[kJetOrders[jet][2]], 2, pad);
        g = conv_axis_adjoint(g, ker.k[kJetOrders[jet][1]], 1, pad);
        g = conv_axis_adjoint(g, ker.k[kJetOrders[jet][0]], 0, pad);
        for (std::size_t i = 0; i < din.data.size(); ++i) din.data[i] += g.data[i];
    }
    return din;
}

} // namespace se3movf
