#pragma once

// The SE(3) moving frame on a grid: per-voxel symmetric eigendecomposition of
// the Gaussian Hessian, gradient-based sign disambiguation with a zeroing
// threshold for degenerate directions, and the frame application that turns
// jets into rotation-invariant features.

#include <array>
#include <cmath>

#include "se3movf/errors.hpp"
#include "se3movf/gaussian.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

struct Sym3 {
    double xx = 0, xy = 0, yy = 0, xz = 0, yz = 0, zz = 0;

    double frobenius() const {
        return std::sqrt(xx * xx + yy * yy + zz * zz +
                         2 * (xy * xy + xz * xz + yz * yz));
    }
};

struct EigenDecomp3 {
    std::array<double, 3> lambda{};     // sorted non-increasing
    std::array<std::array<double, 3>, 3> v{}; // row i is the eigenvector of lambda[i]
};

// Cyclic Jacobi in 64-bit; deterministic sweep order, ties keep Jacobi output
// order. Stops when the off-diagonal Frobenius norm is <= 1e-14 * ||H||_F or
// after 30 sweeps.
EigenDecomp3 eigh3(const Sym3& h);

template <typename T>
struct FrameFieldT {
    VolumeT<T> rows;    // 9 channels, row-major 3x3 P per voxel (rows may be zero)
    VolumeT<T> lambdas; // 3 channels, eigenvalues sorted non-increasing

    std::array<int, 3> dims() const { return rows.dims(); }
};

using FrameField = FrameFieldT<float>;

// Builds the per-voxel frame from a single-channel 2-jet. Each eigenvector
// row is flipped so its dot with the gradient is >= 0; rows whose projection
// onto the gradient falls under tau * max(||grad||, tau) are zeroed.
// disambiguate=false skips the sign/zeroing rule (used by mutation tests).
template <typename T>
FrameFieldT<T> build_frame(const VolumeT<T>& jet, double tau, bool disambiguate = true) {
    if (jet.c != kJetChannels)
        throw MultiChannelInput("build_frame expects a single-channel jet (10 channels), got " +
                                std::to_string(jet.c));
    FrameFieldT<T> f;
    f.rows = VolumeT<T>(jet.w, jet.h, jet.d, 9);
    f.lambdas = VolumeT<T>(jet.w, jet.h, jet.d, 3);

    for (std::size_t vox = 0; vox < jet.voxels(); ++vox) {
        const T* j = jet.data.data() + vox * kJetChannels;
        const double gx = j[1], gy = j[2], gz = j[3];
        Sym3 h;
        h.xx = j[4]; h.xy = j[5]; h.yy = j[6];
        h.xz = j[7]; h.yz = j[8]; h.zz = j[9];
        const EigenDecomp3 e = eigh3(h);

        const double gnorm = std::sqrt(gx * gx + gy * gy + gz * gz);
        const double cutoff = tau * std::max(gnorm, tau);
        T* rows = f.rows.data.data() + vox * 9;
        T* lam = f.lambdas.data.data() + vox * 3;
        for (int i = 0; i < 3; ++i) {
            lam[i] = static_cast<T>(e.lambda[i]);
            double vx = e.v[i][0], vy = e.v[i][1], vz = e.v[i][2];
            if (disambiguate) {
                const double dot = vx * gx + vy * gy + vz * gz;
                if (std::abs(dot) < cutoff) {
                    vx = vy = vz = 0;
                } else if (dot < 0) {
                    vx = -vx; vy = -vy; vz = -vz;
                }
            }
            rows[3 * i + 0] = static_cast<T>(vx);
            rows[3 * i + 1] = static_cast<T>(vy);
            rows[3 * i + 2] = static_cast<T>(vz);
        }
    }
    return f;
}

// Invariantization: per voxel and per channel maps (u, grad, hess) to
// (u, P grad, unique entries of P H P^T), same channel order as the jet.
// Linear in the jet for a fixed frame, which is what keeps backprop clear of
// the eigendecomposition.
template <typename T>
VolumeT<T> apply_frame(const FrameFieldT<T>& frames, const VolumeT<T>& jet) {
    if (frames.rows.w != jet.w || frames.rows.h != jet.h || frames.rows.d != jet.d)
        throw ShapeMismatch("frame/jet spatial dims differ");
    if (jet.c % kJetChannels != 0)
        throw ShapeMismatch("jet channel count must be a multiple of 10");
    const int nch = jet.c / kJetChannels;
    VolumeT<T> out(jet.w, jet.h, jet.d, jet.c);

    for (std::size_t vox = 0; vox < jet.voxels(); ++vox) {
        const T* p = frames.rows.data.data() + vox * 9;
        const T* in = jet.data.data() + vox * jet.c;
        T* o = out.data.data() + vox * jet.c;
        for (int ch = 0; ch < nch; ++ch, in += kJetChannels, o += kJetChannels) {
            o[0] = in[0];
            // gradient: P g
            for (int i = 0; i < 3; ++i)
                o[1 + i] = p[3 * i] * in[1] + p[3 * i + 1] * in[2] + p[3 * i + 2] * in[3];
            // hessian: P H P^T, H from packed (xx,xy,yy,xz,yz,zz)
            const T hm[3][3] = {{in[4], in[5], in[7]},
                                {in[5], in[6], in[8]},
                                {in[7], in[8], in[9]}};
            T hp[3][3]; // H P^T
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k)
                    hp[i][k] = hm[i][0] * p[3 * k] + hm[i][1] * p[3 * k + 1] +
                               hm[i][2] * p[3 * k + 2];
            T r[3][3];
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k)
                    r[i][k] = p[3 * i] * hp[0][k] + p[3 * i + 1] * hp[1][k] +
                              p[3 * i + 2] * hp[2][k];
            o[4] = r[0][0]; o[5] = r[0][1]; o[6] = r[1][1];
            o[7] = r[0][2]; o[8] = r[1][2]; o[9] = r[2][2];
        }
    }
    return out;
}

// Exact transpose of apply_frame in its jet argument.
template <typename T>
VolumeT<T> apply_frame_adjoint(const FrameFieldT<T>& frames, const VolumeT<T>& dout) {
    if (frames.rows.w != dout.w || frames.rows.h != dout.h || frames.rows.d != dout.d)
        throw ShapeMismatch("frame/cotangent spatial dims differ");
    if (dout.c % kJetChannels != 0)
        throw ShapeMismatch("cotangent channel count must be a multiple of 10");
    const int nch = dout.c / kJetChannels;
    VolumeT<T> din(dout.w, dout.h, dout.d, dout.c);

    for (std::size_t vox = 0; vox < dout.voxels(); ++vox) {
        const T* p = frames.rows.data.data() + vox * 9;
        const T* go = dout.data.data() + vox * dout.c;
        T* gi = din.data.data() + vox * dout.c;
        for (int ch = 0; ch < nch; ++ch, go += kJetChannels, gi += kJetChannels) {
            gi[0] = go[0];
            // gradient: P^T g_out
            for (int i = 0; i < 3; ++i)
                gi[1 + i] = p[i] * go[1] + p[3 + i] * go[2] + p[6 + i] * go[3];
            // hessian: unpack cotangent into the upper triangle, dH = P^T dO P,
            // then fold symmetric pairs (each packed off-diagonal feeds two
            // entries of H)
            const T dm[3][3] = {{go[4], go[5], go[7]},
                                {T(0), go[6], go[8]},
                                {T(0), T(0), go[9]}};
            T dp[3][3]; // dO P
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k)
                    dp[i][k] = dm[i][0] * p[k] + dm[i][1] * p[3 + k] + dm[i][2] * p[6 + k];
            T dh[3][3]; // P^T (dO P)
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k)
                    dh[i][k] = p[i] * dp[0][k] + p[3 + i] * dp[1][k] + p[6 + i] * dp[2][k];
            gi[4] = dh[0][0];
            gi[5] = dh[0][1] + dh[1][0];
            gi[6] = dh[1][1];
            gi[7] = dh[0][2] + dh[2][0];
            gi[8] = dh[1][2] + dh[2][1];
            gi[9] = dh[2][2];
        }
    }
    return din;
}

template <typename T>
FrameFieldT<T> subsample2(const FrameFieldT<T>& f) {
    return {subsample2(f.rows), subsample2(f.lambdas)};
}

} // namespace se3movf
