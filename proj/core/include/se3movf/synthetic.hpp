#pragma once

// Synthetic desk-scale classification task: one vs two anisotropic Gaussian
// blobs at uniformly random positions and orientations. Per-volume intensity
// is mass-normalized, so the task is solvable from local evidence and the
// labels are rotation-invariant by construction.

#include <random>

#include "se3movf/train.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

namespace detail {

// uniform rotation via a random unit quaternion
inline void random_rotation(std::mt19937_64& rng, double r[3][3]) {
    std::normal_distribution<double> n(0.0, 1.0);
    double q[4];
    double norm = 0;
    do {
        norm = 0;
        for (double& x : q) {
            x = n(rng);
            norm += x * x;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& x : q) x /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    r[0][0] = 1 - 2 * (y * y + z * z); r[0][1] = 2 * (x * y - w * z); r[0][2] = 2 * (x * z + w * y);
    r[1][0] = 2 * (x * y + w * z); r[1][1] = 1 - 2 * (x * x + z * z); r[1][2] = 2 * (y * z - w * x);
    r[2][0] = 2 * (x * z - w * y); r[2][1] = 2 * (y * z + w * x); r[2][2] = 1 - 2 * (x * x + y * y);
}

template <typename T>
void add_blob(VolumeT<T>& v, std::mt19937_64& rng, const double center[3], double amplitude) {
    // fixed anisotropic shape, random orientation
    const double sig[3] = {1.3, 2.0, 2.9};
    double r[3][3];
    random_rotation(rng, r);
    for (int x = 0; x < v.w; ++x)
        for (int y = 0; y < v.h; ++y)
            for (int z = 0; z < v.d; ++z) {
                const double p[3] = {x - center[0], y - center[1], z - center[2]};
                double e = 0;
                for (int i = 0; i < 3; ++i) {
                    const double t = (r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]) / sig[i];
                    e += t * t;
                }
                if (e < 40) v.at(x, y, z, 0) += static_cast<T>(amplitude * std::exp(-0.5 * e));
            }
}

} // namespace detail

// Label 0: one blob with amplitude 1. Label 1: two blobs with amplitude 1/2
// each (equal total mass), at least min_sep apart.
template <typename T>
Dataset<T> make_blob_dataset(std::size_t n, int dim, std::mt19937_64& rng,
                             double min_sep = 9.0) {
    Dataset<T> ds;
    const double margin = 5.0;
    const double span = dim - 1 - 2 * margin;
    if (span <= 0)
        throw ShapeMismatch("volume too small for the blob placement margin");
    // cap the separation so rejection sampling in the placement box stays fast
    min_sep = std::min(min_sep, 0.6 * span);
    std::uniform_real_distribution<double> pos(margin, dim - 1 - margin);
    for (std::size_t i = 0; i < n; ++i) {
        // alternate labels so even tiny datasets are balanced
        const int label = static_cast<int>(i % 2);
        VolumeT<T> v(dim, dim, dim, 1);
        if (label == 0) {
            const double c[3] = {pos(rng), pos(rng), pos(rng)};
            detail::add_blob(v, rng, c, 1.0);
        } else {
            double c1[3] = {pos(rng), pos(rng), pos(rng)};
            double c2[3];
            for (;;) {
                for (double& x : c2) x = pos(rng);
                const double dx = c1[0] - c2[0], dy = c1[1] - c2[1], dz = c1[2] - c2[2];
                if (dx * dx + dy * dy + dz * dz >= min_sep * min_sep) break;
            }
            detail::add_blob(v, rng, c1, 0.5);
            detail::add_blob(v, rng, c2, 0.5);
        }
        ds.images.push_back(std::move(v));
        ds.labels.push_back(label);
    }
    return ds;
}

} // namespace se3movf
