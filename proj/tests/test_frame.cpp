#include <doctest.h>

#include <random>

#include "se3movf/errors.hpp"
#include "se3movf/frame.hpp"

using namespace se3movf;

namespace {

Volume random_volume(int w, int h, int d, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Volume v(w, h, d, c);
    for (auto& x : v.data) x = dist(rng);
    return v;
}

// builds a one-voxel jet volume from explicit jet entries
template <typename T>
VolumeT<T> jet_voxel(const std::array<T, 10>& entries) {
    VolumeT<T> j(1, 1, 1, 10);
    for (int i = 0; i < 10; ++i) j.data[i] = entries[i];
    return j;
}

double dot(const Volume& a, const Volume& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += double(a.data[i]) * b.data[i];
    return s;
}

} // namespace

TEST_CASE("saddle with a gradient nudge: frame rows align with the axes") {
    // u = x^2/2 - z^2/2 + 0.1 x near the origin: hessian diag(1, 0, -1),
    // gradient (0.1, 0, 0). Eigenvectors are the coordinate axes; the x row
    // keeps its sign (positive dot with the gradient), the y row is zeroed
    // (projection 0 < tau * 0.1) and the z row is zeroed too.
    VolumeT<double> jet = jet_voxel<double>({0, 0.1, 0, 0, 1, 0, 0, 0, 0, -1});
    const auto f = build_frame(jet, 1e-2);
    const double* r = f.rows.data.data();
    CHECK(f.lambdas.data[0] == doctest::Approx(1.0));
    CHECK(f.lambdas.data[1] == doctest::Approx(0.0));
    CHECK(f.lambdas.data[2] == doctest::Approx(-1.0));
    CHECK(r[0] == doctest::Approx(1.0)); // +x row survives
    CHECK(r[1] == doctest::Approx(0.0));
    CHECK(r[2] == doctest::Approx(0.0));
    for (int i = 3; i < 9; ++i) CHECK(r[i] == 0.0); // y and z rows zeroed
}

TEST_CASE("gradient sign flips the row") {
    VolumeT<double> jet = jet_voxel<double>({0, -0.5, 0, 0, 2, 0, 1, 0, 0, 0.5});
    const auto f = build_frame(jet, 1e-2);
    // leading eigenvector is +-x; gradient is -x so the row flips to -x
    CHECK(f.rows.data[0] == doctest::Approx(-1.0));
}

TEST_CASE("zero jet produces an all-zero frame") {
    VolumeT<double> jet(2, 2, 2, 10);
    const auto f = build_frame(jet, 1e-2);
    for (double x : f.rows.data) CHECK(x == 0.0);
    for (double x : f.lambdas.data) CHECK(x == 0.0);
}

TEST_CASE("multi-channel jets are rejected") {
    VolumeT<double> jet(2, 2, 2, 20);
    CHECK_THROWS_AS((void)build_frame(jet, 1e-2), MultiChannelInput);
}

TEST_CASE("synthesized hessians recover the planted rotation") {
    // H = R^T diag(3,2,1) R with rows of R as the planted eigenvectors, and a
    // gradient placed to give all rows positive projections
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        // random rotation via QR-less Gram-Schmidt of two random vectors
        double a[3], b[3];
        for (int i = 0; i < 3; ++i) { a[i] = dist(rng); b[i] = dist(rng); }
        double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        if (na < 0.3) continue;
        for (double& x : a) x /= na;
        const double ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        for (int i = 0; i < 3; ++i) b[i] -= ab * a[i];
        double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        if (nb < 0.3) continue;
        for (double& x : b) x /= nb;
        const double c[3] = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                             a[0] * b[1] - a[1] * b[0]};
        const double rows[3][3] = {{a[0], a[1], a[2]}, {b[0], b[1], b[2]}, {c[0], c[1], c[2]}};
        const double lam[3] = {3, 2, 1};
        double h[3][3] = {};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) h[i][j] += rows[k][i] * lam[k] * rows[k][j];
        // gradient = sum of the planted rows, projection 1 on each
        const double g[3] = {a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]};
        VolumeT<double> jet = jet_voxel<double>(
            {0, g[0], g[1], g[2], h[0][0], h[0][1], h[1][1], h[0][2], h[1][2], h[2][2]});
        const auto f = build_frame(jet, 1e-2);
        for (int i = 0; i < 3; ++i) {
            CHECK(f.lambdas.data[i] == doctest::Approx(lam[i]).epsilon(1e-10));
            for (int j = 0; j < 3; ++j)
                CHECK(f.rows.data[3 * i + j] == doctest::Approx(rows[i][j]).epsilon(1e-8));
        }
    }
}

TEST_CASE("apply_frame with the identity frame is a passthrough") {
    const Volume jet = random_volume(3, 3, 3, 20, 62);
    FrameField f;
    f.rows = Volume(3, 3, 3, 9);
    f.lambdas = Volume(3, 3, 3, 3);
    for (std::size_t vox = 0; vox < f.rows.voxels(); ++vox) {
        f.rows.data[vox * 9 + 0] = 1;
        f.rows.data[vox * 9 + 4] = 1;
        f.rows.data[vox * 9 + 8] = 1;
    }
    const Volume out = apply_frame(f, jet);
    CHECK(out.data == jet.data);
}

TEST_CASE("apply_frame with zero rows keeps only the function value") {
    const Volume jet = random_volume(2, 2, 2, 10, 63);
    FrameField f;
    f.rows = Volume(2, 2, 2, 9);
    f.lambdas = Volume(2, 2, 2, 3);
    const Volume out = apply_frame(f, jet);
    for (std::size_t vox = 0; vox < jet.voxels(); ++vox) {
        CHECK(out.data[vox * 10] == jet.data[vox * 10]);
        for (int c = 1; c < 10; ++c) CHECK(out.data[vox * 10 + c] == 0.0f);
    }
}

TEST_CASE("apply_frame is linear in the jet for a fixed frame") {
    const Volume a = random_volume(3, 3, 3, 10, 64);
    const Volume b = random_volume(3, 3, 3, 10, 65);
    const Volume jet = random_volume(3, 3, 3, 10, 66);
    const auto f = build_frame(jet, 1e-2);
    Volume sum = a;
    for (std::size_t i = 0; i < sum.data.size(); ++i)
        sum.data[i] = 0.5f * a.data[i] + 2.0f * b.data[i];
    const Volume fa = apply_frame(f, a), fb = apply_frame(f, b), fs = apply_frame(f, sum);
    for (std::size_t i = 0; i < fs.data.size(); ++i)
        CHECK(fs.data[i] == doctest::Approx(0.5 * fa.data[i] + 2.0 * fb.data[i]).epsilon(1e-4));
}

TEST_CASE("apply_frame hand example: P HP^T for a quarter-turn frame") {
    // P = rotation by 90 deg about z (rows (0,1,0),(-1,0,0),(0,0,1));
    // grad (1,2,3) -> (2,-1,3); H diag(4,5,6) -> diag(5,4,6)
    FrameField f;
    f.rows = Volume(1, 1, 1, 9);
    f.lambdas = Volume(1, 1, 1, 3);
    const float pr[9] = {0, 1, 0, -1, 0, 0, 0, 0, 1};
    std::copy(pr, pr + 9, f.rows.data.begin());
    Volume jet(1, 1, 1, 10);
    const float je[10] = {7, 1, 2, 3, 4, 0, 5, 0, 0, 6};
    std::copy(je, je + 10, jet.data.begin());
    const Volume out = apply_frame(f, jet);
    const float expect[10] = {7, 2, -1, 3, 5, 0, 4, 0, 0, 6};
    for (int i = 0; i < 10; ++i) CHECK(out.data[i] == doctest::Approx(expect[i]));
}

TEST_CASE("frames co-rotate with the input under grid rotations") {
    // P(g x) = P(x) R^T on the rotated grid, eigenvalues invariant
    const Volume v = random_volume(9, 9, 9, 1, 67);
    const double sigma = 1.5;
    const auto f = build_frame(jet2(v, sigma), 1e-1); // loose tau avoids borderline zeroing
    for (const auto& g : octahedral_group()) {
        const auto fr = build_frame(jet2(rotate_grid(v, g), sigma), 1e-1);
        const FrameField back{rotate_grid(fr.rows, g.inverse()),
                              rotate_grid(fr.lambdas, g.inverse())};
        const auto m = g.matrix();
        double worst_lam = 0, worst_rows = 0;
        std::size_t compared = 0;
        for (std::size_t vox = 0; vox < v.voxels(); ++vox) {
            for (int i = 0; i < 3; ++i)
                worst_lam = std::max(worst_lam, std::abs(double(f.lambdas.data[vox * 3 + i]) -
                                                         back.lambdas.data[vox * 3 + i]));
            // skip voxels where either frame zeroed a row; the threshold can
            // fire on one side only at near-ties
            bool zeroed = false;
            for (int i = 0; i < 3; ++i) {
                double n1 = 0, n2 = 0;
                for (int j = 0; j < 3; ++j) {
                    n1 += std::abs(f.rows.data[vox * 9 + 3 * i + j]);
                    n2 += std::abs(back.rows.data[vox * 9 + 3 * i + j]);
                }
                if (n1 < 0.5 || n2 < 0.5) zeroed = true;
            }
            if (zeroed) continue;
            ++compared;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    // (P R^T)_{ij} = sum_k P_{ik} R_{jk}
                    double pr = 0;
                    for (int k = 0; k < 3; ++k)
                        pr += double(f.rows.data[vox * 9 + 3 * i + k]) * m[j][k];
                    worst_rows = std::max(
                        worst_rows, std::abs(pr - back.rows.data[vox * 9 + 3 * i + j]));
                }
        }
        CHECK(worst_lam <= 1e-5);
        CHECK(worst_rows <= 1e-4);
        CHECK(compared > v.voxels() / 4); // a sizable share of full frames
    }
}

TEST_CASE("invariantized features are octahedral invariants") {
    const Volume v = random_volume(9, 9, 9, 1, 68);
    const double sigma = 1.5;
    auto invariant = [&](const Volume& img) {
        const Volume j = jet2(img, sigma);
        return apply_frame(build_frame(j, 1e-1), j);
    };
    const Volume base = invariant(v);
    for (const auto& g : octahedral_group()) {
        const Volume rot = rotate_grid(invariant(rotate_grid(v, g)), g.inverse());
        // compare only voxels with full frames on both sides
        const auto f1 = build_frame(jet2(v, sigma), 1e-1);
        double worst = 0;
        for (std::size_t vox = 0; vox < v.voxels(); ++vox) {
            bool zeroed = false;
            for (int i = 0; i < 9; i += 3) {
                double n = std::abs(f1.rows.data[vox * 9 + i]) +
                           std::abs(f1.rows.data[vox * 9 + i + 1]) +
                           std::abs(f1.rows.data[vox * 9 + i + 2]);
                if (n < 0.5) zeroed = true;
            }
            if (zeroed) continue;
            for (int c = 0; c < 10; ++c)
                worst = std::max(worst, std::abs(double(base.data[vox * 10 + c]) -
                                                 rot.data[vox * 10 + c]));
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("apply_frame_adjoint is the exact transpose") {
    const Volume jet = random_volume(5, 5, 5, 10, 69);
    const auto f = build_frame(jet, 1e-2);
    const Volume x = random_volume(5, 5, 5, 20, 70);
    const Volume y = random_volume(5, 5, 5, 20, 71);
    FrameField f20 = f;
    const double lhs = dot(apply_frame(f20, x), y);
    const double rhs = dot(x, apply_frame_adjoint(f20, y));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("frame subsampling keeps the even lattice") {
    const Volume v = random_volume(9, 9, 9, 1, 72);
    const auto f = build_frame(jet2(v, 1.0), 1e-2);
    const auto s = subsample2(f);
    CHECK(s.rows.w == 5);
    CHECK(s.rows.at(1, 2, 3, 4) == f.rows.at(2, 4, 6, 4));
    CHECK(s.lambdas.at(4, 0, 1, 2) == f.lambdas.at(8, 0, 2, 2));
}

TEST_CASE("shape mismatches are rejected") {
    const Volume jet = random_volume(3, 3, 3, 10, 73);
    const auto f = build_frame(jet, 1e-2);
    const Volume wrong_dims = random_volume(4, 3, 3, 10, 74);
    CHECK_THROWS_AS((void)apply_frame(f, wrong_dims), ShapeMismatch);
    const Volume wrong_ch = random_volume(3, 3, 3, 7, 75);
    CHECK_THROWS_AS((void)apply_frame(f, wrong_ch), ShapeMismatch);
    CHECK_THROWS_AS((void)apply_frame_adjoint(f, wrong_ch), ShapeMismatch);
}
