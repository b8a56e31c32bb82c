#include "se3movf/frame.hpp"

#include <algorithm>
#include <cmath>

namespace se3movf {

EigenDecomp3 eigh3(const Sym3& h) {
    double a[3][3] = {{h.xx, h.xy, h.xz}, {h.xy, h.yy, h.yz}, {h.xz, h.yz, h.zz}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (!std::isfinite(a[i][j])) throw NonFiniteInput("eigh3: non-finite entry");

    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}; // accumulates P, rows = eigenvectors
    const double norm = h.frobenius();
    const double off_tol = 1e-14 * norm;

    for (int sweep = 0; sweep < 30; ++sweep) {
        const double off = std::sqrt(2 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] +
                                          a[1][2] * a[1][2]));
        if (off <= off_tol) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = a[p][q];
                if (apq == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                // A <- J^T A J with the Givens rotation J in the (p,q) plane
                const double app = a[p][p], aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = a[q][p] = 0.0;
                for (int k = 0; k < 3; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = a[p][k] = c * akp - s * akq;
                    a[k][q] = a[q][k] = s * akp + c * akq;
                }
                // accumulate rows of P: row_p <- c row_p - s row_q, etc.
                for (int k = 0; k < 3; ++k) {
                    const double vpk = v[p][k], vqk = v[q][k];
                    v[p][k] = c * vpk - s * vqk;
                    v[q][k] = s * vpk + c * vqk;
                }
            }
        }
    }

    EigenDecomp3 e;
    int order[3] = {0, 1, 2};
    const double lam[3] = {a[0][0], a[1][1], a[2][2]};
    std::stable_sort(order, order + 3, [&](int i, int j) { return lam[i] > lam[j]; });
    for (int i = 0; i < 3; ++i) {
        e.lambda[i] = lam[order[i]];
        for (int k = 0; k < 3; ++k) e.v[i][k] = v[order[i]][k];
    }
    return e;
}

} // namespace se3movf
