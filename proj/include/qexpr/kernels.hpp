#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace qexpr::kernels {

using cplx = std::complex<double>;

/// Applies a 2x2 matrix to `target` of a little-endian amplitude array.
inline void apply_1q(std::span<cplx> amps, int target,
                     const Eigen::Matrix2cd &m) {
    const std::size_t stride = std::size_t{1} << target;
    const cplx m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
    for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t i0 = base + off;
            const std::size_t i1 = i0 + stride;
            const cplx a0 = amps[i0];
            const cplx a1 = amps[i1];
            amps[i0] = m00 * a0 + m01 * a1;
            amps[i1] = m10 * a0 + m11 * a1;
        }
    }
}

/// Diagonal single-qubit update (RZ and friends).
inline void apply_diag_1q(std::span<cplx> amps, int target, cplx d0, cplx d1) {
    const std::size_t mask = std::size_t{1} << target;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        amps[i] *= (i & mask) ? d1 : d0;
    }
}

inline void apply_x(std::span<cplx> amps, int target) {
    const std::size_t stride = std::size_t{1} << target;
    for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
        for (std::size_t off = 0; off < stride; ++off) {
            std::swap(amps[base + off], amps[base + off + stride]);
        }
    }
}

inline void apply_cx(std::span<cplx> amps, int control, int target) {
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & cmask) && !(i & tmask)) {
            std::swap(amps[i], amps[i | tmask]);
        }
    }
}

/// Applies a 4x4 matrix whose local basis index is b(q0) + 2*b(q1).
inline void apply_2q(std::span<cplx> amps, int q0, int q1,
                     const Eigen::Matrix4cd &m) {
    const std::size_t m0 = std::size_t{1} << q0;
    const std::size_t m1 = std::size_t{1} << q1;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if (i & (m0 | m1)) {
            continue;
        }
        const std::size_t idx[4] = {i, i | m0, i | m1, i | m0 | m1};
        cplx in[4];
        for (int k = 0; k < 4; ++k) {
            in[k] = amps[idx[k]];
        }
        for (int r = 0; r < 4; ++r) {
            cplx acc = 0.0;
            for (int c = 0; c < 4; ++c) {
                acc += m(r, c) * in[c];
            }
            amps[idx[r]] = acc;
        }
    }
}

} // namespace qexpr::kernels
