// Fixed-size complex 2x2 matrix arithmetic: just enough dense algebra for the
// channel/precoder math, nothing general-purpose.
#pragma once

#include <array>
#include <cmath>

#include "satlink/types.hpp"

namespace satlink {

struct Mat2 {
    // Row-major entries: e[2*row + col].
    std::array<Complex, 4> e{};

    static Mat2 identity() { return Mat2{{Complex(1.0), Complex(0.0), Complex(0.0), Complex(1.0)}}; }

    Complex& at(int row, int col) { return e[2 * row + col]; }
    const Complex& at(int row, int col) const { return e[2 * row + col]; }

    Mat2 operator+(const Mat2& o) const {
        return Mat2{{e[0] + o.e[0], e[1] + o.e[1], e[2] + o.e[2], e[3] + o.e[3]}};
    }
    Mat2 operator-(const Mat2& o) const {
        return Mat2{{e[0] - o.e[0], e[1] - o.e[1], e[2] - o.e[2], e[3] - o.e[3]}};
    }
    Mat2 operator*(const Mat2& o) const {
        return Mat2{{e[0] * o.e[0] + e[1] * o.e[2], e[0] * o.e[1] + e[1] * o.e[3],
                     e[2] * o.e[0] + e[3] * o.e[2], e[2] * o.e[1] + e[3] * o.e[3]}};
    }
    Mat2 operator*(double s) const { return Mat2{{e[0] * s, e[1] * s, e[2] * s, e[3] * s}}; }

    std::array<Complex, 2> operator*(const std::array<Complex, 2>& v) const {
        return {e[0] * v[0] + e[1] * v[1], e[2] * v[0] + e[3] * v[1]};
    }

    Complex det() const { return e[0] * e[3] - e[1] * e[2]; }

    /// Conjugate transpose; the paper's dagger operator.
    Mat2 adjoint() const {
        return Mat2{{std::conj(e[0]), std::conj(e[2]), std::conj(e[1]), std::conj(e[3])}};
    }

    /// Cofactor inverse with one residual-correction step so that A*inv(A)
    /// stays within 1e-10 of I up to condition numbers around 1e6.
    /// Throws SingularMatrix when |det| < 1e-30.
    Mat2 inverse() const;

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : e) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        for (const auto& v : e) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
        return true;
    }
};

inline double max_abs_diff(const Mat2& a, const Mat2& b) { return (a - b).max_abs(); }

}  // namespace satlink
