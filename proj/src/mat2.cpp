#include "satlink/mat2.hpp"

#include "satlink/errors.hpp"

namespace satlink {

Mat2 Mat2::inverse() const {
    const Complex d = det();
    if (std::abs(d) < 1e-30) {
        throw SingularMatrix("2x2 inverse: |det| below 1e-30");
    }
    Mat2 x{{e[3] / d, -e[1] / d, -e[2] / d, e[0] / d}};
    const Mat2 r = identity() - (*this) * x;
    return x + x * r;
}

}  // namespace satlink
