#include "odin/linalg.hpp"

#include <cmath>

namespace odin {

namespace {

constexpr double kEpsStart = 1e-8;
constexpr double kEpsMax = 1e-4;

JitteredCholesky try_factorize(const Matrix &m, double initial_jitter, double scale) {
    JitteredCholesky result;
    double jitter = initial_jitter;
    while (true) {
        Matrix work = m;
        if (jitter > 0.0) work.diagonal().array() += jitter;
        result.llt.compute(work);
        if (result.llt.info() == Eigen::Success) {
            result.jitter = jitter;
            return result;
        }
        const double eps_next = (jitter == 0.0) ? kEpsStart : 10.0 * jitter / scale;
        if (eps_next > kEpsMax) {
            throw NumericalError("Cholesky failed after jitter escalation");
        }
        jitter = eps_next * scale;
    }
}

}  // namespace

double JitteredCholesky::log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double JitteredCholesky::quad_form_inv(const Vector &x) const {
    const Vector half = llt.matrixL().solve(x);
    return half.squaredNorm();
}

JitteredCholesky cholesky_with_jitter(const Matrix &m, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
    return try_factorize(m, 0.0, scale);
}

JitteredCholesky cholesky_with_fixed_jitter(const Matrix &m, double base_jitter) {
    const double scale = (base_jitter > 0.0) ? base_jitter / kEpsStart : 1.0;
    return try_factorize(m, base_jitter, scale);
}

}  // namespace odin
