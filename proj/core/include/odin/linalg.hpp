#pragma once

#include "odin/common.hpp"

namespace odin {

/// Cholesky factorization with escalating relative jitter. The diagonal gets
/// eps * scale added, eps starting at 1e-8 and growing by 10x up to 1e-4;
/// past that a NumericalError is thrown.
struct JitteredCholesky {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;  ///< absolute diagonal addition that succeeded

    template <typename Derived>
    auto solve(const Eigen::MatrixBase<Derived> &b) const {
        return llt.solve(b.derived()).eval();
    }
    double log_det() const;
    /// x^T M^{-1} x through the factor.
    double quad_form_inv(const Vector &x) const;
};

JitteredCholesky cholesky_with_jitter(const Matrix &m, double scale);

/// Always-applied base jitter variant: the diagonal addition base * scale is
/// applied before the first attempt, then escalates as above. Used where the
/// jitter must be a deterministic function of the inputs (risk gradients
/// checked against finite differences).
JitteredCholesky cholesky_with_fixed_jitter(const Matrix &m, double base_jitter);

}  // namespace odin
