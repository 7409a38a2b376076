#pragma once

#include "twohop/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace twohop {

/// log det of a Hermitian positive definite matrix via Cholesky; retries once
/// on the symmetrized matrix with LDLT before giving up.
inline double logdet_hermitian_pd(const MatrixC& m) {
    Eigen::LLT<MatrixC> llt(m);
    if (llt.info() == Eigen::Success) {
        double s = 0.0;
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
        return 2.0 * s;
    }
    MatrixC sym = 0.5 * (m + m.adjoint());
    Eigen::LDLT<MatrixC> ldlt(sym);
    if (ldlt.info() == Eigen::Success) {
        double s = 0.0;
        const VectorD d = ldlt.vectorD().real();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (d[i] <= 0.0) throw NumericalError("logdet: matrix not positive definite");
            s += std::log(d[i]);
        }
        return s;
    }
    throw NumericalError("logdet: factorization failed");
}

/// Tr[A B] without forming the product.
inline cxd trace_prod(const MatrixC& a, const MatrixC& b) {
    return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace twohop
