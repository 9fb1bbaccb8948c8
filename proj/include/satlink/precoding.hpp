// Gateway precoder math: regularized MMSE, per-antenna power-constrained MMSE
// (diagonal Lagrangian found by a safeguarded nested bisection on the KKT
// complementarity system), and constant-envelope row normalization.
#pragma once

#include <array>

#include "satlink/mat2.hpp"

namespace satlink {

struct PacConfig {
    std::array<double, 2> power_budget{1.0, 1.0};  // per-antenna power limits (phi)
    int max_iterations = 100;                      // bisection depth per 1-D solve
    double residual_tolerance = 1e-8;
    double lambda_floor = 0.0;
};

struct PacDiagnostics {
    int evaluations = 0;  // W(Lambda) evaluations spent by the solver
    double residual = 0.0;
    std::array<double, 2> lambda{0.0, 0.0};
};

struct PrecodingMatrix {
    Mat2 w;
    // Row magnitude sums a1, a2 divided out by the most recent normalize_rows.
    std::array<double, 2> row_norm{1.0, 1.0};
    bool normalized = false;
};

/// W = H^dag (H H^dag + sigma^2 I)^-1. With sigma2 = 0 this is the exact
/// channel inverse. Throws SingularMatrix when the regularized Gram matrix is
/// numerically singular.
PrecodingMatrix compute_mmse(const Mat2& h, double sigma2);

/// W = H^dag (H H^dag + Lambda)^-1 with diagonal Lambda >= lambda_floor chosen
/// so that the complementarity residual ||Lambda (diag(W W^dag) - phi)||_inf
/// is below cfg.residual_tolerance and diag(W W^dag) <= phi. Throws
/// NonConvergence when no Lambda within bounds meets the tolerance.
PrecodingMatrix compute_mmse_pac(const Mat2& h, const PacConfig& cfg,
                                 PacDiagnostics* diag = nullptr);

/// Divide each row i by a_i = |w_i1| + |w_i2| (constant-envelope bound: the
/// per-antenna output magnitude of unit-modulus symbol pairs never exceeds 1).
/// Throws ZeroRow when a row vanishes.
PrecodingMatrix normalize_rows(const PrecodingMatrix& w);

/// x = W s. Expects a normalized precoder.
std::array<Complex, 2> apply_precoder(const PrecodingMatrix& w, const std::array<Complex, 2>& s);

// Shared pieces of the PAC problem, also used for gateway logging.
Mat2 pac_precoder_for(const Mat2& h, const std::array<double, 2>& lambda);
std::array<double, 2> pac_row_powers(const Mat2& h, const std::array<double, 2>& lambda);
double pac_kkt_residual(const Mat2& h, const std::array<double, 2>& lambda,
                        const std::array<double, 2>& phi, double lambda_floor = 0.0);

}  // namespace satlink
