#include "satlink/precoding.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "satlink/errors.hpp"

namespace satlink {

namespace {

constexpr double kLambdaMax = 1e12;

Mat2 gram_plus_diag(const Mat2& h, double d0, double d1) {
    Mat2 m = h * h.adjoint();
    m.at(0, 0) += d0;
    m.at(1, 1) += d1;
    return m;
}

void check_pac_config(const PacConfig& cfg) {
    if (cfg.power_budget[0] <= 0.0 || cfg.power_budget[1] <= 0.0) {
        throw Error("PacConfig: power budget entries must be > 0");
    }
    if (cfg.residual_tolerance <= 0.0) {
        throw Error("PacConfig: residual tolerance must be > 0");
    }
    if (cfg.lambda_floor < 0.0) {
        throw Error("PacConfig: lambda floor must be >= 0");
    }
    if (cfg.max_iterations <= 0) {
        throw Error("PacConfig: max iterations must be > 0");
    }
}

struct PacSolver {
    const Mat2& h;
    const std::array<double, 2>& phi;
    double floor;
    int depth;
    int evals = 0;

    std::array<double, 2> powers(const std::array<double, 2>& lam) {
        ++evals;
        try {
            return pac_row_powers(h, lam);
        } catch (const SingularMatrix&) {
            // singular Gram at this Lambda: treat as unbounded power so the
            // search moves toward stronger regularization
            constexpr double inf = std::numeric_limits<double>::infinity();
            return {inf, inf};
        }
    }

    // Complementarity solution for coordinate j with the other coordinate
    // fixed inside `lam`: the floor when already feasible there, else the
    // root of p_j = phi_j. No value when the power floor of antenna j stays
    // above its budget for every lambda_j.
    std::optional<double> solve_coordinate(int j, std::array<double, 2> lam) {
        lam[j] = floor;
        if (powers(lam)[j] <= phi[j]) return floor;
        double lo = floor;
        double hi = std::max(1.0, 2.0 * floor);
        while (true) {
            lam[j] = hi;
            if (powers(lam)[j] <= phi[j]) break;
            lo = hi;
            hi *= 2.0;
            if (hi > kLambdaMax) return std::nullopt;
        }
        for (int k = 0; k < depth; ++k) {
            const double mid = 0.5 * (lo + hi);
            lam[j] = mid;
            (powers(lam)[j] > phi[j] ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    struct Excess {
        double value;     // p_i - phi_i at the inner complementarity point
        double lambda_j;  // the inner coordinate's value
    };

    std::optional<Excess> excess(int i, double lambda_i) {
        std::array<double, 2> lam{floor, floor};
        lam[i] = lambda_i;
        const auto lj = solve_coordinate(1 - i, lam);
        if (!lj) return std::nullopt;
        lam[1 - i] = *lj;
        return Excess{powers(lam)[i] - phi[i], *lj};
    }

    // Outer bisection on coordinate i, inner complementarity on the other.
    std::optional<std::array<double, 2>> solve_order(int i) {
        std::array<double, 2> lam{floor, floor};
        const auto e0 = excess(i, floor);
        if (e0 && e0->value <= 0.0) {
            lam[1 - i] = e0->lambda_j;
            return lam;
        }
        double lo = floor;
        double hi = std::max(1.0, 2.0 * floor);
        bool bracketed = false;
        while (hi <= kLambdaMax) {
            const auto e = excess(i, hi);
            if (e && e->value <= 0.0) {
                bracketed = true;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if (!bracketed) return std::nullopt;
        for (int k = 0; k < depth; ++k) {
            const double mid = 0.5 * (lo + hi);
            const auto e = excess(i, mid);
            (!e || e->value > 0.0 ? lo : hi) = mid;
        }
        const auto e = excess(i, hi);
        lam[i] = hi;
        lam[1 - i] = e ? e->lambda_j : floor;
        return lam;
    }
};

}  // namespace

Mat2 pac_precoder_for(const Mat2& h, const std::array<double, 2>& lambda) {
    return h.adjoint() * gram_plus_diag(h, lambda[0], lambda[1]).inverse();
}

std::array<double, 2> pac_row_powers(const Mat2& h, const std::array<double, 2>& lambda) {
    const Mat2 w = pac_precoder_for(h, lambda);
    return {std::norm(w.at(0, 0)) + std::norm(w.at(0, 1)),
            std::norm(w.at(1, 0)) + std::norm(w.at(1, 1))};
}

double pac_kkt_residual(const Mat2& h, const std::array<double, 2>& lambda,
                        const std::array<double, 2>& phi, double lambda_floor) {
    const auto p = pac_row_powers(h, lambda);
    double r = 0.0;
    for (int i = 0; i < 2; ++i) {
        // complementarity acts on the excess above the floor: a coordinate
        // pinned at a positive floor with slack power is a valid fixed point
        r = std::max(r, std::abs((lambda[i] - lambda_floor) * (p[i] - phi[i])));
        r = std::max(r, p[i] - phi[i]);
    }
    return r;
}

PrecodingMatrix compute_mmse(const Mat2& h, double sigma2) {
    if (sigma2 < 0.0) throw Error("compute_mmse: sigma2 must be >= 0");
    if (sigma2 == 0.0) {
        // algebraically identical to H^dag (H H^dag)^-1 for invertible H, but
        // avoids squaring the condition number through the Gram matrix
        return PrecodingMatrix{h.inverse()};
    }
    return PrecodingMatrix{h.adjoint() * gram_plus_diag(h, sigma2, sigma2).inverse()};
}

PrecodingMatrix compute_mmse_pac(const Mat2& h, const PacConfig& cfg, PacDiagnostics* diag) {
    check_pac_config(cfg);
    PacSolver solver{h, cfg.power_budget, cfg.lambda_floor, cfg.max_iterations};

    // Some channels admit more than one exact complementarity point (distinct
    // active sets); prefer the least-regularized one among those that meet
    // the tolerance.
    std::optional<std::array<double, 2>> best;
    double best_residual = 0.0;
    for (int i = 0; i < 2; ++i) {
        const auto lam = solver.solve_order(i);
        if (!lam) continue;
        const double r = pac_kkt_residual(h, *lam, cfg.power_budget, cfg.lambda_floor);
        bool take = !best;
        if (best) {
            const bool old_ok = best_residual < cfg.residual_tolerance;
            const bool new_ok = r < cfg.residual_tolerance;
            if (old_ok && new_ok) {
                take = (*lam)[0] + (*lam)[1] < (*best)[0] + (*best)[1];
            } else {
                take = r < best_residual;
            }
        }
        if (take) {
            best = lam;
            best_residual = r;
        }
    }

    if (diag) {
        diag->evaluations = solver.evals;
        diag->residual = best ? best_residual : std::numeric_limits<double>::infinity();
        diag->lambda = best ? *best : std::array<double, 2>{0.0, 0.0};
    }
    if (!best || best_residual >= cfg.residual_tolerance) {
        throw NonConvergence("compute_mmse_pac: complementarity residual not met");
    }
    return PrecodingMatrix{pac_precoder_for(h, *best)};
}

PrecodingMatrix normalize_rows(const PrecodingMatrix& w) {
    PrecodingMatrix out = w;
    for (int i = 0; i < 2; ++i) {
        const double a = std::abs(w.w.at(i, 0)) + std::abs(w.w.at(i, 1));
        if (a == 0.0 || !std::isfinite(a)) {
            throw ZeroRow("normalize_rows: degenerate precoder row");
        }
        out.w.at(i, 0) = w.w.at(i, 0) / a;
        out.w.at(i, 1) = w.w.at(i, 1) / a;
        out.row_norm[i] = a;
    }
    out.normalized = true;
    return out;
}

std::array<Complex, 2> apply_precoder(const PrecodingMatrix& w, const std::array<Complex, 2>& s) {
    return w.w * s;
}

}  // namespace satlink
