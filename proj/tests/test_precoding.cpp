#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "satlink/errors.hpp"
#include "satlink/precoding.hpp"
#include "support/oracles.hpp"

using namespace satlink;

namespace {

Mat2 from_oracle(const oracles::M2& m) { return Mat2{{m[0], m[1], m[2], m[3]}}; }

double leakage_db(const Mat2& h, const Mat2& w) {
    const Mat2 g = h * w;
    const double r0 = std::abs(g.at(0, 1)) / std::abs(g.at(0, 0));
    const double r1 = std::abs(g.at(1, 0)) / std::abs(g.at(1, 1));
    return 20.0 * std::log10(std::max(r0, r1));
}

}  // namespace

TEST_CASE("mmse: identity and scalar channels at zero noise") {
    const PrecodingMatrix w1 = compute_mmse(Mat2::identity(), 0.0);
    CHECK(max_abs_diff(w1.w, Mat2::identity()) < 1e-14);

    const PrecodingMatrix w2 = compute_mmse(Mat2::identity() * 2.0, 0.0);
    CHECK(max_abs_diff(w2.w, Mat2::identity() * 0.5) < 1e-14);
}

TEST_CASE("mmse matches the direct-formula oracle") {
    const oracles::M2 h{oracles::C(1.0), oracles::C(0.5), oracles::C(0.4, 0.2), oracles::C(1.0)};
    const oracles::M2 ref = oracles::mmse_reference(h, 0.1);
    const PrecodingMatrix w = compute_mmse(from_oracle(h), 0.1);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(w.w.e[i] - ref[i]) < 1e-10);
}

TEST_CASE("zero-noise mmse inverts the channel") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const Mat2 h = from_oracle(oracles::random_well_conditioned_channel(rng));
        const PrecodingMatrix w = compute_mmse(h, 0.0);
        CHECK(max_abs_diff(h * w.w, Mat2::identity()) < 1e-9);
        CHECK(leakage_db(h, w.w) < -30.0);
    }
    // holds out to condition numbers around 1e4
    std::uniform_real_distribution<double> logc(0.0, 4.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    for (int trial = 0; trial < 200; ++trial) {
        const double cond = std::pow(10.0, logc(rng));
        auto rot = [&](double theta, double phi) {
            return Mat2{{std::polar(std::cos(theta), phi), Complex(-std::sin(theta)),
                         Complex(std::sin(theta)), std::polar(std::cos(theta), -phi)}};
        };
        const Mat2 d{{Complex(1.0), Complex(0.0), Complex(0.0), Complex(1.0 / cond)}};
        const Mat2 h = rot(angle(rng) / 2, angle(rng)) * d * rot(angle(rng) / 2, angle(rng));
        CHECK(max_abs_diff(h * compute_mmse(h, 0.0).w, Mat2::identity()) < 1e-9);
    }
}

TEST_CASE("mmse converges to the zero-noise inverse as sigma2 shrinks") {
    std::mt19937_64 rng(6);
    const Mat2 h = from_oracle(oracles::random_well_conditioned_channel(rng));
    const Mat2 w0 = compute_mmse(h, 0.0).w;
    double prev_gap = 1e300;
    for (double s2 : {1e-2, 1e-4, 1e-6}) {
        const double gap = max_abs_diff(compute_mmse(h, s2).w, w0);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-3);
}

TEST_CASE("pac: identity channel with unit budget needs no regularization") {
    PacDiagnostics diag;
    const PrecodingMatrix w = compute_mmse_pac(Mat2::identity(), PacConfig{}, &diag);
    CHECK(diag.lambda[0] == 0.0);
    CHECK(diag.lambda[1] == 0.0);
    CHECK(max_abs_diff(w.w, Mat2::identity()) < 1e-12);
    const auto p = pac_row_powers(Mat2::identity(), diag.lambda);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(1.0));
}

TEST_CASE("pac: symmetric channel reduces to scalar-regularized mmse") {
    const Mat2 h{{Complex(1.0), Complex(0.5), Complex(0.5), Complex(1.0)}};
    PacDiagnostics diag;
    const PrecodingMatrix w = compute_mmse_pac(h, PacConfig{}, &diag);
    CHECK(diag.lambda[0] == doctest::Approx(diag.lambda[1]).epsilon(1e-6));
    const PrecodingMatrix w_mmse = compute_mmse(h, diag.lambda[0]);
    CHECK(max_abs_diff(w.w, w_mmse.w) < 1e-8);
}

TEST_CASE("pac matches the grid-search oracle on the spec channel") {
    const oracles::M2 h{oracles::C(1.0), oracles::C(0.6), oracles::C(0.2), oracles::C(1.0)};
    PacConfig cfg;
    cfg.power_budget = {0.5, 0.5};
    PacDiagnostics diag;
    (void)compute_mmse_pac(from_oracle(h), cfg, &diag);
    const auto lam_grid = oracles::pac_grid_search(h, {0.5, 0.5});
    CHECK(std::abs(diag.lambda[0] - lam_grid[0]) < 1e-4);
    CHECK(std::abs(diag.lambda[1] - lam_grid[1]) < 1e-4);
}

TEST_CASE("pac fixed point is feasible and complementary on random channels") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const Mat2 h = from_oracle(oracles::random_well_conditioned_channel(rng));
        PacDiagnostics diag;
        (void)compute_mmse_pac(h, PacConfig{}, &diag);
        CHECK(diag.residual < 1e-8);
        const auto p = pac_row_powers(h, diag.lambda);
        CHECK(p[0] <= 1.0 + 1e-8);
        CHECK(p[1] <= 1.0 + 1e-8);
    }
}

TEST_CASE("pac honors a positive lambda floor") {
    PacConfig cfg;
    cfg.lambda_floor = 0.05;
    PacDiagnostics diag;
    (void)compute_mmse_pac(Mat2::identity(), cfg, &diag);
    // constraint inactive at the floor: lambda pins there, powers stay feasible
    CHECK(diag.lambda[0] == 0.05);
    CHECK(diag.lambda[1] == 0.05);
    const auto p = pac_row_powers(Mat2::identity(), diag.lambda);
    CHECK(p[0] < 1.0);
    CHECK(p[1] < 1.0);
}

TEST_CASE("pac reports NonConvergence when iteration-starved") {
    const Mat2 h{{Complex(1.0), Complex(0.6), Complex(0.2), Complex(1.0)}};
    PacConfig cfg;
    cfg.power_budget = {0.5, 0.5};  // both constraints active for this channel
    cfg.max_iterations = 2;         // far too shallow for the 1e-8 tolerance
    CHECK_THROWS_AS((void)compute_mmse_pac(h, cfg), NonConvergence);
}

TEST_CASE("pac handles a rank-deficient channel by regularizing past it") {
    // the Gram matrix is singular at Lambda = 0; the solver must still find
    // the complementarity point at positive Lambda
    const Mat2 h{{Complex(1.0), Complex(1.0), Complex(1.0), Complex(1.0)}};
    PacDiagnostics diag;
    (void)compute_mmse_pac(h, PacConfig{}, &diag);
    CHECK(diag.residual < 1e-8);
    const auto p = pac_row_powers(h, diag.lambda);
    CHECK(p[0] <= 1.0 + 1e-8);
    CHECK(p[1] <= 1.0 + 1e-8);
}

TEST_CASE("normalize_rows: already-normalized and textbook cases") {
    PrecodingMatrix w;
    w.w = Mat2{{Complex(0.8), Complex(0.2), Complex(0.3), Complex(0.7)}};
    const PrecodingMatrix n = normalize_rows(w);
    CHECK(max_abs_diff(n.w, w.w) < 1e-15);
    CHECK(n.row_norm[0] == doctest::Approx(1.0));
    CHECK(n.row_norm[1] == doctest::Approx(1.0));

    PrecodingMatrix v;
    v.w = Mat2{{Complex(1.0), Complex(1.0), Complex(2.0), Complex(0.0)}};
    const PrecodingMatrix nv = normalize_rows(v);
    CHECK(nv.w.at(0, 0) == Complex(0.5));
    CHECK(nv.w.at(0, 1) == Complex(0.5));
    CHECK(nv.w.at(1, 0) == Complex(1.0));
    CHECK(nv.w.at(1, 1) == Complex(0.0));
    CHECK(nv.row_norm[0] == doctest::Approx(2.0));
    CHECK(nv.row_norm[1] == doctest::Approx(2.0));
    CHECK(nv.normalized);
}

TEST_CASE("normalize_rows: row magnitude sums land on 1 and it is idempotent") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        PrecodingMatrix w;
        w.w = Mat2{{0, 0, 0, 0}};
        std::normal_distribution<double> g;
        for (auto& e : w.w.e) e = {g(rng), g(rng)};
        const PrecodingMatrix n = normalize_rows(w);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(n.w.at(i, 0)) + std::abs(n.w.at(i, 1)) ==
                  doctest::Approx(1.0).epsilon(1e-12));
            // row scaling keeps the within-row ratio of entries
            if (std::abs(w.w.at(i, 1)) > 1e-9) {
                CHECK(std::abs(n.w.at(i, 0) / n.w.at(i, 1) - w.w.at(i, 0) / w.w.at(i, 1)) < 1e-9);
            }
        }
        const PrecodingMatrix nn = normalize_rows(n);
        CHECK(max_abs_diff(nn.w, n.w) < 1e-14);
        CHECK(nn.row_norm[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("normalize_rows throws ZeroRow on a vanished row") {
    PrecodingMatrix w;
    w.w = Mat2{{Complex(0.0), Complex(0.0), Complex(1.0), Complex(0.0)}};
    CHECK_THROWS_AS((void)normalize_rows(w), ZeroRow);
}

TEST_CASE("per-antenna envelope: output magnitude peaks at exactly 1") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    for (int trial = 0; trial < 20; ++trial) {
        PrecodingMatrix w;
        for (auto& e : w.w.e) e = {g(rng), g(rng)};
        const PrecodingMatrix n = normalize_rows(w);

        double max_out = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const std::array<Complex, 2> s{std::polar(1.0, u(rng)), std::polar(1.0, u(rng))};
            const auto x = apply_precoder(n, s);
            max_out = std::max({max_out, std::abs(x[0]), std::abs(x[1])});
        }
        CHECK(max_out <= 1.0 + 1e-12);

        // Exhaustive relative-phase sweep at 1-degree resolution brackets the
        // supremum: the peak is reached when the two weighted terms align.
        double sweep_max = 0.0;
        for (int deg = 0; deg < 360; ++deg) {
            const std::array<Complex, 2> s{Complex(1.0), std::polar(1.0, deg * kPi / 180.0)};
            const auto x = apply_precoder(n, s);
            sweep_max = std::max({sweep_max, std::abs(x[0]), std::abs(x[1])});
        }
        CHECK(sweep_max <= 1.0 + 1e-12);
        CHECK(sweep_max > 1.0 - 5e-4);
    }
}

TEST_CASE("apply_precoder matches a direct multiply") {
    PrecodingMatrix id{Mat2::identity()};
    id.normalized = true;
    const auto x = apply_precoder(id, {Complex(1.0), Complex(0.0, 1.0)});
    CHECK(x[0] == Complex(1.0));
    CHECK(x[1] == Complex(0.0, 1.0));

    PrecodingMatrix w;
    w.w = Mat2{{Complex(0.5), Complex(0.5), Complex(1.0), Complex(0.0)}};
    w.normalized = true;
    const auto y = apply_precoder(w, {Complex(1.0), Complex(1.0)});
    CHECK(std::abs(y[0] - Complex(1.0)) < 1e-15);
    CHECK(std::abs(y[1] - Complex(1.0)) < 1e-15);

    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        PrecodingMatrix r;
        for (auto& e : r.w.e) e = {g(rng), g(rng)};
        const PrecodingMatrix n = normalize_rows(r);
        const std::array<Complex, 2> s{std::polar(1.0, g(rng)), std::polar(1.0, g(rng))};
        const auto got = apply_precoder(n, s);
        // independent elementwise multiply-accumulate
        const Complex e0 = n.w.at(0, 0) * s[0] + n.w.at(0, 1) * s[1];
        const Complex e1 = n.w.at(1, 0) * s[0] + n.w.at(1, 1) * s[1];
        CHECK(std::abs(got[0] - e0) == 0.0);
        CHECK(std::abs(got[1] - e1) == 0.0);
    }
}
