#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "replab/design.hpp"
#include "replab/noise.hpp"
#include "replab/rng.hpp"

using namespace replab;

namespace {

DesignParams base_params() {
    DesignParams p;
    p.eta = 0.05;
    p.N = 64;
    p.R = 8;
    p.B = 16;
    p.T_steps = 500;
    p.kappa = 0.0;
    p.rho = 0.1;
    p.L = 1.0;
    p.F0 = 2.0;
    p.noise = NoiseProfile::power_law(0.25, 1.0);
    return p;
}

}  // namespace

TEST_CASE("variance parameter closed forms and divisibility") {
    SUBCASE("silent noise gives zero variance") {
        DesignParams p = base_params();
        p.noise = NoiseProfile::constant(0.0);
        CHECK(variance_param(p) == 0.0);
    }
    SUBCASE("unit constant noise, rho=0, B=N collapses to 2/N") {
        DesignParams p = base_params();
        p.noise = NoiseProfile::constant(1.0);
        p.rho = 0.0;
        p.N = 16;
        p.R = 4;
        p.B = 16;
        CHECK(variance_param(p) == doctest::Approx(2.0 / 16.0).epsilon(1e-15));
    }
    SUBCASE("term-by-term oracle for a power-law profile") {
        DesignParams p = base_params();
        p.noise = NoiseProfile::power_law(0.25, 1.0);
        p.N = 64;
        p.R = 8;
        p.B = 16;
        p.rho = 0.1;
        double sq_sum = 0.0;
        for (int s = 0; s < 8; ++s) {  // window N/R = 8
            const double sigma = s == 0 ? 0.0 : std::pow(static_cast<double>(s), 0.25);
            sq_sum += sigma * sigma;
        }
        const double expected = sq_sum / 8.0 * (1.0 / 16.0 + 1.0 / 64.0 + 0.1 / 8.0);
        CHECK(variance_param(p) == doctest::Approx(expected).epsilon(1e-13));
    }
    SUBCASE("R must divide N") {
        DesignParams p = base_params();
        p.N = 10;
        p.R = 3;
        CHECK_THROWS_AS(variance_param(p), std::invalid_argument);
    }
}

TEST_CASE("step-size validity conditions") {
    DesignParams p = base_params();
    p.L = 1.0;
    p.kappa = 0.0;
    p.eta = 0.4;
    CHECK(eta_validity(p).valid);
    CHECK(eta_validity(p).bias_cap == std::numeric_limits<double>::infinity());

    p.eta = 0.6;
    CHECK_FALSE(eta_validity(p).valid);  // smoothness cap 1/(2L) = 0.5
    p.eta = 0.5;
    CHECK_FALSE(eta_validity(p).valid);  // the smoothness cap is exclusive

    p.kappa = 1.0;
    p.N = 100;
    p.R = 10;
    p.B = 8;
    p.eta = 0.05;
    const EtaValidity v = eta_validity(p);
    CHECK(v.bias_cap == doctest::Approx(10.0 / (2.0 * std::sqrt(2.0) * 100.0)).epsilon(1e-15));
    CHECK_FALSE(v.valid);  // 0.05 > 0.0354
    p.eta = v.bias_cap;    // the bias cap itself is inclusive
    CHECK(eta_validity(p).valid);
}

TEST_CASE("convergence bound closed forms and independent re-evaluation") {
    SUBCASE("silent noise leaves only the optimization term") {
        DesignParams p = base_params();
        p.noise = NoiseProfile::constant(0.0);
        CHECK(convergence_bound(p) ==
              doctest::Approx(12.0 * p.F0 / (p.eta * static_cast<double>(p.T_steps)))
                  .epsilon(1e-15));
    }
    SUBCASE("kappa=0 drops the drift term") {
        DesignParams p = base_params();
        p.kappa = 0.0;
        const double expected =
            12.0 * p.F0 / (p.eta * static_cast<double>(p.T_steps)) +
            8.0 * p.eta * p.L * variance_param(p);
        CHECK(convergence_bound(p) == doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("full instance matches a separately coded evaluation to 1e-12") {
        DesignParams p = base_params();
        p.kappa = 0.3;
        p.eta = 0.02;  // within the bias cap R/(2*sqrt(2)*kappa*N) = 0.147
        const double window = static_cast<double>(p.N) / static_cast<double>(p.R);
        double msq = 0.0;
        for (int s = 0; s < 8; ++s) {
            msq += std::pow(p.noise.sigma(s), 2.0);
        }
        msq /= window;
        const double v = msq * (1.0 / static_cast<double>(p.B) +
                                1.0 / static_cast<double>(p.N) +
                                p.rho / static_cast<double>(p.R));
        const double expected =
            12.0 * p.F0 / (p.eta * static_cast<double>(p.T_steps)) +
            8.0 * p.eta * (4.0 * window * window * p.kappa * p.kappa * p.eta + p.L) * v;
        CHECK(convergence_bound(p) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("invalid step sizes are rejected with the failing caps in the message") {
        DesignParams p = base_params();
        p.eta = 0.75;
        CHECK_THROWS_WITH_AS(convergence_bound(p), doctest::Contains("eta"),
                             std::invalid_argument);
    }
}

TEST_CASE("convergence bound is monotone in noise scale, rho, kappa, and F0") {
    DesignParams p = base_params();
    p.eta = 0.02;

    double prev = -1.0;
    for (double sigma0 : {0.5, 1.0, 2.0}) {
        p.noise = NoiseProfile::constant(sigma0);
        const double bound = convergence_bound(p);
        CHECK(bound > prev);
        prev = bound;
    }

    p = base_params();
    p.eta = 0.02;
    prev = -1.0;
    for (double rho : {0.0, 0.2, 0.5}) {
        p.rho = rho;
        const double bound = convergence_bound(p);
        CHECK(bound > prev);
        prev = bound;
    }

    p = base_params();
    p.eta = 0.02;
    prev = -1.0;
    for (double kappa : {0.0, 0.1, 0.2}) {
        p.kappa = kappa;
        const double bound = convergence_bound(p);
        CHECK(bound > prev);
        prev = bound;
    }

    p = base_params();
    prev = -1.0;
    for (double f0 : {1.0, 2.0, 4.0}) {
        p.F0 = f0;
        const double bound = convergence_bound(p);
        CHECK(bound > prev);
        prev = bound;
    }
}

TEST_CASE("J evaluated at the optimal replay ratio reduces to I") {
    Rng rng(314);
    const NoiseProfile profiles[] = {
        NoiseProfile::power_law(0.3, 2.0),
        NoiseProfile::constant(1.4),
        NoiseProfile::tabulated({0.0, 0.7, 1.1, 1.6, 1.6}),
    };
    for (const NoiseProfile& noise : profiles) {
        for (int i = 0; i < 50; ++i) {
            const double x = std::exp(rng.uniform(-2.0, 5.0));
            const double mu = std::exp(rng.uniform(-1.0, 3.0));
            const double rho = rng.uniform(0.0, 0.9);
            const double y = y_from_x(x, mu, rho);
            CHECK(objective_J(x, y, mu, rho, noise) ==
                  doctest::Approx(objective_I(x, mu, rho, noise)).epsilon(1e-12));
        }
    }
}

TEST_CASE("y_from_x closed form and its stationarity in y") {
    CHECK(y_from_x(1.0, 4.0, 0.0) == 2.0);
    CHECK(y_from_x(1e6, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-3));

    // Bisection on the y-derivative of J reproduces y_from_x.
    const NoiseProfile noise = NoiseProfile::power_law(0.3, 1.0);
    const double x = 7.0;
    const double mu = 5.28;
    const double rho = 0.07;
    auto dj_dy = [&](double y) {
        const double h = 1e-6 * y;
        return (objective_J(x, y + h, mu, rho, noise) -
                objective_J(x, y - h, mu, rho, noise)) /
               (2.0 * h);
    };
    double lo = 1e-3;
    double hi = 1e3;
    REQUIRE(dj_dy(lo) < 0.0);
    REQUIRE(dj_dy(hi) > 0.0);
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = std::sqrt(lo * hi);
        (dj_dy(mid) < 0.0 ? lo : hi) = mid;
    }
    CHECK(std::sqrt(lo * hi) == doctest::Approx(y_from_x(x, mu, rho)).epsilon(1e-5));
}

TEST_CASE("I approaches its infinite-staleness limit and is monotone for constant noise") {
    const NoiseProfile flat = NoiseProfile::constant(1.0);
    // limit (1/sqrt(mu) + sqrt(rho))^2 = 1 at mu=1, rho=0; at x=1e6 the value
    // is (1 + 1e-3)^2, within 2.1e-3 of the limit.
    CHECK(std::abs(objective_I(1e6, 1.0, 0.0, flat) - 1.0) <= 2.1e-3);
    CHECK(objective_I(1.0, 1.0, 0.0, flat) > objective_I(10.0, 1.0, 0.0, flat));
}

TEST_CASE("numeric optimizer flags the boundary when staleness is free") {
    const DesignSolution sol =
        optimal_design_numeric(2.0, 0.1, NoiseProfile::constant(1.0));
    CHECK(sol.at_grid_boundary);
    CHECK(sol.x_star > 1e5);  // pushed to the top of the search grid
}

TEST_CASE("stronger staleness decay shrinks the optimal staleness window") {
    const double mu = 5.28;
    const double rho = 0.05;
    const DesignSolution gentle =
        optimal_design_numeric(mu, rho, NoiseProfile::power_law(0.1, 1.0));
    const DesignSolution steep =
        optimal_design_numeric(mu, rho, NoiseProfile::power_law(0.45, 1.0));
    CHECK_FALSE(gentle.at_grid_boundary);
    CHECK_FALSE(steep.at_grid_boundary);
    CHECK(steep.x_star < gentle.x_star);
}

TEST_CASE("closed-form power-law optimum agrees with the numeric grid search") {
    for (double alpha : {0.1, 0.25, 0.4}) {
        for (double mu : {0.5, 5.28, 12.0}) {
            for (double rho : {0.01, 0.1, 0.5}) {
                const DesignSolution closed = optimal_design_power_law(alpha, mu, rho);
                const DesignSolution numeric =
                    optimal_design_numeric(mu, rho, NoiseProfile::power_law(alpha, 1.0));
                CHECK_MESSAGE(std::abs(numeric.x_star - closed.x_star) / closed.x_star < 0.01,
                              "alpha=", alpha, " mu=", mu, " rho=", rho,
                              " closed=", closed.x_star, " numeric=", numeric.x_star);
                CHECK(std::abs(numeric.y_star - closed.y_star) / closed.y_star < 0.01);
                CHECK(numeric.objective ==
                      doctest::Approx(closed.objective).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("the optimum is independent of the noise time scale tau") {
    const DesignSolution tau1 =
        optimal_design_numeric(5.28, 0.05, NoiseProfile::power_law(0.25, 1.0));
    const DesignSolution tau9 =
        optimal_design_numeric(5.28, 0.05, NoiseProfile::power_law(0.25, 9.0));
    CHECK(tau9.x_star == doctest::Approx(tau1.x_star).epsilon(1e-6));
    CHECK(tau9.y_star == doctest::Approx(tau1.y_star).epsilon(1e-6));
}

TEST_CASE("power-law closed form: special branches and the consistency identity") {
    SUBCASE("rho=0 linear root") {
        const DesignSolution sol = optimal_design_power_law(0.25, 5.0, 0.0);
        CHECK(sol.y_star == doctest::Approx(5.0).epsilon(1e-15));  // mu(1-2a)/(2a)
        CHECK(sol.x_star == doctest::Approx(5.0).epsilon(1e-15));  // y*^2/mu
    }
    SUBCASE("rho=1/mu makes the x quadratic linear") {
        const DesignSolution sol = optimal_design_power_law(0.25, 5.0, 0.2);
        CHECK(sol.y_star == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(sol.x_star == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
        CHECK(optimal_x_closed_form(0.25, 5.0, 0.2) ==
              doctest::Approx(sol.x_star).epsilon(1e-12));
    }
    SUBCASE("x from the quadratic equals y*^2/(mu - rho y*^2) on random instances") {
        Rng rng(2718);
        for (int i = 0; i < 200; ++i) {
            const double alpha = rng.uniform(0.05, 0.45);
            const double mu = std::exp(rng.uniform(-1.0, 3.0));
            const double rho = rng.uniform(0.001, 0.9);
            const DesignSolution sol = optimal_design_power_law(alpha, mu, rho);
            const double x_quadratic = optimal_x_closed_form(alpha, mu, rho);
            CHECK_MESSAGE(std::abs(x_quadratic - sol.x_star) / sol.x_star <= 1e-9,
                          "alpha=", alpha, " mu=", mu, " rho=", rho);
        }
    }
    SUBCASE("exponents at or beyond one half are rejected") {
        CHECK_THROWS_AS(optimal_design_power_law(0.5, 5.0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(optimal_design_power_law(0.6, 5.0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(optimal_design_power_law(0.0, 5.0, 0.1), std::invalid_argument);
    }
}

TEST_CASE("first-order conditions hold at the reported optimum") {
    const NoiseProfile noise = NoiseProfile::power_law(0.3, 1.0);
    for (double mu : {1.0, 5.28}) {
        for (double rho : {0.02, 0.3}) {
            const DesignSolution sol = optimal_design_power_law(0.3, mu, rho);
            const double x = sol.x_star;
            const double y = sol.y_star;
            const double j0 = objective_J(x, y, mu, rho, noise);
            const double h = 1e-5;
            const double dx = (objective_J(x * (1.0 + h), y, mu, rho, noise) -
                               objective_J(x * (1.0 - h), y, mu, rho, noise)) /
                              (2.0 * h);
            const double dy = (objective_J(x, y * (1.0 + h), mu, rho, noise) -
                               objective_J(x, y * (1.0 - h), mu, rho, noise)) /
                              (2.0 * h);
            // dx, dy are derivatives with respect to log x / log y, so
            // dividing by J gives a dimensionless stationarity residual.
            CHECK(std::abs(dx) / j0 <= 1e-4);
            CHECK(std::abs(dy) / j0 <= 1e-4);
        }
    }
}

TEST_CASE("J is blind to the common scale of (B, N, R)") {
    // J depends on the design only through x = N/R and y = B/R, so scaling
    // all three leaves it unchanged; the variance parameter compensates via
    // the per-step cost: V * (B + mu R) is scale-invariant.
    DesignParams p = base_params();
    const double mu = 5.0;
    const double base = variance_param(p) *
                        (static_cast<double>(p.B) + mu * static_cast<double>(p.R));
    for (int64_t scale : {2, 3, 5}) {
        DesignParams q = p;
        q.N *= scale;
        q.R *= scale;
        q.B *= scale;
        const double scaled = variance_param(q) *
                              (static_cast<double>(q.B) + mu * static_cast<double>(q.R));
        CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("mu sweep: both optimal ratios are non-decreasing in mu") {
    const double alpha = 0.25;
    const double rho = 0.1;
    double prev_x = 0.0;
    double prev_y = 0.0;
    for (double mu : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        const DesignSolution sol = optimal_design_power_law(alpha, mu, rho);
        CHECK(sol.x_star >= prev_x);
        CHECK(sol.y_star >= prev_y);
        prev_x = sol.x_star;
        prev_y = sol.y_star;
    }
}

TEST_CASE("K(x) has the same argmin as I(x) for power-law noise") {
    const double alpha = 0.3;
    const double mu = 5.28;
    const double rho = 0.05;
    const DesignSolution sol = optimal_design_power_law(alpha, mu, rho);
    const NoiseProfile noise = NoiseProfile::power_law(alpha, 1.0);
    const double k_star = objective_K(sol.x_star, alpha, mu, rho);
    for (double factor : {0.5, 0.9, 1.1, 2.0}) {
        CHECK(objective_K(sol.x_star * factor, alpha, mu, rho) > k_star);
    }
    // I is a fixed monotone transform of K for this profile:
    // I(x) = K(x)^2/(2 alpha + 1) at tau=1.
    for (double x : {0.5, 2.0, sol.x_star, 40.0}) {
        const double k = objective_K(x, alpha, mu, rho);
        CHECK(objective_I(x, mu, rho, noise) ==
              doctest::Approx(k * k / (2.0 * alpha + 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("budgeted step-size choice") {
    SUBCASE("equal coefficients give eta* = 1") {
        DesignParams p;
        p.N = 16;
        p.R = 4;
        p.B = 8;
        p.rho = 0.0;
        p.kappa = 0.0;
        p.L = 0.01;  // smoothness cap 50, far from eta* = 1
        p.F0 = 1.0;
        p.noise = NoiseProfile::constant(1.0);
        // a = 12*1*(8 + 2*4)/12800 = 0.015 = b = 8*0.01*(1/8 + 1/16)
        const EtaChoice choice = optimal_eta(p, 2.0, 12800.0);
        CHECK(choice.eta_star == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(choice.capped);
        CHECK(choice.predicted_bound == doctest::Approx(0.03).epsilon(1e-12));

        SUBCASE("quadrupling the budget halves eta*") {
            const EtaChoice richer = optimal_eta(p, 2.0, 4.0 * 12800.0);
            CHECK(richer.eta_star == doctest::Approx(0.5).epsilon(1e-12));
        }
        SUBCASE("eta* locally minimizes the budgeted bound") {
            const double a = 0.015;
            const double b = 0.015;
            for (double eta : {0.5, 2.0}) {
                CHECK(choice.predicted_bound < a / eta + b * eta);
            }
        }
    }
    SUBCASE("noise-free runs return the validity cap") {
        DesignParams p = base_params();
        p.noise = NoiseProfile::constant(0.0);
        p.kappa = 0.0;
        const EtaChoice choice = optimal_eta(p, 5.0, 1000.0);
        CHECK(choice.capped);
        CHECK(choice.eta_star == doctest::Approx(0.5 / p.L).epsilon(1e-8));
        CHECK(eta_validity([&] {
                  DesignParams q = p;
                  q.eta = choice.eta_star;
                  return q;
              }())
                  .valid);
    }
}
