#include "odin/integrator.hpp"
#include "odin/ode_models.hpp"

#include <doctest.h>

#include <cmath>

using namespace odin;

namespace {

/// Central finite-difference check of both Jacobians at (x, theta).
void check_jacobians(const ODESystem &sys, const Vector &x, const Vector &theta, double tol) {
    const double h = 1e-6;
    const Matrix jx = sys.jac_x(x, theta);
    const Matrix jt = sys.jac_theta(x, theta);
    for (int j = 0; j < sys.state_dim; ++j) {
        Vector up = x, dn = x;
        up[j] += h;
        dn[j] -= h;
        const Vector fd = (sys.f(up, theta) - sys.f(dn, theta)) / (2 * h);
        CHECK((jx.col(j) - fd).lpNorm<Eigen::Infinity>() <
              tol * (1.0 + fd.lpNorm<Eigen::Infinity>()));
    }
    for (int j = 0; j < sys.param_count; ++j) {
        Vector up = theta, dn = theta;
        up[j] += h;
        dn[j] -= h;
        const Vector fd = (sys.f(x, up) - sys.f(x, dn)) / (2 * h);
        CHECK((jt.col(j) - fd).lpNorm<Eigen::Infinity>() <
              tol * (1.0 + fd.lpNorm<Eigen::Infinity>()));
    }
}

}  // namespace

TEST_SUITE_BEGIN("ode_models");

TEST_CASE("lotka-volterra point values") {
    const ODESystem sys = lotka_volterra();
    Vector x(2), theta(4);
    x << 5, 3;
    theta << 2, 1, 4, 1;
    const Vector f = sys.f(x, theta);
    CHECK(f[0] == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(3.0).epsilon(1e-12));
    // origin is an equilibrium for any parameters
    Vector zero = Vector::Zero(2);
    CHECK(sys.f(zero, theta).lpNorm<Eigen::Infinity>() == 0.0);
    check_jacobians(sys, x, theta, 1e-6);
}

TEST_CASE("fitzhugh-nagumo literal form point values") {
    const ODESystem sys = fitzhugh_nagumo(FhnSignConvention::Paper);
    Vector x(2), theta(3);
    x << -1, 1;
    theta << 0.2, 0.2, 3;
    const Vector f = sys.f(x, theta);
    CHECK(f[0] == doctest::Approx(0.2 / 3.0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(9.0).epsilon(1e-12));
    check_jacobians(sys, x, theta, 1e-6);
}

TEST_CASE("fitzhugh-nagumo default convention oscillates on a limit cycle") {
    const ODESystem sys = fitzhugh_nagumo();
    check_jacobians(sys, sys.x0, sys.theta_true, 1e-6);
    // integrate past the transient; V must keep swinging across +/-1.5
    Vector dense(400);
    for (int i = 0; i < 400; ++i) dense[i] = 40.0 * i / 399.0;
    const Matrix traj = integrate(sys, sys.theta_true, sys.x0, dense);
    const auto v_late = traj.col(0).tail(200);
    CHECK(v_late.maxCoeff() > 1.5);
    CHECK(v_late.minCoeff() < -1.5);
}

TEST_CASE("protein transduction point values and pole guard") {
    const ODESystem sys = protein_transduction();
    const Vector f = sys.f(sys.x0, sys.theta_true);
    CHECK(f[0] == doctest::Approx(-0.67).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(0.07).epsilon(1e-12));
    Vector at_pole = sys.x0;
    at_pole[4] = -sys.theta_true[5];
    CHECK_THROWS_AS(sys.f(at_pole, sys.theta_true), DomainError);
    Vector x(5), theta(6);
    x << 0.5, 0.2, 0.7, 0.1, 0.3;
    theta = sys.theta_true;
    check_jacobians(sys, x, theta, 1e-6);
}

TEST_CASE("lorenz96 equilibrium, point value, and rotation equivariance") {
    const ODESystem sys = lorenz96(4);
    Vector theta(1);
    theta << 0.0;
    Vector x(4);
    x << 1, 2, 3, 4;
    CHECK(sys.f(x, theta)[0] == doctest::Approx(-5.0).epsilon(1e-12));

    theta << 8.0;
    const Vector eq = Vector::Constant(4, 8.0);
    CHECK(sys.f(eq, theta).lpNorm<Eigen::Infinity>() < 1e-14);

    // cyclic rotation of the state rotates f the same way
    Rng rng(67);
    for (int i = 0; i < 4; ++i) x[i] = rng.gaussian();
    const Vector fx = sys.f(x, theta);
    Vector rotated(4), f_rotated_expect(4);
    for (int i = 0; i < 4; ++i) {
        rotated[(i + 1) % 4] = x[i];
        f_rotated_expect[(i + 1) % 4] = fx[i];
    }
    CHECK((sys.f(rotated, theta) - f_rotated_expect).lpNorm<Eigen::Infinity>() < 1e-12);
    check_jacobians(sys, x, theta, 1e-6);
}

TEST_CASE("misspecified lotka-volterra candidates") {
    const ODESystem m11 = lv_misspecified(1, 1);
    const ODESystem lv = lotka_volterra();
    Rng rng(71);
    CHECK(m11.param_count == lv.param_count);
    for (int trial = 0; trial < 5; ++trial) {
        Vector x(2), theta(4);
        x << rng.uniform(1.0, 6.0), rng.uniform(1.0, 6.0);
        for (int j = 0; j < 4; ++j) theta[j] = rng.uniform(0.5, 4.0);
        CHECK((m11.f(x, theta) - lv.f(x, theta)).lpNorm<Eigen::Infinity>() < 1e-14);
    }

    const ODESystem m00 = lv_misspecified(0, 0);
    CHECK(m00.param_count == 3);
    Vector x(2), theta(3);
    x << 5, 3;
    theta << 2, 1, 4;
    const Vector f = m00.f(x, theta);
    CHECK(f[0] == doctest::Approx(53.0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(-12.0).epsilon(1e-12));

    for (int i : {0, 1}) {
        for (int j : {0, 1}) {
            const ODESystem sys = lv_misspecified(i, j);
            Rng local(100 + 10 * i + j);
            Vector xx(2), th(sys.param_count);
            xx << local.uniform(1.0, 6.0), local.uniform(1.0, 6.0);
            for (int p = 0; p < sys.param_count; ++p) th[p] = local.uniform(0.5, 3.0);
            check_jacobians(sys, xx, th, 1e-6);
        }
    }
}

TEST_CASE("registry lookup round trip") {
    for (const char *name :
         {"lv", "fhn", "fhn-paper", "pt", "lorenz96-25", "lv-m00", "lv-m01", "lv-m10", "lv-m11"}) {
        const ODESystem sys = lookup_system(name);
        CHECK(sys.name == name);
        CHECK(sys.state_dim > 0);
        CHECK(sys.param_count > 0);
        CHECK(sys.time_grid.size() > 0);
    }
    CHECK(lookup_system("lorenz96").state_dim == 25);
    CHECK(lookup_system("lorenz96-100").state_dim == 100);
    CHECK_THROWS_AS(lookup_system("nope"), std::invalid_argument);
}

TEST_CASE("every registered system passes random-point jacobian checks") {
    Rng rng(73);
    for (const char *name : {"lv", "fhn", "fhn-paper", "pt", "lorenz96-6", "lv-m00", "lv-m01",
                             "lv-m10", "lv-m11"}) {
        const ODESystem sys = lookup_system(name);
        for (int trial = 0; trial < 20; ++trial) {
            Vector x(sys.state_dim), theta(sys.param_count);
            for (int i = 0; i < sys.state_dim; ++i) {
                x[i] = sys.x0[i] + rng.uniform(0.1, 1.0);  // stay clear of the PT pole
            }
            for (int p = 0; p < sys.param_count; ++p) {
                const double base = p < sys.theta_true.size() ? sys.theta_true[p] : 1.0;
                theta[p] = base * rng.uniform(0.5, 1.5) + 0.01;
            }
            check_jacobians(sys, x, theta, 2e-5);
        }
    }
}

TEST_CASE("canonical trajectories stay finite") {
    for (const char *name : {"lv", "fhn", "pt", "lorenz96-6"}) {
        const ODESystem sys = lookup_system(name);
        const Matrix traj = integrate(sys, sys.theta_true, sys.x0, sys.time_grid);
        CHECK(traj.allFinite());
    }
}

TEST_SUITE_END();
