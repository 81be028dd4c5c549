#include "odin/ode_models.hpp"

#include <cmath>

namespace odin {

namespace {

Vector linspace(double lo, double hi, int n) {
    Vector t(n);
    for (int i = 0; i < n; ++i) t[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return t;
}

constexpr double kPtPoleGuard = 1e-12;

}  // namespace

ODESystem lotka_volterra() {
    ODESystem sys;
    sys.name = "lv";
    sys.state_dim = 2;
    sys.param_count = 4;
    sys.f = [](const Vector &x, const Vector &th) {
        Vector out(2);
        out[0] = th[0] * x[0] - th[1] * x[0] * x[1];
        out[1] = -th[2] * x[1] + th[3] * x[0] * x[1];
        return out;
    };
    sys.jac_x = [](const Vector &x, const Vector &th) {
        Matrix j(2, 2);
        j << th[0] - th[1] * x[1], -th[1] * x[0], th[3] * x[1], -th[2] + th[3] * x[0];
        return j;
    };
    sys.jac_theta = [](const Vector &x, const Vector &) {
        Matrix j = Matrix::Zero(2, 4);
        j(0, 0) = x[0];
        j(0, 1) = -x[0] * x[1];
        j(1, 2) = -x[1];
        j(1, 3) = x[0] * x[1];
        return j;
    };
    sys.theta_true = Vector(4);
    sys.theta_true << 2, 1, 4, 1;
    sys.x0 = Vector(2);
    sys.x0 << 5, 3;
    sys.time_grid = linspace(0.0, 2.0, 20);
    sys.noise_low = {NoiseMode::AbsoluteSigma, 0.1};
    sys.noise_high = {NoiseMode::AbsoluteSigma, 0.5};
    return sys;
}

ODESystem fitzhugh_nagumo(FhnSignConvention convention) {
    ODESystem sys;
    sys.name = (convention == FhnSignConvention::Paper) ? "fhn-paper" : "fhn";
    sys.state_dim = 2;
    sys.param_count = 3;
    if (convention == FhnSignConvention::Paper) {
        // literal transcription: V' = th1(V - V^3/3 + R), R' = (V - th2 + th3 R)/th1.
        // With the canonical theta this relaxes to a fixed point instead of the
        // documented limit cycle; kept for fidelity checks only.
        sys.f = [](const Vector &x, const Vector &th) {
            Vector out(2);
            const double v = x[0], r = x[1];
            out[0] = th[0] * (v - v * v * v / 3.0 + r);
            out[1] = (v - th[1] + th[2] * r) / th[0];
            return out;
        };
        sys.jac_x = [](const Vector &x, const Vector &th) {
            Matrix j(2, 2);
            const double v = x[0];
            j << th[0] * (1.0 - v * v), th[0], 1.0 / th[0], th[2] / th[0];
            return j;
        };
        sys.jac_theta = [](const Vector &x, const Vector &th) {
            Matrix j = Matrix::Zero(2, 3);
            const double v = x[0], r = x[1];
            j(0, 0) = v - v * v * v / 3.0 + r;
            j(1, 0) = -(v - th[1] + th[2] * r) / (th[0] * th[0]);
            j(1, 1) = -1.0 / th[0];
            j(1, 2) = r / th[0];
            return j;
        };
    } else {
        // classic oscillatory form: V' = th3(V - V^3/3 + R),
        // R' = -(V - th1 + th2 R)/th3. With theta = [0.2, 0.2, 3] this sits on
        // the stable relaxation-oscillation limit cycle the benchmark assumes.
        sys.f = [](const Vector &x, const Vector &th) {
            Vector out(2);
            const double v = x[0], r = x[1];
            out[0] = th[2] * (v - v * v * v / 3.0 + r);
            out[1] = -(v - th[0] + th[1] * r) / th[2];
            return out;
        };
        sys.jac_x = [](const Vector &x, const Vector &th) {
            Matrix j(2, 2);
            const double v = x[0];
            j << th[2] * (1.0 - v * v), th[2], -1.0 / th[2], -th[1] / th[2];
            return j;
        };
        sys.jac_theta = [](const Vector &x, const Vector &th) {
            Matrix j = Matrix::Zero(2, 3);
            const double v = x[0], r = x[1];
            j(0, 2) = v - v * v * v / 3.0 + r;
            j(1, 0) = 1.0 / th[2];
            j(1, 1) = -r / th[2];
            j(1, 2) = (v - th[0] + th[1] * r) / (th[2] * th[2]);
            return j;
        };
    }
    sys.theta_true = Vector(3);
    sys.theta_true << 0.2, 0.2, 3.0;
    sys.x0 = Vector(2);
    sys.x0 << -1, 1;
    sys.time_grid = linspace(0.0, 10.0, 20);
    sys.noise_low = {NoiseMode::Snr, 100.0};
    sys.noise_high = {NoiseMode::Snr, 10.0};
    return sys;
}

ODESystem protein_transduction() {
    ODESystem sys;
    sys.name = "pt";
    sys.state_dim = 5;
    sys.param_count = 6;
    // states: S, dS, R, R_S, R_pp
    sys.f = [](const Vector &x, const Vector &th) {
        const double denom = th[5] + x[4];
        if (denom <= kPtPoleGuard) throw DomainError("protein transduction: theta6 + R_pp pole");
        const double g = x[4] / denom;
        Vector out(5);
        out[0] = -th[0] * x[0] - th[1] * x[0] * x[2] + th[2] * x[3];
        out[1] = th[0] * x[0];
        out[2] = -th[1] * x[0] * x[2] + th[2] * x[3] + th[4] * g;
        out[3] = th[1] * x[0] * x[2] - th[2] * x[3] - th[3] * x[3];
        out[4] = th[3] * x[3] - th[4] * g;
        return out;
    };
    sys.jac_x = [](const Vector &x, const Vector &th) {
        const double denom = th[5] + x[4];
        if (denom <= kPtPoleGuard) throw DomainError("protein transduction: theta6 + R_pp pole");
        const double dg = th[5] / (denom * denom);
        Matrix j = Matrix::Zero(5, 5);
        j(0, 0) = -th[0] - th[1] * x[2];
        j(0, 2) = -th[1] * x[0];
        j(0, 3) = th[2];
        j(1, 0) = th[0];
        j(2, 0) = -th[1] * x[2];
        j(2, 2) = -th[1] * x[0];
        j(2, 3) = th[2];
        j(2, 4) = th[4] * dg;
        j(3, 0) = th[1] * x[2];
        j(3, 2) = th[1] * x[0];
        j(3, 3) = -th[2] - th[3];
        j(4, 3) = th[3];
        j(4, 4) = -th[4] * dg;
        return j;
    };
    sys.jac_theta = [](const Vector &x, const Vector &th) {
        const double denom = th[5] + x[4];
        if (denom <= kPtPoleGuard) throw DomainError("protein transduction: theta6 + R_pp pole");
        const double g = x[4] / denom;
        const double dg_dth6 = -x[4] / (denom * denom);
        Matrix j = Matrix::Zero(5, 6);
        j(0, 0) = -x[0];
        j(0, 1) = -x[0] * x[2];
        j(0, 2) = x[3];
        j(1, 0) = x[0];
        j(2, 1) = -x[0] * x[2];
        j(2, 2) = x[3];
        j(2, 4) = g;
        j(2, 5) = th[4] * dg_dth6;
        j(3, 1) = x[0] * x[2];
        j(3, 2) = -x[3];
        j(3, 3) = -x[3];
        j(4, 3) = x[3];
        j(4, 4) = -g;
        j(4, 5) = -th[4] * dg_dth6;
        return j;
    };
    sys.theta_true = Vector(6);
    sys.theta_true << 0.07, 0.6, 0.05, 0.3, 0.017, 0.3;
    sys.x0 = Vector(5);
    sys.x0 << 1, 0, 1, 0, 0;
    sys.time_grid = Vector(15);
    sys.time_grid << 0, 1, 2, 4, 5, 7, 10, 15, 20, 30, 40, 50, 60, 80, 100;
    sys.noise_low = {NoiseMode::AbsoluteSigma, 0.001};
    sys.noise_high = {NoiseMode::AbsoluteSigma, 0.01};
    return sys;
}

ODESystem lorenz96(int dim) {
    if (dim < 4) throw std::invalid_argument("lorenz96 requires dimension >= 4");
    ODESystem sys;
    sys.name = "lorenz96-" + std::to_string(dim);
    sys.state_dim = dim;
    sys.param_count = 1;
    auto wrap = [dim](int i) { return ((i % dim) + dim) % dim; };
    sys.f = [dim, wrap](const Vector &x, const Vector &th) {
        Vector out(dim);
        for (int k = 0; k < dim; ++k) {
            out[k] = (x[wrap(k + 1)] - x[wrap(k - 2)]) * x[wrap(k - 1)] - x[k] + th[0];
        }
        return out;
    };
    sys.jac_x = [dim, wrap](const Vector &x, const Vector &) {
        Matrix j = Matrix::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) {
            // accumulate: neighbor indices can coincide for small dim
            j(k, wrap(k + 1)) += x[wrap(k - 1)];
            j(k, wrap(k - 2)) += -x[wrap(k - 1)];
            j(k, wrap(k - 1)) += x[wrap(k + 1)] - x[wrap(k - 2)];
            j(k, k) += -1.0;
        }
        return j;
    };
    sys.jac_theta = [dim](const Vector &, const Vector &) { return Matrix::Ones(dim, 1); };
    sys.theta_true = Vector::Constant(1, 8.0);
    // nudge one coordinate off the homogeneous equilibrium to excite the dynamics
    sys.x0 = Vector::Constant(dim, 8.0);
    sys.x0[0] += 0.01;
    sys.time_grid = linspace(0.0, 5.0, 50);
    sys.noise_low = {NoiseMode::AbsoluteSigma, 1.0};
    sys.noise_high = {NoiseMode::AbsoluteSigma, 1.0};
    return sys;
}

ODESystem lv_misspecified(int i, int j) {
    if ((i != 0 && i != 1) || (j != 0 && j != 1)) {
        throw std::invalid_argument("lv_misspecified indices must be 0 or 1");
    }
    // parameter layout: state-1 equation params first, then state-2 params
    const int p1 = 2;  // both forms of the first equation take two parameters
    const int p2 = (j == 1) ? 2 : 1;

    ODESystem sys;
    sys.name = "lv-m" + std::to_string(i) + std::to_string(j);
    sys.state_dim = 2;
    sys.param_count = p1 + p2;
    sys.f = [i, j, p1](const Vector &x, const Vector &th) {
        Vector out(2);
        out[0] = (i == 1) ? th[0] * x[0] - th[1] * x[0] * x[1]
                          : th[0] * x[0] * x[0] + th[1] * x[1];
        out[1] = (j == 1) ? -th[p1] * x[1] + th[p1 + 1] * x[0] * x[1] : -th[p1] * x[1];
        return out;
    };
    sys.jac_x = [i, j, p1](const Vector &x, const Vector &th) {
        Matrix m = Matrix::Zero(2, 2);
        if (i == 1) {
            m(0, 0) = th[0] - th[1] * x[1];
            m(0, 1) = -th[1] * x[0];
        } else {
            m(0, 0) = 2.0 * th[0] * x[0];
            m(0, 1) = th[1];
        }
        if (j == 1) {
            m(1, 0) = th[p1 + 1] * x[1];
            m(1, 1) = -th[p1] + th[p1 + 1] * x[0];
        } else {
            m(1, 1) = -th[p1];
        }
        return m;
    };
    sys.jac_theta = [i, j, p1, p2](const Vector &x, const Vector &) {
        Matrix m = Matrix::Zero(2, p1 + p2);
        if (i == 1) {
            m(0, 0) = x[0];
            m(0, 1) = -x[0] * x[1];
        } else {
            m(0, 0) = x[0] * x[0];
            m(0, 1) = x[1];
        }
        if (j == 1) {
            m(1, p1) = -x[1];
            m(1, p1 + 1) = x[0] * x[1];
        } else {
            m(1, p1) = -x[1];
        }
        return m;
    };
    // ground-truth parameters only exist for the correct sub-equations
    sys.theta_true = Vector::Ones(sys.param_count);
    if (i == 1) {
        sys.theta_true[0] = 2;
        sys.theta_true[1] = 1;
    }
    if (j == 1) {
        sys.theta_true[p1] = 4;
        sys.theta_true[p1 + 1] = 1;
    }
    const ODESystem lv = lotka_volterra();
    sys.x0 = lv.x0;
    sys.time_grid = lv.time_grid;
    sys.noise_low = lv.noise_low;
    sys.noise_high = lv.noise_high;
    return sys;
}

ODESystem lookup_system(const std::string &name) {
    if (name == "lv") return lotka_volterra();
    if (name == "fhn") return fitzhugh_nagumo();
    if (name == "fhn-paper") return fitzhugh_nagumo(FhnSignConvention::Paper);
    if (name == "pt") return protein_transduction();
    if (name == "lorenz96") return lorenz96(25);
    if (name.rfind("lorenz96-", 0) == 0) return lorenz96(std::stoi(name.substr(9)));
    if (name == "lv-m00") return lv_misspecified(0, 0);
    if (name == "lv-m01") return lv_misspecified(0, 1);
    if (name == "lv-m10") return lv_misspecified(1, 0);
    if (name == "lv-m11") return lv_misspecified(1, 1);
    throw std::invalid_argument("unknown system: " + name);
}

}  // namespace odin
