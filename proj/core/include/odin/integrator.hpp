#pragma once

#include "odin/ode_models.hpp"

namespace odin {

struct IntegratorSettings {
    double rtol = 1e-8;
    double atol = 1e-10;
    std::size_t max_steps = 1'000'000;
};

/// Step-size underflow or step budget exhaustion; carries the last time the
/// integration had reached.
class IntegrationError : public NumericalError {
  public:
    IntegrationError(const std::string &what, double last_good_time)
        : NumericalError(what), last_good_time_(last_good_time) {}
    double last_good_time() const { return last_good_time_; }

  private:
    double last_good_time_;
};

/// Adaptive Dormand-Prince 5(4) sampled at t_out; row i is the state at
/// t_out[i]. t_out must be increasing and t_out[0] is taken as the initial
/// time (so row 0 equals x0 exactly).
Matrix integrate(const ODESystem &system, const Vector &theta, const Vector &x0,
                 const Vector &t_out, const IntegratorSettings &settings = {});

}  // namespace odin
