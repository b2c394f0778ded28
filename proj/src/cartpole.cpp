#include "minto/cartpole.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "minto/error.hpp"

namespace minto {

std::array<double, 2> cartpole_accelerations(const CartPoleSpec& spec, const CartPoleState& s, double force) {
  const double total_mass = spec.cart_mass + spec.pole_mass;
  const double pole_mass_length = spec.pole_mass * spec.half_pole_length;
  const double cos_t = std::cos(s[2]);
  const double sin_t = std::sin(s[2]);
  const double temp = (force + pole_mass_length * s[3] * s[3] * sin_t) / total_mass;
  const double theta_acc = (spec.gravity * sin_t - cos_t * temp) /
                           (spec.half_pole_length * (4.0 / 3.0 - spec.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
  return {x_acc, theta_acc};
}

bool cartpole_failed(const CartPoleSpec& spec, const CartPoleState& s) {
  return s[0] < -spec.x_threshold || s[0] > spec.x_threshold || s[2] < -spec.theta_threshold ||
         s[2] > spec.theta_threshold;
}

CartPoleStep cartpole_step(const CartPoleSpec& spec, const CartPoleState& state, int action) {
  for (double v : state) {
    if (std::isnan(v)) throw ContractError("cartpole_step: NaN in state");
  }
  require(action == 0 || action == 1, "cartpole_step: action must be 0 or 1");
  const double force = action == 1 ? spec.force_mag : -spec.force_mag;
  const auto [x_acc, theta_acc] = cartpole_accelerations(spec, state, force);
  const double tau = spec.timestep;
  CartPoleState next{state[0] + tau * state[1], state[1] + tau * x_acc, state[2] + tau * state[3],
                     state[3] + tau * theta_acc};
  const bool failed = cartpole_failed(spec, next);
  return {next, failed ? 0.0 : 1.0, failed};
}

std::array<double, 4> cartpole_features(const CartPoleState& s) {
  return {s[0] / 2.4, s[1] / 2.0, s[2] / 0.21, s[3] / 2.0};
}

CartPoleSpec cartpole_spec_from_json(const nlohmann::json& j) {
  CartPoleSpec s;
  s.gravity = j.value("gravity", s.gravity);
  s.cart_mass = j.value("cart_mass", s.cart_mass);
  s.pole_mass = j.value("pole_mass", s.pole_mass);
  s.half_pole_length = j.value("half_pole_length", s.half_pole_length);
  s.force_mag = j.value("force_mag", s.force_mag);
  s.timestep = j.value("timestep", s.timestep);
  s.theta_threshold = j.value("theta_threshold", s.theta_threshold);
  s.x_threshold = j.value("x_threshold", s.x_threshold);
  s.max_episode_steps = j.value("max_episode_steps", s.max_episode_steps);
  return s;
}

void to_json(nlohmann::json& j, const CartPoleSpec& spec) {
  j = {{"type", "cartpole"},
       {"gravity", spec.gravity},
       {"cart_mass", spec.cart_mass},
       {"pole_mass", spec.pole_mass},
       {"half_pole_length", spec.half_pole_length},
       {"force_mag", spec.force_mag},
       {"timestep", spec.timestep},
       {"theta_threshold", spec.theta_threshold},
       {"x_threshold", spec.x_threshold},
       {"max_episode_steps", spec.max_episode_steps}};
}

}  // namespace minto
