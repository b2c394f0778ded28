#pragma once

#include <array>

#include <nlohmann/json_fwd.hpp>

namespace minto {

struct CartPoleSpec {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_pole_length = 0.5;  // m
  double force_mag = 10.0;        // N
  double timestep = 0.02;         // s
  double theta_threshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;  // rad
  double x_threshold = 2.4;                                              // m
  int max_episode_steps = 200;
};

/// (x, x_dot, theta, theta_dot)
using CartPoleState = std::array<double, 4>;

struct CartPoleStep {
  CartPoleState next;
  double reward;
  bool terminal;
};

/// Accelerations (x_acc, theta_acc) of the frictionless cart-pole for a given
/// horizontal force.
std::array<double, 2> cartpole_accelerations(const CartPoleSpec& spec, const CartPoleState& s, double force);

/// Explicit Euler step over spec.timestep. Action 0 pushes left, 1 pushes
/// right. Reward is 1 when the resulting state is inside the thresholds and 0
/// on the failing step. NaN states throw.
CartPoleStep cartpole_step(const CartPoleSpec& spec, const CartPoleState& state, int action);

bool cartpole_failed(const CartPoleSpec& spec, const CartPoleState& s);

/// Fixed standardization used for network inputs.
std::array<double, 4> cartpole_features(const CartPoleState& s);

CartPoleSpec cartpole_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const CartPoleSpec& spec);

}  // namespace minto
