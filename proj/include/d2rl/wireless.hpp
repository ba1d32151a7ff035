#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "d2rl/complex_matrix.hpp"
#include "d2rl/rng.hpp"
#include "d2rl/tensor.hpp"

namespace d2rl {

// A point-like reflector producing signal-dependent clutter at the BS.
struct Interferer {
  double angle_rad = 0.0;
  double gain_db = 20.0;  // |beta|^2 / sigma_r^2
};

// How the reference gain rho0 * d^-alpha enters the channel vector.
//   kPower:     |h| = sqrt(rho0 d^-alpha), rho0 d^-alpha is a power gain
//   kAmplitude: |h| = rho0 d^-alpha
enum class GainModel { kPower, kAmplitude };

double dbm_per_hz_to_watts(double dbm);

struct EnvConfig {
  double cell_radius = 300.0;  // m
  double bs_height = 100.0;    // m
  std::size_t num_downlink = 6;
  std::size_t num_uplink = 4;
  std::size_t tx_antennas = 6;
  std::size_t rx_antennas = 6;
  double pathloss_exponent = 3.6;
  double reference_gain = 4.16e-6;
  double noise_downlink = dbm_per_hz_to_watts(-97.0);  // W
  double noise_uplink = dbm_per_hz_to_watts(-97.0);    // W
  double max_bs_power = 3.0;                           // W
  double max_user_power = 1.0;                         // W, same budget for every uplink user
  std::vector<Interferer> interferers = {{-50.0 * std::numbers::pi / 180.0, 20.0},
                                         {20.0 * std::numbers::pi / 180.0, 20.0}};
  double min_radius = 10.0;     // m, inner edge of the placement annulus
  double mobility_step = 1.0;   // m, per-step RMS displacement
  GainModel gain_model = GainModel::kPower;

  void validate() const;
  std::size_t state_width() const;
  std::size_t action_width() const;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct ChannelState {
  std::vector<Position> downlink_positions;
  std::vector<Position> uplink_positions;
  std::vector<ComplexVector> downlink_channels;  // g_k, tx_antennas each
  std::vector<ComplexVector> uplink_channels;    // h_l, rx_antennas each
  ComplexMatrix clutter;                         // G, rx x tx
};

struct NetworkAction {
  std::vector<ComplexVector> receive_beams;   // w_l
  std::vector<ComplexVector> transmit_beams;  // v_k
  std::vector<double> uplink_powers;          // p_l, W
};

struct RateReport {
  std::vector<double> downlink_snr;
  std::vector<double> uplink_sinr;
  double sum_rate = 0.0;  // bits/s/Hz
};

// Unit-norm ULA response with half-wavelength spacing.
ComplexVector steering(double theta, std::size_t n);

// 3-D BS-to-user distance, clamped below at the 1 m reference distance.
double user_distance(const EnvConfig& cfg, Position p);
double user_angle(Position p);
double channel_amplitude(const EnvConfig& cfg, double distance);
ComplexMatrix clutter_matrix(const EnvConfig& cfg);

ChannelState make_channels(const EnvConfig& cfg, std::vector<Position> downlink,
                           std::vector<Position> uplink);
// Uniform placement over the annulus [min_radius, cell_radius].
ChannelState sample_channels(const EnvConfig& cfg, Rng& rng);

std::vector<double> downlink_snr(const ChannelState& s, const NetworkAction& a,
                                 const EnvConfig& cfg);
std::vector<double> uplink_sinr(const ChannelState& s, const NetworkAction& a,
                                const EnvConfig& cfg);
// Throws InfeasibleActionError when a power constraint is violated.
RateReport sum_rate(const ChannelState& s, const NetworkAction& a, const EnvConfig& cfg);

struct ConstraintResidual {
  double bs_power = 0.0;    // max(0, sum ||v_k||^2 - P_max)
  double user_power = 0.0;  // largest violation of 0 <= p_l <= P_l
};
ConstraintResidual constraint_residual(const NetworkAction& a, const EnvConfig& cfg);
bool is_feasible(const NetworkAction& a, const EnvConfig& cfg, double tol = 1e-9);

// Raw layout: [v_1 .. v_K | w_1 .. w_L | p_1 .. p_L], complex entries as
// interleaved (re, im) pairs, users in index order.
NetworkAction project_action(std::span<const double> raw, const EnvConfig& cfg);
// Vector-Jacobian product of encode_action(project_action(raw)).
std::vector<double> project_action_vjp(std::span<const double> raw,
                                       std::span<const double> grad_encoded,
                                       const EnvConfig& cfg);
std::vector<double> encode_action(const NetworkAction& a);
NetworkAction decode_action(std::span<const double> encoded, const EnvConfig& cfg);

// Flattened observation: positions / cell_radius, then g_k and h_l as
// interleaved (re, im) divided by the channel amplitude at d = bs_height.
std::vector<double> encode_state(const ChannelState& s, const EnvConfig& cfg);

// Move users one step (Gaussian random walk reflected at the annulus edges)
// and rebuild channels from the new positions.
ChannelState move_users(const ChannelState& s, const EnvConfig& cfg, Rng& rng);

// Rates are evaluated on the pre-move state.
std::pair<ChannelState, RateReport> env_step(const ChannelState& s, const NetworkAction& a,
                                             const EnvConfig& cfg, Rng& rng);

}  // namespace d2rl
