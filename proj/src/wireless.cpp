#include "d2rl/wireless.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "d2rl/errors.hpp"

namespace d2rl {

double dbm_per_hz_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

void EnvConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid environment: " + what);
  };
  require(cell_radius > 0.0, "cell_radius must be > 0");
  require(bs_height >= 0.0, "bs_height must be >= 0");
  require(min_radius >= 0.0 && min_radius < cell_radius, "min_radius must lie in [0, cell_radius)");
  require(num_downlink >= 1 && num_uplink >= 1, "user counts must be >= 1");
  require(tx_antennas >= 1 && rx_antennas >= 1, "antenna counts must be >= 1");
  require(pathloss_exponent > 2.0, "pathloss_exponent must be > 2");
  require(reference_gain > 0.0, "reference_gain must be > 0");
  require(noise_downlink > 0.0 && noise_uplink > 0.0, "noise powers must be > 0");
  require(max_bs_power > 0.0 && max_user_power > 0.0, "power budgets must be > 0");
  require(mobility_step >= 0.0, "mobility_step must be >= 0");
}

std::size_t EnvConfig::state_width() const {
  return 2 * (num_downlink + num_uplink) + 2 * tx_antennas * num_downlink +
         2 * rx_antennas * num_uplink;
}

std::size_t EnvConfig::action_width() const {
  return 2 * tx_antennas * num_downlink + 2 * rx_antennas * num_uplink + num_uplink;
}

ComplexVector steering(double theta, std::size_t n) {
  ComplexVector a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double phase = std::numbers::pi * std::sin(theta);
  for (std::size_t m = 0; m < n; ++m) a[m] = std::polar(scale, phase * static_cast<double>(m));
  return a;
}

double user_distance(const EnvConfig& cfg, Position p) {
  const double d = std::sqrt(p.x * p.x + p.y * p.y + cfg.bs_height * cfg.bs_height);
  return std::max(d, 1.0);
}

double user_angle(Position p) { return std::atan2(p.y, p.x); }

double channel_amplitude(const EnvConfig& cfg, double distance) {
  const double gain = cfg.reference_gain * std::pow(distance, -cfg.pathloss_exponent);
  return cfg.gain_model == GainModel::kPower ? std::sqrt(gain) : gain;
}

ComplexMatrix clutter_matrix(const EnvConfig& cfg) {
  ComplexMatrix g(cfg.rx_antennas, cfg.tx_antennas);
  for (const auto& f : cfg.interferers) {
    const double beta = std::sqrt(std::pow(10.0, f.gain_db / 10.0) * cfg.noise_uplink);
    ComplexMatrix term = ComplexMatrix::outer(steering(f.angle_rad, cfg.rx_antennas),
                                              steering(f.angle_rad, cfg.tx_antennas));
    term *= beta;
    g += term;
  }
  return g;
}

namespace {

ComplexVector user_channel(const EnvConfig& cfg, Position p, std::size_t antennas) {
  ComplexVector a = steering(user_angle(p), antennas);
  const double amp = channel_amplitude(cfg, user_distance(cfg, p));
  for (auto& v : a) v *= amp;
  return a;
}

Position sample_annulus(const EnvConfig& cfg, Rng& rng) {
  const double r2 = rng.uniform(cfg.min_radius * cfg.min_radius, cfg.cell_radius * cfg.cell_radius);
  const double r = std::sqrt(r2);
  const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return {r * std::cos(phi), r * std::sin(phi)};
}

Position reflect(const EnvConfig& cfg, Position p) {
  double r = std::hypot(p.x, p.y);
  double target = r;
  if (r > cfg.cell_radius) target = 2.0 * cfg.cell_radius - r;
  if (target < cfg.min_radius) target = 2.0 * cfg.min_radius - target;
  target = std::clamp(target, cfg.min_radius, cfg.cell_radius);
  if (r == 0.0) return {target, 0.0};
  return {p.x * target / r, p.y * target / r};
}

void check_action_shape(const NetworkAction& a, const EnvConfig& cfg) {
  bool ok = a.transmit_beams.size() == cfg.num_downlink &&
            a.receive_beams.size() == cfg.num_uplink &&
            a.uplink_powers.size() == cfg.num_uplink;
  for (const auto& v : a.transmit_beams) ok = ok && v.size() == cfg.tx_antennas;
  for (const auto& w : a.receive_beams) ok = ok && w.size() == cfg.rx_antennas;
  if (!ok) throw ShapeError("action dimensions do not match environment");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ChannelState make_channels(const EnvConfig& cfg, std::vector<Position> downlink,
                           std::vector<Position> uplink) {
  if (downlink.size() != cfg.num_downlink || uplink.size() != cfg.num_uplink) {
    throw ShapeError("position counts do not match user counts");
  }
  ChannelState s;
  for (const auto& p : downlink) s.downlink_channels.push_back(user_channel(cfg, p, cfg.tx_antennas));
  for (const auto& p : uplink) s.uplink_channels.push_back(user_channel(cfg, p, cfg.rx_antennas));
  s.downlink_positions = std::move(downlink);
  s.uplink_positions = std::move(uplink);
  s.clutter = clutter_matrix(cfg);
  return s;
}

ChannelState sample_channels(const EnvConfig& cfg, Rng& rng) {
  std::vector<Position> dl(cfg.num_downlink);
  std::vector<Position> ul(cfg.num_uplink);
  for (auto& p : dl) p = sample_annulus(cfg, rng);
  for (auto& p : ul) p = sample_annulus(cfg, rng);
  return make_channels(cfg, std::move(dl), std::move(ul));
}

std::vector<double> downlink_snr(const ChannelState& s, const NetworkAction& a,
                                 const EnvConfig& cfg) {
  check_action_shape(a, cfg);
  std::vector<double> snr(cfg.num_downlink);
  for (std::size_t k = 0; k < cfg.num_downlink; ++k) {
    snr[k] = std::norm(inner(s.downlink_channels[k], a.transmit_beams[k])) / cfg.noise_downlink;
  }
  return snr;
}

std::vector<double> uplink_sinr(const ChannelState& s, const NetworkAction& a,
                                const EnvConfig& cfg) {
  check_action_shape(a, cfg);
  // w^H G Q G^H w = sum_k |w^H G v_k|^2, so G v_k is formed once per beam.
  std::vector<ComplexVector> clutter_beams;
  for (const auto& v : a.transmit_beams) clutter_beams.push_back(matvec(s.clutter, v));

  std::vector<double> sinr(cfg.num_uplink);
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) {
    const ComplexVector& w = a.receive_beams[l];
    const double signal = a.uplink_powers[l] * std::norm(inner(w, s.uplink_channels[l]));
    double interference = cfg.noise_uplink * squared_norm(w);
    for (std::size_t j = 0; j < cfg.num_uplink; ++j) {
      if (j == l) continue;
      interference += a.uplink_powers[j] * std::norm(inner(w, s.uplink_channels[j]));
    }
    for (const auto& gv : clutter_beams) interference += std::norm(inner(w, gv));
    sinr[l] = signal / interference;
  }
  return sinr;
}

ConstraintResidual constraint_residual(const NetworkAction& a, const EnvConfig& cfg) {
  ConstraintResidual r;
  double total = 0.0;
  for (const auto& v : a.transmit_beams) total += squared_norm(v);
  r.bs_power = std::max(0.0, total - cfg.max_bs_power);
  for (double p : a.uplink_powers) {
    r.user_power = std::max({r.user_power, -p, p - cfg.max_user_power});
  }
  return r;
}

bool is_feasible(const NetworkAction& a, const EnvConfig& cfg, double tol) {
  const auto r = constraint_residual(a, cfg);
  return r.bs_power <= tol && r.user_power <= tol;
}

RateReport sum_rate(const ChannelState& s, const NetworkAction& a, const EnvConfig& cfg) {
  if (!is_feasible(a, cfg)) throw InfeasibleActionError("sum_rate: action violates a power constraint");
  RateReport report;
  report.downlink_snr = downlink_snr(s, a, cfg);
  report.uplink_sinr = uplink_sinr(s, a, cfg);
  for (double g : report.uplink_sinr) report.sum_rate += std::log2(1.0 + g);
  for (double g : report.downlink_snr) report.sum_rate += std::log2(1.0 + g);
  return report;
}

NetworkAction project_action(std::span<const double> raw, const EnvConfig& cfg) {
  if (raw.size() != cfg.action_width()) {
    throw ShapeError("project_action: expected width " + std::to_string(cfg.action_width()) +
                     ", got " + std::to_string(raw.size()));
  }
  NetworkAction a;
  std::size_t pos = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < cfg.num_downlink; ++k) {
    ComplexVector v(cfg.tx_antennas);
    for (auto& c : v) {
      c = {raw[pos], raw[pos + 1]};
      pos += 2;
    }
    total += squared_norm(v);
    a.transmit_beams.push_back(std::move(v));
  }
  if (total > cfg.max_bs_power) {
    const double scale = std::sqrt(cfg.max_bs_power / total);
    for (auto& v : a.transmit_beams) {
      for (auto& c : v) c *= scale;
    }
  }
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) {
    ComplexVector w(cfg.rx_antennas);
    for (auto& c : w) {
      c = {raw[pos], raw[pos + 1]};
      pos += 2;
    }
    const double norm = std::sqrt(squared_norm(w));
    if (norm < 1e-12) {
      std::fill(w.begin(), w.end(), Complex{});
      w[0] = 1.0;
    } else {
      for (auto& c : w) c /= norm;
    }
    a.receive_beams.push_back(std::move(w));
  }
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) {
    a.uplink_powers.push_back(cfg.max_user_power * sigmoid(raw[pos++]));
  }
  return a;
}

std::vector<double> project_action_vjp(std::span<const double> raw,
                                       std::span<const double> grad_encoded,
                                       const EnvConfig& cfg) {
  if (raw.size() != cfg.action_width() || grad_encoded.size() != cfg.action_width()) {
    throw ShapeError("project_action_vjp: width mismatch");
  }
  std::vector<double> grad(raw.size(), 0.0);
  const std::size_t v_len = 2 * cfg.tx_antennas * cfg.num_downlink;

  // Radial projection onto the power ball: identity inside, s * (I - x x^T / |x|^2) outside.
  double total = 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < v_len; ++i) {
    total += raw[i] * raw[i];
    dot += raw[i] * grad_encoded[i];
  }
  if (total > cfg.max_bs_power) {
    const double s = std::sqrt(cfg.max_bs_power / total);
    for (std::size_t i = 0; i < v_len; ++i) grad[i] = s * (grad_encoded[i] - raw[i] * dot / total);
  } else {
    for (std::size_t i = 0; i < v_len; ++i) grad[i] = grad_encoded[i];
  }

  // Normalisation: (I - y y^T) / |x| per receive beam.
  std::size_t pos = v_len;
  const std::size_t w_len = 2 * cfg.rx_antennas;
  for (std::size_t l = 0; l < cfg.num_uplink; ++l, pos += w_len) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < w_len; ++i) norm2 += raw[pos + i] * raw[pos + i];
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) continue;
    double ydot = 0.0;
    for (std::size_t i = 0; i < w_len; ++i) ydot += raw[pos + i] / norm * grad_encoded[pos + i];
    for (std::size_t i = 0; i < w_len; ++i) {
      grad[pos + i] = (grad_encoded[pos + i] - raw[pos + i] / norm * ydot) / norm;
    }
  }

  for (std::size_t l = 0; l < cfg.num_uplink; ++l, ++pos) {
    const double sg = sigmoid(raw[pos]);
    grad[pos] = cfg.max_user_power * sg * (1.0 - sg) * grad_encoded[pos];
  }
  return grad;
}

std::vector<double> encode_action(const NetworkAction& a) {
  std::vector<double> out;
  for (const auto& v : a.transmit_beams) {
    for (const auto& c : v) {
      out.push_back(c.real());
      out.push_back(c.imag());
    }
  }
  for (const auto& w : a.receive_beams) {
    for (const auto& c : w) {
      out.push_back(c.real());
      out.push_back(c.imag());
    }
  }
  out.insert(out.end(), a.uplink_powers.begin(), a.uplink_powers.end());
  return out;
}

NetworkAction decode_action(std::span<const double> encoded, const EnvConfig& cfg) {
  if (encoded.size() != cfg.action_width()) throw ShapeError("decode_action: width mismatch");
  NetworkAction a;
  std::size_t pos = 0;
  auto take = [&](std::size_t n) {
    ComplexVector v(n);
    for (auto& c : v) {
      c = {encoded[pos], encoded[pos + 1]};
      pos += 2;
    }
    return v;
  };
  for (std::size_t k = 0; k < cfg.num_downlink; ++k) a.transmit_beams.push_back(take(cfg.tx_antennas));
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) a.receive_beams.push_back(take(cfg.rx_antennas));
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) a.uplink_powers.push_back(encoded[pos++]);
  return a;
}

std::vector<double> encode_state(const ChannelState& s, const EnvConfig& cfg) {
  std::vector<double> out;
  out.reserve(cfg.state_width());
  for (const auto& p : s.downlink_positions) {
    out.push_back(p.x / cfg.cell_radius);
    out.push_back(p.y / cfg.cell_radius);
  }
  for (const auto& p : s.uplink_positions) {
    out.push_back(p.x / cfg.cell_radius);
    out.push_back(p.y / cfg.cell_radius);
  }
  const double ref = channel_amplitude(cfg, std::max(cfg.bs_height, 1.0));
  auto push_channel = [&](const ComplexVector& v) {
    for (const auto& c : v) {
      out.push_back(c.real() / ref);
      out.push_back(c.imag() / ref);
    }
  };
  for (const auto& g : s.downlink_channels) push_channel(g);
  for (const auto& h : s.uplink_channels) push_channel(h);
  return out;
}

ChannelState move_users(const ChannelState& s, const EnvConfig& cfg, Rng& rng) {
  const double sigma = cfg.mobility_step / std::sqrt(2.0);
  auto step = [&](Position p) {
    const double dx = sigma * rng.normal();
    const double dy = sigma * rng.normal();
    if (cfg.mobility_step == 0.0) return p;
    return reflect(cfg, {p.x + dx, p.y + dy});
  };
  std::vector<Position> dl;
  std::vector<Position> ul;
  for (const auto& p : s.downlink_positions) dl.push_back(step(p));
  for (const auto& p : s.uplink_positions) ul.push_back(step(p));
  return make_channels(cfg, std::move(dl), std::move(ul));
}

std::pair<ChannelState, RateReport> env_step(const ChannelState& s, const NetworkAction& a,
                                             const EnvConfig& cfg, Rng& rng) {
  RateReport report = sum_rate(s, a, cfg);
  return {move_users(s, cfg, rng), std::move(report)};
}

}  // namespace d2rl
