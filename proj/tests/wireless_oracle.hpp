#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "d2rl/wireless.hpp"

// Independent transcription of the channel, clutter and rate formulas using
// explicit loops and the covariance form of the clutter term. Shares no code
// with the library beyond the plain data types.
namespace d2rl::oracle {

using C = std::complex<double>;
using Vec = std::vector<C>;
using Mat = std::vector<Vec>;

inline Vec steer(double theta, std::size_t n) {
  Vec a(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double ph = std::numbers::pi * static_cast<double>(m) * std::sin(theta);
    a[m] = C(std::cos(ph), std::sin(ph)) / std::sqrt(static_cast<double>(n));
  }
  return a;
}

inline Mat clutter(const EnvConfig& cfg) {
  Mat g(cfg.rx_antennas, Vec(cfg.tx_antennas));
  for (const auto& f : cfg.interferers) {
    const double beta = std::sqrt(std::pow(10.0, f.gain_db / 10.0) * cfg.noise_uplink);
    const Vec ar = steer(f.angle_rad, cfg.rx_antennas);
    const Vec at = steer(f.angle_rad, cfg.tx_antennas);
    for (std::size_t r = 0; r < cfg.rx_antennas; ++r) {
      for (std::size_t c = 0; c < cfg.tx_antennas; ++c) g[r][c] += beta * ar[r] * std::conj(at[c]);
    }
  }
  return g;
}

// sum_{k} |g_k^H v_k|^2 / s2 rates plus uplink SINR with the clutter term
// written as w^H G Q G^H w, Q = sum_k v_k v_k^H.
inline double sum_rate(const ChannelState& s, const NetworkAction& a, const EnvConfig& cfg) {
  double total = 0.0;
  for (std::size_t k = 0; k < cfg.num_downlink; ++k) {
    C ip = 0.0;
    for (std::size_t m = 0; m < cfg.tx_antennas; ++m) {
      ip += std::conj(s.downlink_channels[k][m]) * a.transmit_beams[k][m];
    }
    total += std::log2(1.0 + std::norm(ip) / cfg.noise_downlink);
  }
  const Mat g = clutter(cfg);
  const std::size_t nt = cfg.tx_antennas, nr = cfg.rx_antennas;
  Mat q(nt, Vec(nt));
  for (const auto& v : a.transmit_beams) {
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nt; ++j) q[i][j] += v[i] * std::conj(v[j]);
    }
  }
  // R = G Q G^H
  Mat gq(nr, Vec(nt));
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      for (std::size_t k = 0; k < nt; ++k) gq[i][j] += g[i][k] * q[k][j];
    }
  }
  Mat r(nr, Vec(nr));
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      for (std::size_t k = 0; k < nt; ++k) r[i][j] += gq[i][k] * std::conj(g[j][k]);
    }
  }
  for (std::size_t l = 0; l < cfg.num_uplink; ++l) {
    const Vec& w = a.receive_beams[l];
    auto wh = [&](const Vec& h) {
      C acc = 0.0;
      for (std::size_t m = 0; m < nr; ++m) acc += std::conj(w[m]) * h[m];
      return std::norm(acc);
    };
    const double signal = a.uplink_powers[l] * wh(s.uplink_channels[l]);
    double denom = 0.0;
    for (std::size_t j = 0; j < cfg.num_uplink; ++j) {
      if (j != l) denom += a.uplink_powers[j] * wh(s.uplink_channels[j]);
    }
    C quad = 0.0;
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t j = 0; j < nr; ++j) quad += std::conj(w[i]) * r[i][j] * w[j];
    }
    double wn = 0.0;
    for (const auto& c : w) wn += std::norm(c);
    denom += quad.real() + cfg.noise_uplink * wn;
    total += std::log2(1.0 + signal / denom);
  }
  return total;
}

}  // namespace d2rl::oracle
