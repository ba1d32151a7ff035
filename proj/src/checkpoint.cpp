#include "d2rl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "d2rl/errors.hpp"

namespace d2rl {

namespace {

void write_array(std::ostream& out, const char* tag, const std::vector<double>& v) {
  out << tag << ' ' << v.size();
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, " %a", x);
    out << buf;
  }
  out << '\n';
}

void read_array(std::istream& in, const char* tag, std::vector<double>& v) {
  std::string got;
  std::size_t n = 0;
  in >> got >> n;
  if (got != tag || n != v.size()) {
    throw StateError(std::string("checkpoint: expected ") + tag + " of length " +
                     std::to_string(v.size()));
  }
  std::string tok;
  for (auto& x : v) {
    in >> tok;
    x = std::strtod(tok.c_str(), nullptr);
  }
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  in >> got;
  if (got != word) throw StateError("checkpoint: expected '" + word + "', found '" + got + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Agent& agent, const Rng& rng,
                     std::size_t epoch) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << "d2rl-checkpoint " << kCheckpointVersion << '\n';
  out << "epoch " << epoch << '\n';
  const auto& ex = agent.exploration();
  char buf[80];
  std::snprintf(buf, sizeof buf, "exploration %a %a\n", ex.chi, ex.loss_ema);
  out << buf;
  out << "rng " << rng.save_state() << '\n';
  const auto nets = agent.networks();
  out << "networks " << nets.size() << '\n';
  for (const auto& [name, net] : nets) {
    out << "net " << name << ' ' << net->num_layers() << ' ' << net->step_count() << '\n';
    for (std::size_t l = 0; l < net->num_layers(); ++l) {
      const DenseLayer& layer = net->layer(l);
      out << "layer " << layer.in << ' ' << layer.out << ' ' << static_cast<int>(layer.activation)
          << '\n';
      write_array(out, "weight", layer.weight);
      write_array(out, "bias", layer.bias);
      write_array(out, "m_weight", layer.m_weight);
      write_array(out, "v_weight", layer.v_weight);
      write_array(out, "m_bias", layer.m_bias);
      write_array(out, "v_bias", layer.v_bias);
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::size_t load_checkpoint(const std::filesystem::path& path, Agent& agent, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  expect(in, "d2rl-checkpoint");
  int version = 0;
  in >> version;
  if (version != kCheckpointVersion) {
    throw StateError("checkpoint: unsupported version " + std::to_string(version));
  }
  expect(in, "epoch");
  std::size_t epoch = 0;
  in >> epoch;
  expect(in, "exploration");
  std::string chi, ema;
  in >> chi >> ema;
  agent.exploration().chi = std::strtod(chi.c_str(), nullptr);
  agent.exploration().loss_ema = std::strtod(ema.c_str(), nullptr);
  expect(in, "rng");
  std::string rest;
  std::getline(in, rest);
  rng.load_state(rest);
  expect(in, "networks");
  std::size_t count = 0;
  in >> count;
  auto nets = agent.networks();
  if (count != nets.size()) throw StateError("checkpoint: network count does not match agent");
  for (auto& [name, net] : nets) {
    expect(in, "net");
    expect(in, name);
    std::size_t layers = 0, steps = 0;
    in >> layers >> steps;
    if (layers != net->num_layers()) throw StateError("checkpoint: layer count mismatch in " + name);
    net->set_step_count(steps);
    for (std::size_t l = 0; l < layers; ++l) {
      DenseLayer& layer = net->layer(l);
      expect(in, "layer");
      std::size_t lin = 0, lout = 0;
      int act = 0;
      in >> lin >> lout >> act;
      if (lin != layer.in || lout != layer.out || act != static_cast<int>(layer.activation)) {
        throw StateError("checkpoint: layer shape mismatch in " + name);
      }
      read_array(in, "weight", layer.weight);
      read_array(in, "bias", layer.bias);
      read_array(in, "m_weight", layer.m_weight);
      read_array(in, "v_weight", layer.v_weight);
      read_array(in, "m_bias", layer.m_bias);
      read_array(in, "v_bias", layer.v_bias);
    }
  }
  expect(in, "end");
  return epoch;
}

}  // namespace d2rl
