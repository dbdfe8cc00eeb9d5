#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "revise/flowgen/model.hpp"

namespace revise::flow {

// Per-sample sampler stream, stable across batch layout and thread count.
inline std::uint64_t sample_seed(std::uint64_t seed, std::string_view id) {
  return num::counter_key(seed, 0x73616d70ULL, num::fnv1a64(id));
}

inline num::Tensor draw_noise(std::size_t d, std::uint64_t seed) {
  num::Rng rng(seed);
  num::Tensor eps(num::Shape{1, d});
  for (double& x : eps.data()) x = rng.normal();
  return eps;
}

// Euler integration of dz/dt = v from t = 1 (noise) to t = 0, one row per
// request; rows never interact, so batching does not change results.
inline std::vector<world::Video> sample_batch(const FlowModel& m, const std::vector<const world::Video*>& sources,
                                              const std::vector<world::EditInstruction>& instructions,
                                              std::size_t steps, const std::vector<std::uint64_t>& seeds) {
  if (steps == 0) throw ValidationError("sample: steps must be >= 1");
  if (sources.size() != instructions.size() || sources.size() != seeds.size()) {
    throw ShapeError("sample: sources, instructions and seeds differ in length");
  }
  const std::size_t b = sources.size(), d = m.config.latent_dim();
  std::vector<std::size_t> embed(b);
  for (std::size_t i = 0; i < b; ++i) embed[i] = world::embedding_index(instructions[i]);
  num::Tensor fused;
  {
    Graph g;
    fused = encode_condition(g, m, stack_latents(sources), embed).fused.value();
  }
  num::Tensor z(num::Shape{b, d});
  for (std::size_t i = 0; i < b; ++i) {
    const num::Tensor eps = draw_noise(d, seeds[i]);
    std::copy(eps.values().begin(), eps.values().end(), &z[i * d]);
  }
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = 1.0 - static_cast<double>(k) * dt;
    Graph g;
    const num::Tensor v = predict_velocity(g, m, g.constant(z), std::vector<double>(b, t), g.constant(fused)).value();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= dt * v[i];
  }
  std::vector<world::Video> out;
  out.reserve(b);
  Graph g;
  const num::Tensor pixels = decode(g, m, g.constant(z)).value();
  for (std::size_t i = 0; i < b; ++i)
    out.emplace_back(m.config.dims, std::vector<double>(&pixels[i * d], &pixels[i * d] + d));
  return out;
}

inline world::Video sample(const FlowModel& m, const world::Video& source, const world::EditInstruction& ins,
                           std::size_t steps, std::uint64_t seed) {
  return sample_batch(m, {&source}, {ins}, steps, {seed}).front();
}

}  // namespace revise::flow
