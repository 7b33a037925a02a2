#pragma once

#include <string>

#include "lobmf/dynamics.hpp"

namespace lobmf {

/// Ensemble file layout (all integers and floats little-endian):
///
///   bytes 0..7   magic "LOBMFENS"
///   u32          format version (1)
///   u64          header length H
///   H bytes      UTF-8 JSON header: seed, iterations, gap_history, grid,
///                params (caller supplied), particles, shared_x, and per
///                particle the counts [x knots, q knots, q jumps, k jumps]
///   f64 arrays   per particle: x grid, x values, q grid, q values,
///                q jump times, q jump sizes, k values, k jump times,
///                k jump sizes
///   f64 arrays   law flow: law_atoms atoms for each grid node
void write_ensemble(const std::string& path, const ParticleEnsemble& ens,
                    const std::string& params_json = "{}");

struct LoadedEnsemble {
  ParticleEnsemble ensemble;
  std::string params_json;
};

LoadedEnsemble read_ensemble(const std::string& path);

/// CSV with columns t, mean, std, w1_to_initial.
void write_law_csv(const std::string& path, const ParticleEnsemble& ens);

}  // namespace lobmf
