// Small fixtures shared by the unit tests.
#pragma once

#include <vector>

#include "fedpoe/data_streams.hpp"
#include "fedpoe/model.hpp"
#include "fedpoe/simulation.hpp"

namespace fedpoe::testing {

inline std::vector<RandomFeatureMap> one_map(std::size_t input_dim = 2, std::size_t features = 10,
                                             std::uint64_t seed = 17) {
    return {build_feature_map(seed, input_dim, features, 1.0)};
}

inline ClientStreams small_streams(const RandomFeatureMap& map, std::size_t N, std::size_t T, double noise = 0.05,
                                   std::size_t groups = 2, std::uint64_t seed = 5) {
    SynthParams p;
    p.num_clients = N;
    p.horizon = T;
    p.input_dim = map.input_dim();
    p.num_groups = groups;
    p.bias = groups > 1 ? 0.75 : 1.0;
    p.noise_sd = noise;
    p.seed = seed;
    return synth_group_bias(p, map);
}

inline SimulationSettings settings_for(Mode mode, std::size_t M = 2, std::size_t b = 1) {
    SimulationSettings s;
    s.mode = mode;
    s.seed = 99;
    s.hp.eta = 0.2;
    s.hp.eta_c = 0.3;
    s.hp.b = b;
    s.hp.M = M;
    s.hp.n = 5;
    s.hp.U = 30;
    return s;
}

}  // namespace fedpoe::testing
