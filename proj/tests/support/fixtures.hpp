#pragma once

#include <cstdint>
#include <vector>

#include <sdpse/estimate.hpp>
#include <sdpse/network.hpp>

namespace fixtures {

using sdpse::Complex;
using sdpse::NetworkModel;

/// Three-phase feeder shaped like the IEEE 13-node test case: 15 buses,
/// 38 nodes, phase coupling as node-to-node branches, a closed switch
/// between 671 and 692.
NetworkModel ieee13_like();

/// Single-phase radial tree rooted at b000.
NetworkModel radial_feeder(int buses, std::uint64_t seed);

/// Single-phase network with `extra` chords added to a random tree; zero shunt.
NetworkModel random_network(int nodes, int extra, std::uint64_t seed);

/// Plausible operating point: head at 1 pu with phases at 0, -120, +120
/// degrees, each bus a small random drop from its parent.
std::vector<Complex> smooth_state(const NetworkModel& model, std::uint64_t seed);

/// Uniform random phasors, magnitude in [0.8, 1.2], any angle.
std::vector<Complex> random_state(const NetworkModel& model, std::uint64_t seed);

/// True angle of every node of the feeder-head bus.
std::vector<sdpse::Anchor> head_anchors(const NetworkModel& model, const std::vector<Complex>& truth);

}  // namespace fixtures
