#pragma once

#include <cstdint>

#include "dlmp/netmodel.hpp"

namespace dlmp::synth {

/// Radial test feeder with `nodes` buses: a 13.8 kV backbone feeding 30 kVA
/// residential and 50 kVA commercial service transformers, one DER site per
/// secondary bus. Roughly 36% of the non-root buses are secondaries (110 of
/// 307). `nodes == 2` gives the plain two-bus feeder. Same inputs, same bytes.
/// Throws SchemaError for nodes < 2.
net::FeederRaw synthesize_feeder(int nodes, std::uint64_t seed);

/// Number of service transformers synthesize_feeder puts on `nodes` buses.
int transformer_count(int nodes);

}  // namespace dlmp::synth
