// Shared fixtures for unit and acceptance tests: random feasibility-filtered
// instances, random valid covers, and small parametric toys.
#pragma once

#include "lampos/strategy.hpp"
#include "oracle.hpp"

namespace testutil {

using lampos::BitVec;
using lampos::Cover;
using lampos::LpBox;
using lampos::Mat;
using lampos::MpMilp;
using lampos::Vec;

struct RandomInstanceSpec {
  int max_n = 6;
  int max_m = 4;
  int max_binaries = 8;
  double coeff_range = 5.0;
  bool require_bounded = true;  // keep drawing until brute force is Optimal
};

/// Draws a random dense instance with a guaranteed-feasible right-hand side
/// (b = A z0 + B y0 for a random nonnegative z0 and binary y0), redrawing
/// until brute force reports a finite optimum when requested.
MpMilp random_instance(lampos::SplitMix64& rng, const RandomInstanceSpec& spec = {});

/// Random valid cover: recursive splits of the root box along random free
/// coordinates, `splits` times.
Cover random_cover(lampos::SplitMix64& rng, int M, int splits);

BitVec random_bits(lampos::SplitMix64& rng, int M);

/// One-parameter toy whose optimal binary flips at theta = 0.7:
///   min z + 0.3 y  s.t.  z + y - s = 1 - theta, z,s >= 0, y binary.
MpMilp threshold_toy();

/// Non-parametric variant of the same problem (T = 0 at theta-dim 0).
MpMilp fixed_toy();

/// Exhaustive cover check plus pairwise binary-point disjointness.
bool cover_is_partition(const Cover& cover, int M);

}  // namespace testutil
