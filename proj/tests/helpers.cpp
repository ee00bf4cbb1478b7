#include "helpers.hpp"

namespace testutil {

MpMilp random_instance(lampos::SplitMix64& rng, const RandomInstanceSpec& spec) {
  for (;;) {
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_n)));
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_m)));
    const int M = 1 + static_cast<int>(
                          rng.below(static_cast<std::uint64_t>(spec.max_binaries)));
    MpMilp p;
    p.c = Vec::Zero(n);
    p.d = Vec::Zero(M);
    p.A = Mat::Zero(m, n);
    p.B = Mat::Zero(m, M);
    for (int j = 0; j < n; ++j)
      p.c[j] = rng.uniform(-spec.coeff_range, spec.coeff_range);
    for (int j = 0; j < M; ++j)
      p.d[j] = rng.uniform(-spec.coeff_range, spec.coeff_range);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j)
        p.A(i, j) = rng.uniform(-spec.coeff_range, spec.coeff_range);
      for (int j = 0; j < M; ++j)
        p.B(i, j) = rng.uniform(-spec.coeff_range, spec.coeff_range);
    }
    Vec z0(n);
    for (int j = 0; j < n; ++j) z0[j] = rng.uniform(0.0, 2.0);
    Vec y0(M);
    for (int j = 0; j < M; ++j) y0[j] = static_cast<double>(rng.below(2));
    p.rhs.b0 = p.A * z0 + p.B * y0;
    p.rhs.T = Mat::Zero(m, 0);
    if (!spec.require_bounded) return p;
    oracle::MilpOut brute = oracle::milp_best(p, Vec::Zero(0));
    if (brute.status == oracle::Status::Optimal) return p;
  }
}

Cover random_cover(lampos::SplitMix64& rng, int M, int splits) {
  std::vector<LpBox> boxes{lampos::root_box(M)};
  for (int s = 0; s < splits; ++s) {
    // Pick a splittable box.
    std::vector<std::size_t> splittable;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      if (lampos::free_count(boxes[i]) > 0) splittable.push_back(i);
    if (splittable.empty()) break;
    const std::size_t pick =
        splittable[rng.below(static_cast<std::uint64_t>(splittable.size()))];
    std::vector<int> free;
    for (int i = 0; i < M; ++i)
      if (boxes[pick].lb[i] < boxes[pick].ub[i]) free.push_back(i);
    const int coord = free[rng.below(static_cast<std::uint64_t>(free.size()))];
    LpBox low = boxes[pick];
    low.ub[coord] = 0;
    LpBox high = boxes[pick];
    high.lb[coord] = 1;
    boxes[pick] = low;
    boxes.push_back(high);
  }
  return lampos::canonical_cover(std::move(boxes));
}

BitVec random_bits(lampos::SplitMix64& rng, int M) {
  BitVec bits(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) bits[i] = static_cast<std::uint8_t>(rng.below(2));
  return bits;
}

MpMilp threshold_toy() {
  MpMilp p;
  p.c = Vec(2);
  p.c << 1.0, 0.0;  // z, slack
  p.d = Vec(1);
  p.d << 0.3;
  p.A = Mat(1, 2);
  p.A << 1.0, -1.0;
  p.B = Mat(1, 1);
  p.B << 1.0;
  p.rhs.b0 = Vec(1);
  p.rhs.b0 << 1.0;
  p.rhs.T = Mat(1, 1);
  p.rhs.T << -1.0;
  return p;
}

MpMilp fixed_toy() {
  MpMilp p = threshold_toy();
  p.rhs.b0 << 0.4;  // equivalent to theta = 0.6: optimum keeps y = 1
  p.rhs.T = Mat(1, 0);
  return p;
}

bool cover_is_partition(const Cover& cover, int M) {
  if (M > 20) return false;
  const std::uint64_t total = 1ULL << M;
  BitVec y(static_cast<std::size_t>(M), 0);
  for (std::uint64_t code = 0; code < total; ++code) {
    for (int i = 0; i < M; ++i) y[i] = (code >> i) & 1ULL;
    int members = 0;
    for (const auto& box : cover.boxes)
      if (box.contains(y)) ++members;
    if (members != 1) return false;
  }
  return true;
}

}  // namespace testutil
