#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsa/common.hpp"

namespace fsa {

enum class Reception { Spr, Mpr };

/// Reception model of the channel: single packet reception, or multipacket
/// reception where a slot delivers all its packets iff it holds at most
/// `capacity` of them. SPR is MPR with capacity 1.
struct SuccessLaw {
  Reception kind = Reception::Spr;
  int capacity = 1;

  static SuccessLaw spr() { return {Reception::Spr, 1}; }
  static SuccessLaw mpr(int m);

  int effective_capacity() const {
    return kind == Reception::Spr ? 1 : capacity;
  }
  /// Largest possible success count for h contenders over L slots.
  Index max_successes(Index h, Index L) const;
  std::string label() const;
};

/// Distribution of the occupancy of a single slot when h packets each pick
/// one of L slots uniformly: Binomial(h, 1/L).
struct OccupancyPmf {
  Index packets = 0;      // h
  Index frame_len = 1;    // L
  Vector pmf;             // index x = 0..h

  /// Expected number of slots with occupancy exactly x.
  double expected_slots_with(Index x) const {
    return static_cast<double>(frame_len) * pmf(x);
  }
};

/// Which computation produced a SuccessDistribution.
enum class XiMethod { ExactRational, FloatDp, BruteForce, Empirical };

/// Force a particular computation path (Auto picks ExactRational on small
/// inputs and FloatDp beyond them).
enum class XiPath { Auto, ExactRational, FloatDp };

/// Distribution of the number of successfully received packets in one frame
/// given backlog h, frame length L, and a reception law.
struct SuccessDistribution {
  Index backlog = 0;    // h
  Index frame_len = 1;  // L
  SuccessLaw law;
  Vector xi;            // index k = 0..min(h, L*capacity)
  XiMethod method = XiMethod::ExactRational;

  double mean() const;
};

/// Large-deviation-free approximation of slot occupancy counts: the number
/// of slots holding exactly j packets is approximately Poisson(rho_j) with
/// rho_j = L e^{-h/L} (h/L)^j / j!. Valid as h, L grow with rho_j bounded.
struct PoissonOccupancyApprox {
  Index packets = 0;
  Index frame_len = 1;
  Vector rho;  // index j = 0..j_max

  /// P[exactly m slots hold j packets] under the approximation.
  double pmf(Index j, Index m) const;
};

inline constexpr Index kExactRationalLimit = 64;
inline constexpr std::uint64_t kDefaultBruteForceCap = 10'000'000;
inline constexpr std::uint64_t kDefaultMprWorkCap = 500'000'000;

/// Slot occupancy pmf, Binomial(h, 1/L).
OccupancyPmf occupancy_pmf(Index h, Index L);

/// Success-count distribution under SPR. The exact-rational route evaluates
/// the inclusion-exclusion count of assignments with exactly k singleton
/// slots in integer arithmetic; the float route reuses the same counting
/// identity but takes the no-singleton factor from a nonnegative
/// slot-recursion table, so it involves no cancelling sums.
SuccessDistribution xi_spr(Index h, Index L, XiPath path = XiPath::Auto);

/// Success-count distribution under MPR with the given capacity. Both
/// routes run a slot-by-slot dynamic program over (packets placed,
/// successes so far); the exact route counts assignments in big integers,
/// the float route propagates conditional binomial weights.
SuccessDistribution xi_mpr(Index h, Index L, int capacity,
                           XiPath path = XiPath::Auto,
                           std::uint64_t work_cap = kDefaultMprWorkCap);

/// Dispatch on the law.
SuccessDistribution success_distribution(Index h, Index L, SuccessLaw law,
                                         XiPath path = XiPath::Auto);

/// Exact success probabilities as reduced fractions "num/den".
/// Requires h, L within the exact-rational range.
std::vector<std::string> xi_exact_strings(Index h, Index L, SuccessLaw law);

/// Expected successes per frame: h(1-1/L)^{h-1} under SPR, and
/// L * sum_{x=1}^{M} x C(h,x) (1/L)^x (1-1/L)^{h-x} under MPR.
double expected_successes(Index h, Index L, SuccessLaw law);

/// rho_j for j = 0..j_max.
PoissonOccupancyApprox poisson_occupancy(Index h, Index L, Index j_max);

/// Upper bound on the probability of exactly k successes under SPR:
/// C(L,k) k! / L^k = prod_{i<k} (1 - i/L), the exact-at-k=h head of the
/// bound chain that continues to (1 - (k/2)/L)^{k/2} for k >= 2.
double xi_upper_bound(Index h, Index L, Index k);

/// Independent oracle: enumerate all L^h slot assignments and tally success
/// counts. Exact (integer counts over L^h); rejects L^h above the cap.
SuccessDistribution brute_force_xi(Index h, Index L, SuccessLaw law,
                                   std::uint64_t cap = kDefaultBruteForceCap);

/// Precomputed table of zero-success probabilities z(v, u) = P[no slot holds
/// exactly one packet | u packets over v slots], filled by a slot recursion
/// with binomial weights. Shared across rows when many SPR distributions
/// over a common (h, L) range are needed.
class SprXiTable {
 public:
  SprXiTable(Index max_slots, Index max_packets);

  double zero_success(Index v, Index u) const { return table_(v, u); }
  /// xi_{hk} for SPR; requires L <= max_slots and h <= max_packets.
  double xi(Index h, Index L, Index k) const;
  Vector xi_row(Index h, Index L) const;

  Index max_slots() const { return table_.rows() - 1; }
  Index max_packets() const { return table_.cols() - 1; }

 private:
  Matrix table_;  // (v, u) -> z(v, u)
};

}  // namespace fsa
