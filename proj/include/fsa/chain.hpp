#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fsa/arrivals.hpp"
#include "fsa/common.hpp"
#include "fsa/occupancy.hpp"

namespace fsa {

/// Frame-length policy L(h). Every policy returns at least 1 so a frame
/// exists even with an empty backlog; with h = 0 the frame only matters
/// through the arrival mean L(0) * Lambda.
struct FramePolicy {
  enum class Kind { Fixed, Proportional, Sublinear, Superlinear };

  Kind kind = Kind::Fixed;
  Index fixed_len = 1;
  double alpha = 1.0;     // Proportional: L = max(1, round-half-up(h/alpha))
  double exponent = 0.5;  // Sublinear: L = max(1, ceil(scale*h^(1-exponent)))
                          // Superlinear: L = max(1, ceil(scale*h^exponent))
  double scale = 1.0;

  static FramePolicy fixed(Index L);
  static FramePolicy proportional(double alpha);
  static FramePolicy sublinear(double epsilon, double scale = 1.0);
  static FramePolicy superlinear(double exponent, double scale = 1.0);

  Index frame_length(Index h) const;
  std::string label() const;
};

/// One row of the backlog chain: P_{h,k} over k = 0..k_cap, with the mass
/// escaping above k_cap recorded. Assembled from the success distribution
/// xi_{h,.} and the frame arrival pmf:
///   P_{h,h-k} = sum_n lambda_n xi_{h,n+k}   (backlog shrinks by k)
///   P_{h,h}   = sum_n lambda_n xi_{h,n}
///   P_{h,h+k} = sum_n lambda_{n+k} xi_{h,n} (backlog grows by k)
/// The h = 0 row is arrival-only: P_{0,k} = lambda_k.
struct TransitionRow {
  Index h = 0;
  Index frame_len = 1;
  Vector probs;
  double tail_mass = 0.0;
  bool tail_warning = false;  // tail above 1e-6

  double drift() const;           // sum_k (k - h) P_{h,k}
  double downward_drift() const;  // sum_{k<h} (k - h) P_{h,k}
};

TransitionRow transition_row(Index h, const FramePolicy& policy,
                             const ArrivalModel& model, SuccessLaw law,
                             Index k_cap);

/// Backlog chain truncated to states 0..n_max. Rows keep their natural
/// support (beyond n_max); lumping happens only in lumped_matrix.
struct TruncatedChain {
  Index n_max = 0;
  std::vector<TransitionRow> rows;
  FramePolicy policy;
  SuccessLaw law;
  double per_slot_mean = 0.0;
  std::string model_label;

  /// Row-stochastic (n_max+1)^2 matrix with transitions above n_max lumped
  /// into state n_max, so instability shows up as boundary mass.
  Matrix lumped_matrix() const;
};

TruncatedChain build_truncated_chain(const FramePolicy& policy,
                                     const ArrivalModel& model, SuccessLaw law,
                                     Index n_max, int threads = 1);

/// Expected one-frame drift from the closed forms:
/// D_h = L(h) * Lambda - r_h.
double drift(Index h, const FramePolicy& policy, const ArrivalModel& model,
             SuccessLaw law);

/// Cross-check route: expectation of displacement read off a row.
double drift_from_row(const TransitionRow& row);

/// Downward part of the drift, sum_{k<h} (k-h) P_{h,k}; bounded below by
/// -min(h, L) under SPR and -M min(h, L) under MPR.
double downward_drift(Index h, const FramePolicy& policy,
                      const ArrivalModel& model, SuccessLaw law);

struct DriftRecord {
  Index h = 0;
  Index frame_len = 1;
  double alpha = 0.0;  // exact h / L(h)
  double lambda = 0.0;
  double expected_successes = 0.0;
  double drift = 0.0;
  std::optional<double> downward;
};

/// Per-state drift profile over h = h_begin..h_end. Downward drift needs
/// full rows and is only computed when requested.
std::vector<DriftRecord> drift_profile(const FramePolicy& policy,
                                       const ArrivalModel& model,
                                       SuccessLaw law, Index h_begin,
                                       Index h_end, Index step = 1,
                                       bool with_downward = false);

struct StationaryResult {
  Vector pi;
  bool converged = false;
  Index iterations = 0;
  double residual = 0.0;
  double boundary_mass = 0.0;  // mass on the top decile of states
  bool boundary_flagged = false;
};

/// Fixed point of the row-stochastic iteration pi <- P^T pi on the lumped
/// matrix. Non-convergence is reported, not thrown; it is the expected
/// outcome for unstable configurations.
StationaryResult stationary_distribution(const TruncatedChain& chain,
                                         double tol = 1e-12,
                                         Index max_iter = 200000);

/// CSV export: "h,k,probability" triplets.
void export_chain_csv(const TruncatedChain& chain, std::ostream& out);
/// JSON export: row objects carrying frame length and tail mass.
void export_chain_json(const TruncatedChain& chain, std::ostream& out);

}  // namespace fsa
