#pragma once

#include <iosfwd>
#include <string>

#include "fsa/common.hpp"
#include "fsa/rng.hpp"

namespace fsa {

enum class ArrivalFamily { Poisson, Bernoulli, Geometric, Custom };

/// Per-slot arrival traffic: iid across slots with pmf {Lambda_k} and finite
/// mean Lambda. Analytic families store a tail-truncated pmf (tail < 1e-15)
/// but keep the exact mean.
class ArrivalModel {
 public:
  static ArrivalModel poisson(double mean_per_slot);
  static ArrivalModel bernoulli(double p);
  /// Geometric number of arrivals per slot with the given mean.
  static ArrivalModel geometric(double mean_per_slot);
  /// Finite pmf over k = 0..pmf.size()-1; must sum to 1 within 1e-9.
  static ArrivalModel custom(Vector pmf);
  /// No arrivals ever (point mass at zero).
  static ArrivalModel none();
  /// Two-column CSV "k,probability"; rejects non-normalized input.
  static ArrivalModel from_csv(std::istream& in);

  ArrivalFamily family() const { return family_; }
  double mean() const { return mean_; }
  const Vector& per_slot_pmf() const { return pmf_; }
  /// True when the analytic family puts positive mass on every k >= 0.
  bool unbounded_support() const { return unbounded_; }
  /// Whether the induced frame pmf satisfies 0 < lambda_n < 1 for every n,
  /// the irreducibility/aperiodicity condition of the backlog chain.
  /// Bounded-support families fail it (lambda_n = 0 above L * k_max);
  /// the toolkit flags this rather than refusing to compute.
  bool irreducibility_ok() const;
  std::string label() const;

  /// One frame's arrivals: sum of L iid per-slot draws by cdf inversion.
  Index sample_frame(Index L, Xoshiro256& rng) const;

 private:
  ArrivalModel(ArrivalFamily family, double mean, Vector pmf, bool unbounded,
               std::string label);

  ArrivalFamily family_;
  double mean_;
  Vector pmf_;
  Vector cdf_;
  bool unbounded_;
  std::string label_;
};

/// Arrivals per frame of L slots: L-fold convolution of the per-slot pmf,
/// truncated at n_max with the lost mass recorded.
struct FrameArrivalPmf {
  Index frame_len = 1;
  Vector pmf;        // index n = 0..n_max
  double tail_mass = 0.0;
  double mean = 0.0;  // exact frame mean lambda = L * Lambda

  double truncated_mean() const;
};

/// n_max < 0 selects the default truncation: the smallest n with tail mass
/// below 1e-12, capped at 10*lambda + 50. The Poisson family uses the closed
/// form (sum of iid Poisson); other families convolve.
FrameArrivalPmf frame_arrival_pmf(const ArrivalModel& model, Index L,
                                  Index n_max = -1);

/// Lower-tail bound for Poisson(mu): P[X <= x] <= e^{-mu} (e mu)^x / x^x,
/// valid for x < mu.
double poisson_tail_bound(double mu, double x);

inline Index sample_frame_arrivals(const ArrivalModel& model, Index L,
                                   Xoshiro256& rng) {
  return model.sample_frame(L, rng);
}

}  // namespace fsa
