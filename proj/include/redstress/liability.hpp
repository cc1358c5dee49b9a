#pragma once

#include <array>
#include <vector>

#include "redstress/severity.hpp"

namespace redstress {

// Unitholder weights of one fund, either explicit or reduced to the
// (count, herfindahl) summary. The count may be infinite for the summary.
class LiabilityStructure {
 public:
  static LiabilityStructure from_weights(std::vector<double> weights);
  static LiabilityStructure from_summary(double n, double herfindahl);

  bool has_weights() const { return !w_.empty(); }
  const std::vector<double>& weights() const;
  double n() const { return n_; }
  double herfindahl() const { return h_; }
  double effective_n() const { return 1.0 / h_; }

 private:
  LiabilityStructure() = default;
  std::vector<double> w_;
  double n_ = 0.0;
  double h_ = 0.0;
};

struct HerfindahlStats {
  double h;
  double effective_n;
};

HerfindahlStats herfindahl(const std::vector<double>& weights);

// Finite geometric weights w_i proportional to q^i for i = 1..n.
LiabilityStructure geometric_structure(double q, std::size_t n);
// Infinite geometric series summary: effective n equals (1+q)/(1-q).
LiabilityStructure geometric_structure(double q);

// Bound on the Herfindahl index from the m largest weights only, assuming
// every unseen weight is at most the m-th one.
struct HerfindahlBound {
  double h_plus;
  double effective_n_lower;
};
HerfindahlBound herfindahl_upper_bound(const std::vector<double>& top_weights);

struct IMModel {
  LiabilityStructure structure;
  double p_tilde;
  double mu_tilde;
  double sigma_tilde;
  SeverityDist severity() const;  // beta severity from (mu, sigma)
};

IMModel make_im(LiabilityStructure structure, double p_tilde, double mu_tilde,
                double sigma_tilde);

double prob_no_redemption(double n, double p_tilde);

struct IMMoments {
  double mean;
  double variance;
};
IMMoments im_moments(const IMModel& m);

struct ZIMatch {
  double p = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  bool defined = true;  // false when p_tilde = 0: mu and sigma are meaningless
};
ZIMatch match_zi_from_im(const IMModel& m);

struct IMMatch {
  double p_tilde;
  double mu_tilde;
  double sigma_tilde;
  bool unrealistic;  // mu or sigma above 1, as the inversion often produces
};
IMMatch match_im_from_zi(double p, double mu, double sigma, double n, double h);

double largest_holder_stress(const LiabilityStructure& structure, std::size_t m);

struct FundMomentEstimates {
  double p;
  double mu;
  double sigma;
  double effective_n;
};

struct IMCalibration {
  double p_tilde;
  double mu_tilde;
  double sigma_tilde;
  double criterion;
  bool unrealistic;
};

// Weighted quadratic moment-matching across funds. Empty fund_weights means
// equal weights; moment_weights order is (frequency, mean, variance).
IMCalibration calibrate_im(const std::vector<FundMomentEstimates>& funds,
                           std::vector<double> fund_weights = {},
                           const std::array<double, 3>& moment_weights = {1.0, 1.0, 1.0});

}  // namespace redstress
