#pragma once

#include <cmath>
#include <string>

#include "irda/core/error.hpp"

namespace irda::sampling {

/// Certainty of a binary reward call: |p(pos token) - p(neg token)|, on raw
/// (unnormalised) token probabilities.
struct Confidence {
  double value = 0.0;
  double pos_prob = 0.0;
  double neg_prob = 0.0;

  friend bool operator==(const Confidence&, const Confidence&) = default;
};

inline Confidence confidence_from_probs(double pos_prob, double neg_prob) {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      fail(ErrorKind::OutOfRange, std::string(name) + " must be in [0, 1]");
  };
  check(pos_prob, "pos_prob");
  check(neg_prob, "neg_prob");
  return {std::fabs(pos_prob - neg_prob), pos_prob, neg_prob};
}

}  // namespace irda::sampling
