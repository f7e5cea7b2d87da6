#pragma once

#include <cmath>

namespace convoy {

/// Static output-feedback gains on (e_lat, heading error, heading-error rate).
template <typename Scalar>
struct Gains {
  Scalar ke{0.06};      // rad/m
  Scalar ktheta{0.96};  // rad/rad
  Scalar komega{0.08};  // rad s/rad

  bool finite() const { return std::isfinite(ke) && std::isfinite(ktheta) && std::isfinite(komega); }
};

}  // namespace convoy
