#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pwcheat/errors.hpp"

namespace pwcheat {

/// One sample of the Laplace-domain transfer function H = G/F with its
/// standard deviation.
struct TransferSample {
  double lambda = 0.0;
  double H = 0.0;
  double sigma = 0.0;

  friend bool operator==(const TransferSample&, const TransferSample&) = default;
};

struct Provenance {
  enum class Kind { synthetic, external };
  Kind kind = Kind::external;
  std::uint64_t seed = 0;
  double noise_rel = 0.0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Transfer-function samples: lambda strictly ascending, H > 0, sigma > 0.
class TransferDataset {
 public:
  explicit TransferDataset(std::vector<TransferSample> samples, Provenance provenance = {})
      : samples_(std::move(samples)), provenance_(provenance) {
    if (samples_.empty()) throw ValidationError("transfer dataset is empty");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!(s.lambda > 0.0) || !std::isfinite(s.lambda)) throw ValidationError("lambda must be positive and finite");
      if (!(s.H > 0.0) || !std::isfinite(s.H)) throw ValidationError("H must be positive and finite");
      if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) throw ValidationError("sigma must be positive and finite");
      if (i > 0 && !(s.lambda > samples_[i - 1].lambda))
        throw ValidationError("lambda values must be distinct and sorted ascending");
    }
  }

  const std::vector<TransferSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const TransferSample& operator[](std::size_t i) const { return samples_[i]; }
  const Provenance& provenance() const { return provenance_; }

  friend bool operator==(const TransferDataset&, const TransferDataset&) = default;

 private:
  std::vector<TransferSample> samples_;
  Provenance provenance_;
};

}  // namespace pwcheat
