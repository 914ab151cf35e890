#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsmile/perturb.hpp"

namespace gsmile {

// Everything computed for one perturbed prompt. Record 0 is the unperturbed
// baseline (all-ones mask).
struct PerturbationRecord {
  perturb::Mask mask;
  std::vector<double> features;
  std::string prompt;
  std::string output;
  double delta = 0.0;  // input distance to the original prompt
  double Delta = 0.0;  // output distance to the baseline output
  double weight = 1.0;
  std::optional<double> p_value;
  // False when the record is excluded from the fit (significance filter or
  // an undefined distance).
  bool included = true;
  std::string note;

  std::size_t index() const noexcept { return mask.index; }
};

}  // namespace gsmile
