#pragma once

#include <string>
#include <vector>

namespace potkit::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string threshold;
  std::string note;
  double seconds = 0.0;
};

std::vector<int> all_ids();

/// Runs one acceptance criterion at its stated tolerances.
CriterionResult run_criterion(int id);

}  // namespace potkit::acceptance
