// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification batteries for the differentiable layers and
// the full classifier, shared by the CLI and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssdkan {

struct GradCheckItem {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// module: "all", "kan", "grkan", or "model". Each battery runs `rounds`
// random configurations and checks gradients of every input and parameter
// against central finite differences.
std::vector<GradCheckItem> gradcheck_battery(const std::string& module,
                                             int rounds = 10,
                                             uint64_t seed = 20260811);

}  // namespace ssdkan
