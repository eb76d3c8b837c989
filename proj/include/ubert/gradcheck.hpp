#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ubert/model.hpp"

namespace ubert {

struct GradCheckGroup {
  std::string name;  // embeddings, encoder, span_start, span_end, biaffine
  std::size_t elements = 0;
  double relative_error = 0.0;  // |analytic - numeric|_2 / (|analytic|_2 + |numeric|_2)
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_relative_error() const;
};

struct GradCheckOptions {
  std::size_t sequence_length = 6;
  double epsilon = 1e-5;
  std::uint64_t seed = 1;
};

// Scores every table role on one random sequence against random 0/1
// targets and compares backward() with central differences of the loss for
// every scalar parameter.
GradCheckReport run_gradient_check(const ModelConfig& config, const GradCheckOptions& options = {});

// Parameter group a parameter name belongs to.
std::string parameter_group(const std::string& name);

}  // namespace ubert
