#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ubert/data_io.hpp"
#include "ubert/model.hpp"
#include "ubert/training.hpp"

namespace ubert {

// Run configuration file: {"model": {...}, "train": {...}}. Both sections are
// optional; unknown keys are rejected. A model max_len of 0 means "size from
// the data".
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// Synthetic spec file: one object or an array of objects. Each may carry a
// "held_out" fraction (default 0.2) used by the generate command.
struct SyntheticJob {
  SyntheticSpec spec;
  double held_out = 0.2;
};

std::vector<SyntheticJob> parse_synthetic_jobs(const std::string& json_text);
std::vector<SyntheticJob> load_synthetic_jobs(const std::filesystem::path& path);

// Single-annotation JSON in the dataset's on-disk form (character offsets
// into `text`).
std::string category_to_json_string(const CategoryLabel& label);
std::string annotation_to_json_string(const Annotation& annotation, const std::string& text);

}  // namespace ubert
