#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lrva/augment.hpp"
#include "lrva/backbone.hpp"

namespace lrva {

// Everything an experiment needs, parsed from flat key=value lines. The
// serialized form is canonical (fixed key order, lossless float formatting)
// and is embedded verbatim in every CSV and checkpoint, so any artifact can
// be traced back to its exact configuration.
struct ExperimentConfig {
  // task
  std::string task = "glyph";  // glyph | maps | lite_classification | lite_retrieval
  std::string data_root;       // directory for lite_* tasks and the manifest generator
  int classes = 8;
  int train_per_class = 12;
  int val_per_class = 4;
  int test_per_class = 12;
  int train_pairs = 32;
  int val_pairs = 16;
  int test_pairs = 32;
  double task_sigma = 0.07;  // retrieval-loss temperature
  bool bidirectional = true;

  BackboneConfig backbone;

  // host transfer-learning method
  std::string host_method = "bottleneck";  // none | bottleneck | lowrank | probe
  int host_bottleneck_dim = 16;
  int host_rank = 4;

  // baselines
  bool aug_enabled = false;
  AugmentationConfig aug;
  bool subkernel_enabled = false;
  int subkernel_u = 4;
  int subkernel_v = 3;
  bool subkernel_stride1 = false;
  bool domattn_enabled = false;
  int domattn_maps = 10;
  int domattn_block = -1;  // -1 = middle block

  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 90;
  int batch = 8;
  int probe_steps = 200;
  double probe_lr = 1e-2;

  std::uint64_t seed = 0;

  void validate() const;
  int resolved_domattn_block() const {
    return domattn_block < 0 ? backbone.n_blocks / 2 : domattn_block;
  }
  bool is_classification() const { return task == "glyph" || task == "lite_classification"; }
};

// Flat key=value lines; '#' starts a comment; unknown keys are hard errors
// so sweeps cannot silently misspell an axis.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// "key=value" applied onto an existing config; unknown key is an error.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace lrva
