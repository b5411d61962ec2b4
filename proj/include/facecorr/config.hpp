#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <string>

namespace fc {

/// Every tunable of the pipeline in one place. Values default to the standard
/// operating constants; the key=value config file and CLI flags override them
/// (flags win over the file, the file over defaults).
struct PipelineConfig {
  double delta = std::numbers::pi / 36.0;  // hull model angular step
  int subsample_step = 4;                  // hull step subsampling
  double t_k = 1.2;                        // keypoint eigen-ratio threshold
  double k_q_mult = 2.0;                   // quality threshold in multiples of rho
  int n_q = 80;                            // seed correspondences per iteration
  int t_1 = 3;                             // new-keypoint termination count
  int max_iters = 50;                      // dense-loop iteration cap
  double dedup_mult = 0.25;                // min correspondence spacing in rho
  double t_a = 0.0;                        // area gate; <= 0 means mean area
  double lambda = 0.8;                     // fit regularizer
  double eps_f = 1e-4;                     // fit termination residual
  int fit_max_iters = 100;
  double energy_retain = 0.98;
  double crop_radius = 80.0;
  double grid_spacing = 1.0;
  double smoothing_weight = 0.1;
  int pose_max_iters = 20;
  bool full_preprocess = false;  // grid resample inside `correspond`
  double warp_magnitude = 4.0;
  int family_n = 10;
  double template_spacing = 2.0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all available
};

/// Flat key=value file; '#' starts a comment. Unknown keys are rejected.
PipelineConfig load_config(const std::string& path, const PipelineConfig& base = {});

/// Applies `key=value` pairs (e.g. collected from command-line overrides).
void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value);

std::string dump_config(const PipelineConfig& cfg);

}  // namespace fc
