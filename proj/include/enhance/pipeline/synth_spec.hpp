#pragma once

#include <string>

#include "enhance/synth/synth.hpp"

namespace enhance::pipeline {

// Synthetic data-set recipe: one scene plus a plan for many corrupted
// observations of it, read from a plain-text key=value file.
struct SynthJob {
  synth::SceneSpec scene;
  std::size_t observations = 0;
  double obs_noise_sigma = 0.0;
  double obs_coverage_min = 1.0;  // crop area as a fraction of the canvas
  double obs_coverage_max = 1.0;
  int obs_quant_levels = 0;  // 0 = no quantization
  bool obs_noise_after_tonemap = false;
  double obs_scale_min = 1.0;  // camera geometry; 1/1/0 keeps frames pixel-aligned
  double obs_scale_max = 1.0;
  double obs_rotation_max_deg = 0.0;
};

SynthJob parse_synth_spec(const std::string& path);

// Renders the scene and the observation frames into out_dir:
//   truth.pfm (exact values), truth_preview.pgm, catalog.txt,
//   obs_NNN.pgm + obs_NNN.pgm.transform, combine.cfg (ready to run).
void generate_synthetic_set(const SynthJob& job, const std::string& out_dir);

}  // namespace enhance::pipeline
