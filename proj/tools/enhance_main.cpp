#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "enhance/consensus/consensus.hpp"
#include "enhance/core/error.hpp"
#include "enhance/kernels/kernels.hpp"
#include "enhance/pipeline/image_io.hpp"
#include "enhance/pipeline/run.hpp"
#include "enhance/pipeline/synth_spec.hpp"
#include "enhance/rank/rank.hpp"
#include "enhance/registration/registration.hpp"

namespace {

using namespace enhance;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError: return 2;
    case ErrorCode::EmptyRun: return 3;
    default: return 1;
  }
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const pipeline::SynthJob job = pipeline::parse_synth_spec(spec_path);
  pipeline::generate_synthetic_set(job, out_dir);
  std::cout << "wrote scene + " << job.observations << " observations to " << out_dir << "\n";
  return 0;
}

int cmd_solve(const std::string& catalog_path, const std::string& image_path,
              const std::string& sidecar_out, std::size_t max_stars, double code_tolerance) {
  const auto catalog = pipeline::read_catalog(catalog_path);
  const auto index = registration::QuadIndex::build(catalog, 50000);
  const pipeline::DecodedImage img = pipeline::decode_image(image_path);
  const Grid lum = pipeline::to_luminance(img);
  const auto stars = registration::detect_stars(lum, max_stars);

  registration::SolveParams params;
  params.code_tolerance = code_tolerance;
  params.image_width = lum.width;
  params.image_height = lum.height;
  const auto solution = registration::solve(stars, index, catalog, params);
  if (!solution) {
    std::cerr << "no solution (" << stars.stars.size() << " stars detected, "
              << index.size() << " indexed quads)\n";
    return 1;
  }
  const auto& t = solution->transform;
  std::printf("scale=%.10g\nrotation_deg=%.10g\ndx=%.10g\ndy=%.10g\n", t.scale,
              t.rotation * 180.0 / 3.14159265358979323846, t.dx, t.dy);
  std::printf("matches=%zu predicted=%zu quads_tried=%zu\n", solution->matches,
              solution->predicted, solution->quads_tried);
  if (!sidecar_out.empty()) registration::write_transform_sidecar(t, sidecar_out);
  return 0;
}

int cmd_combine(const std::string& config_path, bool no_solve) {
  pipeline::RunConfig cfg = pipeline::parse_run_config(config_path);
  if (no_solve) cfg.solve = pipeline::SolveMode::Sidecar;
  const pipeline::RunResult result = pipeline::run_combine(cfg);
  std::cout << result.report.to_text(cfg.canvas);
  return 0;
}

int cmd_render(const std::string& state_path, const std::string& match_path,
               const std::string& out_path) {
  const auto state = consensus::load_state(state_path);
  const pipeline::DecodedImage match = pipeline::decode_image(match_path);
  const Grid source_grid = pipeline::to_luminance(match);
  if (source_grid.values.size() != state.pixel_count()) {
    raise(ErrorCode::ShapeMismatch, "match-to image does not cover the state's canvas");
  }
  const auto source = consensus::HistogramSource::from_values(source_grid.values);
  const std::vector<double> rendered = consensus::render(state, source);
  Grid out(state.canvas.width, state.canvas.height);
  out.values = rendered;
  pipeline::write_gray(out, 16, out_path);
  std::cout << "rendered " << out.width << "x" << out.height << " -> " << out_path << "\n";
  return 0;
}

int cmd_tau(const std::string& a_path, const std::string& b_path, bool exact,
            std::uint64_t pairs, std::uint64_t seed) {
  const Grid a = pipeline::to_luminance(pipeline::decode_image(a_path));
  const Grid b = pipeline::to_luminance(pipeline::decode_image(b_path));
  if (a.values.size() != b.values.size()) {
    raise(ErrorCode::ShapeMismatch, "images have different sizes");
  }
  if (exact) {
    std::printf("tau_b=%.9f\n", rank::kendall_tau(a.values, b.values));
  } else {
    const auto st = rank::kendall_tau_sampled(a.values, b.values, pairs, seed);
    std::printf("tau_a_sampled=%.9f\nstandard_error=%.9f\npairs=%llu\n", st.estimate,
                st.standard_error, (unsigned long long)pairs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"enhance: rank-based consensus imaging from uncalibrated frames"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene and observations");
  synth->add_option("--spec", spec_path, "synth spec file")->required();
  synth->add_option("--out-dir", out_dir, "output directory")->required();

  std::string catalog_path, image_path, sidecar_out;
  std::size_t max_stars = 200;
  double code_tolerance = 0.01;
  auto* solve = app.add_subcommand("solve", "plate-solve an image against a star catalog");
  solve->add_option("--catalog", catalog_path, "catalog file (x y flux)")->required();
  solve->add_option("--image", image_path, "image to solve")->required();
  solve->add_option("--sidecar-out", sidecar_out, "write the transform sidecar here");
  solve->add_option("--max-stars", max_stars, "detection cap");
  solve->add_option("--tolerance", code_tolerance, "hash code match radius");

  std::string config_path;
  bool no_solve = false;
  auto* combine = app.add_subcommand("combine", "run the consensus pipeline");
  combine->add_option("--config", config_path, "run config file")->required();
  combine->add_flag("--no-solve", no_solve, "read transform sidecars instead of solving");

  std::string state_path, match_path, render_out;
  auto* render = app.add_subcommand("render", "histogram-match a consensus state to an image");
  render->add_option("--state", state_path, "consensus state file")->required();
  render->add_option("--match-to", match_path, "histogram source image")->required();
  render->add_option("--out", render_out, "output image (.png/.pgm/.pfm)")->required();

  std::string tau_a, tau_b;
  bool tau_exact = false;
  std::uint64_t tau_pairs = 100000, tau_seed = 0;
  auto* tau = app.add_subcommand("tau", "Kendall tau between two images");
  tau->add_option("--a", tau_a, "first image")->required();
  tau->add_option("--b", tau_b, "second image")->required();
  tau->add_flag("--exact", tau_exact, "exact tie-corrected tau-b");
  tau->add_option("--pairs", tau_pairs, "sampled pair budget");
  tau->add_option("--seed", tau_seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(spec_path, out_dir);
    if (solve->parsed()) return cmd_solve(catalog_path, image_path, sidecar_out, max_stars,
                                          code_tolerance);
    if (combine->parsed()) return cmd_combine(config_path, no_solve);
    if (render->parsed()) return cmd_render(state_path, match_path, render_out);
    if (tau->parsed()) return cmd_tau(tau_a, tau_b, tau_exact, tau_pairs, tau_seed);
  } catch (const enhance::Error& e) {
    std::cerr << "enhance: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "enhance: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
