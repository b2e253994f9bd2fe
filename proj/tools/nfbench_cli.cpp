// Command-line harness: run single benchmark cells, sweep over
// architecture x latent-dimension grids, reproduce the concatenation
// ablation, and render or evaluate from checkpoints.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "nfbench/nfbench.hpp"

using namespace nfbench;

namespace {

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(is);
  return spec_from_json(j);
}

std::vector<Family> parse_families(const std::vector<std::string>& names) {
  std::vector<Family> fams;
  for (const std::string& n : names) fams.push_back(family_from_name(n));
  return fams;
}

void print_result(const ExperimentSpec& spec, const RunResult& r) {
  if (!r.ok) {
    std::cout << spec.name << ": ABORTED (" << r.message << ")\n";
    return;
  }
  std::cout << spec.name << ": final test PSNR " << r.final_psnr << " dB over "
            << spec.steps << " steps\n";
  if (!spec.out_dir.empty())
    std::cout << "  metrics: " << spec.out_dir << "/metrics.csv\n"
              << "  checkpoint: " << spec.out_dir << "/checkpoint.bin\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural-field conditioning benchmark"};
  app.require_subcommand(1);

  std::string config, resume, checkpoint, out = "out.ppm";
  std::vector<std::string> family_names{"concat", "hyper", "attention"};
  std::vector<int> latents{32, 128};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int instance = 0, view = -1, image_index = -1;

  CLI::App* run = app.add_subcommand("run", "train one benchmark cell");
  run->add_option("--config", config, "experiment JSON")->required();
  run->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* sweep =
      app.add_subcommand("sweep", "architecture x latent-dimension grid");
  sweep->add_option("--config", config, "base experiment JSON")->required();
  sweep->add_option("--families", family_names, "decoder families")
      ->delimiter(',');
  sweep->add_option("--latents", latents, "latent dimensions")->delimiter(',');
  sweep->add_option("--seeds", seeds, "seeds")->delimiter(',');

  CLI::App* ablate =
      app.add_subcommand("ablate-concat", "concatenation-scheme ablation");
  ablate->add_option("--config", config, "base experiment JSON (concat family)")
      ->required();
  ablate->add_option("--seeds", seeds, "seeds")->delimiter(',');

  CLI::App* render = app.add_subcommand(
      "render", "render a view (NVS) or reconstruction (auto-encode)");
  render->add_option("--config", config, "experiment JSON")->required();
  render->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  render->add_option("--out", out, "output .ppm path");
  render->add_option("--instance", instance, "scene instance (NVS)");
  render->add_option("--view", view, "camera view index (NVS)");
  render->add_option("--image", image_index, "image index (auto-encode)");

  CLI::App* eval = app.add_subcommand("eval", "held-out PSNR of a checkpoint");
  eval->add_option("--config", config, "experiment JSON")->required();
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentSpec spec = load_spec(config);
      RunResult r = run_experiment(spec, resume);
      print_result(spec, r);
      return r.ok ? 0 : 2;
    }
    if (sweep->parsed()) {
      ExperimentSpec base = load_spec(config);
      SweepResult res =
          run_sweep(base, parse_families(family_names), latents, seeds);
      for (const SweepCell& c : res.cells)
        std::cout << c.family << " N=" << c.latent_dim << " seed=" << c.seed
                  << " params=" << c.param_count << " -> "
                  << (c.ok ? std::to_string(c.final_psnr) + " dB"
                           : "failed: " + c.message)
                  << "\n";
      if (!base.out_dir.empty())
        std::cout << "wrote " << base.out_dir
                  << "/{summary,matrix,plot}.csv\n";
      return 0;
    }
    if (ablate->parsed()) {
      ExperimentSpec base = load_spec(config);
      auto rows = run_concat_ablation(base, seeds);
      for (const AblationRow& r : rows)
        std::cout << r.label << ": "
                  << (r.ok ? std::to_string(r.mean_psnr) + " dB" : r.message)
                  << "\n";
      return 0;
    }
    if (render->parsed()) {
      ExperimentSpec spec = load_spec(config);
      ExperimentRunner runner(spec);
      runner.load_checkpoint(checkpoint);
      Image img;
      if (spec.task == Task::kAutoencode) {
        require(image_index >= 0, "render: --image required for autoencode");
        img = runner.reconstruct(image_index);
      } else {
        require(view >= 0, "render: --view required for NVS tasks");
        img = runner.render_view(instance, view);
      }
      write_ppm(out, img);
      std::cout << "wrote " << out << " (" << img.width << "x" << img.height
                << ")\n";
      return 0;
    }
    if (eval->parsed()) {
      ExperimentSpec spec = load_spec(config);
      ExperimentRunner runner(spec);
      runner.load_checkpoint(checkpoint);
      std::cout << "held-out PSNR: " << runner.evaluate() << " dB\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
