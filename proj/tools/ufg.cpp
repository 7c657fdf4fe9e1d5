#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "ufg/errors.hpp"
#include "ufg/image.hpp"
#include "ufg/synth.hpp"
#include "ufg/train.hpp"

namespace {

ufg::TrainConfig load_config(const std::string& path) {
  return path.empty() ? ufg::TrainConfig{} : ufg::TrainConfig::from_json_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Raindrop-removal GAN: synthetic data, training, evaluation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Build a synthetic paired dataset");
  std::string clean_dir, out_dir, preset_name = "moderate";
  int n = 16;
  uint64_t seed = 1;
  synth->add_option("--clean-dir", clean_dir, "Directory of clean PNGs")->required();
  synth->add_option("--out", out_dir, "Output dataset directory")->required();
  synth->add_option("--preset", preset_name, "heavy|moderate|light");
  synth->add_option("--n", n, "Number of pairs");
  synth->add_option("--seed", seed, "Base seed");

  // train-est
  auto* test_cmd = app.add_subcommand("train-est", "Train the rain estimator");
  std::string data_dir, config_path, out_path;
  test_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  test_cmd->add_option("--config", config_path, "TrainConfig JSON");
  test_cmd->add_option("--out", out_path, "Output checkpoint")->required();

  // train-gan
  auto* tgan = app.add_subcommand("train-gan", "Adversarial training stage");
  std::string est_path;
  std::string gan_data, gan_config, gan_out;
  tgan->add_option("--data", gan_data, "Dataset directory")->required();
  tgan->add_option("--estnet", est_path, "EstNet checkpoint (needed for attention variants)");
  tgan->add_option("--config", gan_config, "TrainConfig JSON");
  tgan->add_option("--out", gan_out, "Output checkpoint")->required();

  // derain
  auto* derain = app.add_subcommand("derain", "Run a checkpoint on one image");
  std::string ckpt_path, in_path, out_img;
  derain->add_option("--ckpt", ckpt_path, "Model checkpoint")->required();
  derain->add_option("--in", in_path, "Input PNG")->required();
  derain->add_option("--out", out_img, "Output PNG")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM report on a dataset");
  std::string eval_ckpt, eval_data, eval_report;
  eval_cmd->add_option("--ckpt", eval_ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--report", eval_report, "Output CSV")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate ladder variants");
  std::string ab_data, ab_config, ab_report;
  std::vector<std::string> ab_variants;
  ablate->add_option("--data", ab_data,
                     "Root with train/, test-heavy/, test-moderate/, test-light/")
      ->required();
  ablate->add_option("--variants", ab_variants,
                     "Ladder tags (default: the full ladder)");
  ablate->add_option("--config", ab_config, "TrainConfig JSON");
  ablate->add_option("--report", ab_report, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto rows = ufg::build_dataset(clean_dir, out_dir,
                                           ufg::RainPreset::by_name(preset_name),
                                           n, seed);
      std::cout << "wrote " << rows.size() << " pairs to " << out_dir << "\n";
    } else if (*test_cmd) {
      ufg::train_estnet(data_dir, load_config(config_path), out_path, &std::cout);
      std::cout << "saved " << out_path << "\n";
    } else if (*tgan) {
      ufg::train_gan(gan_data, est_path, load_config(gan_config), gan_out,
                     &std::cout);
      std::cout << "saved " << gan_out << "\n";
    } else if (*derain) {
      const auto bundle = ufg::ModelBundle::load(ckpt_path);
      const ufg::Tensor rain = ufg::load_png(in_path);
      ufg::save_png(out_img, bundle.derain(rain));
      std::cout << "wrote " << out_img << "\n";
    } else if (*eval_cmd) {
      const auto rep = ufg::evaluate(eval_ckpt, eval_data, eval_report);
      std::cout << rep.csv;
    } else if (*ablate) {
      if (ab_variants.empty()) ab_variants = ufg::ablation_ladder();
      const std::string csv = ufg::run_ablation(ab_data, ab_variants,
                                                load_config(ab_config),
                                                ab_report, &std::cout);
      std::cout << csv;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
