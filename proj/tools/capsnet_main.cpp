#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "capsnet/checkpoint.hpp"
#include "capsnet/config.hpp"
#include "capsnet/data.hpp"
#include "capsnet/ensemble.hpp"
#include "capsnet/ppm.hpp"
#include "capsnet/training.hpp"

namespace {

using namespace capsnet;

constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitNumericError = 4;

std::pair<DatasetSplit, DatasetSplit> load_dataset(const std::string& name,
                                                   const std::string& dir) {
  return name == "mnist" ? load_mnist(dir) : load_cifar10(dir);
}

std::string csv_row(const MetricRecord& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", m.epoch, m.margin_loss,
                m.recon_loss, m.total_loss, m.val_accuracy);
  return buf;
}

int run_train(const std::string& config_path, const std::string& data_dir, int epochs_override,
              long seed_override, const std::string& out_dir, const std::string& resume_path) {
  RunConfig rc = load_run_config(config_path);
  if (epochs_override >= 0) rc.epochs = epochs_override;
  if (seed_override >= 0) rc.model.seed = static_cast<std::uint64_t>(seed_override);

  auto [train_split, val_split] = load_dataset(rc.dataset, data_dir);
  if (rc.train_limit > 0) train_split.truncate(rc.train_limit);
  if (rc.val_limit > 0) val_split.truncate(rc.val_limit);
  train_split.shuffle_seed = rc.model.seed;
  val_split.shuffle_seed = rc.model.seed;

  std::filesystem::create_directories(out_dir);

  TrainingSnapshot snap;
  if (!resume_path.empty()) {
    snap = load_checkpoint(resume_path);
  } else {
    snap.model = build_model<float>(rc.model);
    snap.adam.init(snap.model);
    snap.has_adam = true;
    snap.epoch = 0;
  }
  snap.adam.lr = rc.learning_rate;

  TrainOptions opts;
  opts.batch_size = rc.batch_size;
  opts.augment = rc.augment;

  const std::string csv_path = out_dir + "/metrics.csv";
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << "epoch,margin_loss,recon_loss,total_loss,val_accuracy\n";
    for (const auto& m : snap.history) csv << csv_row(m);
  }

  for (int epoch = snap.epoch; epoch < rc.epochs; ++epoch) {
    MetricRecord m = train_epoch(snap.model, train_split, snap.adam, epoch, opts);
    m.val_accuracy = evaluate(snap.model, val_split, rc.augment);
    snap.history.push_back(m);
    snap.epoch = epoch + 1;
    {
      std::ofstream csv(csv_path, std::ios::app);
      csv << csv_row(m);
    }
    char name[64];
    std::snprintf(name, sizeof name, "/ckpt_epoch_%03d.caps", epoch + 1);
    save_checkpoint(snap, out_dir + name);
    std::printf("epoch %d margin %.6f recon %.2f total %.6f val_acc %.4f\n", m.epoch,
                m.margin_loss, m.recon_loss, m.total_loss, m.val_accuracy);
    std::fflush(stdout);
  }
  save_checkpoint(snap, out_dir + "/final.caps");
  return 0;
}

std::pair<DatasetSplit, AugmentationConfig> eval_split_for(const Model<float>& model,
                                                           const std::string& data_dir,
                                                           const std::string& which, int limit) {
  const std::string dataset = model.cfg.input_channels == 1 ? "mnist" : "cifar10";
  auto [train_split, val_split] = load_dataset(dataset, data_dir);
  DatasetSplit split = which == "train" ? std::move(train_split) : std::move(val_split);
  if (limit > 0) split.truncate(limit);
  AugmentationConfig aug;
  if (model.cfg.input_size < split.height) {
    aug.enabled = true;
    aug.crop_size = model.cfg.input_size;
  }
  return {std::move(split), aug};
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& which,
             int limit) {
  TrainingSnapshot snap = load_checkpoint(ckpt_path);
  auto [split, aug] = eval_split_for(snap.model, data_dir, which, limit);
  const double acc = evaluate(snap.model, split, aug);
  std::printf("accuracy %.6f\n", acc);
  return 0;
}

int run_ensemble(const std::string& manifest_path, const std::string& data_dir, int limit) {
  Ensemble e;
  for (const auto& p : read_ensemble_manifest(manifest_path))
    e.members.push_back(load_checkpoint(p).model);
  e.validate();
  auto [split, aug] = eval_split_for(e.members.front(), data_dir, "val", limit);
  const double acc = ensemble_evaluate(e, split, aug);
  std::printf("ensemble accuracy %.6f\n", acc);
  return 0;
}

int run_reconstruct(const std::string& ckpt_path, const std::string& data_dir, int count,
                    const std::string& out_path) {
  if (count < 1) throw InputError("--count must be >= 1");
  TrainingSnapshot snap = load_checkpoint(ckpt_path);
  auto [split, aug] = eval_split_for(snap.model, data_dir, "val", count);
  if (split.n < count)
    throw InputError("dataset has only " + std::to_string(split.n) + " images");
  std::vector<Tensor<float>> originals, recons;
  auto dec = snap.model.decoder();
  for (int i = 0; i < count; ++i) {
    Tensor<float> img = split.image(i);
    if (aug.enabled)
      img = crop_image(img, aug.crop_size, (split.height - aug.crop_size) / 2,
                       (split.width - aug.crop_size) / 2);
    auto out = forward(snap.model, img);
    const int predicted = predict_class(snap.model.cfg, out.class_capsules);
    auto rec = masked_reconstruction(out.class_capsules, predicted, dec, img);
    originals.push_back(img);
    recons.push_back(ops::reshape(rec.reconstruction, img.shape));
  }
  write_comparison_grid(out_path, originals, recons);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capsule-network training and inference engine"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out", ckpt_path, manifest_path, out_path;
  std::string split = "val", resume_path;
  int epochs = -1, limit = 0, count = 8;
  long seed = -1;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--epochs", epochs, "override train.epochs");
  train->add_option("--seed", seed, "override seed");
  train->add_option("--out", out_dir, "output directory for checkpoints and metrics.csv");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));
  eval->add_option("--limit", limit, "evaluate only the first N examples");

  auto* ens = app.add_subcommand("ensemble", "Evaluate an ensemble manifest");
  ens->add_option("--manifest", manifest_path, "text file listing checkpoint paths")->required();
  ens->add_option("--data", data_dir, "dataset directory")->required();
  ens->add_option("--limit", limit, "evaluate only the first N examples");

  auto* rec = app.add_subcommand("reconstruct", "Export an input/reconstruction PPM grid");
  rec->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  rec->add_option("--data", data_dir, "dataset directory")->required();
  rec->add_option("--count", count, "number of columns");
  rec->add_option("--out", out_path, "output .ppm path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return run_train(config_path, data_dir, epochs, seed, out_dir, resume_path);
    if (eval->parsed()) return run_eval(ckpt_path, data_dir, split, limit);
    if (ens->parsed()) return run_ensemble(manifest_path, data_dir, limit);
    if (rec->parsed()) return run_reconstruct(ckpt_path, data_dir, count, out_path);
  } catch (const capsnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const capsnet::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const capsnet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const capsnet::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const capsnet::InputError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
