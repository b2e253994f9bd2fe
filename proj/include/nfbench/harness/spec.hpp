#pragma once

// Experiment configuration: one benchmark cell = (task, dataset, decoder,
// latent dimension, training). Serialized as JSON; field names below are
// the file schema.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfbench/decoders/config.hpp"

namespace nfbench {

enum class Task { kAutoencode, kNerf, kLightfield };

inline const char* task_name(Task t) {
  switch (t) {
    case Task::kAutoencode: return "autoencode";
    case Task::kNerf: return "nerf";
    case Task::kLightfield: return "lightfield";
  }
  return "?";
}

inline Task task_from_name(const std::string& s) {
  if (s == "autoencode") return Task::kAutoencode;
  if (s == "nerf") return Task::kNerf;
  if (s == "lightfield") return Task::kLightfield;
  fail("unknown task '" + s + "'");
}

struct DatasetSpec {
  std::string kind = "tiled-mnist";  // tiled-mnist | image-folder | multiview
  // tiled-mnist
  int grid = 16;
  int glyph = 16;
  int unique = 16;
  int pool_size = 4096;    // synthetic pool size
  std::string mnist_idx;   // optional real IDX file; overrides the pool
  int train_images = 512;  // stream indices [0, train)
  int test_images = 16;    // stream indices [train, train+test)
  // image-folder (2-d autoencoding on stored pixmaps)
  std::string folder;
  // multiview (synthetic scenes; or a folder of fixture instances)
  int instances = 4;
  int views = 20;
  int resolution = 16;
  int gt_samples = 512;
  int blobs = 3;
};

struct OptimSpec {
  double lr = 1e-4;         // encoder/decoder learning rate
  double latent_lr = 1e-3;  // latent-table learning rate
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double reg_weight = 1e-4;  // squared-norm weight on latents (auto-decode)

  AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
  AdamConfig latent_adam() const { return {latent_lr, beta1, beta2, eps}; }
};

struct BatchSpec {
  int instances = 0;  // images (2-d) or scene instances (NVS) per batch
  int views = 0;      // views per instance (NVS)
  int pixels = 0;     // pixels sampled per image/view
};

struct RenderSpec {
  int coarse = 128;
  int fine = 64;
  double near = 1.0;
  double far = 5.0;
};

struct ExperimentSpec {
  std::string name = "cell";
  Task task = Task::kAutoencode;
  std::uint64_t seed = 1;
  int steps = 2000;
  int eval_every = 500;
  std::string out_dir = "out";

  DecoderConfig decoder;
  int encoder_token_dim = 32;  // G
  std::vector<int> encoder_channels = {32, 64, 128, 128};
  int spatial_octaves = 10;
  int plucker_octaves = 6;

  DatasetSpec dataset;
  OptimSpec optim;
  BatchSpec batch;  // zeros: filled with the task defaults below
  RenderSpec render;

  // batch-structure defaults: 128 images x 512 pixels for auto-encoding,
  // 64 instances x 2 views x 64 pixels for NVS auto-decoding
  void apply_batch_defaults() {
    if (task == Task::kAutoencode) {
      if (batch.instances == 0) batch.instances = 128;
      if (batch.views == 0) batch.views = 1;
      if (batch.pixels == 0) batch.pixels = 512;
    } else {
      if (batch.instances == 0) batch.instances = 64;
      if (batch.views == 0) batch.views = 2;
      if (batch.pixels == 0) batch.pixels = 64;
    }
  }
};

// ---------------------------------------------------------------------------
// JSON (nlohmann); missing fields keep their defaults

inline void decoder_from_json(const nlohmann::json& j, DecoderConfig& d) {
  if (j.contains("family")) d.family = family_from_name(j["family"]);
  d.hidden_width = j.value("hidden_width", d.hidden_width);
  d.depth = j.value("depth", d.depth);
  d.attention_stages = j.value("attention_stages", d.attention_stages);
  d.dense_per_stage = j.value("dense_per_stage", d.dense_per_stage);
  d.heads = j.value("heads", d.heads);
  d.key_dim = j.value("key_dim", d.key_dim);
  d.hyper_width = j.value("hyper_width", d.hyper_width);
  d.latent_dim = j.value("latent_dim", d.latent_dim);
  d.token_width = j.value("token_width", d.token_width);
  d.token_embed_dim = j.value("token_embed_dim", d.token_embed_dim);
  d.use_token_embedding = j.value("use_token_embedding", d.use_token_embedding);
  d.concat_splits = j.value("concat_splits", d.concat_splits);
  d.concat_skip = j.value("concat_skip", d.concat_skip);
}

inline nlohmann::json decoder_to_json(const DecoderConfig& d) {
  return {{"family", family_name(d.family)},
          {"hidden_width", d.hidden_width},
          {"depth", d.depth},
          {"attention_stages", d.attention_stages},
          {"dense_per_stage", d.dense_per_stage},
          {"heads", d.heads},
          {"key_dim", d.key_dim},
          {"hyper_width", d.hyper_width},
          {"latent_dim", d.latent_dim},
          {"token_width", d.token_width},
          {"token_embed_dim", d.token_embed_dim},
          {"use_token_embedding", d.use_token_embedding},
          {"concat_splits", d.concat_splits},
          {"concat_skip", d.concat_skip}};
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  s.name = j.value("name", s.name);
  if (j.contains("task")) s.task = task_from_name(j["task"]);
  s.seed = j.value("seed", s.seed);
  s.steps = j.value("steps", s.steps);
  s.eval_every = j.value("eval_every", s.eval_every);
  s.out_dir = j.value("out_dir", s.out_dir);
  if (j.contains("decoder")) decoder_from_json(j["decoder"], s.decoder);
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    s.encoder_token_dim = e.value("token_dim", s.encoder_token_dim);
    if (e.contains("channels"))
      s.encoder_channels = e["channels"].get<std::vector<int>>();
  }
  if (j.contains("posenc")) {
    s.spatial_octaves = j["posenc"].value("spatial_octaves", s.spatial_octaves);
    s.plucker_octaves = j["posenc"].value("plucker_octaves", s.plucker_octaves);
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    s.dataset.kind = d.value("kind", s.dataset.kind);
    s.dataset.grid = d.value("grid", s.dataset.grid);
    s.dataset.glyph = d.value("glyph", s.dataset.glyph);
    s.dataset.unique = d.value("unique", s.dataset.unique);
    s.dataset.pool_size = d.value("pool_size", s.dataset.pool_size);
    s.dataset.mnist_idx = d.value("mnist_idx", s.dataset.mnist_idx);
    s.dataset.train_images = d.value("train_images", s.dataset.train_images);
    s.dataset.test_images = d.value("test_images", s.dataset.test_images);
    s.dataset.folder = d.value("folder", s.dataset.folder);
    s.dataset.instances = d.value("instances", s.dataset.instances);
    s.dataset.views = d.value("views", s.dataset.views);
    s.dataset.resolution = d.value("resolution", s.dataset.resolution);
    s.dataset.gt_samples = d.value("gt_samples", s.dataset.gt_samples);
    s.dataset.blobs = d.value("blobs", s.dataset.blobs);
  }
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    s.optim.lr = o.value("lr", s.optim.lr);
    s.optim.latent_lr = o.value("latent_lr", s.optim.latent_lr);
    s.optim.beta1 = o.value("beta1", s.optim.beta1);
    s.optim.beta2 = o.value("beta2", s.optim.beta2);
    s.optim.eps = o.value("eps", s.optim.eps);
    s.optim.reg_weight = o.value("reg_weight", s.optim.reg_weight);
  }
  if (j.contains("batch")) {
    const auto& b = j["batch"];
    s.batch.instances = b.value("instances", 0);
    s.batch.views = b.value("views", 0);
    s.batch.pixels = b.value("pixels", 0);
  }
  if (j.contains("render")) {
    const auto& r = j["render"];
    s.render.coarse = r.value("coarse", s.render.coarse);
    s.render.fine = r.value("fine", s.render.fine);
    s.render.near = r.value("near", s.render.near);
    s.render.far = r.value("far", s.render.far);
  }
  s.apply_batch_defaults();
  return s;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["task"] = task_name(s.task);
  j["seed"] = s.seed;
  j["steps"] = s.steps;
  j["eval_every"] = s.eval_every;
  j["out_dir"] = s.out_dir;
  j["decoder"] = decoder_to_json(s.decoder);
  j["encoder"] = {{"token_dim", s.encoder_token_dim},
                  {"channels", s.encoder_channels}};
  j["posenc"] = {{"spatial_octaves", s.spatial_octaves},
                 {"plucker_octaves", s.plucker_octaves}};
  j["dataset"] = {{"kind", s.dataset.kind},
                  {"grid", s.dataset.grid},
                  {"glyph", s.dataset.glyph},
                  {"unique", s.dataset.unique},
                  {"pool_size", s.dataset.pool_size},
                  {"mnist_idx", s.dataset.mnist_idx},
                  {"train_images", s.dataset.train_images},
                  {"test_images", s.dataset.test_images},
                  {"folder", s.dataset.folder},
                  {"instances", s.dataset.instances},
                  {"views", s.dataset.views},
                  {"resolution", s.dataset.resolution},
                  {"gt_samples", s.dataset.gt_samples},
                  {"blobs", s.dataset.blobs}};
  j["optim"] = {{"lr", s.optim.lr},           {"latent_lr", s.optim.latent_lr},
                {"beta1", s.optim.beta1},     {"beta2", s.optim.beta2},
                {"eps", s.optim.eps},         {"reg_weight", s.optim.reg_weight}};
  j["batch"] = {{"instances", s.batch.instances},
                {"views", s.batch.views},
                {"pixels", s.batch.pixels}};
  j["render"] = {{"coarse", s.render.coarse},
                 {"fine", s.render.fine},
                 {"near", s.render.near},
                 {"far", s.render.far}};
  return j;
}

}  // namespace nfbench
