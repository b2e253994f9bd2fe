#pragma once

// One benchmark cell end to end: data, modules, the training loop with the
// batch structure of the tasks, periodic held-out evaluation, checkpoints
// and CSV logs. Training runs at 32-bit; correctness suites drive the
// underlying modules at 64-bit directly.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nfbench/conditioning/encoder.hpp"
#include "nfbench/conditioning/latent_table.hpp"
#include "nfbench/conditioning/objectives.hpp"
#include "nfbench/core/checkpoint.hpp"
#include "nfbench/data/metrics.hpp"
#include "nfbench/data/multiview.hpp"
#include "nfbench/data/tiled_mnist.hpp"
#include "nfbench/harness/spec.hpp"
#include "nfbench/render/renderer.hpp"

namespace nfbench {

struct MetricRecord {
  std::int64_t step = 0;
  double train_loss = 0;
  double test_psnr = 0;
  double wall_time_s = 0;
  std::size_t param_count = 0;
};

class MetricLog {
 public:
  void append(MetricRecord rec) {
    require(records_.empty() || rec.step > records_.back().step,
            "metric log: steps must be strictly increasing");
    records_.push_back(rec);
  }
  const std::vector<MetricRecord>& records() const { return records_; }

  void to_csv(const std::string& path) const {
    std::ofstream os(path);
    require(os.good(), "metric log: cannot open '" + path + "'");
    os << "step,train_loss,test_psnr,wall_time_s,param_count\n";
    os.precision(10);
    for (const MetricRecord& r : records_)
      os << r.step << "," << r.train_loss << "," << r.test_psnr << ","
         << r.wall_time_s << "," << r.param_count << "\n";
  }

 private:
  std::vector<MetricRecord> records_;
};

struct RunResult {
  MetricLog log;
  double final_psnr = std::numeric_limits<double>::quiet_NaN();
  bool ok = true;
  std::int64_t abort_step = -1;
  std::string message;
};

// Fills in the task-derived decoder fields (input dimension, output kind,
// token handling) that a config file does not carry.
inline void resolve_decoder(ExperimentSpec& spec) {
  DecoderConfig& d = spec.decoder;
  switch (spec.task) {
    case Task::kAutoencode:
      d.in_dim = PosEncConfig{spec.spatial_octaves}.out_dim(2);
      d.output = OutputKind::kRgb;
      d.use_token_embedding = false;  // encoder latents are already nonzero
      if (d.family == Family::kAttention) d.token_width = spec.encoder_token_dim;
      break;
    case Task::kNerf:
      d.in_dim = PosEncConfig{spec.spatial_octaves}.out_dim(3);
      d.output = OutputKind::kRgbSigma;
      d.use_token_embedding = d.family != Family::kConcat;
      break;
    case Task::kLightfield:
      d.in_dim = PosEncConfig{spec.plucker_octaves}.out_dim(6);
      d.output = OutputKind::kRgb;
      d.use_token_embedding = d.family != Family::kConcat;
      break;
  }
  d.validate();
}

// Encoder stage stack that still leaves enough feature-map cells for the
// requested patch count; shrinks the stack when the latent needs more
// patches than the default depth allows.
inline EncoderConfig resolve_encoder(const ExperimentSpec& spec,
                                     int image_size) {
  std::vector<int> channels = spec.encoder_channels;
  while (!channels.empty()) {
    try {
      return encoder_config_for(image_size, spec.decoder.latent_dim,
                                spec.encoder_token_dim, channels);
    } catch (const std::runtime_error&) {
      channels.pop_back();  // fewer stages -> larger feature map
    }
  }
  fail("no encoder stack fits latent_dim " +
       std::to_string(spec.decoder.latent_dim) + " at resolution " +
       std::to_string(image_size));
}

class ExperimentRunner {
 public:
  using Scalar = float;

  explicit ExperimentRunner(ExperimentSpec spec) : spec_(std::move(spec)) {
    spec_.apply_batch_defaults();
    resolve_decoder(spec_);
    setup_data();
    setup_modules();
  }

  const ExperimentSpec& spec() const { return spec_; }
  ParamStore<Scalar>& store() { return store_; }
  LatentTable<Scalar>* table() { return table_.get(); }
  std::size_t decoder_param_count() const { return count_params(spec_.decoder); }

  RunResult run(const std::string& resume_checkpoint = "") {
    if (!resume_checkpoint.empty()) load_checkpoint(resume_checkpoint);
    if (!spec_.out_dir.empty())
      std::filesystem::create_directories(spec_.out_dir);

    RunResult result;
    auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           t0)
          .count();
    };
    auto log_eval = [&](std::int64_t step, double loss) {
      double ps = evaluate();
      result.log.append({step, loss, ps, wall(), decoder_param_count()});
      result.final_psnr = ps;
    };

    std::int64_t start = store_.step_count();
    double last_loss = 0;
    if (start == 0) log_eval(0, 0.0);
    for (std::int64_t step = start; step < spec_.steps; ++step) {
      double loss = train_step(step);
      last_loss = loss;
      if (!std::isfinite(loss)) {
        result.ok = false;
        result.abort_step = step;
        result.message = "non-finite loss at step " + std::to_string(step);
        break;
      }
      std::int64_t done = step + 1;
      if (done == spec_.steps ||
          (spec_.eval_every > 0 && done % spec_.eval_every == 0)) {
        log_eval(done, loss);
        if (!spec_.out_dir.empty())
          save_checkpoint(spec_.out_dir + "/checkpoint.bin");
      }
    }
    (void)last_loss;
    if (!spec_.out_dir.empty()) {
      result.log.to_csv(spec_.out_dir + "/metrics.csv");
      if (result.ok) write_samples();
    }
    return result;
  }

  // Held-out PSNR, evaluated exactly as the task renders during training.
  double evaluate() {
    switch (spec_.task) {
      case Task::kAutoencode: {
        double acc = 0;
        int n = 0;
        for (int i = 0; i < spec_.dataset.test_images; ++i) {
          int idx = spec_.dataset.train_images + i;
          Image recon = reconstruct(idx);
          acc += psnr(recon, dataset_image(idx));
          ++n;
        }
        return n ? acc / n : 0;
      }
      case Task::kNerf:
      case Task::kLightfield: {
        double acc = 0;
        int n = 0;
        for (std::size_t inst = 0; inst < multiview_.size(); ++inst)
          for (int view : multiview_[inst].test_views) {
            Image img = render_view(static_cast<int>(inst), view);
            acc += psnr(img, multiview_[inst].images[view]);
            ++n;
          }
        return n ? acc / n : 0;
      }
    }
    return 0;
  }

  // Full-image auto-encoder reconstruction (frozen parameters).
  Image reconstruct(int image_index) {
    Image gt = dataset_image(image_index);
    Tensor<Scalar> img_t = gt.as_tensor<Scalar>();
    Graph<Scalar> g;
    ParamBinder<Scalar> p{g, store_, /*frozen=*/true};
    Var<Scalar> tokens =
        encoder_->encode(p, g.constant_view(img_t.data(), img_t.shape()));
    LatentInput<Scalar> z = latent_from_tokens(spec_.decoder, tokens);
    Var<Scalar> out = decoder_->forward(
        p, g.constant_view(grid_coords_.data(), grid_coords_.shape()), z);
    return Image::from_tensor(out.tensor(), gt.width, gt.height);
  }

  // Full-image NVS render of one (instance, view) with frozen parameters.
  Image render_view(int instance, int view) {
    const MultiviewSet& set = multiview_.at(instance);
    const Camera& cam = set.cameras.at(view);
    Image img(cam.width, cam.height);
    const int chunk = 256;
    std::vector<Ray> rays;
    rays.reserve(cam.width * cam.height);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        rays.push_back(ray_from_pixel(cam, x + 0.5, y + 0.5));
    for (std::size_t off = 0; off < rays.size(); off += chunk) {
      std::size_t n = std::min<std::size_t>(chunk, rays.size() - off);
      std::vector<Ray> part(rays.begin() + off, rays.begin() + off + n);
      Graph<Scalar> g;
      Var<Scalar> out = render_rays(g, instance, part, /*frozen=*/true,
                                    /*stream_base=*/0xe7a0000ULL + off);
      for (std::size_t r = 0; r < n; ++r)
        for (int c = 0; c < 3; ++c)
          img.rgb[(off + r) * 3 + c] = float(out.value(r * 3 + c));
    }
    return img;
  }

  void save_checkpoint(const std::string& path) {
    CheckpointWriter w(path);
    w.add_store("dec", store_);
    if (table_) w.add_store("lat", table_->store());
  }

  void load_checkpoint(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    ck.restore_store("dec", store_);
    if (table_) ck.restore_store("lat", table_->store());
  }

  Image dataset_image(int index) {
    require(index >= 0, "dataset: bad image index");
    if (tiled_) return tiled_->image(static_cast<std::uint64_t>(index));
    require(index < static_cast<int>(folder_images_.size()),
            "dataset: image index " + std::to_string(index) +
                " out of range for folder with " +
                std::to_string(folder_images_.size()) + " images");
    return folder_images_[index];
  }

  const std::vector<MultiviewSet>& multiview() const { return multiview_; }

  double train_step(std::int64_t step) {
    return spec_.task == Task::kAutoencode ? train_step_autoencode(step)
                                           : train_step_nvs(step);
  }

 private:
  static constexpr std::uint64_t kBatchStream = 1u << 20;

  void setup_data() {
    const DatasetSpec& d = spec_.dataset;
    if (spec_.task == Task::kAutoencode) {
      if (d.kind == "tiled-mnist") {
        std::vector<Glyph> pool =
            d.mnist_idx.empty()
                ? synthetic_digit_pool(d.pool_size, spec_.seed ^ 0x9d1700ULL)
                : load_mnist_idx(d.mnist_idx);
        TiledMnistSpec ts{d.grid, d.glyph, d.unique, spec_.seed};
        tiled_ = std::make_unique<TiledMnist>(ts, pool);
        image_size_ = ts.image_size();
      } else if (d.kind == "image-folder") {
        namespace fs = std::filesystem;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(d.folder))
          if (e.path().extension() == ".ppm" || e.path().extension() == ".pgm")
            files.push_back(e.path());
        std::sort(files.begin(), files.end());
        require(!files.empty(), "dataset: no pixmaps under '" + d.folder + "'");
        for (const auto& f : files) folder_images_.push_back(read_ppm(f.string()));
        image_size_ = folder_images_[0].width;
        for (const Image& img : folder_images_)
          require(img.width == image_size_ && img.height == image_size_,
                  "dataset: folder images must share a square resolution");
        require(static_cast<int>(folder_images_.size()) >=
                    d.train_images + d.test_images,
                "dataset: folder has fewer images than train+test");
      } else {
        fail("dataset kind '" + d.kind + "' is not valid for autoencoding");
      }
      grid_coords_ = make_grid_coords(image_size_);
    } else {
      require(d.kind == "multiview",
              "dataset kind '" + d.kind + "' is not valid for NVS tasks");
      for (int i = 0; i < d.instances; ++i) {
        BlobScene scene = make_blob_scene(spec_.seed, i, d.blobs);
        scene.near = spec_.render.near;
        scene.far = spec_.render.far;
        multiview_.push_back(generate_multiview(scene, d.views, d.resolution,
                                                spec_.seed ^ (0xabcdULL + i),
                                                3.0, 0.35, d.gt_samples));
      }
    }
  }

  void setup_modules() {
    CounterRng init_rng(spec_.seed, 0);
    if (spec_.task == Task::kAutoencode) {
      EncoderConfig ecfg = resolve_encoder(spec_, image_size_);
      encoder_ = std::make_unique<ImageEncoder<Scalar>>(ecfg);
      encoder_->init_params(store_, init_rng);
    }
    decoder_ = std::make_unique<Decoder<Scalar>>(spec_.decoder);
    decoder_->init_params(store_, init_rng);
    if (spec_.task != Task::kAutoencode) {
      table_ = std::make_unique<LatentTable<Scalar>>(
          static_cast<int>(multiview_.size()), spec_.decoder, init_rng);
      reg_ = squared_norm_reg(spec_.optim.reg_weight);
    }
  }

  Tensor<Scalar> make_grid_coords(int size) const {
    Tensor<Scalar> raw({size * size, 2});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        raw.at(y * size + x, 0) = Scalar(2) * (x + Scalar(0.5)) / size - 1;
        raw.at(y * size + x, 1) = Scalar(2) * (y + Scalar(0.5)) / size - 1;
      }
    return positional_encode(raw, PosEncConfig{spec_.spatial_octaves});
  }

  double train_step_autoencode(std::int64_t step) {
    CounterRng rng(spec_.seed, kBatchStream + static_cast<std::uint64_t>(step));
    const int total_px = image_size_ * image_size_;
    std::vector<Tensor<Scalar>> storage;
    std::vector<const Tensor<Scalar>*> batch;
    std::vector<std::vector<int>> pixels;
    for (int b = 0; b < spec_.batch.instances; ++b) {
      int idx = static_cast<int>(rng.below(spec_.dataset.train_images));
      storage.push_back(dataset_image(idx).as_tensor<Scalar>());
      std::vector<int> ids(spec_.batch.pixels);
      for (int& v : ids) v = static_cast<int>(rng.below(total_px));
      pixels.push_back(std::move(ids));
    }
    for (const auto& t : storage) batch.push_back(&t);

    Graph<Scalar> g;
    ParamBinder<Scalar> p{g, store_};
    Var<Scalar> loss =
        autoencoder_loss(p, *encoder_, *decoder_, batch, grid_coords_, pixels);
    double value = loss.value();
    if (!std::isfinite(value)) return value;
    g.backward(loss);
    store_.adam_step(spec_.optim.adam());
    return value;
  }

  double train_step_nvs(std::int64_t step) {
    CounterRng rng(spec_.seed, kBatchStream + static_cast<std::uint64_t>(step));
    const int inst_count = static_cast<int>(multiview_.size());
    const int batch_inst = std::min(spec_.batch.instances, inst_count);

    Graph<Scalar> g;
    std::vector<Var<Scalar>> preds, targets, latents;
    for (int b = 0; b < batch_inst; ++b) {
      int inst = static_cast<int>(rng.below(inst_count));
      const MultiviewSet& set = multiview_[inst];
      std::vector<Ray> rays;
      Tensor<Scalar> target({spec_.batch.views * spec_.batch.pixels, 3});
      int row = 0;
      for (int v = 0; v < spec_.batch.views; ++v) {
        int view = set.train_views[rng.below(set.train_views.size())];
        const Camera& cam = set.cameras[view];
        for (int k = 0; k < spec_.batch.pixels; ++k, ++row) {
          int px = static_cast<int>(rng.below(cam.width));
          int py = static_cast<int>(rng.below(cam.height));
          rays.push_back(ray_from_pixel(cam, px + 0.5, py + 0.5));
          const float* gt = set.images[view].pixel(px, py);
          for (int c = 0; c < 3; ++c) target.at(row, c) = gt[c];
        }
      }
      LatentInput<Scalar> z = table_->latent(g, inst);
      latents.push_back(z.flat);
      std::uint64_t stream =
          (static_cast<std::uint64_t>(step) * 1024 + b) * 4096;
      preds.push_back(render_instance_rays(g, z, rays, /*frozen=*/false,
                                           stream));
      targets.push_back(g.constant(std::move(target)));
    }
    Var<Scalar> loss = mse(concat(preds, 0), concat(targets, 0));
    loss = add(loss, regularizer_term(g, latents, reg_));
    double value = loss.value();
    if (!std::isfinite(value)) return value;
    g.backward(loss);
    store_.adam_step(spec_.optim.adam());
    table_->step(spec_.optim.latent_adam());
    return value;
  }

  Var<Scalar> render_rays(Graph<Scalar>& g, int instance,
                          const std::vector<Ray>& rays, bool frozen,
                          std::uint64_t stream_base) {
    LatentInput<Scalar> z = frozen ? table_->latent_const(g, instance)
                                   : table_->latent(g, instance);
    return render_instance_rays(g, z, rays, frozen, stream_base);
  }

  Var<Scalar> render_instance_rays(Graph<Scalar>& g,
                                   const LatentInput<Scalar>& z,
                                   const std::vector<Ray>& rays, bool frozen,
                                   std::uint64_t stream_base) {
    LatentProvider<Scalar> provider = [z](Graph<Scalar>&) { return z; };
    SceneBounds bounds;  // blob scenes live in [-1,1]^3
    if (spec_.task == Task::kNerf) {
      RadianceField<Scalar> field = decoder_radiance_field<Scalar>(
          *decoder_, store_, frozen, provider, bounds,
          PosEncConfig{spec_.spatial_octaves});
      SampleSpec ss{spec_.render.coarse, spec_.render.fine, spec_.render.near,
                    spec_.render.far};
      return render_nerf_rays<Scalar>(g, field, rays, ss, {0, 0, 0},
                                      spec_.seed ^ 0x5eedULL, stream_base);
    }
    LightField<Scalar> field = decoder_light_field<Scalar>(
        *decoder_, store_, frozen, provider, /*moment_scale=*/3.0,
        PosEncConfig{spec_.plucker_octaves});
    return render_lightfield_rays<Scalar>(g, field, rays, bounds);
  }

  void write_samples() {
    if (spec_.task == Task::kAutoencode) {
      for (int i = 0; i < std::min(2, spec_.dataset.test_images); ++i) {
        int idx = spec_.dataset.train_images + i;
        write_ppm(spec_.out_dir + "/recon_" + std::to_string(idx) + ".ppm",
                  reconstruct(idx));
      }
    } else if (!multiview_.empty() && !multiview_[0].test_views.empty()) {
      int view = multiview_[0].test_views[0];
      write_ppm(spec_.out_dir + "/render_i0_v" + std::to_string(view) + ".ppm",
                render_view(0, view));
    }
  }

  ExperimentSpec spec_;
  ParamStore<Scalar> store_;
  std::unique_ptr<ImageEncoder<Scalar>> encoder_;
  std::unique_ptr<Decoder<Scalar>> decoder_;
  std::unique_ptr<LatentTable<Scalar>> table_;
  RegularizerConfig reg_;

  std::unique_ptr<TiledMnist> tiled_;
  std::vector<Image> folder_images_;
  std::vector<MultiviewSet> multiview_;
  int image_size_ = 0;
  Tensor<Scalar> grid_coords_;
};

inline RunResult run_experiment(const ExperimentSpec& spec,
                                const std::string& resume = "") {
  ExperimentRunner runner(spec);
  return runner.run(resume);
}

}  // namespace nfbench
