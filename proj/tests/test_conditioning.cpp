#include <catch2/catch_amalgamated.hpp>

#include "nfbench/conditioning/encoder.hpp"
#include "nfbench/conditioning/latent_table.hpp"
#include "nfbench/conditioning/objectives.hpp"
#include "nfbench/encoding/posenc.hpp"
#include "support/store_gradcheck.hpp"

using namespace nfbench;
using Catch::Approx;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.image_size = 8;
  cfg.channels = {4, 6};
  cfg.patch_cells = 1;  // M=2 -> P=4
  cfg.token_out_dim = 8;
  cfg.attn_heads = 2;
  cfg.attn_dim = 4;
  return cfg;
}

DecoderConfig tiny_decoder(Family fam, int latent_dim, int token_width,
                           int in_dim) {
  DecoderConfig cfg;
  cfg.family = fam;
  cfg.hidden_width = 16;
  cfg.depth = 2;
  cfg.attention_stages = 2;
  cfg.dense_per_stage = 2;
  cfg.heads = 2;
  cfg.key_dim = 8;
  cfg.hyper_width = 8;
  cfg.latent_dim = latent_dim;
  cfg.token_width = token_width;
  cfg.in_dim = in_dim;
  return cfg;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, CounterRng& rng, double lo = 0,
                        double hi = 1) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// full-pixel-grid encoded coordinates for a size x size image in [-1,1]
template <typename T>
Tensor<T> grid_coords(int size, const PosEncConfig& pe) {
  Tensor<T> raw({size * size, 2});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      raw.at(y * size + x, 0) = T(2) * (T(x) + T(0.5)) / T(size) - T(1);
      raw.at(y * size + x, 1) = T(2) * (T(y) + T(0.5)) / T(size) - T(1);
    }
  return positional_encode(raw, pe);
}

}  // namespace

TEST_CASE("encoder geometry bookkeeping") {
  EncoderConfig cfg = tiny_encoder();
  REQUIRE(cfg.feature_map_size() == 2);
  REQUIRE(cfg.patch_count() == 4);
  REQUIRE(cfg.token_in_dim() == 6);
  REQUIRE(cfg.latent_dim() == 32);  // P*G

  SECTION("halving the patch size quadruples P and N at fixed G") {
    EncoderConfig big = cfg;
    big.image_size = 16;  // M = 4
    big.patch_cells = 2;
    int p0 = big.patch_count(), n0 = big.latent_dim();
    big.patch_cells = 1;
    REQUIRE(big.patch_count() == 4 * p0);
    REQUIRE(big.latent_dim() == 4 * n0);
  }
}

TEST_CASE("sweep-generated encoder configs keep P*G = N") {
  for (int n : {32, 128, 512}) {
    EncoderConfig cfg = encoder_config_for(32, n, 32, {8, 12, 16});
    REQUIRE(cfg.patch_count() * cfg.token_out_dim == n);
  }
  REQUIRE_THROWS(encoder_config_for(32, 96, 32, {8, 12, 16}));  // P=3 not square
}

TEST_CASE("all-zero image with zero parameters encodes to zero tokens") {
  EncoderConfig cfg = tiny_encoder();
  ParamStore<double> store;
  CounterRng rng(1, 0);
  ImageEncoder<double> enc(cfg);
  enc.init_params(store, rng);
  for (std::size_t e = 0; e < store.entry_count(); ++e)
    store.entry_at(e).value.zero();

  Graph<double> g;
  ParamBinder<double> p{g, store};
  Tensord img({cfg.image_size * cfg.image_size, 3});
  Tensord tokens = enc.encode(p, g.constant(img)).tensor();
  REQUIRE(tokens.rows() == cfg.patch_count());
  REQUIRE(tokens.cols() == cfg.token_out_dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) REQUIRE(tokens[i] == 0.0);
}

TEST_CASE("encoding is a pure function of weights and image") {
  EncoderConfig cfg = tiny_encoder();
  ParamStore<double> store;
  CounterRng rng(2, 0);
  ImageEncoder<double> enc(cfg);
  enc.init_params(store, rng);
  Tensord img = random_tensor<double>({64, 3}, rng);
  auto run = [&]() {
    Graph<double> g;
    ParamBinder<double> p{g, store};
    return enc.encode(p, g.constant(img)).tensor();
  };
  REQUIRE(run().values() == run().values());
}

TEST_CASE("encoder rejects resolution mismatch") {
  EncoderConfig cfg = tiny_encoder();
  ParamStore<double> store;
  CounterRng rng(3, 0);
  ImageEncoder<double> enc(cfg);
  enc.init_params(store, rng);
  Graph<double> g;
  ParamBinder<double> p{g, store};
  REQUIRE_THROWS_WITH(enc.encode(p, g.constant(Tensord({32, 3}))),
                      Catch::Matchers::ContainsSubstring("image"));
}

TEST_CASE("encoder gradients pass finite differences") {
  EncoderConfig cfg = tiny_encoder();
  ParamStore<double> store;
  CounterRng rng(4, 0);
  ImageEncoder<double> enc(cfg);
  enc.init_params(store, rng);
  Tensord img = random_tensor<double>({64, 3}, rng);
  auto res = nfbench::test::fd_check_store(
      store, [&](Graph<double>& g, ParamBinder<double>& p) {
        Var<double> tokens = enc.encode(p, g.constant(img));
        return reduce_mean(mul(tokens, tokens));
      });
  INFO("max rel err " << res.max_rel_err);
  REQUIRE(res.max_rel_err < 1e-4);
}

TEST_CASE("autoencoder loss arithmetic fixtures") {
  // zeroed parameters: decoder emits sigmoid(0) = 0.5 everywhere
  EncoderConfig ecfg = tiny_encoder();
  DecoderConfig dcfg = tiny_decoder(Family::kConcat, ecfg.latent_dim(),
                                    ecfg.latent_dim(), 20);
  PosEncConfig pe{.octaves = 5};  // 2 coords * 10 = 20
  ParamStore<double> store;
  CounterRng rng(5, 0);
  ImageEncoder<double> enc(ecfg);
  Decoder<double> dec(dcfg);
  enc.init_params(store, rng);
  dec.init_params(store, rng);
  for (std::size_t e = 0; e < store.entry_count(); ++e)
    store.entry_at(e).value.zero();

  Tensord coords = grid_coords<double>(8, pe);
  std::vector<int> all_pixels(64);
  for (int i = 0; i < 64; ++i) all_pixels[i] = i;

  auto loss_for = [&](double pixel_value) {
    Tensord img = Tensord::full({64, 3}, pixel_value);
    Graph<double> g;
    ParamBinder<double> p{g, store};
    return autoencoder_loss(p, enc, dec, {&img}, coords, {all_pixels}).value();
  };
  REQUIRE(loss_for(0.5) == Approx(0.0).margin(1e-12));   // perfect recon
  REQUIRE(loss_for(0.0) == Approx(0.25).margin(1e-12));  // off by 0.5
}

TEST_CASE("autoencoder loss decreases over 200 steps for every family") {
  EncoderConfig ecfg = tiny_encoder();
  PosEncConfig pe{.octaves = 4};
  const int in_dim = pe.out_dim(2);
  Tensord coords = grid_coords<double>(8, pe);
  CounterRng data_rng(77, 0);
  std::vector<Tensord> imgs{random_tensor<double>({64, 3}, data_rng),
                            random_tensor<double>({64, 3}, data_rng)};

  for (Family fam : {Family::kConcat, Family::kHyper, Family::kAttention}) {
    DecoderConfig dcfg =
        tiny_decoder(fam, ecfg.latent_dim(), ecfg.token_out_dim, in_dim);
    ParamStore<double> store;
    CounterRng rng(6, 0);
    ImageEncoder<double> enc(ecfg);
    Decoder<double> dec(dcfg);
    enc.init_params(store, rng);
    dec.init_params(store, rng);

    std::vector<double> losses;
    CounterRng pix_rng(8, 0);
    for (int step = 0; step < 200; ++step) {
      std::vector<std::vector<int>> pix(2);
      for (auto& v : pix)
        for (int j = 0; j < 16; ++j)
          v.push_back(static_cast<int>(pix_rng.below(64)));
      Graph<double> g;
      ParamBinder<double> p{g, store};
      Var<double> loss =
          autoencoder_loss(p, enc, dec, {&imgs[0], &imgs[1]}, coords, pix);
      losses.push_back(loss.value());
      g.backward(loss);
      store.adam_step({.lr = 3e-3});
    }
    double head = 0, tail = 0;
    for (int i = 0; i < 30; ++i) {
      head += losses[i];
      tail += losses[losses.size() - 1 - i];
    }
    INFO(family_name(fam) << ": head " << head / 30 << " tail " << tail / 30);
    REQUIRE(tail < head);
  }
}

TEST_CASE("autodecoder loss and the sparse update contract") {
  PosEncConfig pe{.octaves = 4};
  const int in_dim = pe.out_dim(2);
  DecoderConfig dcfg = tiny_decoder(Family::kAttention, 16, 8, in_dim);
  dcfg.use_token_embedding = true;
  dcfg.token_embed_dim = 4;
  ParamStore<double> store;
  CounterRng rng(9, 0);
  Decoder<double> dec(dcfg);
  dec.init_params(store, rng);
  LatentTable<double> table(4, dcfg, rng);

  // one embedding entry shared by all rows: rows*m + P*E parameters total
  REQUIRE(table.store().param_count() ==
          4u * 16 + static_cast<std::size_t>(table.token_count()) * 4);

  CounterRng drng(10, 0);
  std::vector<Tensord> coords{random_tensor<double>({6, in_dim}, drng, -1, 1),
                              random_tensor<double>({6, in_dim}, drng, -1, 1)};
  std::vector<Tensord> targets{random_tensor<double>({6, 3}, drng),
                               random_tensor<double>({6, 3}, drng)};

  SECTION("zero latent contributes no squared-norm penalty") {
    Graph<double> g;
    ParamBinder<double> p{g, store};
    double with_reg = autodecoder_loss(p, dec, table, {0, 1}, coords, targets,
                                       squared_norm_reg(10.0))
                          .value();
    Graph<double> g2;
    ParamBinder<double> p2{g2, store};
    double without =
        autodecoder_loss(p2, dec, table, {0, 1}, coords, targets, {}).value();
    REQUIRE(with_reg == Approx(without).margin(1e-12));
  }

  SECTION("weight zero equals the plain MSE") {
    table.row(0).fill(0.3);
    Graph<double> g;
    ParamBinder<double> p{g, store};
    double a = autodecoder_loss(p, dec, table, {0}, {coords[0]}, {targets[0]},
                                squared_norm_reg(0.0))
                   .value();
    Graph<double> g2;
    ParamBinder<double> p2{g2, store};
    double b =
        autodecoder_loss(p2, dec, table, {0}, {coords[0]}, {targets[0]}, {})
            .value();
    REQUIRE(a == b);
    table.row(0).zero();
  }

  SECTION("nonzero latent pays the penalty") {
    table.row(0).fill(0.5);
    Graph<double> g;
    ParamBinder<double> p{g, store};
    double with_reg = autodecoder_loss(p, dec, table, {0}, {coords[0]},
                                       {targets[0]}, squared_norm_reg(1.0))
                          .value();
    Graph<double> g2;
    ParamBinder<double> p2{g2, store};
    double without = autodecoder_loss(p2, dec, table, {0}, {coords[0]},
                                      {targets[0]}, {})
                         .value();
    REQUIRE(with_reg == Approx(without + 16 * 0.25).margin(1e-9));
    table.row(0).zero();
  }

  SECTION("unknown instance id is an error") {
    Graph<double> g;
    ParamBinder<double> p{g, store};
    REQUIRE_THROWS_WITH(
        autodecoder_loss(p, dec, table, {7}, {coords[0]}, {targets[0]}, {}),
        Catch::Matchers::ContainsSubstring("instance"));
  }

  SECTION("unreferenced rows: zero gradient, bit-identical after the step") {
    std::vector<double> row3_before = table.row(3).values();
    Graph<double> g;
    ParamBinder<double> p{g, store};
    Var<double> loss = autodecoder_loss(p, dec, table, {0, 1}, coords, targets,
                                        squared_norm_reg(1e-4));
    g.backward(loss);
    for (double gv : table.store().grad("row/3").values()) REQUIRE(gv == 0.0);
    // referenced rows did receive gradient
    double mag = 0;
    for (double gv : table.store().grad("row/0").values())
      mag += std::abs(gv);
    REQUIRE(mag > 0);
    table.step({.lr = 1e-2});
    REQUIRE(table.row(3).values() == row3_before);
    REQUIRE(table.touched().empty());
  }
}

TEST_CASE("test-time optimization against a frozen decoder") {
  PosEncConfig pe{.octaves = 4};
  const int in_dim = pe.out_dim(2);
  DecoderConfig dcfg = tiny_decoder(Family::kConcat, 12, 12, in_dim);
  ParamStore<double> store;
  CounterRng rng(20, 0);
  Decoder<double> dec(dcfg);
  dec.init_params(store, rng);
  CounterRng drng(21, 0);
  Tensord coords = random_tensor<double>({24, in_dim}, drng, -1, 1);
  Tensord targets = random_tensor<double>({24, 3}, drng, 0.2, 0.8);

  SECTION("zero steps returns the zero latent") {
    Tensord z = test_time_optimize(dec, store, nullptr, coords, targets, 0,
                                   {.lr = 1e-2}, {});
    for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(z[i] == 0.0);
  }

  SECTION("optimization reduces the loss and leaves the decoder untouched") {
    std::vector<std::vector<double>> before;
    for (std::size_t e = 0; e < store.entry_count(); ++e)
      before.push_back(store.entry_at(e).value.values());

    auto loss_at = [&](const Tensord& z) {
      Graph<double> g;
      ParamBinder<double> p{g, store, /*frozen=*/true};
      LatentInput<double> zi;
      zi.flat = g.constant(z);
      Var<double> pred = dec.forward(p, g.constant(coords), zi);
      return mse(pred, g.constant(targets)).value();
    };
    double zero_loss = loss_at(Tensord({1, 12}));
    Tensord z = test_time_optimize(dec, store, nullptr, coords, targets, 300,
                                   {.lr = 3e-2}, squared_norm_reg(1e-4));
    REQUIRE(loss_at(z) < zero_loss);

    for (std::size_t e = 0; e < store.entry_count(); ++e)
      REQUIRE(store.entry_at(e).value.values() == before[e]);
  }

  SECTION("recovers a latent at least as good as the trained one") {
    // brief auto-decoder training on one instance
    LatentTable<double> table(1, dcfg, rng);
    double train_loss = 0;
    for (int s = 0; s < 300; ++s) {
      Graph<double> g;
      ParamBinder<double> p{g, store};
      Var<double> loss = autodecoder_loss(p, dec, table, {0}, {coords},
                                          {targets}, squared_norm_reg(1e-4));
      train_loss = loss.value();
      g.backward(loss);
      store.adam_step({.lr = 1e-2});
      table.step({.lr = 3e-2});
    }
    Tensord z = test_time_optimize(dec, store, nullptr, coords, targets, 600,
                                   {.lr = 3e-2}, squared_norm_reg(1e-4));
    Graph<double> g;
    ParamBinder<double> p{g, store, true};
    LatentInput<double> zi;
    zi.flat = g.constant(z);
    double tto_loss =
        mse(dec.forward(p, g.constant(coords), zi), g.constant(targets))
            .value();
    INFO("train " << train_loss << " tto " << tto_loss);
    REQUIRE(tto_loss <= train_loss * 1.02);
  }
}
