#include <catch2/catch_amalgamated.hpp>

#include "nfbench/core/graph.hpp"
#include "nfbench/core/param_store.hpp"
#include "nfbench/core/rng.hpp"
#include "nfbench/decoders/config.hpp"
#include "nfbench/decoders/decoder.hpp"
#include "support/store_gradcheck.hpp"

using namespace nfbench;
using Catch::Approx;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, CounterRng& rng, double lo = -1,
                        double hi = 1) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

DecoderConfig tiny_concat() {
  DecoderConfig cfg;
  cfg.family = Family::kConcat;
  cfg.hidden_width = 16;
  cfg.depth = 2;
  cfg.latent_dim = 32;
  cfg.in_dim = 40;
  return cfg;
}

DecoderConfig tiny_hyper() {
  DecoderConfig cfg;
  cfg.family = Family::kHyper;
  cfg.hidden_width = 16;
  cfg.depth = 2;
  cfg.hyper_width = 8;
  cfg.latent_dim = 32;
  cfg.in_dim = 40;
  return cfg;
}

DecoderConfig tiny_attention() {
  DecoderConfig cfg;
  cfg.family = Family::kAttention;
  cfg.hidden_width = 16;
  cfg.depth = 2;
  cfg.attention_stages = 2;
  cfg.dense_per_stage = 2;
  cfg.heads = 2;
  cfg.key_dim = 8;
  cfg.token_width = 8;
  cfg.latent_dim = 32;  // 4 tokens
  cfg.in_dim = 40;
  return cfg;
}

}  // namespace

TEST_CASE("split schedule fixtures") {
  SECTION("m=8192: 8 sub-codes of 1024, one per layer") {
    DecoderConfig cfg = tiny_concat();
    cfg.latent_dim = 8192;
    cfg.depth = 8;
    auto s = split_schedule(cfg);
    REQUIRE(s.size() == 8);
    for (int j = 0; j < 8; ++j) {
      REQUIRE(s[j].layer == j);
      REQUIRE(s[j].extent == 1024);
    }
  }
  SECTION("m=512: two sub-codes of 256") {
    auto s = split_schedule(512, 8, DecoderConfig{.latent_dim = 512}.splits());
    REQUIRE(s.size() == 2);
    REQUIRE(s[0].layer == 0);
    REQUIRE(s[1].layer == 4);
    REQUIRE(s[0].extent == 256);
    REQUIRE(s[1].extent == 256);
  }
  SECTION("m=100: one sub-code at the input layer") {
    auto s = split_schedule(100, 8, DecoderConfig{.latent_dim = 100}.splits());
    REQUIRE(s.size() == 1);
    REQUIRE(s[0].layer == 0);
    REQUIRE(s[0].extent == 100);
  }
  SECTION("m=0 rejected") {
    REQUIRE_THROWS(split_schedule(0, 8, 1));
  }
  SECTION("extents differ by at most one") {
    auto s = split_schedule(1000, 8, 8);
    int lo = 1000, hi = 0, total = 0;
    for (auto& p : s) {
      lo = std::min(lo, p.extent);
      hi = std::max(hi, p.extent);
      total += p.extent;
    }
    REQUIRE(hi - lo <= 1);
    REQUIRE(total == 1000);
  }
}

TEST_CASE("split count rule") {
  REQUIRE(DecoderConfig{.latent_dim = 8192}.splits() == 8);
  REQUIRE(DecoderConfig{.latent_dim = 2048}.splits() == 8);
  REQUIRE(DecoderConfig{.latent_dim = 1024}.splits() == 4);
  REQUIRE(DecoderConfig{.latent_dim = 512}.splits() == 2);
  REQUIRE(DecoderConfig{.latent_dim = 100}.splits() == 1);
}

TEST_CASE("concat first-layer width follows the schedule") {
  DecoderConfig cfg;
  cfg.family = Family::kConcat;
  cfg.latent_dim = 8192;
  cfg.in_dim = 60;
  auto dims = concat_layer_dims(cfg);
  REQUIRE(dims[0].first == 60 + 1024);
  REQUIRE(dims[0].second == 256);
  // first-layer parameter count: (enc_dim + 1024)*k + k
  std::size_t first = std::size_t(60 + 1024) * 256 + 256;
  REQUIRE(std::size_t(dims[0].first) * dims[0].second + dims[0].second == first);
}

TEST_CASE("count_params matches an exhaustive parameter walk") {
  CounterRng rng(5, 0);
  for (DecoderConfig cfg : {tiny_concat(), tiny_hyper(), tiny_attention()}) {
    ParamStore<double> store;
    Decoder<double> dec(cfg);
    dec.init_params(store, rng);
    REQUIRE(store.param_count() == count_params(cfg));
  }
  // and at the paper-scale configs
  for (Family fam : {Family::kConcat, Family::kHyper, Family::kAttention}) {
    DecoderConfig cfg;
    cfg.family = fam;
    cfg.latent_dim = 512;
    cfg.in_dim = 60;
    cfg.use_token_embedding = true;
    ParamStore<float> store;
    Decoder<float> dec(cfg);
    dec.init_params(store, rng);
    REQUIRE(store.param_count() == count_params(cfg));
  }
}

TEST_CASE("hyper predicted-parameter count closed form") {
  DecoderConfig cfg;
  cfg.family = Family::kHyper;
  cfg.in_dim = 60;
  cfg.latent_dim = 512;
  // (60*256+256) + 6*(256*256+256) + (256*3+3)
  std::size_t want = (60 * 256 + 256) + 6 * (256 * 256 + 256) + (256 * 3 + 3);
  REQUIRE(hyper_predicted_count(cfg) == want);
}

TEST_CASE("parameter count structure across latent sizes") {
  auto make = [](Family fam, int m) {
    DecoderConfig cfg;
    cfg.family = fam;
    cfg.latent_dim = m;
    cfg.in_dim = 60;
    cfg.use_token_embedding = true;
    return cfg;
  };
  SECTION("attention count is identical for m in {512, 2048, 8192}") {
    std::size_t a = count_params(make(Family::kAttention, 512));
    REQUIRE(a == count_params(make(Family::kAttention, 2048)));
    REQUIRE(a == count_params(make(Family::kAttention, 8192)));
  }
  SECTION("concat count is strictly increasing in m") {
    std::size_t prev = 0;
    for (int m : {32, 128, 512, 2048, 8192}) {
      std::size_t c = count_params(make(Family::kConcat, m));
      REQUIRE(c > prev);
      prev = c;
    }
  }
  SECTION("concat with m=0 equals the plain unconditioned MLP") {
    DecoderConfig cfg = make(Family::kConcat, 0);
    REQUIRE(count_params(cfg) ==
            dims_param_count(mlp_layer_dims(60, 256, 8, 3)));
  }
  SECTION("concat slope per latent column is at most k") {
    std::size_t c1 = count_params(make(Family::kConcat, 512));
    std::size_t c2 = count_params(make(Family::kConcat, 513));
    REQUIRE(c2 - c1 <= 256);
  }
  SECTION("hyper slope per latent column is at most the hyper width") {
    std::size_t c1 = count_params(make(Family::kHyper, 512));
    std::size_t c2 = count_params(make(Family::kHyper, 513));
    REQUIRE(c2 - c1 <= 64);
  }
}

TEST_CASE("concat bottleneck: no reduction from more than ceil(m/s)+k inputs") {
  for (int m : {512, 2048, 8192}) {
    DecoderConfig cfg;
    cfg.family = Family::kConcat;
    cfg.latent_dim = m;
    cfg.in_dim = 60;
    int s = cfg.splits();
    int cap = (m + s - 1) / s + std::max(cfg.hidden_width, cfg.in_dim);
    for (auto [in, out] : concat_layer_dims(cfg)) REQUIRE(in <= cap);
  }
}

TEST_CASE("zero weights propagate to a constant squash(bias) output") {
  CounterRng rng(11, 0);
  for (DecoderConfig cfg : {tiny_concat(), tiny_hyper()}) {
    ParamStore<double> store;
    Decoder<double> dec(cfg);
    dec.init_params(store, rng);
    for (std::size_t e = 0; e < store.entry_count(); ++e)
      store.entry_at(e).value.zero();

    Graph<double> g;
    ParamBinder<double> p{g, store};
    LatentInput<double> z;
    z.flat = g.constant(Tensor<double>({1, cfg.latent_dim}));
    Var<double> out = dec.forward(
        p, g.constant(random_tensor<double>({5, cfg.in_dim}, rng)), z);
    for (std::size_t i = 0; i < out.size(); ++i)
      REQUIRE(out.value(i) == Approx(0.5));  // sigmoid(0)
  }
}

TEST_CASE("conditioning flows: different latents give different outputs") {
  CounterRng rng(13, 0);
  for (DecoderConfig cfg : {tiny_concat(), tiny_hyper(), tiny_attention()}) {
    ParamStore<double> store;
    Decoder<double> dec(cfg);
    dec.init_params(store, rng);
    Tensord coords = random_tensor<double>({3, cfg.in_dim}, rng);

    auto run = [&](const Tensord& latent) {
      Graph<double> g;
      ParamBinder<double> p{g, store};
      LatentInput<double> z;
      if (cfg.family == Family::kAttention)
        z.tokens = g.constant(Tensord({cfg.token_count(), cfg.token_width},
                                      latent.values()));
      z.flat = g.constant(Tensord({1, cfg.latent_dim}, latent.values()));
      return dec.forward(p, g.constant(coords), z).tensor();
    };
    Tensord za = random_tensor<double>({1, cfg.latent_dim}, rng);
    Tensord zb = random_tensor<double>({1, cfg.latent_dim}, rng);
    Tensord oa = run(za), ob = run(zb);
    double diff = 0;
    for (std::size_t i = 0; i < oa.size(); ++i)
      diff = std::max(diff, std::abs(oa[i] - ob[i]));
    REQUIRE(diff > 1e-8);
  }
}

TEST_CASE("latent dimension mismatch is an error") {
  CounterRng rng(3, 0);
  ParamStore<double> store;
  Decoder<double> dec(tiny_concat());
  dec.init_params(store, rng);
  Graph<double> g;
  ParamBinder<double> p{g, store};
  LatentInput<double> z;
  z.flat = g.constant(Tensord({1, 33}));
  REQUIRE_THROWS_WITH(
      dec.forward(p, g.constant(Tensord({2, 40})), z),
      Catch::Matchers::ContainsSubstring("latent"));
}

TEST_CASE("hyper network runs once per forward over a coordinate batch") {
  CounterRng rng(7, 0);
  DecoderConfig cfg = tiny_hyper();
  ParamStore<double> store;
  Decoder<double> dec(cfg);
  dec.init_params(store, rng);
  Graph<double> g;
  ParamBinder<double> p{g, store};
  LatentInput<double> z;
  z.flat = g.constant(random_tensor<double>({1, cfg.latent_dim}, rng));
  REQUIRE(dec.hyper_net_evals == 0);
  (void)dec.forward(p, g.constant(random_tensor<double>({2, cfg.in_dim}, rng)),
                    z);
  REQUIRE(dec.hyper_net_evals == 1);
}

TEST_CASE("hyper weight cache reuses the instance-level result") {
  CounterRng rng(19, 0);
  DecoderConfig cfg = tiny_hyper();
  ParamStore<double> store;
  Decoder<double> dec(cfg);
  dec.init_params(store, rng);
  Tensord latent = random_tensor<double>({1, cfg.latent_dim}, rng);
  Tensord coords = random_tensor<double>({3, cfg.in_dim}, rng);
  HyperWeightCache<double> cache;

  auto run_cached = [&]() {
    Graph<double> g;
    ParamBinder<double> p{g, store, /*frozen=*/true};
    return hyper_forward_cached(dec, p, g.constant(coords), latent, Tensord(),
                                7, cache)
        .tensor();
  };
  dec.hyper_net_evals = 0;
  Tensord a = run_cached();
  REQUIRE(dec.hyper_net_evals == 1);
  Tensord b = run_cached();
  REQUIRE(dec.hyper_net_evals == 1);  // cache hit
  REQUIRE(a.values() == b.values());

  // matches the uncached path
  Graph<double> g;
  ParamBinder<double> p{g, store};
  LatentInput<double> z;
  z.flat = g.constant(latent);
  Tensord c = dec.forward(p, g.constant(coords), z).tensor();
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a[i] == Approx(c[i]).margin(1e-12));
}

TEST_CASE("singleton token attention weights are exactly one") {
  CounterRng rng(23, 0);
  DecoderConfig cfg = tiny_attention();
  cfg.latent_dim = cfg.token_width;  // one token
  ParamStore<double> store;
  Decoder<double> dec(cfg);
  dec.init_params(store, rng);

  std::vector<Tensord> probe;
  dec.attention_probe = &probe;
  Graph<double> g;
  ParamBinder<double> p{g, store};
  LatentInput<double> z;
  z.tokens = g.constant(random_tensor<double>({1, cfg.token_width}, rng));
  Tensord out1 =
      dec.forward(p, g.constant(random_tensor<double>({2, cfg.in_dim}, rng)), z)
          .tensor();
  REQUIRE(!probe.empty());
  for (const Tensord& probs : probe)
    for (std::size_t i = 0; i < probs.size(); ++i)
      REQUIRE(probs[i] == 1.0);
}

TEST_CASE("attention is invariant to joint token/embedding permutation") {
  CounterRng rng(29, 0);
  DecoderConfig cfg = tiny_attention();
  cfg.use_token_embedding = true;
  ParamStore<float> store;
  Decoder<float> dec(cfg);
  dec.init_params(store, rng);
  const int P = cfg.token_count();
  Tensorf tokens = random_tensor<float>({P, cfg.token_width}, rng);
  Tensorf embed = random_tensor<float>({P, cfg.token_embed_dim}, rng);
  Tensorf coords = random_tensor<float>({4, cfg.in_dim}, rng);

  auto run = [&](const Tensorf& tok, const Tensorf& emb) {
    Graph<float> g;
    ParamBinder<float> p{g, store};
    LatentInput<float> z;
    z.tokens = g.constant(tok);
    z.embed = g.constant(emb);
    return dec.forward(p, g.constant(coords), z).tensor();
  };

  std::vector<int> perm{2, 0, 3, 1};
  Tensorf ptok({P, cfg.token_width}), pemb({P, cfg.token_embed_dim});
  for (int i = 0; i < P; ++i) {
    for (int c = 0; c < cfg.token_width; ++c)
      ptok.at(i, c) = tokens.at(perm[i], c);
    for (int c = 0; c < cfg.token_embed_dim; ++c)
      pemb.at(i, c) = embed.at(perm[i], c);
  }
  Tensorf a = run(tokens, embed), b = run(ptok, pemb);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a[i] == Approx(b[i]).margin(1e-5));
}

TEST_CASE("duplicated token equals the single token") {
  CounterRng rng(31, 0);
  DecoderConfig cfg = tiny_attention();
  cfg.latent_dim = 2 * cfg.token_width;
  ParamStore<float> store;
  Decoder<float> dec(cfg);
  dec.init_params(store, rng);
  Tensorf token = random_tensor<float>({1, cfg.token_width}, rng);
  Tensorf dup({2, cfg.token_width});
  for (int c = 0; c < cfg.token_width; ++c)
    dup.at(0, c) = dup.at(1, c) = token.at(0, c);
  Tensorf coords = random_tensor<float>({3, cfg.in_dim}, rng);

  auto run = [&](const Tensorf& tok) {
    Graph<float> g;
    ParamBinder<float> p{g, store};
    LatentInput<float> z;
    z.tokens = g.constant(tok);
    return dec.forward(p, g.constant(coords), z).tensor();
  };
  Tensorf a = run(token), b = run(dup);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a[i] == Approx(b[i]).margin(1e-5));
}

TEST_CASE("finite differences validate every family end to end") {
  // tiny configs; the latent sits in the store so the sweep covers
  // d(loss)/dz as well as every weight
  CounterRng rng(37, 0);
  for (DecoderConfig cfg : {tiny_concat(), tiny_hyper(), tiny_attention()}) {
    ParamStore<double> store;
    Decoder<double> dec(cfg);
    dec.init_params(store, rng);
    Tensord& zrow = store.create("z", {1, cfg.latent_dim});
    for (std::size_t i = 0; i < zrow.size(); ++i) zrow[i] = rng.uniform(-1, 1);
    Tensord coords = random_tensor<double>({3, cfg.in_dim}, rng);

    auto build = [&](Graph<double>& g, ParamBinder<double>& p) {
      LatentInput<double> z;
      z.flat = p("z");
      if (cfg.family == Family::kAttention)
        z.tokens = reshape(p("z"), {cfg.token_count(), cfg.token_width});
      Var<double> out = dec.forward(p, g.constant(coords), z);
      return reduce_mean(mul(out, out));
    };
    auto res = nfbench::test::fd_check_store(store, build);
    INFO(family_name(cfg.family) << ": max rel err " << res.max_rel_err
                                 << " over " << res.checked);
    REQUIRE(res.max_rel_err < 1e-4);

    // d(loss)/dz specifically is nonzero
    store.zero_grad();
    Graph<double> g;
    ParamBinder<double> p{g, store};
    g.backward(build(g, p));
    double zmag = 0;
    for (std::size_t i = 0; i < store.grad("z").size(); ++i)
      zmag += std::abs(store.grad("z")[i]);
    REQUIRE(zmag > 1e-10);
  }
}
