// Copyright (c) 2026 The tpslu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "tpslu/error.hpp"
#include "tpslu/model.hpp"

using namespace tpslu;

namespace {

ModelConfig Tiny(std::int32_t hidden = 2, std::int32_t layers = 0) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_dim = hidden;
  c.num_heads = 1;
  c.ffn_dim = 2 * hidden;
  c.max_seq_len = 16;
  c.vocab_size = 20;
  c.word_vocab_size = 12;
  c.num_intents = 2;
  c.num_slot_tags = 2;
  c.dropout = 0.0;
  return c;
}

ModelParams Zeroed(const ModelConfig& c) {
  CounterRng rng(1);
  ModelParams p = ModelParams::Initialize(c, rng);
  p.SetZero();
  return p;
}

EncodedExample Example(std::vector<TokenId> ids, std::vector<std::int32_t> segments = {}) {
  EncodedExample e;
  e.input_ids = std::move(ids);
  e.segment_ids = segments.empty() ? std::vector<std::int32_t>(e.input_ids.size(), 0) : std::move(segments);
  for (std::size_t i = 0; i < e.input_ids.size(); ++i) e.position_ids.push_back(static_cast<std::int32_t>(i));
  e.word_region = {1, static_cast<std::int32_t>(e.input_ids.size()) - 1};
  for (auto i = e.word_region.begin; i < e.word_region.end; ++i) e.word_spans.push_back({i, i + 1});
  return e;
}

Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, CounterRng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
  return m;
}

}  // namespace

TEST_CASE("embedding sum") {
  ModelParams p = Zeroed(Tiny());
  p.token_embedding.row(5) << 3, 4;
  Matrix out = EmbedInput(p, Example({5}));
  CHECK(out(0, 0) == 3);
  CHECK(out(0, 1) == 4);

  p.token_embedding.row(5) << 1, 2;
  p.position_embedding.row(0) << 0.5, 0;
  p.segment_embedding.row(0) << 0, -1;
  out = EmbedInput(p, Example({5}));
  CHECK(out(0, 0) == 1.5);
  CHECK(out(0, 1) == 1.0);

  // Swapping two positions with equal token and segment ids only moves the
  // position contribution.
  CounterRng rng(2);
  p.position_embedding = RandomMatrix(16, 2, rng);
  EncodedExample e = Example({5, 5, 7});
  const Matrix a = EmbedInput(p, e);
  std::swap(e.position_ids[0], e.position_ids[1]);
  const Matrix b = EmbedInput(p, e);
  CHECK(((a.row(0) - b.row(0)) - (p.position_embedding.row(0) - p.position_embedding.row(1))).norm() < 1e-15);
  CHECK(a.row(2) == b.row(2));

  CHECK_THROWS_AS(EmbedInput(p, Example({99})), Error);
}

TEST_CASE("phone-augmented embedding") {
  ModelParams p = Zeroed(Tiny());
  const EncodedExample e = Example({1, 5, 2});  // [CLS] w [SEP]
  p.token_embedding.row(12) << 1, 0;
  p.token_embedding.row(13) << 0, 1;
  p.token_embedding.row(14) << 1, 1;
  std::vector<std::vector<TokenId>> phones = {{12, 13, 14}};
  Matrix out = EmbedInputWithPhones(p, e, phones, 0.5);
  CHECK(out(1, 0) == 1.0);
  CHECK(out(1, 1) == 1.0);
  CHECK(out.row(0).isZero());  // specials are not augmented
  CHECK(out.row(2).isZero());

  CounterRng rng(3);
  p.token_embedding = RandomMatrix(20, 2, rng);
  const Matrix s = EmbedInput(p, e);
  phones = {{13}};
  out = EmbedInputWithPhones(p, e, phones, 1.0);
  CHECK((out.row(1) - (s.row(1) + p.token_embedding.row(13))).norm() < 1e-15);
  out = EmbedInputWithPhones(p, e, phones, 0.0);
  CHECK(out == s);
  CHECK_THROWS_AS(EmbedInputWithPhones(p, e, phones, -0.1), Error);
}

TEST_CASE("continuation pieces get no phone augmentation") {
  ModelParams p = Zeroed(Tiny());
  EncodedExample e = Example({1, 5, 6, 2});
  e.word_spans = {{1, 3}};
  p.token_embedding.row(12) << 2, 2;
  const std::vector<std::vector<TokenId>> phones = {{12}};
  const Matrix out = EmbedInputWithPhones(p, e, phones, 1.0);
  CHECK(out(1, 0) == 2);
  CHECK(out.row(2).isZero());
}

TEST_CASE("encoder structure") {
  CounterRng rng(4);
  SUBCASE("zero layers is the identity") {
    const ModelParams p = ModelParams::Initialize(Tiny(8, 0), rng);
    const Matrix x = RandomMatrix(5, 8, rng);
    CHECK(Encode(p, x, {}, false, nullptr).hidden == x);
  }
  SUBCASE("one zero-weight layer reduces to layer norm of the input") {
    ModelParams p = Zeroed(Tiny(4, 1));
    p.layers[0].ln1_gamma.setOnes();
    p.layers[0].ln2_gamma.setOnes();
    p.final_ln_gamma.setOnes();
    const Matrix x = RandomMatrix(3, 4, rng);
    const Matrix h = Encode(p, x, {}, false, nullptr).hidden;
    for (Eigen::Index r = 0; r < 3; ++r) {
      const double mean = x.row(r).mean();
      const double var = (x.row(r).array() - mean).square().mean();
      for (Eigen::Index c = 0; c < 4; ++c) {
        CHECK(h(r, c) == doctest::Approx((x(r, c) - mean) / std::sqrt(var + kLayerNormEps)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("permutation equivariance without position embeddings") {
    const ModelParams p = ModelParams::Initialize(Tiny(8, 2), rng);
    const Matrix x = RandomMatrix(5, 8, rng);
    const std::vector<int> perm = {3, 0, 4, 1, 2};
    Matrix xp(5, 8);
    for (int i = 0; i < 5; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const Matrix h = Encode(p, x, {}, false, nullptr).hidden;
    const Matrix hp = Encode(p, xp, {}, false, nullptr).hidden;
    for (int i = 0; i < 5; ++i) CHECK((hp.row(i) - h.row(perm[static_cast<std::size_t>(i)])).norm() < 1e-12);
  }
  SUBCASE("padding never influences real positions") {
    const ModelParams p = ModelParams::Initialize(Tiny(8, 2), rng);
    Matrix x = RandomMatrix(6, 8, rng);
    const std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0, 0};
    const Matrix a = Encode(p, x, mask, false, nullptr).hidden;
    x.bottomRows(2) = RandomMatrix(2, 8, rng) * 100;
    const Matrix b = Encode(p, x, mask, false, nullptr).hidden;
    CHECK(a.topRows(4) == b.topRows(4));
  }
  SUBCASE("eval mode is deterministic; train mode needs a generator") {
    ModelConfig c = Tiny(8, 2);
    c.dropout = 0.3;
    const ModelParams p = ModelParams::Initialize(c, rng);
    const Matrix x = RandomMatrix(4, 8, rng);
    CHECK(Encode(p, x, {}, false, nullptr).hidden == Encode(p, x, {}, false, nullptr).hidden);
    CounterRng d1(9), d2(9);
    CHECK(Encode(p, x, {}, true, &d1).hidden == Encode(p, x, {}, true, &d2).hidden);
    CHECK(Encode(p, x, {}, true, &d1).hidden != Encode(p, x, {}, false, nullptr).hidden);
    CHECK_THROWS(Encode(p, x, {}, true, nullptr));
  }
  SUBCASE("non-finite activations are reported") {
    const ModelParams p = ModelParams::Initialize(Tiny(8, 2), rng);
    Matrix x = RandomMatrix(3, 8, rng);
    x(1, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
      Encode(p, x, {}, false, nullptr);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNumeric);
      CHECK(std::string(e.what()).find("layer") != std::string::npos);
    }
  }
}

TEST_CASE("intent head") {
  ModelConfig c = Tiny(1);
  c.num_intents = 2;
  ModelParams p = Zeroed(c);
  RowVector h(1);
  h << 0.5;
  RowVector l = IcLogits(p, h);
  CHECK(l.size() == 2);
  CHECK(l.isZero());
  CHECK(Argmax(l) == 0);
  p.ic_b << 0, 3;
  CHECK(Argmax(IcLogits(p, h)) == 1);

  c.num_intents = 1;
  ModelParams q = Zeroed(c);
  q.ic_ff_w(0, 0) = 1;
  q.ic_w(0, 0) = 2;
  CHECK(IcLogits(q, h)(0) == doctest::Approx(0.9242).epsilon(1e-4));
  CHECK(IcLogits(q, h)(0) == doctest::Approx(2 * std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("argmax is invariant to positive scaling") {
  CounterRng rng(5);
  for (int i = 0; i < 200; ++i) {
    RowVector l(7);
    for (int k = 0; k < 7; ++k) l(k) = rng.Normal();
    CHECK(Argmax(l) == Argmax(l * (0.01 + 10 * rng.Uniform())));
  }
  RowVector tie(3);
  tie << 1, 2, 2;
  CHECK(Argmax(tie) == 1);
}

TEST_CASE("slot head") {
  ModelParams p = Zeroed(Tiny(2));
  Matrix hidden(4, 2);
  hidden << 9, 9, 0.3, -0.2, 1, 1, 9, 9;
  const std::vector<std::int32_t> first = {1, 2};
  Matrix s = SfLogits(p, hidden, first, {1, 3});
  CHECK(s.rows() == 2);
  CHECK(s.isZero());
  p.sf_w << 1, 0, 0, 1;
  s = SfLogits(p, hidden, first, {1, 3});
  CHECK(s(0, 0) == doctest::Approx(0.3));
  CHECK(s(0, 1) == doctest::Approx(-0.2));
  const std::vector<std::int32_t> bad = {0};
  CHECK_THROWS_AS(SfLogits(p, hidden, bad, {1, 3}), Error);
}

TEST_CASE("tied LM head") {
  CounterRng rng(6);
  ModelParams p = Zeroed(Tiny(20));
  p.token_embedding = Matrix::Identity(20, 20);
  Matrix hidden = Matrix::Zero(3, 20);
  hidden.row(1) = p.token_embedding.row(7);
  const std::vector<std::int32_t> pos = {1};
  const Matrix l = LmLogits(p, hidden, pos);
  CHECK(l.rows() == 1);
  CHECK(l.cols() == 20);
  CHECK(Argmax(l.row(0)) == 7);
  p.lm_bias = RandomMatrix(1, 20, rng);
  const std::vector<std::int32_t> zero = {0, 2};
  const Matrix b = LmLogits(p, hidden, zero);
  CHECK(b.rows() == 2);
  CHECK(b.row(0) == p.lm_bias.row(0));
  const Matrix restricted = LmLogits(p, hidden, pos, 12, 20);
  CHECK(restricted.cols() == 8);
  CHECK(restricted.row(0) == LmLogits(p, hidden, pos).row(0).segment(12, 8));
}

TEST_CASE("GELU") {
  CHECK(Gelu(0) == 0);
  CHECK(Gelu(1) == doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(Gelu(-1) == doctest::Approx(-0.15865525393145707).epsilon(1e-15));
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    const double fd = (Gelu(x + 1e-6) - Gelu(x - 1e-6)) / 2e-6;
    CHECK(GeluGrad(x) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("parameter bookkeeping") {
  CounterRng rng(7);
  const ModelConfig c = Tiny(8, 2);
  const ModelParams p = ModelParams::Initialize(c, rng);
  std::size_t count = 0;
  std::vector<std::string> names;
  p.ForEach([&](const std::string& n, const Matrix& m) {
    count += static_cast<std::size_t>(m.size());
    names.push_back(n);
  });
  CHECK(count == p.NumParameters());
  CHECK(names.front() == "embeddings.token");
  CHECK(p.AllFinite());
  const ModelParams z = ModelParams::ZerosLike(p);
  z.ForEach([](const std::string&, const Matrix& m) { CHECK(m.isZero()); });
  // Initial weights stay inside the truncation band.
  CHECK(p.token_embedding.cwiseAbs().maxCoeff() <= 0.04);

  ModelConfig bad = c;
  bad.num_heads = 3;
  CHECK_THROWS_AS(bad.Validate(), Error);
}
