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

#include "tpslu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "tpslu/error.hpp"
#include "tpslu/lexicon.hpp"

namespace tpslu {

double IntentAccuracy(std::span<const std::string> predictions, std::span<const std::string> golds) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "prediction and gold counts differ");
  }
  if (golds.empty()) throw Error(ErrorCode::kInvalidArgument, "no examples to score");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hit += predictions[i] == golds[i];
  return static_cast<double>(hit) / static_cast<double>(golds.size());
}

SemErCounts& SemErCounts::operator+=(const SemErCounts& o) {
  cor += o.cor;
  del += o.del;
  ins += o.ins;
  sub += o.sub;
  return *this;
}

double SemErCounts::Value() const {
  const std::int64_t denom = cor + del + sub;
  if (denom == 0) throw Error(ErrorCode::kInvalidArgument, "semER undefined: reference has no slots");
  return static_cast<double>(del + ins + sub) / static_cast<double>(denom);
}

SemErCounts SemerCounts(const SemanticFrame& ref, const SemanticFrame& hyp) {
  SemErCounts c;
  if (ref.intent == hyp.intent) {
    ++c.cor;
  } else {
    ++c.sub;
  }
  // name -> values, per side
  std::map<std::string, std::vector<std::string>> r, h;
  for (const auto& s : ref.slots) r[s.name].push_back(s.value);
  for (const auto& s : hyp.slots) h[s.name].push_back(s.value);
  for (auto& [name, rv] : r) {
    auto it = h.find(name);
    if (it == h.end()) {
      c.del += static_cast<std::int64_t>(rv.size());
      continue;
    }
    auto& hv = it->second;
    std::vector<bool> r_used(rv.size()), h_used(hv.size());
    std::int64_t exact = 0;
    for (std::size_t i = 0; i < rv.size(); ++i) {
      for (std::size_t j = 0; j < hv.size(); ++j) {
        if (!h_used[j] && rv[i] == hv[j]) {
          r_used[i] = h_used[j] = true;
          ++exact;
          break;
        }
      }
    }
    const auto r_left = static_cast<std::int64_t>(rv.size()) - exact;
    const auto h_left = static_cast<std::int64_t>(hv.size()) - exact;
    const std::int64_t subs = std::min(r_left, h_left);
    c.cor += exact;
    c.sub += subs;
    c.del += r_left - subs;
    c.ins += h_left - subs;
    h.erase(it);
  }
  for (const auto& [name, hv] : h) c.ins += static_cast<std::int64_t>(hv.size());
  return c;
}

SemerResult Semer(const SemanticFrame& ref, const SemanticFrame& hyp) {
  SemerResult r;
  r.counts = SemerCounts(ref, hyp);
  r.value = r.counts.Value();
  return r;
}

Alignment AlignWords(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::int32_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::int32_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::int32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::int32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int32_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  Alignment a;
  a.cost = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const auto ri = static_cast<std::int32_t>(i) - 1;
    const auto hj = static_cast<std::int32_t>(j) - 1;
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      a.ops.push_back({EditOp::kMatch, ri, hj});
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      a.ops.push_back({EditOp::kSub, ri, hj});
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      a.ops.push_back({EditOp::kDel, ri, -1});
      --i;
    } else {
      a.ops.push_back({EditOp::kIns, -1, hj});
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

std::vector<ConfusionPair> ExtractConfusionPairs(const std::vector<std::string>& refs,
                                                 const std::vector<std::string>& hyps,
                                                 std::size_t top_k, const Vocab* vocab_filter) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "reference and hypothesis corpora differ in length");
  }
  std::map<std::pair<std::string, std::string>, std::int64_t> tally;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    const auto r = SplitWhitespace(ToLower(refs[u]));
    const auto h = SplitWhitespace(ToLower(hyps[u]));
    for (const auto& op : AlignWords(r, h).ops) {
      if (op.op == EditOp::kSub) ++tally[{h[op.hyp_index], r[op.ref_index]}];
    }
  }
  std::vector<ConfusionPair> out;
  for (const auto& [key, count] : tally) {
    if (vocab_filter && (!vocab_filter->Find(key.first) || !vocab_filter->Find(key.second))) continue;
    out.push_back({key.first, key.second, count});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ConfusionPair& a, const ConfusionPair& b) { return a.count > b.count; });
  if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  return out;
}

double CosineSimilarity(const RowVector& a, const RowVector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kNumeric, "cosine similarity of a zero vector");
  return a.dot(b) / (na * nb);
}

MrrResult Mrr(std::span<const ConfusionPair> pairs, const Matrix& embeddings, const Vocab& vocab) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no confusion pairs to rank");
  const std::vector<TokenId> candidates = vocab.WordTokenIds();
  auto lookup = [&](const std::string& w) {
    const auto id = vocab.Find(w);
    if (!id || *id < Vocab::kNumSpecial) {
      throw Error(ErrorCode::kInvalidArgument, "word is not a single vocabulary token: " + w);
    }
    if (*id >= embeddings.rows()) throw Error(ErrorCode::kContract, "embedding table too small");
    return *id;
  };
  std::vector<double> norms(static_cast<std::size_t>(embeddings.rows()), -1.0);
  auto norm_of = [&](TokenId id) {
    double& n = norms[static_cast<std::size_t>(id)];
    if (n < 0) n = embeddings.row(id).norm();
    if (n == 0.0) throw Error(ErrorCode::kNumeric, "zero-norm embedding for token " + vocab.Token(id));
    return n;
  };
  auto sim = [&](TokenId a, TokenId b) {
    return embeddings.row(a).dot(embeddings.row(b)) / (norm_of(a) * norm_of(b));
  };

  MrrResult res;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const TokenId q = lookup(p.hyp_word);
    const TokenId r = lookup(p.ref_word);
    if (q == r) throw Error(ErrorCode::kInvalidArgument, "confusion pair words are identical");
    const double s_ref = sim(q, r);
    std::int64_t rank = 1;
    for (TokenId c : candidates) {
      if (c == q || c == r) continue;
      const double s = sim(q, c);
      if (s > s_ref || (s == s_ref && c < r)) ++rank;
    }
    res.ranks.push_back(rank);
    sum += 1.0 / static_cast<double>(rank);
  }
  res.mrr = sum / static_cast<double>(pairs.size());
  return res;
}

namespace {

nlohmann::ordered_json SemerJson(const SemErCounts& c) {
  nlohmann::ordered_json j;
  j["cor"] = c.cor;
  j["del"] = c.del;
  j["ins"] = c.ins;
  j["sub"] = c.sub;
  j["value"] = c.Value();
  return j;
}

nlohmann::ordered_json PairJson(const ConfusionPair& p) {
  nlohmann::ordered_json j;
  j["hyp"] = p.hyp_word;
  j["ref"] = p.ref_word;
  j["count"] = p.count;
  return j;
}

}  // namespace

std::string ReportJson(const MetricReport& report) {
  nlohmann::ordered_json j;
  if (!report.model_label.empty()) j["model"] = report.model_label;
  j["icacc"] = report.icacc ? nlohmann::ordered_json(*report.icacc) : nlohmann::ordered_json();
  j["semer"] = report.semer ? SemerJson(*report.semer) : nlohmann::ordered_json();
  j["mrr"] = report.mrr ? nlohmann::ordered_json(*report.mrr) : nlohmann::ordered_json();
  j["confusion_pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : report.confusion_pairs) j["confusion_pairs"].push_back(PairJson(p));
  return j.dump(2) + "\n";
}

std::string ReportJsonl(const MetricReport& report) {
  std::string out;
  auto line = [&](const std::string& metric, nlohmann::ordered_json value) {
    nlohmann::ordered_json j;
    if (!report.model_label.empty()) j["model"] = report.model_label;
    j["metric"] = metric;
    j["value"] = std::move(value);
    out += j.dump() + "\n";
  };
  if (report.icacc) line("icacc", *report.icacc);
  if (report.semer) line("semer", SemerJson(*report.semer));
  if (report.mrr) line("mrr", *report.mrr);
  for (const auto& p : report.confusion_pairs) line("confusion_pair", PairJson(p));
  return out;
}

std::string FormatMrrTable(const std::vector<std::pair<std::string, double>>& rows) {
  std::string out;
  for (const auto& [label, v] : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    out += label + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace tpslu
