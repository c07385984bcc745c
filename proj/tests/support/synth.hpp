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

// Synthetic lexicon, corpora and SLU sets for tests.
//
// Every SLU trigger word and half of the slot values have a planted
// homophone twin: a different spelling with the same phone sequence. Twins
// occur in the pre-training corpus only, in their own contexts, and replace
// their partners in the corrupted (ASR-like) SLU copies.

#ifndef TPSLU_TESTS_SUPPORT_SYNTH_HPP_
#define TPSLU_TESTS_SUPPORT_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpslu/lexicon.hpp"
#include "tpslu/slu_data.hpp"
#include "tpslu/textproc.hpp"

namespace tpslu::testing {

struct SynthOptions {
  std::uint64_t seed = 7;
  int num_intents = 4;
  int triggers_per_intent = 3;
  int num_neutral = 8;     // fillers shared by all intents
  int num_other = 8;       // fillers around twins
  int num_slot_values = 6; // per slot type
  int corpus_size = 320;
  int train_size = 96;
  int valid_size = 48;
  int test_size = 96;
  double corruption_rate = 0.8;
};

struct HomophonePair {
  std::string word;  // seen in SLU data
  std::string twin;  // same phones, pre-training contexts only
};

struct SynthWorld {
  std::map<std::string, std::vector<std::string>> pron;  // word -> phones
  std::string dict_text;
  std::vector<std::string> vocab_tokens;
  std::vector<std::string> corpus;
  std::vector<SluExample> train, valid, test;
  // Same examples with homophone substitutions in the text; labels unchanged.
  std::vector<SluExample> valid_corrupted, test_corrupted;
  std::vector<HomophonePair> homophones;

  Lexicon MakeLexicon() const;
  Vocab MakeVocab() const;
};

SynthWorld MakeSynthWorld(const SynthOptions& options = {});

// Word (other than `word`) whose phone sequence is closest in edit
// distance; ties go to the lexicographically smallest spelling.
std::string NearestPhoneWord(const std::string& word,
                             const std::map<std::string, std::vector<std::string>>& pron,
                             int* distance = nullptr);

// Writes dict.txt, vocab.txt, corpus.txt, train.jsonl, valid.jsonl,
// test.jsonl, test_asr.txt, refs.txt and hyps.txt into `dir`.
void WriteSynthWorld(const SynthWorld& world, const std::string& dir);

}  // namespace tpslu::testing

#endif  // TPSLU_TESTS_SUPPORT_SYNTH_HPP_
