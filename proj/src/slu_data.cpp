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

#include "tpslu/slu_data.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "tpslu/error.hpp"
#include "tpslu/lexicon.hpp"

namespace tpslu {

using nlohmann::json;

SluExample ParseSluRecord(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad SLU record: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text") || !j.contains("intent")) {
    throw Error(ErrorCode::kParse, "SLU record needs 'text' and 'intent'");
  }
  SluExample ex;
  try {
    ex.text = j.at("text").get<std::string>();
    ex.frame.intent = j.at("intent").get<std::string>();
    const auto words = SplitWhitespace(ToLower(ex.text));
    if (j.contains("slots")) {
      for (const auto& s : j.at("slots")) {
        ex.frame.slots.push_back(
            {s.at("name").get<std::string>(), ToLower(s.at("value").get<std::string>())});
      }
    }
    if (j.contains("tags")) {
      // Explicit tags win; the frame keeps its own slots when both are given.
      ex.tags = j.at("tags").get<std::vector<std::string>>();
      if (ex.tags.size() != words.size()) {
        throw Error(ErrorCode::kParse, "tag count does not match word count: " + ex.text);
      }
      if (!j.contains("slots")) ex.frame.slots = BioToSlots(words, ex.tags);
    } else if (j.contains("slots")) {
      ex.tags = SlotsToBio(words, ex.frame.slots);
    } else {
      ex.tags.assign(words.size(), "O");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad SLU record: ") + e.what());
  }
  return ex;
}

std::vector<SluExample> LoadSluJsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open SLU data: " + path);
  std::vector<SluExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ParseSluRecord(line));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void SaveSluJsonl(const std::string& path, const std::vector<SluExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& ex : examples) {
    json slots = json::array();
    for (const auto& s : ex.frame.slots) slots.push_back({{"name", s.name}, {"value", s.value}});
    json rec = {{"text", ex.text}, {"intent", ex.frame.intent}, {"slots", slots}};
    if (!ex.tags.empty()) rec["tags"] = ex.tags;
    out << rec.dump() << '\n';
  }
}

std::vector<std::string> SlotsToBio(const std::vector<std::string>& words,
                                    const std::vector<Slot>& slots) {
  std::vector<std::string> tags(words.size(), "O");
  for (const auto& slot : slots) {
    const auto value = SplitWhitespace(ToLower(slot.value));
    if (value.empty()) throw Error(ErrorCode::kParse, "empty slot value for " + slot.name);
    bool placed = false;
    for (std::size_t i = 0; i + value.size() <= words.size() && !placed; ++i) {
      bool match = true;
      for (std::size_t k = 0; k < value.size() && match; ++k) {
        match = words[i + k] == value[k] && tags[i + k] == "O";
      }
      if (!match) continue;
      tags[i] = "B-" + slot.name;
      for (std::size_t k = 1; k < value.size(); ++k) tags[i + k] = "I-" + slot.name;
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kParse, "slot value '" + slot.value + "' not found in text");
    }
  }
  return tags;
}

std::vector<Slot> BioToSlots(const std::vector<std::string>& words,
                             const std::vector<std::string>& tags) {
  std::vector<Slot> slots;
  std::string current;
  for (std::size_t i = 0; i < words.size() && i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      const std::string name = tag.substr(2);
      if (tag[0] == 'I' && current == name) {
        slots.back().value += " " + words[i];
      } else {
        slots.push_back({name, words[i]});
        current = name;
      }
    } else {
      current.clear();
    }
  }
  return slots;
}

LabelMap::LabelMap(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<std::int32_t>(i)).second) {
      throw Error(ErrorCode::kFormat, "duplicate label: " + labels_[i]);
    }
  }
}

std::optional<std::int32_t> LabelMap::Find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t LabelMap::Id(const std::string& label) const {
  auto id = Find(label);
  if (!id) throw Error(ErrorCode::kInvalidArgument, "unknown label: " + label);
  return *id;
}

const std::string& LabelMap::Label(std::int32_t id) const {
  if (id < 0 || id >= size()) throw Error(ErrorCode::kInvalidArgument, "label id out of range");
  return labels_[static_cast<std::size_t>(id)];
}

SluLabels SluLabels::FromTraining(const std::vector<SluExample>& train) {
  std::set<std::string> intents;
  std::set<std::string> tags;
  for (const auto& ex : train) {
    intents.insert(ex.frame.intent);
    for (const auto& t : ex.tags) {
      if (t != "O") tags.insert(t);
    }
  }
  std::vector<std::string> tag_list{"O"};
  tag_list.insert(tag_list.end(), tags.begin(), tags.end());
  return {LabelMap({intents.begin(), intents.end()}), LabelMap(std::move(tag_list))};
}

void SluLabels::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << json{{"intents", intents.labels()}, {"tags", tags.labels()}}.dump(2) << '\n';
}

SluLabels SluLabels::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open label maps: " + path);
  try {
    json j = json::parse(in);
    return {LabelMap(j.at("intents").get<std::vector<std::string>>()),
            LabelMap(j.at("tags").get<std::vector<std::string>>())};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad label maps: ") + e.what());
  }
}

}  // namespace tpslu
