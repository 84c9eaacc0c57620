// Copyright 2026 The AVLoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avloc/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "avloc/types.hpp"

namespace avloc {

using nlohmann::json;

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::kPositive:
      return "positive";
    case Polarity::kNonAudible:
      return "non_audible";
    case Polarity::kNonVisible:
      return "non_visible";
    case Polarity::kMismatched:
      return "mismatched";
  }
  return "positive";
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "positive") return Polarity::kPositive;
  if (s == "non_audible") return Polarity::kNonAudible;
  if (s == "non_visible") return Polarity::kNonVisible;
  if (s == "mismatched") return Polarity::kMismatched;
  throw ValidationError("unknown polarity: " + s);
}

namespace {

std::string require_string(const json& obj, const char* key, int line,
                           const std::string& origin) {
  if (!obj.contains(key))
    throw ParseError(origin + ":" + std::to_string(line) +
                     ": missing required key \"" + key + "\"");
  if (!obj[key].is_string())
    throw ParseError(origin + ":" + std::to_string(line) + ": key \"" + key +
                     "\" must be a string");
  return obj[key].get<std::string>();
}

}  // namespace

Dataset parse_manifest(const std::string& text, Split split,
                       const std::string& origin) {
  Dataset ds;
  ds.split = split;
  std::unordered_set<std::string> seen_ids;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": invalid JSON: " + e.what());
    }
    if (!obj.is_object())
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected a JSON object");

    SampleRecord rec;
    rec.id = require_string(obj, "id", line_no, origin);
    rec.image_path = require_string(obj, "image_path", line_no, origin);
    rec.audio_path = require_string(obj, "audio_path", line_no, origin);
    if (obj.contains("boxes")) {
      for (const auto& b : obj["boxes"]) {
        if (!b.is_array() || b.size() != 4)
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": each box must be [x_min, y_min, x_max, y_max]");
        rec.boxes.push_back(
            {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
             b[3].get<double>()});
      }
    }
    if (obj.contains("mask_path"))
      rec.mask_path = obj["mask_path"].get<std::string>();
    if (obj.contains("polarity"))
      rec.polarity = polarity_from_string(obj["polarity"].get<std::string>());

    if (rec.has_boxes() && rec.has_mask())
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": record \"" + rec.id +
                            "\" carries both boxes and mask_path");
    if (!seen_ids.insert(rec.id).second)
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": duplicate id \"" + rec.id + "\"");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset load_manifest(const std::string& path, Split split) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open manifest: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_manifest(buf.str(), split, path);
}

std::string serialize_manifest(const Dataset& dataset) {
  std::string out;
  for (const auto& rec : dataset.records) {
    json obj = json::object();
    obj["id"] = rec.id;
    obj["image_path"] = rec.image_path;
    obj["audio_path"] = rec.audio_path;
    if (rec.has_boxes()) {
      json boxes = json::array();
      for (const auto& b : rec.boxes) boxes.push_back({b[0], b[1], b[2], b[3]});
      obj["boxes"] = boxes;
    }
    if (rec.has_mask()) obj["mask_path"] = rec.mask_path;
    if (rec.polarity != Polarity::kPositive)
      obj["polarity"] = to_string(rec.polarity);
    out += obj.dump();
    out += "\n";
  }
  return out;
}

}  // namespace avloc
