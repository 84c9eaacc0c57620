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

#pragma once

#include <string>

#include <json.hpp>

#include "avloc/train.hpp"

namespace avloc {

// One line-delimited JSON metrics record per step. Field order is fixed and
// doubles use shortest round-trip formatting, so identical runs produce
// byte-identical logs.
inline std::string to_log_line(const StepRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["step"] = rec.step;
  j["loss"] = rec.loss;
  j["acl_i"] = rec.acl_i;
  j["acl_f"] = rec.acl_f;
  j["reg"] = rec.reg;
  j["mask_area_pos_mean"] = rec.mask_area_pos_mean;
  return j.dump();
}

}  // namespace avloc
