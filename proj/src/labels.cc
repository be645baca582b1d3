/*
 * Copyright 2026 The LLG Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "llg/labels.h"

#include <sstream>
#include <utility>

#include "llg/tensor.h"

namespace llg {

LabelMultiset LabelMultiset::FromLabels(std::span<const Label> labels, size_t num_classes) {
  LabelMultiset out(num_classes);
  for (Label l : labels) out.Add(l);
  return out;
}

LabelMultiset LabelMultiset::FromCounts(std::vector<int> counts) {
  LabelMultiset out;
  for (int c : counts) {
    if (c < 0) throw Error("label counts must be non-negative");
    out.total_ += c;
  }
  out.counts_ = std::move(counts);
  return out;
}

void LabelMultiset::Add(Label label, int times) {
  if (label < 1 || static_cast<size_t>(label) > counts_.size()) {
    throw Error("label " + std::to_string(label) + " outside [1, " +
                std::to_string(counts_.size()) + "]");
  }
  if (times < 0) throw Error("cannot add a negative number of labels");
  counts_[static_cast<size_t>(label - 1)] += times;
  total_ += times;
}

std::vector<Label> LabelMultiset::ToSequence() const {
  std::vector<Label> out;
  out.reserve(static_cast<size_t>(total_));
  for (size_t i = 0; i < counts_.size(); ++i) {
    out.insert(out.end(), static_cast<size_t>(counts_[i]), static_cast<Label>(i + 1));
  }
  return out;
}

std::string LabelMultiset::ToString() const {
  std::ostringstream out;
  out << "{";
  bool first = true;
  for (size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == 0) continue;
    if (!first) out << ", ";
    out << (i + 1) << ":" << counts_[i];
    first = false;
  }
  out << "}";
  return out.str();
}

}  // namespace llg
