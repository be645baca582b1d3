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

#ifndef LLG_LABELS_H_
#define LLG_LABELS_H_

#include <span>
#include <string>
#include <vector>

namespace llg {

// Labels are 1-based everywhere in the public API: a classifier with n
// classes uses labels 1..n.
using Label = int;

// Occurrence counts lambda_i per label. counts()[i - 1] is the count of
// label i.
class LabelMultiset {
 public:
  LabelMultiset() = default;
  explicit LabelMultiset(size_t num_classes) : counts_(num_classes, 0) {}
  // Throws if any label is outside [1, num_classes].
  static LabelMultiset FromLabels(std::span<const Label> labels, size_t num_classes);
  static LabelMultiset FromCounts(std::vector<int> counts);

  void Add(Label label, int times = 1);
  int count(Label label) const { return counts_.at(static_cast<size_t>(label - 1)); }
  const std::vector<int>& counts() const { return counts_; }
  size_t num_classes() const { return counts_.size(); }
  int total() const { return total_; }

  // Labels in ascending order, each repeated by its count.
  std::vector<Label> ToSequence() const;
  std::string ToString() const;

  friend bool operator==(const LabelMultiset&, const LabelMultiset&) = default;

 private:
  std::vector<int> counts_;
  int total_ = 0;
};

}  // namespace llg

#endif  // LLG_LABELS_H_
