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

#ifndef LLG_METRICS_H_
#define LLG_METRICS_H_

#include <span>

#include "llg/data.h"
#include "llg/labels.h"
#include "llg/network.h"

namespace llg {

// Multiset overlap sum_i min(E_i, C_i) / |D|. Both totals must be equal and
// positive.
double AttackSuccessRate(const LabelMultiset& extracted, const LabelMultiset& truth);

// Hellinger distance between the two normalised label distributions.
double Hellinger(const LabelMultiset& p, const LabelMultiset& q);

// Sample Pearson correlation. Throws on length < 2, unequal lengths or a
// constant input.
double Pearson(std::span<const double> x, std::span<const double> y);

// Fraction of samples whose argmax logit (lowest index on ties) equals the
// label.
double TestAccuracy(const Network& net, const ClientDataset& test);

}  // namespace llg

#endif  // LLG_METRICS_H_
