// SPDX-License-Identifier: Apache-2.0
//
// Gradient checks of composed graphs: a transformer block, softmax
// cross-entropy and the four pretraining losses.
#pragma once

#include "wfm/gradcheck.hpp"

#include <string>
#include <vector>

namespace wfm {

enum class CompositeKind { TransformerBlock, SoftmaxCrossEntropy, LossCsi, LossLoc, LossOcc, LossSpectrum };

std::string composite_kind_name(CompositeKind kind);
const std::vector<CompositeKind>& all_composite_kinds();

/// The attention key bias only shifts every score of a query row by the same
/// amount, so its gradient is exactly zero; it is held fixed during the
/// finite-difference sweep and its analytic gradient is reported in
/// `zero_grad_max` instead.
GradCheckReport grad_check_composite(CompositeKind kind, std::uint64_t seed);

} // namespace wfm
