// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "wfm/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace wfm {

using GraphFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t elements = 0; // input elements probed
    int attempts = 1;         // sampling attempts, > 1 when a kink forced resampling
    /// Largest |analytic gradient| over inputs held fixed because their exact
    /// gradient is identically zero (attention key bias); 0 when none.
    double zero_grad_max = 0.0;
};

/// Compares reverse-mode gradients of L = sum(w * f(inputs)) against central
/// differences, where w is a random weight tensor drawn from `seed`.
/// Error per element is |analytic - numeric| / max(|numeric|, 1e-8).
GradCheckReport grad_check_fn(const GraphFn& f, const std::vector<Tensor<double>>& inputs, std::uint64_t seed,
                              double step = 1e-5);

/// Gradient check of a single op kind on randomly drawn inputs. Points within
/// a small margin of a non-smooth locus are redrawn, up to a bounded retry count.
GradCheckReport grad_check(OpKind kind, std::uint64_t seed);

} // namespace wfm
