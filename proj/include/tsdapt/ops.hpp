#pragma once

#include <span>
#include <vector>

#include "tsdapt/autodiff.hpp"

namespace tsdapt {

enum class Padding { same, valid };

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kCosineEpsilon = 1e-12;

// Elementwise and reductions.
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var mul(const Var& a, const Var& b);
Var sum(const Var& a);
Var mean(const Var& a);

/// 1D cross-correlation. `input` is [C x T] or batched [B x C x T];
/// `kernels` is [F x C x W]; `bias` is [F]. Same padding splits the W-1
/// padding as floor((W-1)/2) on the left and the rest on the right.
Var conv1d(const Var& input, const Var& kernels, const Var& bias, Padding padding);

/// Affine map. `input` is [in] or batched [B x in]; `weights` is [out x in].
Var dense(const Var& input, const Var& weights, const Var& bias);

/// max(0, x) with zero subgradient at 0.
Var relu(const Var& input);

/// Mean over the last axis: [C x T] -> [C], [B x C x T] -> [B x C].
Var global_average_pool(const Var& input);

/// Softmax over the last axis of a [L] or [B x L] array.
Var softmax(const Var& logits);

/// -log(max(p[label], 1e-12)). [L] -> scalar, [B x L] -> [B].
Var cross_entropy(const Var& probabilities, std::span<const int> labels);

/// Identity forward; multiplies the upstream gradient by -lambda.
Var gradient_reversal(const Var& input, double lambda);

/// a.b / max(|a||b|, 1e-12) for two [d] vectors.
Var cosine_similarity(const Var& a, const Var& b);

/// All-pairs cosine similarity of the rows of a [B x d] array -> [B x B].
Var pairwise_cosine(const Var& rows);

/// Rows [begin, end) along axis 0.
Var rows(const Var& input, std::size_t begin, std::size_t end);

/// Concatenation along axis 0; trailing shapes must agree.
Var concat_rows(const std::vector<Var>& parts);

/// KL(target || mean of the rows of `probabilities`), with the mean floored
/// at 1e-12 inside the log. Terms where target is 0 contribute 0.
Var kl_to_batch_mean(const Var& probabilities, const Array& target);

}  // namespace tsdapt
