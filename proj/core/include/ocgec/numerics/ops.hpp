#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ocgec/numerics/tape.hpp"
#include "ocgec/rng.hpp"

// Differentiable operations recorded on the tape of their first argument.
// Shape mismatches throw DimensionError.
namespace ocgec::numerics {

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// Sum of equally shaped values.
Var add_n(std::span<const Var> terms);

/// [m×k] · [k×n] → [m×n]
Var matmul(Var a, Var b);
/// Adds bias[n] to every row of a[m×n].
Var add_row_bias(Var a, Var bias);

Var relu(Var a);

/// Valid (unpadded) stride-1 cross-correlation.
/// input [c×h×w], filters [f×c×kh×kw], bias [f] → [f×(h−kh+1)×(w−kw+1)].
Var conv2d(Var input, Var filters, Var bias);

Var reshape(Var a, Shape shape);

/// Sum of all elements, as a [1] tensor.
Var sum(Var a);
/// Σ a², as a [1] tensor.
Var sum_squares(Var a);

/// Concatenates flattened inputs into one vector.
Var concat(std::span<const Var> parts);

/// logsumexp(logits) − logits[label] for a logits vector.
Var softmax_cross_entropy(Var logits, std::size_t label);

/// Inverted dropout: each element kept with probability 1 − rate and scaled
/// by 1 / (1 − rate). rate == 0 returns `a` unchanged.
Var dropout(Var a, double rate, Rng& rng);

/// Copy of a[N×d] with the listed rows set to zero.
Var zero_rows(Var a, std::span<const std::size_t> rows);

/// Numerically stable softmax of a plain vector.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ocgec::numerics
