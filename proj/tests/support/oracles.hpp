#pragma once

// Independent re-implementations used as test oracles. Each one is written as
// plain scalar loops and shares no code with the library path it checks.

#include <cstddef>
#include <vector>

namespace ocgec::oracle {

/// Ten-or-more step Adam trace on f(x) = 0.5·a·(x − b)², returning x after each step.
std::vector<double> adam_quadratic_trace(double x0, double a, double b, double lr, int steps,
                                         double beta1 = 0.9, double beta2 = 0.999,
                                         double eps = 1e-8);


/// Multinomial logistic regression fitted by full-batch gradient descent on
/// raw feature vectors. With two classes it is ordinary logistic regression.
struct LinearProbe {
  std::vector<std::vector<double>> weights;  // [classes][features]
  std::vector<double> biases;
  std::size_t predict(const std::vector<double>& x) const;
};

LinearProbe fit_linear_probe(const std::vector<std::vector<double>>& xs, const std::vector<std::size_t>& ys,
                             std::size_t num_classes, int iterations = 300, double lr = 0.5);


/// Scaled cosine error by explicit per-row loops: mean over `rows` of
/// (1 − ⟨x,y⟩ / (max(‖x‖,δ)·max(‖y‖,δ)))^γ.
double sce_scalar(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
                  const std::vector<std::size_t>& rows, double gamma, double delta);


/// Soft-boundary one-class objective by explicit loops over embeddings,
/// coordinates and weights.
double svdd_scalar(const std::vector<std::vector<double>>& embeddings, const std::vector<double>& center,
                   double radius_sq, double nu, double weight_decay, const std::vector<std::vector<double>>& weights);

/// Nearest-rank percentile: the smallest d such that at least q·k of the
/// values are ≤ d (q = 1 − ν); the minimum when q·k ≤ 1.
double nearest_rank(std::vector<double> values, double q);

}  // namespace ocgec::oracle
