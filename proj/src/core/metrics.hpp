#pragma once

#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace egs {

// Frechet distance between Gaussian fits of two feature sets:
// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}).
// Covariances get +1e-6 I shrinkage before the square root.
double fid(const std::vector<Tensor>& features_a, const std::vector<Tensor>& features_b);

// exp(E[KL(p(y|x) || p(y))]); every row must sum to 1.
double inception_score(const std::vector<std::vector<double>>& probs);

// Minimal multinomial logistic probe: supplies class posteriors for the
// inception score over whatever feature extractor the caller plugs in.
class SoftmaxProbe {
public:
    SoftmaxProbe(int feature_dim, int classes);
    void train(const std::vector<Tensor>& features, const std::vector<int>& labels, int iters,
               double lr);
    std::vector<double> predict(const Tensor& feature) const;
    int classes() const { return classes_; }

private:
    int dim_, classes_;
    std::vector<double> w_;  // [classes, dim+1] with bias column
};

}  // namespace egs
