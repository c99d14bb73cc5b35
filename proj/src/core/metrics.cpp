#include "core/metrics.hpp"

#include <lapacke.h>

#include <cmath>

#include "core/common.hpp"

namespace egs {
namespace {

void mean_and_cov(const std::vector<Tensor>& feats, std::vector<double>& mu,
                  std::vector<double>& cov) {
    const int n = static_cast<int>(feats.size());
    const int d = static_cast<int>(feats[0].numel());
    mu.assign(d, 0.0);
    for (const auto& f : feats)
        for (int j = 0; j < d; ++j) mu[j] += f.v[j];
    for (double& m : mu) m /= n;
    cov.assign(static_cast<size_t>(d) * d, 0.0);
    for (const auto& f : feats) {
        for (int i = 0; i < d; ++i) {
            double di = f.v[i] - mu[i];
            for (int j = i; j < d; ++j)
                cov[static_cast<size_t>(i) * d + j] += di * (f.v[j] - mu[j]);
        }
    }
    double denom = n > 1 ? n - 1 : 1;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double v = cov[static_cast<size_t>(i) * d + j] / denom;
            cov[static_cast<size_t>(i) * d + j] = v;
            cov[static_cast<size_t>(j) * d + i] = v;
        }
    for (int i = 0; i < d; ++i) cov[static_cast<size_t>(i) * d + i] += 1e-6;  // shrinkage
}

// Symmetric eigendecomposition (ascending eigenvalues); a is overwritten with
// eigenvectors in rows of the returned column-major sense handled below.
void sym_eig(std::vector<double>& a, int d, std::vector<double>& eigvals) {
    eigvals.assign(d, 0.0);
    int info = LAPACKE_dsyev(LAPACK_ROW_MAJOR, 'V', 'U', d, a.data(), d, eigvals.data());
    check_contract(info == 0, "fid: eigendecomposition failed");
}

// B := V diag(f(lambda)) V^T given eigenvectors in rows-of-columns layout.
std::vector<double> rebuild(const std::vector<double>& vecs, const std::vector<double>& vals,
                            int d, double (*f)(double)) {
    std::vector<double> out(static_cast<size_t>(d) * d, 0.0);
    for (int k = 0; k < d; ++k) {
        double fv = f(vals[k]);
        for (int i = 0; i < d; ++i) {
            double vik = vecs[static_cast<size_t>(i) * d + k] * fv;
            for (int j = 0; j < d; ++j)
                out[static_cast<size_t>(i) * d + j] += vik * vecs[static_cast<size_t>(j) * d + k];
        }
    }
    return out;
}

double sqrt_clamped(double x) { return x > 0 ? std::sqrt(x) : 0.0; }

}  // namespace

double fid(const std::vector<Tensor>& features_a, const std::vector<Tensor>& features_b) {
    check_contract(!features_a.empty() && !features_b.empty(), "fid: empty feature set");
    const int d = static_cast<int>(features_a[0].numel());
    for (const auto& f : features_b)
        check_contract(static_cast<int>(f.numel()) == d, "fid: feature dim mismatch");

    std::vector<double> mu_a, mu_b, ca, cb;
    mean_and_cov(features_a, mu_a, ca);
    mean_and_cov(features_b, mu_b, cb);

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        double diff = mu_a[i] - mu_b[i];
        mean_term += diff * diff;
    }
    double tr_a = 0.0, tr_b = 0.0;
    for (int i = 0; i < d; ++i) {
        tr_a += ca[static_cast<size_t>(i) * d + i];
        tr_b += cb[static_cast<size_t>(i) * d + i];
    }

    // tr((Sa Sb)^{1/2}) = tr((Sa^{1/2} Sb Sa^{1/2})^{1/2}), computed on the
    // symmetric product so one eigendecomposition suffices.
    std::vector<double> va = ca, vals_a;
    sym_eig(va, d, vals_a);
    std::vector<double> sqrt_a = rebuild(va, vals_a, d, sqrt_clamped);

    std::vector<double> tmp(static_cast<size_t>(d) * d, 0.0), prod(static_cast<size_t>(d) * d,
                                                                   0.0);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            double s = sqrt_a[static_cast<size_t>(i) * d + k];
            if (s == 0.0) continue;
            for (int j = 0; j < d; ++j)
                tmp[static_cast<size_t>(i) * d + j] += s * cb[static_cast<size_t>(k) * d + j];
        }
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            double s = tmp[static_cast<size_t>(i) * d + k];
            if (s == 0.0) continue;
            for (int j = 0; j < d; ++j)
                prod[static_cast<size_t>(i) * d + j] += s * sqrt_a[static_cast<size_t>(k) * d + j];
        }
    // Symmetrize against round-off before the eigensolve.
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            double v = 0.5 * (prod[static_cast<size_t>(i) * d + j] +
                              prod[static_cast<size_t>(j) * d + i]);
            prod[static_cast<size_t>(i) * d + j] = v;
            prod[static_cast<size_t>(j) * d + i] = v;
        }
    std::vector<double> vals_m;
    sym_eig(prod, d, vals_m);
    double tr_sqrt = 0.0;
    for (double l : vals_m) tr_sqrt += sqrt_clamped(l);

    double result = mean_term + tr_a + tr_b - 2.0 * tr_sqrt;
    return result > 0.0 ? result : 0.0;
}

double inception_score(const std::vector<std::vector<double>>& probs) {
    check_contract(!probs.empty(), "inception_score: empty input");
    const size_t k = probs[0].size();
    std::vector<double> marginal(k, 0.0);
    for (const auto& p : probs) {
        check_contract(p.size() == k, "inception_score: ragged rows");
        double s = 0.0;
        for (double v : p) {
            check_contract(v >= 0.0, "inception_score: negative probability");
            s += v;
        }
        check_contract(std::abs(s - 1.0) < 1e-6, "inception_score: row does not sum to 1");
        for (size_t j = 0; j < k; ++j) marginal[j] += p[j];
    }
    for (double& m : marginal) m /= static_cast<double>(probs.size());
    double mean_kl = 0.0;
    for (const auto& p : probs) {
        double kl = 0.0;
        for (size_t j = 0; j < k; ++j)
            if (p[j] > 0.0) kl += p[j] * std::log(p[j] / marginal[j]);
        mean_kl += kl;
    }
    mean_kl /= static_cast<double>(probs.size());
    return std::exp(mean_kl);
}

SoftmaxProbe::SoftmaxProbe(int feature_dim, int classes) : dim_(feature_dim), classes_(classes) {
    w_.assign(static_cast<size_t>(classes) * (feature_dim + 1), 0.0);
}

void SoftmaxProbe::train(const std::vector<Tensor>& features, const std::vector<int>& labels,
                         int iters, double lr) {
    check_contract(features.size() == labels.size() && !features.empty(),
                   "probe: bad training set");
    const int d = dim_, k = classes_;
    std::vector<double> grad(w_.size());
    for (int it = 0; it < iters; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (size_t s = 0; s < features.size(); ++s) {
            auto p = predict(features[s]);
            for (int c = 0; c < k; ++c) {
                double err = p[c] - (labels[s] == c ? 1.0 : 0.0);
                double* g = &grad[static_cast<size_t>(c) * (d + 1)];
                for (int j = 0; j < d; ++j) g[j] += err * features[s].v[j];
                g[d] += err;
            }
        }
        double scale = lr / static_cast<double>(features.size());
        for (size_t i = 0; i < w_.size(); ++i) w_[i] -= scale * grad[i];
    }
}

std::vector<double> SoftmaxProbe::predict(const Tensor& feature) const {
    check_contract(static_cast<int>(feature.numel()) == dim_, "probe: feature dim mismatch");
    std::vector<double> logits(classes_);
    double mx = -1e300;
    for (int c = 0; c < classes_; ++c) {
        const double* w = &w_[static_cast<size_t>(c) * (dim_ + 1)];
        double s = w[dim_];
        for (int j = 0; j < dim_; ++j) s += w[j] * feature.v[j];
        logits[c] = s;
        mx = std::max(mx, s);
    }
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
    }
    for (double& l : logits) l /= z;
    return logits;
}

}  // namespace egs
