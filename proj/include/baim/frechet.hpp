#ifndef BAIM_FRECHET_HPP
#define BAIM_FRECHET_HPP

#include <cmath>
#include <string>
#include <vector>

#include "baim/linalg.hpp"
#include "baim/rng.hpp"
#include "baim/tape.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Seed of the fixed random feature projection. The projection matrix is
// a pure function of (this constant, d, input_dim), so it is identical in
// every build; a golden checksum test pins it against drift.
inline constexpr std::uint64_t kFrechetProjectionSeed = 0x46524543484554ull;  // "FRECHET"

inline constexpr int kDefaultFrechetDim = 32;

// Fixed d x input_dim Gaussian projection, entries scaled by 1/sqrt(input_dim).
inline Tensor frechet_projection(int feature_dim, int input_dim) {
  if (feature_dim < 1 || input_dim < 1) throw config_error("frechet projection: bad dimensions");
  RngStream rng = RngStream(kFrechetProjectionSeed)
                      .fork(static_cast<std::uint64_t>(feature_dim))
                      .fork(static_cast<std::uint64_t>(input_dim));
  Tensor P({static_cast<long>(feature_dim), static_cast<long>(input_dim)});
  const real scale = real(1) / std::sqrt(static_cast<real>(input_dim));
  for (long i = 0; i < P.size(); ++i) P[i] = static_cast<real>(rng.normal()) * scale;
  return P;
}

// Squared Fréchet distance between two Gaussians:
//   |mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})
// with symmetrized products inside the root. Clamped at zero against
// eigensolver round-off.
inline real frechet_gaussian(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2,
                             const Tensor& cov2) {
  require_same_shape(mu1, mu2, "frechet means");
  require_same_shape(cov1, cov2, "frechet covariances");
  const long d = mu1.size();
  if (cov1.rank() != 2 || cov1.rows() != d || cov1.cols() != d)
    throw dim_error("frechet: covariance shape does not match mean");

  real mean_term = 0;
  for (long i = 0; i < d; ++i) {
    const real diff = mu1[i] - mu2[i];
    mean_term += diff * diff;
  }

  Tensor root1 = psd_sqrt(cov1);
  Tensor inner({d, d});
  mat_view(inner) = mat_view(root1) * mat_view(cov2) * mat_view(root1);
  EigenMat sym = mat_view(inner);
  mat_view(inner) = real(0.5) * (sym + sym.transpose().eval());
  Tensor cross = psd_sqrt(inner);

  real trace_term = 0;
  for (long i = 0; i < d; ++i)
    trace_term += cov1.at(i, i) + cov2.at(i, i) - real(2) * cross.at(i, i);
  return std::max(real(0), mean_term + trace_term);
}

struct GaussianFit {
  Tensor mean;
  Tensor cov;  // unbiased, /(n-1)
};

inline GaussianFit fit_gaussian(const std::vector<Tensor>& features) {
  const long n = static_cast<long>(features.size());
  const long d = features.at(0).size();
  GaussianFit fit;
  fit.mean = Tensor({d});
  for (const auto& f : features) vec_view(fit.mean) += vec_view(f);
  vec_view(fit.mean) /= static_cast<real>(n);
  fit.cov = Tensor({d, d});
  EigenVec centered(d);
  for (const auto& f : features) {
    centered = vec_view(f) - vec_view(fit.mean);
    mat_view(fit.cov) += centered * centered.transpose();
  }
  mat_view(fit.cov) /= static_cast<real>(n - 1);
  return fit;
}

// Desk-scale FID stand-in: Fréchet distance between Gaussians fitted in
// the fixed random-projection feature space.
inline real frechet_proxy(const std::vector<Tensor>& real_images,
                          const std::vector<Tensor>& gen_images,
                          int feature_dim = kDefaultFrechetDim) {
  if (real_images.empty() || gen_images.empty())
    throw config_error("frechet_proxy: sample-count error: empty image set");
  const long input_dim = real_images.front().size();
  const long need = feature_dim + 1;
  if (static_cast<long>(real_images.size()) < need || static_cast<long>(gen_images.size()) < need)
    throw config_error("frechet_proxy: sample-count error: need at least " + std::to_string(need) +
                       " samples per set");
  Tensor P = frechet_projection(feature_dim, static_cast<int>(input_dim));

  auto project = [&](const std::vector<Tensor>& images) {
    std::vector<Tensor> feats;
    feats.reserve(images.size());
    for (const auto& img : images) {
      if (img.size() != input_dim) throw dim_error("frechet_proxy: inconsistent image sizes");
      feats.push_back(apply_linear_value(P, Tensor(), img));
    }
    return feats;
  };

  GaussianFit a = fit_gaussian(project(real_images));
  GaussianFit b = fit_gaussian(project(gen_images));
  return frechet_gaussian(a.mean, a.cov, b.mean, b.cov);
}

}  // namespace baim

#endif  // BAIM_FRECHET_HPP
