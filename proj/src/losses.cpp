#include "facepipe/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace facepipe {

double photometric_loss(const ImageRGB& observed, const RenderedImage& rendered,
                        const SkinMask* skin) {
  const int w = rendered.rgb.width;
  const int h = rendered.rgb.height;
  if (observed.width != w || observed.height != h)
    throw std::invalid_argument("photometric_loss: image size mismatch");
  if (skin && (skin->a.width != w || skin->a.height != h))
    throw std::invalid_argument("photometric_loss: skin mask size mismatch");

  double num = 0.0;
  double den = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rendered.covered(x, y)) continue;
      const double a = skin ? skin->a.at(x, y) : 1.0;
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = observed.at(x, y, c) - rendered.rgb.at(x, y, c);
        d2 += d * d;
      }
      num += a * std::sqrt(d2);
      den += a;
    }
  }
  if (den <= 0.0)
    throw std::runtime_error("photometric_loss: empty coverage mask, loss undefined");
  return num / den;
}

double regularization_loss(const CoefficientSet& coeffs, const LossWeights& w) {
  return w.omega_alpha * coeffs.alpha.squaredNorm() + w.omega_beta * coeffs.beta.squaredNorm() +
         w.omega_delta * coeffs.delta.squaredNorm();
}

LossBreakdown total_loss(const ImageRGB& observed, const LandmarkSet& detected,
                         const MorphableBasis& basis, const CoefficientSet& coeffs,
                         const Camera& cam, const SkinMask* skin, const LossWeights& w) {
  LossBreakdown out;
  const RenderedImage rendered = render(basis, coeffs, cam);
  out.photometric = photometric_loss(observed, rendered, skin);
  const LandmarkSet reproj = reproject_landmarks(basis, coeffs, cam);
  const LandmarkWeights lw = standard_weights(static_cast<int>(detected.size()), w.lip_weight);
  out.landmark = lmd(detected, reproj, lw);
  out.regularization = regularization_loss(coeffs, w);
  out.total = w.lambda_pho * out.photometric + w.lambda_lan * out.landmark +
              w.lambda_reg * out.regularization;
  return out;
}

}  // namespace facepipe
