#pragma once

#include <optional>

#include "facepipe/basis.hpp"
#include "facepipe/coefficients.hpp"
#include "facepipe/image.hpp"
#include "facepipe/landmarks.hpp"
#include "facepipe/render.hpp"

namespace facepipe {

struct LossWeights {
  double lambda_pho = 1.92;
  double lambda_lan = 1.6e-3;
  double lambda_reg = 3.0e-4;
  double omega_alpha = 0.5;
  double omega_beta = 2.0;  // expression carries the stronger prior
  double omega_delta = 0.5;
  double lip_weight = 10.0;
};

// Per-pixel skin probability in [0,1]; absent means A == 1 everywhere.
struct SkinMask {
  ImageGray a;
};

// Skin-weighted mean rgb distance over the rendered coverage mask:
//   sum_{i in M} A_i * |I_i - I'_i|_2 / sum_{i in M} A_i
// Throws if the coverage mask is empty.
double photometric_loss(const ImageRGB& observed, const RenderedImage& rendered,
                        const SkinMask* skin = nullptr);

// omega_alpha*|alpha|^2 + omega_beta*|beta|^2 + omega_delta*|delta|^2.
double regularization_loss(const CoefficientSet& coeffs, const LossWeights& w);

struct LossBreakdown {
  double photometric = 0.0;
  double landmark = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

// Weighted combination lambda_pho*L_pho + lambda_lan*L_lan + lambda_reg*L_reg,
// rendering the coefficients to evaluate the photometric term.
LossBreakdown total_loss(const ImageRGB& observed, const LandmarkSet& detected,
                         const MorphableBasis& basis, const CoefficientSet& coeffs,
                         const Camera& cam, const SkinMask* skin, const LossWeights& w);

}  // namespace facepipe
