"""Sequential signal mixing aggregation (SSMA) for multisets and message-passing networks."""
from .core import (AffineEncoderConfig, RepresentationShape, canonical_affine, encode_affine, fconv,
                   fconv_scalar, fourier_product, representation_shape)
from .polyset import elementary_coeffs, expand_bivariate, evaluate_bivariate, wasserstein1

__version__ = "0.1.0"
