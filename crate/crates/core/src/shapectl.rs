//! User-controlled body shape: blending two reference shape vectors and comparing shapes.

use crate::bodymodel::ShapeVector;
use crate::scalar::Scalar;

/// Beyond this |γ| the synthetic basis is far outside the range it was built for.
pub const EXTRAPOLATION_WARN_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapeError {
    #[error("shape vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("non-finite blend ratio")]
    NonFiniteRatio,
}

/// `γ·β₁ + (1 − γ)·β₂`, elementwise. `γ` outside `[0, 1]` extrapolates and is not clamped.
pub fn blend_shapes<T: Scalar>(beta1: &ShapeVector<T>, beta2: &ShapeVector<T>, gamma: T) -> Result<ShapeVector<T>, ShapeError> {
    if beta1.len() != beta2.len() {
        return Err(ShapeError::LengthMismatch(beta1.len(), beta2.len()));
    }
    if !gamma.is_finite() {
        return Err(ShapeError::NonFiniteRatio);
    }
    if gamma.abs() > T::of(EXTRAPOLATION_WARN_LIMIT) {
        log::warn!("blend ratio {gamma} extrapolates far beyond the reference shapes");
    }
    let rest = T::one() - gamma;
    Ok(ShapeVector(
        beta1.betas().iter().zip(beta2.betas()).map(|(&a, &b)| gamma * a + rest * b).collect(),
    ))
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T, ShapeError> {
    if a.len() != b.len() {
        return Err(ShapeError::LengthMismatch(a.len(), b.len()));
    }
    let dot = a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
    let na = a.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let nb = b.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(ShapeError::ZeroVector);
    }
    // rounding can push |cos| of parallel vectors a hair past 1
    Ok((dot / (na * nb)).max(-T::one()).min(T::one()))
}

/// Cosine similarity between two shape vectors, in `[-1, 1]`.
pub fn shape_distance<T: Scalar>(beta_a: &ShapeVector<T>, beta_b: &ShapeVector<T>) -> Result<T, ShapeError> {
    cosine_similarity(beta_a.betas(), beta_b.betas())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> ShapeVector<f64> {
        ShapeVector(v.to_vec())
    }

    #[test]
    fn blend_examples() {
        let a = sv(&[1.0, 0.0, 0.25]);
        let b = sv(&[3.0, 0.0, -0.5]);
        assert_eq!(blend_shapes(&a, &b, 1.0).unwrap(), a);
        assert_eq!(blend_shapes(&a, &b, 0.0).unwrap(), b);
        assert_eq!(blend_shapes(&a, &b, 0.5).unwrap().betas()[0], 2.0);
        assert_eq!(blend_shapes(&a, &b, -1.0).unwrap().betas()[0], 5.0);
        assert!(blend_shapes(&a, &sv(&[1.0]), 0.5).is_err());
        assert!(blend_shapes(&a, &b, f64::NAN).is_err());
    }

    #[test]
    fn similarity_examples() {
        let mut e1 = vec![0.0; 10];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; 10];
        e2[1] = 1.0;
        assert_eq!(shape_distance(&sv(&e1), &sv(&e1)).unwrap(), 1.0);
        assert_eq!(shape_distance(&sv(&e1), &sv(&e2)).unwrap(), 0.0);
        let mut a = vec![0.0; 10];
        a[..2].copy_from_slice(&[1.0, 2.0]);
        let mut b = vec![0.0; 10];
        b[..2].copy_from_slice(&[2.0, 4.0]);
        assert!((shape_distance(&sv(&a), &sv(&b)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(shape_distance(&sv(&a), &sv(&[0.0; 10])), Err(ShapeError::ZeroVector));
    }
}
