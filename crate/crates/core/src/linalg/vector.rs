use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`.
///
/// A zero vector on either side yields 0 so that fully annihilated
/// embeddings classify through the tie-break rule instead of erroring.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionError(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(a, b) / denom).clamp(-1.0, 1.0))
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_vectors_have_zero_cosine() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let v = [0.3, -1.2, 4.0];
        let w: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert!((cosine(&v, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_half_diagonal() {
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - 0.7071067811865475).abs() < 1e-15);
    }

    #[test]
    fn cosine_with_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_length_mismatch() {
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::DimensionError(_))));
    }

    #[test]
    fn normalize_zero_vector_fails() {
        assert!(matches!(l2_normalize(&[0.0; 4]), Err(Error::ZeroVector)));
        let u = l2_normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(u, vec![0.6, 0.8]);
    }
}
