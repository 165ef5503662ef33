//! Error aggregates over geodesic localization errors.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("no error samples")]
    Empty,
    #[error("route length must be positive, got {0}")]
    NonPositiveLength(f64),
}

pub fn rmse(errors: &[f64]) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = errors.iter().map(|e| e * e).sum();
    Ok(libm::sqrt(sum / errors.len() as f64))
}

pub fn mae(errors: &[f64]) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = errors.iter().map(|e| e.abs()).sum();
    Ok(sum / errors.len() as f64)
}

/// MAE as a percentage of the route length.
pub fn normalized_mae(mae: f64, route_length: f64) -> Result<f64, MetricsError> {
    if !(route_length > 0.0) {
        return Err(MetricsError::NonPositiveLength(route_length));
    }
    Ok(mae / route_length * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(rmse(&[0.0, 0.0, 0.0]), Ok(0.0));
        assert_eq!(mae(&[0.0, 0.0, 0.0]), Ok(0.0));
        assert!((rmse(&[3.0, 4.0]).unwrap() - libm::sqrt(12.5)).abs() < 1e-15);
        assert_eq!(mae(&[3.0, 4.0]), Ok(3.5));
        assert_eq!(rmse(&[2.5]), Ok(2.5));
        assert_eq!(mae(&[2.5]), Ok(2.5));
        assert_eq!(rmse(&[]), Err(MetricsError::Empty));
        assert_eq!(mae(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn normalization() {
        assert!((normalized_mae(4.81, 100.0).unwrap() - 4.81).abs() < 1e-12);
        assert_eq!(normalized_mae(0.0, 100.0), Ok(0.0));
        assert_eq!(normalized_mae(1.0, 0.0), Err(MetricsError::NonPositiveLength(0.0)));
    }
}
