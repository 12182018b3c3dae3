use crate::error::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!("{} predictions for {} truth values", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Contract("metric over an empty sample".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok((pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent. A zero truth value is an
/// error, never skipped.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let mut sum = 0.0;
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if *t == 0.0 {
            return Err(Error::DivisionDomain { index: i });
        }
        sum += ((p - t) / t).abs();
    }
    Ok(100.0 * sum / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(mae(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 1.5);
        assert!((rmse(&[2.0, 4.0], &[1.0, 2.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[3.0], &[1.0]).unwrap(), 2.0);
        assert!((mape(&[110.0], &[100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(mae(&[], &[]), Err(Error::Contract(_))));
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(mape(&[1.0, 1.0], &[1.0, 0.0]), Err(Error::DivisionDomain { index: 1 })));
    }
}
