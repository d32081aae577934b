use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Normal-approximation multiplier for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct StatsSummary<T: Real = f64> {
    pub n: usize,
    pub mean: T,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub std: T,
    /// `1.96 * std / sqrt(n)`.
    pub ci95: T,
    /// False when n = 1 and the std is undefined.
    pub std_defined: bool,
}

pub fn summarize<T: Real>(values: &[T]) -> Result<StatsSummary<T>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = values.len();
    let nt = T::of_usize(n);
    let mean = values.iter().fold(T::zero(), |a, &x| a + x) / nt;
    if n == 1 {
        return Ok(StatsSummary {
            n,
            mean,
            std: T::zero(),
            ci95: T::zero(),
            std_defined: false,
        });
    }
    let ss = values.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
    let std = (ss / (nt - T::one())).sqrt();
    Ok(StatsSummary {
        n,
        mean,
        std,
        ci95: T::of(Z95) * std / nt.sqrt(),
        std_defined: true,
    })
}
