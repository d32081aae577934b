//! Scalar abstraction shared by the numeric parts of the crate.
//!
//! Priority expressions, embeddings, similarity, scores and summary
//! statistics are all written against [`Real`], so the same code runs in
//! `f64` (the default everywhere) or `f32`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A floating point scalar usable throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`. Values out of range saturate to infinity,
    /// which callers treat as non-finite.
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).unwrap_or_else(Self::infinity)
    }

    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).unwrap_or_else(Self::infinity)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + FromStr
        + Display
        + Debug
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Descending order on reals with NaN sorted last.
pub(crate) fn desc_nan_last<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => b.partial_cmp(&a).unwrap_or(Ordering::Equal),
    }
}
