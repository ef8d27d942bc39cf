//! Uniform parameter sweeps, evaluated sequentially or on the rayon pool.

use serde::Serialize;

use crate::error::{invalid, Result};

/// How independent sweep points are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel on the global rayon pool. Falls back to sequential
    /// evaluation when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    /// Applies `f` to every item, preserving input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => parallel_map(items, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Closed interval sampled at `points` uniformly spaced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Range {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(invalid("range", "bounds must be finite"));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => {
                let step = (self.hi - self.lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.hi } else { self.lo + step * i as f64 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    /// `NaN` where the wrapped operation failed, e.g. on a resolvent pole.
    pub y: f64,
}

/// Evaluates `f` over `range`. Per-point errors are logged and recorded as
/// `NaN` rather than aborting the sweep.
pub fn sweep<F>(range: Range, exec: Execution, f: F) -> Vec<SweepPoint>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let xs = range.values();
    exec.map(&xs, |&x| {
        let y = match f(x) {
            Ok(y) => y,
            Err(e) => {
                log::debug!("sweep point {x} failed: {e}");
                f64::NAN
            }
        };
        SweepPoint { x, y }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn empty_range_is_empty() {
        let r = Range::new(0.0, 1.0, 0).unwrap();
        assert!(sweep(r, Execution::Sequential, Ok).is_empty());
    }

    #[test]
    fn endpoints_are_exact() {
        let v = Range::new(0.2, 1.0, 7).unwrap().values();
        assert_eq!(v.first(), Some(&0.2));
        assert_eq!(v.last(), Some(&1.0));
        assert_eq!(Range::new(3.0, 4.0, 1).unwrap().values(), vec![3.0]);
    }

    #[test]
    fn errors_become_nan() {
        let r = Range::new(-1.0, 1.0, 3).unwrap();
        let pts = sweep(r, Execution::Sequential, |x| {
            if x == 0.0 {
                Err(Error::ResolventPole(x))
            } else {
                Ok(x)
            }
        });
        assert!(pts[1].y.is_nan());
        assert_eq!(pts[2].y, 1.0);
    }

    #[test]
    fn parallel_matches_sequential() {
        let r = Range::new(0.0, 10.0, 1001).unwrap();
        let f = |x: f64| Ok((x * 1.3).sin() * x.exp().ln_1p());
        let a = sweep(r, Execution::Sequential, f);
        let b = sweep(r, Execution::Parallel, f);
        assert_eq!(a, b);
    }
}
