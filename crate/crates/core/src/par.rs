//! Data-parallel building blocks with a sequential fallback.
//!
//! Everything here maps an index range through a pure function and returns
//! the results **in index order**. Reductions downstream always fold the
//! ordered vector sequentially, so results are bit-identical whether the
//! `parallel` feature is enabled, disabled, or run on any number of worker
//! threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `0..len` through `f`, in parallel when the `parallel` feature is on.
/// The output vector is ordered by index regardless of scheduling.
pub fn map_ordered<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Fallible variant of [`map_ordered`]; the first error aborts the map.
pub fn try_map_ordered<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sums `f(i)` over `0..len` with a fixed-order final reduction.
///
/// Work is chunked; each chunk is summed sequentially and chunk sums are
/// folded in chunk order, so the result does not depend on thread count.
pub fn sum_ordered<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    const CHUNK: usize = 1024;
    let chunks = len.div_ceil(CHUNK);
    let partials = map_ordered(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_ordered_preserves_index_order() {
        let v = map_ordered(1000, |i| i * i);
        for (i, x) in v.iter().enumerate() {
            assert_eq!(*x, i * i);
        }
    }

    #[test]
    fn sum_ordered_matches_serial_fold() {
        let data: Vec<f64> = (0..5000).map(|i| (i as f64).sin()).collect();
        let par = sum_ordered(data.len(), |i| data[i]);
        let mut chunked = 0.0;
        for chunk in data.chunks(1024) {
            chunked += chunk.iter().sum::<f64>();
        }
        assert_eq!(par.to_bits(), chunked.to_bits());
    }

    #[test]
    fn try_map_ordered_propagates_error() {
        let r: Result<Vec<usize>, String> =
            try_map_ordered(10, |i| if i == 7 { Err("boom".into()) } else { Ok(i) });
        assert!(r.is_err());
    }
}
