//! Data-parallel helpers with a sequential fallback.
//!
//! Work is always split into the same fixed pieces and results are combined
//! in index order, so parallel and sequential execution produce bit-identical
//! output. Without the `parallel` feature every call runs sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel; output is in index order.
pub fn map_indexed<T, F>(mode: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon if n > 1 => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Applies `f` to each mutable chunk of `data` (chunk index, chunk).
pub fn for_each_chunk_mut<T, F>(mode: Parallelism, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon if data.len() > chunk => {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
        }
        _ => data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
    }
}

/// Splits `0..n` into at most `lanes` contiguous ranges of near-equal size.
/// The split depends only on `n` and `lanes`.
pub fn lanes(n: usize, lanes: usize) -> Vec<std::ops::Range<usize>> {
    let lanes = lanes.clamp(1, n.max(1));
    let base = n / lanes;
    let extra = n % lanes;
    let mut start = 0;
    (0..lanes)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .filter(|r| !r.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanes_cover_range() {
        for n in [0, 1, 5, 17, 64] {
            for k in [1, 3, 8] {
                let ls = lanes(n, k);
                let total: usize = ls.iter().map(|r| r.len()).sum();
                assert_eq!(total, n);
                for w in ls.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
            }
        }
    }

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            map_indexed(Parallelism::Sequential, 100, f),
            map_indexed(Parallelism::Rayon, 100, f)
        );
    }
}
