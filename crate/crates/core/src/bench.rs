//! Forward-pass timing and parameter storage per backend.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::AlgebraDescriptor;
use crate::error::{Error, Result};
use crate::net::{AlgebraTensor, InitConfig, Network};
use crate::par::Parallelism;

pub const WARMUP: usize = 3;
pub const CSV_HEADER: &str = "backend,d,width,median_ns,min_ns,param_bytes";

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub descriptor: AlgebraDescriptor,
    /// Layer widths, input first.
    pub widths: Vec<usize>,
    pub batch: usize,
    pub repetitions: usize,
}

impl BenchCase {
    /// `depth` square layers of `width`, 8 inputs per timed forward, 5 reps.
    pub fn square(descriptor: AlgebraDescriptor, width: usize, depth: usize) -> Self {
        Self {
            descriptor,
            widths: vec![width; depth + 1],
            batch: 8,
            repetitions: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub backend: String,
    pub d: usize,
    pub width: usize,
    pub median_ns: u128,
    pub min_ns: u128,
    pub param_bytes: usize,
}

impl BenchResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.backend, self.d, self.width, self.median_ns, self.min_ns, self.param_bytes
        )
    }
}

pub fn to_csv(results: &[BenchResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn bench_network(case: &BenchCase) -> Result<Network> {
    InitConfig::new(case.descriptor.clone(), case.widths.clone()).seed(1).build()
}

pub fn bench_inputs(case: &BenchCase) -> Vec<AlgebraTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = case.widths[0];
    (0..case.batch)
        .map(|_| {
            let mut x = AlgebraTensor::vector(&case.descriptor, n);
            x.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            x
        })
        .collect()
}

/// Times `repetitions` forward passes over the batch after [`WARMUP`]
/// untimed ones.
pub fn bench_forward(case: &BenchCase, mode: Parallelism) -> Result<BenchResult> {
    if case.repetitions < 3 || case.batch == 0 {
        return Err(Error::InvalidNetwork("need ≥3 repetitions and a non-empty batch".into()));
    }
    let net = bench_network(case)?;
    let xs = bench_inputs(case);
    for _ in 0..WARMUP {
        std::hint::black_box(net.forward_batch(&xs, mode)?);
    }
    let mut times = Vec::with_capacity(case.repetitions);
    for _ in 0..case.repetitions {
        let t = Instant::now();
        std::hint::black_box(net.forward_batch(&xs, mode)?);
        times.push(t.elapsed().as_nanos());
    }
    times.sort_unstable();
    Ok(BenchResult {
        backend: format!("{:?}", case.descriptor.kind()).to_lowercase(),
        d: case.descriptor.order(),
        width: case.widths.iter().copied().max().unwrap_or(0),
        median_ns: times[times.len() / 2],
        min_ns: times[0],
        param_bytes: net.param_bytes(),
    })
}

/// The default sweep: dense and diagonal at d = 2, 4, 8, 16, group at
/// d = 2, 3, 4, circulant at d = 2, 4, 8, 16.
pub fn default_cases(width: usize, depth: usize) -> Result<Vec<BenchCase>> {
    let mut cases = Vec::new();
    for d in [2, 4, 8, 16] {
        cases.push(BenchCase::square(AlgebraDescriptor::diagonal(d)?, width, depth));
        cases.push(BenchCase::square(AlgebraDescriptor::dense(d)?, width, depth));
        cases.push(BenchCase::square(AlgebraDescriptor::circulant(d)?, width, depth));
    }
    for d in [2, 3, 4] {
        cases.push(BenchCase::square(AlgebraDescriptor::group(d)?, width, depth));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes(desc: AlgebraDescriptor) -> usize {
        bench_network(&BenchCase::square(desc, 6, 2)).unwrap().param_bytes()
    }

    #[test]
    fn dense_storage_is_d_squared() {
        for d in [2, 3, 5, 8] {
            let diag = bytes(AlgebraDescriptor::diagonal(d).unwrap());
            let dense = bytes(AlgebraDescriptor::dense(d).unwrap());
            assert_eq!(dense, d * d * (diag / d));
            assert_eq!(diag, 8 * d * (2 * 36 + 2 * 6));
        }
    }

    #[test]
    fn group_storage_scales_factorially() {
        let per_function = 8 * 2 * 36;
        for (d, fact) in [(2, 2), (3, 6), (4, 24)] {
            assert_eq!(bytes(AlgebraDescriptor::group(d).unwrap()), fact * per_function);
        }
    }

    #[test]
    fn report_row_and_validation() {
        let case = BenchCase::square(AlgebraDescriptor::dense(2).unwrap(), 4, 1);
        let r = bench_forward(&case, Parallelism::Sequential).unwrap();
        assert!(r.min_ns <= r.median_ns);
        assert_eq!(r.backend, "dense");
        assert_eq!(r.param_bytes, 8 * 4 * (16 + 4));
        assert!(to_csv(&[r]).starts_with(CSV_HEADER));
        let bad = BenchCase {
            repetitions: 2,
            ..case
        };
        assert!(bench_forward(&bad, Parallelism::Sequential).is_err());
    }
}
