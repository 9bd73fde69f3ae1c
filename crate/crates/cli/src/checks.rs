//! Numerical checks of the library's core guarantees, shared by `selftest`
//! and the acceptance suite. Oracles here are written independently of
//! the library kernels: brute-force group products, a hand-rolled DFT and
//! plain real MLPs with their own backprop and Adam.

use std::f64::consts::PI;
use std::fmt;

use csnet::algebra::extract_from;
use csnet::net::{InitConfig, Layer};
use csnet::par::Parallelism;
use csnet::train::{
    adam_step_network, grad, Checkpoint, Example, Input, LossKind, LossSpec, OptimizerState, SlotBatch,
};
use csnet::{Activation, AlgebraDescriptor, AlgebraElement, AlgebraTensor, Network, SymmetricGroup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    fn from_error(name: &str, e: impl fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn desc(s: &str) -> AlgebraDescriptor {
    s.parse().expect("valid descriptor literal")
}

fn random_element(d: &AlgebraDescriptor, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let data = (0..d.storage_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    AlgebraElement::new(d.clone(), data).expect("storage length matches")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn diff(a: &AlgebraElement, b: &AlgebraElement) -> f64 {
    max_diff(a.data(), b.data())
}

/// Permutations of `0..d` in lexicographic order.
fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

/// `(p ∘ q)(i) = p(q(i))`.
fn compose(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&i| p[i]).collect()
}

/// `Σ_{h∘k = g} a(h) b(k)` by enumerating every pair.
fn brute_group_product(perms: &[Vec<usize>], a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; perms.len()];
    for (h, ph) in perms.iter().enumerate() {
        for (k, pk) in perms.iter().enumerate() {
            let g = perms.iter().position(|p| *p == compose(ph, pk)).expect("closed under composition");
            out[g] += a[h] * b[k];
        }
    }
    out
}

/// Associativity, distributivity, unit, involution and C*-norm identities
/// on `samples` random triples per backend, plus brute-force group
/// products (bit-exact) for `S_2..S_4`.
pub fn algebra_axioms(samples: usize, seed: u64) -> Check {
    const NAME: &str = "algebra axioms";
    let backends = [
        "diagonal:4",
        "dense:4",
        "block:2+1+3",
        "circulant:5",
        "group:2",
        "group:3",
        "group:4",
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut note = |v: f64, what: &str, d: &AlgebraDescriptor| {
        if v > worst || v.is_nan() {
            worst = if v.is_nan() { f64::INFINITY } else { v };
            worst_at = format!("{what} on {d}");
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in backends {
        let d = desc(label);
        let one = AlgebraElement::identity(&d);
        let perms = (d.kind() == csnet::AlgebraKind::Group).then(|| permutations(d.order()));
        for _ in 0..samples {
            let (a, b, c) = (
                random_element(&d, &mut rng),
                random_element(&d, &mut rng),
                random_element(&d, &mut rng),
            );
            let lambda = rng.gen_range(-2.0..2.0);
            let run = || -> csnet::Result<Vec<(f64, &'static str)>> {
                let ab = a.mul(&b)?;
                let mut out = vec![
                    (diff(&ab.mul(&c)?, &a.mul(&b.mul(&c)?)?), "associativity"),
                    (diff(&a.mul(&b.add(&c)?)?, &ab.add(&a.mul(&c)?)?), "distributivity"),
                    (diff(&a.scale(lambda).mul(&b)?, &ab.scale(lambda)), "scalar compatibility"),
                    (diff(&one.mul(&a)?, &a).max(diff(&a.mul(&one)?, &a)), "unit"),
                    (diff(&ab.involution(), &b.involution().mul(&a.involution())?), "(ab)* = b*a*"),
                    (diff(&a.involution().involution(), &a), "a** = a"),
                    (diff(&a.add(&b)?.involution(), &a.involution().add(&b.involution())?), "additive involution"),
                ];
                let na = a.operator_norm();
                let cstar = (a.involution().mul(&a)?.operator_norm() - na * na).abs() / (na * na).max(1.0);
                out.push((cstar, "||a*a|| = ||a||²"));
                let sub = (ab.operator_norm() - na * b.operator_norm()).max(0.0);
                out.push((sub, "||ab|| ≤ ||a|| ||b||"));
                if let Some(perms) = &perms {
                    // summation order matches the oracle, so demand exact equality
                    let exact = ab.data() == &brute_group_product(perms, a.data(), b.data())[..];
                    out.push((if exact { 0.0 } else { f64::INFINITY }, "brute-force group product"));
                }
                Ok(out)
            };
            match run() {
                Ok(errs) => errs.into_iter().for_each(|(v, what)| note(v, what, &d)),
                Err(e) => return Check::from_error(NAME, e),
            }
        }
        if let Some(perms) = &perms {
            match SymmetricGroup::cached(d.order()) {
                Ok(g) if g.elements() == &perms[..] => {}
                _ => return Check::new(NAME, false, format!("{d}: element order is not lexicographic")),
            }
        }
    }
    let passed = worst <= 1e-9;
    Check::new(
        NAME,
        passed,
        format!("{samples} triples × {} backends, worst {worst:.2e} ({worst_at})", backends.len()),
    )
}

/// Plain real MLP: weights `[out][in]`, leaky ReLU on hidden layers.
#[derive(Debug, Clone)]
struct RealMlp {
    w: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
}

const LEAK: f64 = 0.01;

impl RealMlp {
    fn slice(net: &Network, j: usize) -> csnet::Result<Self> {
        let d = net.descriptor();
        let mut w = Vec::new();
        let mut b = Vec::new();
        for layer in net.layers() {
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            let mut wl = vec![vec![0.0; cols]; rows];
            for (k, row) in wl.iter_mut().enumerate() {
                for (l, v) in row.iter_mut().enumerate() {
                    *v = extract_from(d, layer.weights.at(k, l), j)?;
                }
            }
            w.push(wl);
            b.push(match &layer.bias {
                Some(t) => t.extract_submodel(j)?,
                None => vec![0.0; rows],
            });
        }
        Ok(Self { w, b })
    }

    /// Pre-activations and activations of every layer.
    fn forward_all(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = vec![x.to_vec()];
        let mut pres = Vec::new();
        for (i, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let h = acts.last().expect("input present");
            let z: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bk)| row.iter().zip(h).map(|(a, c)| a * c).sum::<f64>() + bk)
                .collect();
            let last = i + 1 == self.w.len();
            let a = z
                .iter()
                .map(|&v| if last || v >= 0.0 { v } else { LEAK * v })
                .collect();
            pres.push(z);
            acts.push(a);
        }
        (pres, acts)
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_all(x).1.pop().expect("output present")
    }

    /// Gradient of the batch mean of per-sample mean squared error, in the
    /// order of [`Self::params`].
    fn mse_grad(&self, data: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
        let mut gw: Vec<Vec<Vec<f64>>> = self.w.iter().map(|w| vec![vec![0.0; w[0].len()]; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.b.iter().map(|b| vec![0.0; b.len()]).collect();
        let scale = 1.0 / data.len() as f64;
        for (x, t) in data {
            let (pres, acts) = self.forward_all(x);
            let y = acts.last().expect("output");
            let n = y.len() as f64;
            let mut delta: Vec<f64> = y.iter().zip(t).map(|(p, q)| scale * 2.0 * (p - q) / n).collect();
            for i in (0..self.w.len()).rev() {
                if i + 1 < self.w.len() {
                    for (dv, z) in delta.iter_mut().zip(&pres[i]) {
                        if *z < 0.0 {
                            *dv *= LEAK;
                        }
                    }
                }
                for (k, dk) in delta.iter().enumerate() {
                    gb[i][k] += dk;
                    for (l, a) in acts[i].iter().enumerate() {
                        gw[i][k][l] += dk * a;
                    }
                }
                delta = (0..acts[i].len())
                    .map(|l| self.w[i].iter().zip(&delta).map(|(row, dk)| row[l] * dk).sum())
                    .collect();
            }
        }
        let mut out = Vec::new();
        for (w, b) in gw.iter().zip(&gb) {
            out.extend(w.iter().flatten());
            out.extend(b);
        }
        out
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend(w.iter().flatten());
            out.extend(b);
        }
        out
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter();
        for (w, b) in self.w.iter_mut().zip(&mut self.b) {
            w.iter_mut().flatten().chain(b.iter_mut()).for_each(|v| *v = *it.next().expect("length"));
        }
    }
}

/// Textbook Adam with bias correction.
struct RealAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl RealAdam {
    fn step(&mut self, p: &mut [f64], g: &[f64]) {
        self.t += 1;
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        for i in 0..p.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = self.m[i] / (1.0 - b1.powi(self.t));
            let vh = self.v[i] / (1.0 - b2.powi(self.t));
            p[i] -= self.lr * mh / (vh.sqrt() + eps);
        }
    }
}

fn randomize_params(net: &mut Network, rng: &mut ChaCha8Rng, scale: f64) {
    let p: Vec<f64> = net.flat_params().iter().map(|_| rng.gen_range(-scale..scale)).collect();
    net.set_flat_params(&p).expect("same length");
}

/// A diagonal network of depth `depth` and hidden width `width` versus
/// `d` independent real networks: forward outputs and `steps` Adam steps.
pub fn diagonal_equivalence(depth: usize, width: usize, d: usize, steps: usize, seed: u64) -> Check {
    const NAME: &str = "diagonal equals independent real networks";
    let run = || -> csnet::Result<(f64, f64)> {
        let alg = AlgebraDescriptor::diagonal(d)?;
        let (n_in, n_out) = (5, 3);
        let mut widths = vec![n_in];
        widths.extend(std::iter::repeat_n(width, depth - 1));
        widths.push(n_out);
        let mut net = InitConfig::new(alg.clone(), widths).seed(seed).build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let biased: Vec<f64> = net.flat_params().iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        net.set_flat_params(&biased)?;
        let data: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..d)
            .map(|_| {
                (0..8)
                    .map(|_| {
                        let x = (0..n_in).map(|_| rng.gen_range(-2.0..2.0)).collect();
                        let t = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        (x, t)
                    })
                    .collect()
            })
            .collect();
        let mut reals: Vec<RealMlp> = (0..d).map(|j| RealMlp::slice(&net, j)).collect::<csnet::Result<_>>()?;

        let mut forward_err = 0.0f64;
        for (j, real) in reals.iter().enumerate() {
            for (x, _) in &data[j] {
                let y = net.forward(&AlgebraTensor::embed_submodel(&alg, j, x)?)?.extract_submodel(j)?;
                forward_err = forward_err.max(max_diff(&y, &real.forward(x)));
            }
        }

        let examples: Vec<Vec<Example>> = data
            .iter()
            .map(|p| p.iter().map(|(x, t)| Example::new(Input::real(x.clone()), t.clone())).collect())
            .collect();
        let batch: Vec<SlotBatch<'_>> = examples
            .iter()
            .enumerate()
            .map(|(slot, e)| SlotBatch {
                slot,
                examples: e.iter().collect(),
            })
            .collect();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        let lr = 1e-2;
        let mut opt = OptimizerState::for_network(&net, lr);
        let mut adams: Vec<RealAdam> = reals
            .iter()
            .map(|r| {
                let n = r.params().len();
                RealAdam {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                    t: 0,
                    lr,
                }
            })
            .collect();
        for _ in 0..steps {
            let (_, g) = grad(&net, &batch, &spec, Parallelism::default())?;
            adam_step_network(&mut net, &g, &mut opt)?;
            for (j, real) in reals.iter_mut().enumerate() {
                let g = real.mse_grad(&data[j]);
                let mut p = real.params();
                adams[j].step(&mut p, &g);
                real.set_params(&p);
            }
        }
        let mut train_err = 0.0f64;
        for (j, real) in reals.iter().enumerate() {
            train_err = train_err.max(max_diff(&RealMlp::slice(&net, j)?.params(), &real.params()));
            for (x, _) in &data[j] {
                let y = net.forward(&AlgebraTensor::embed_submodel(&alg, j, x)?)?.extract_submodel(j)?;
                train_err = train_err.max(max_diff(&y, &real.forward(x)));
            }
        }
        Ok((forward_err, train_err))
    };
    match run() {
        Ok((f, t)) => Check::new(
            NAME,
            f <= 1e-9 && t <= 1e-9,
            format!("d={d} depth {depth} width {width}: forward {f:.2e}, after {steps} steps {t:.2e}"),
        ),
        Err(e) => Check::from_error(NAME, e),
    }
}

type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cadd(a: C, b: C) -> C {
    (a.0 + b.0, a.1 + b.1)
}

fn dft(a: &[f64]) -> Vec<C> {
    let d = a.len();
    (0..d)
        .map(|j| {
            a.iter().enumerate().fold((0.0, 0.0), |acc, (k, &v)| {
                let t = -2.0 * PI * (j * k) as f64 / d as f64;
                cadd(acc, (v * t.cos(), v * t.sin()))
            })
        })
        .collect()
}

fn cdist(a: C, b: C) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Circulant products diagonalise under the DFT, and a circulant network
/// with identity activations equals `d` complex networks, one per frequency.
pub fn circulant_dft(orders: &[usize], seed: u64) -> Check {
    const NAME: &str = "circulant equals Fourier-domain networks";
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &d in orders {
        let run = |rng: &mut ChaCha8Rng| -> csnet::Result<f64> {
            let alg = AlgebraDescriptor::circulant(d)?;
            let mut err = 0.0f64;
            for _ in 0..100 {
                let (a, b) = (random_element(&alg, rng), random_element(&alg, rng));
                let (fa, fb, fab) = (dft(a.data()), dft(b.data()), dft(a.mul(&b)?.data()));
                for j in 0..d {
                    err = err.max(cdist(fab[j], cmul(fa[j], fb[j])));
                }
            }
            let mut net = InitConfig::new(alg.clone(), vec![3, 4, 4, 2])
                .seed(seed + d as u64)
                .offdiag_scale(1.0)
                .hidden_activation(Activation::Identity)
                .build()?;
            randomize_params(&mut net, rng, 0.5);
            let mut x = AlgebraTensor::vector(&alg, 3);
            x.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let y = net.forward(&x)?;
            for j in 0..d {
                let mut h: Vec<C> = x.entries().map(|e| dft(e)[j]).collect();
                for layer in net.layers() {
                    let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
                    h = (0..rows)
                        .map(|k| {
                            let mut acc = layer.bias.as_ref().map_or((0.0, 0.0), |b| dft(b.entry(k))[j]);
                            for (l, hl) in h.iter().enumerate().take(cols) {
                                acc = cadd(acc, cmul(dft(layer.weights.at(k, l))[j], *hl));
                            }
                            acc
                        })
                        .collect();
                }
                for (k, hk) in h.iter().enumerate() {
                    err = err.max(cdist(dft(y.entry(k))[j], *hk));
                }
            }
            Ok(err)
        };
        match run(&mut rng) {
            Ok(e) => worst = worst.max(e),
            Err(e) => return Check::from_error(NAME, e),
        }
    }
    Check::new(NAME, worst <= 1e-8, format!("d ∈ {orders:?}, worst {worst:.2e}"))
}

/// Right translation `(x·h)(g) = x(g∘h)` computed from permutations.
fn translate(x: &AlgebraTensor, perms: &[Vec<usize>], h: usize) -> AlgebraTensor {
    let mut out = x.clone();
    let idx: Vec<usize> = perms
        .iter()
        .map(|g| perms.iter().position(|p| *p == compose(g, &perms[h])).expect("closed"))
        .collect();
    for i in 0..x.len() {
        let src = x.entry(i);
        for (o, &k) in out.entry_mut(i).iter_mut().zip(&idx) {
            *o = src[k];
        }
    }
    out
}

/// `S_3` networks commute with right translation, and the mean-over-group
/// readout of a lifted set is invariant to reordering the set.
pub fn group_equivariance(seeds: u64) -> Check {
    const NAME: &str = "S_3 equivariance and invariant readout";
    let run = || -> csnet::Result<(f64, f64)> {
        let alg = AlgebraDescriptor::group(3)?;
        let perms = permutations(3);
        let group = SymmetricGroup::cached(3)?;
        let (mut equi, mut inv) = (0.0f64, 0.0f64);
        for seed in 0..seeds {
            let net = InitConfig::new(alg.clone(), vec![6, 8, 8, 8, 4])
                .seed(seed)
                .offdiag_scale(1.0)
                .build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let mut x = AlgebraTensor::vector(&alg, 6);
            x.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let y = net.forward(&x)?;
            for h in 0..perms.len() {
                let lhs = net.forward(&translate(&x, &perms, h))?;
                equi = equi.max(lhs.max_abs_diff(&translate(&y, &perms, h)));
            }
            let z: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let readout = |set: &[Vec<f64>]| -> csnet::Result<Vec<f64>> {
                let elems = group.lift(set)?;
                let y = net.forward(&AlgebraTensor::from_elements(&[elems.len()], &elems)?)?;
                Ok(y.entries().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect())
            };
            let base = readout(&z)?;
            for p in &perms {
                let reordered: Vec<Vec<f64>> = p.iter().map(|&k| z[k].clone()).collect();
                inv = inv.max(max_diff(&readout(&reordered)?, &base));
            }
        }
        Ok((equi, inv))
    };
    match run() {
        Ok((e, i)) => Check::new(
            NAME,
            e <= 1e-9 && i <= 1e-9,
            format!("{seeds} four-layer nets: equivariance {e:.2e}, readout invariance {i:.2e}"),
        ),
        Err(e) => Check::from_error(NAME, e),
    }
}

fn small_batch_data(alg: &AlgebraDescriptor, real: bool, rng: &mut ChaCha8Rng) -> Vec<Vec<Example>> {
    let slots = alg.submodel_count().unwrap_or(1);
    (0..slots)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let input = if real {
                        Input::real((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    } else {
                        let mut t = AlgebraTensor::vector(alg, 4);
                        t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                        Input::tensor(t)
                    };
                    let target = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                    Example::new(input, target)
                })
                .collect()
        })
        .collect()
}

fn slot_batches(parts: &[Vec<Example>]) -> Vec<SlotBatch<'_>> {
    parts
        .iter()
        .enumerate()
        .map(|(slot, e)| SlotBatch {
            slot,
            examples: e.iter().collect(),
        })
        .collect()
}

/// Central finite differences against the analytic gradient on every
/// backend, for both real and algebra-valued inputs.
pub fn gradient_check(seed: u64) -> Check {
    const NAME: &str = "finite-difference gradients";
    let cases: [(&str, bool, LossKind); 9] = [
        ("diagonal:3", true, LossKind::MseDiagonal),
        ("dense:3", true, LossKind::MseDiagonal),
        ("dense:3", false, LossKind::CrossEntropyDiagonal),
        ("block:2+1", true, LossKind::HuberDiagonal),
        ("block:2+1", false, LossKind::MseDiagonal),
        ("circulant:4", false, LossKind::MseDiagonal),
        ("group:2", false, LossKind::CrossEntropyDiagonal),
        ("group:3", false, LossKind::MseDiagonal),
        ("diagonal:2", false, LossKind::HuberDiagonal),
    ];
    let mut worst = 0.0f64;
    let mut worst_at = "";
    let mut max_params = 0;
    for (label, real, kind) in cases {
        let mut run = || -> csnet::Result<f64> {
            let alg = desc(label);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = InitConfig::new(alg.clone(), vec![4, 6, 5, 3])
                .seed(seed)
                .offdiag_scale(1.0)
                .build()?;
            randomize_params(&mut net, &mut rng, 0.6);
            let parts = small_batch_data(&alg, real, &mut rng);
            let batch = slot_batches(&parts);
            let spec = LossSpec::new(kind);
            let (_, g) = grad(&net, &batch, &spec, Parallelism::Sequential)?;
            let p0 = net.flat_params();
            let h = 1e-6;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut probe = net.clone();
            for i in 0..p0.len() {
                let mut p = p0.clone();
                p[i] = p0[i] + h;
                probe.set_flat_params(&p)?;
                let up = grad(&probe, &batch, &spec, Parallelism::Sequential)?.0;
                p[i] = p0[i] - h;
                probe.set_flat_params(&p)?;
                let down = grad(&probe, &batch, &spec, Parallelism::Sequential)?.0;
                let fd = (up - down) / (2.0 * h);
                num += (g[i] - fd).powi(2);
                den += fd * fd;
            }
            max_params = max_params.max(p0.len());
            Ok(num.sqrt() / den.sqrt().max(1e-12))
        };
        match run() {
            Ok(e) if e > worst || e.is_nan() => {
                worst = if e.is_nan() { f64::INFINITY } else { e };
                worst_at = label;
            }
            Ok(_) => {}
            Err(e) => return Check::from_error(NAME, format!("{label}: {e}")),
        }
    }
    Check::new(
        NAME,
        worst < 1e-4 && max_params <= 2000,
        format!(
            "{} cases, ≤{max_params} parameters, worst relative error {worst:.2e} ({worst_at})",
            cases.len()
        ),
    )
}

fn relabel(net: &Network, to: &AlgebraDescriptor) -> csnet::Result<Network> {
    let retag = |t: &AlgebraTensor| AlgebraTensor::new(to.clone(), t.shape().to_vec(), t.data().to_vec());
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            Ok(Layer {
                weights: retag(&l.weights)?,
                bias: l.bias.as_ref().map(retag).transpose()?,
                activation: l.activation,
            })
        })
        .collect::<csnet::Result<Vec<_>>>()?;
    Network::from_layers(to.clone(), layers)
}

/// Block-diagonal networks with unit blocks equal diagonal ones and with a
/// single block equal dense ones, bit for bit, in forward passes,
/// gradients and a few Adam steps.
pub fn block_reduction(seed: u64) -> Check {
    const NAME: &str = "block-diagonal reductions";
    let pairs = [("diagonal:4", "block:1+1+1+1"), ("dense:3", "block:3")];
    for (from, to) in pairs {
        let run = || -> csnet::Result<bool> {
            let (a_desc, b_desc) = (desc(from), desc(to));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = InitConfig::new(a_desc.clone(), vec![4, 7, 6, 3])
                .seed(seed)
                .offdiag_scale(0.5)
                .build()?;
            randomize_params(&mut a, &mut rng, 0.5);
            let mut b = relabel(&a, &b_desc)?;
            let parts = small_batch_data(&a_desc, true, &mut rng);
            let batch = slot_batches(&parts);
            let spec = LossSpec::new(LossKind::MseDiagonal);
            let mut x = AlgebraTensor::vector(&a_desc, 4);
            x.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let xb = AlgebraTensor::new(b_desc.clone(), vec![4], x.data().to_vec())?;
            let mut same = a.forward(&x)?.data() == b.forward(&xb)?.data();
            let (mut oa, mut ob) = (OptimizerState::for_network(&a, 1e-2), OptimizerState::for_network(&b, 1e-2));
            for _ in 0..5 {
                let (la, ga) = grad(&a, &batch, &spec, Parallelism::default())?;
                let (lb, gb) = grad(&b, &batch, &spec, Parallelism::default())?;
                same &= la.to_bits() == lb.to_bits() && ga == gb;
                adam_step_network(&mut a, &ga, &mut oa)?;
                adam_step_network(&mut b, &gb, &mut ob)?;
            }
            Ok(same && a.flat_params() == b.flat_params())
        };
        match run() {
            Ok(true) => {}
            Ok(false) => return Check::new(NAME, false, format!("{from} and {to} differ")),
            Err(e) => return Check::from_error(NAME, e),
        }
    }
    Check::new(
        NAME,
        true,
        "unit blocks = diagonal and one block = dense, exactly (forward, gradients, 5 Adam steps)".into(),
    )
}

/// Checkpoints of every backend read back bit-exactly and re-encode to
/// the same bytes.
pub fn checkpoint_round_trip(seed: u64) -> Check {
    const NAME: &str = "checkpoint round trip";
    for label in ["diagonal:3", "dense:3", "block:2+2", "circulant:4", "group:3"] {
        let run = || -> csnet::Result<bool> {
            let alg = desc(label);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = InitConfig::new(alg, vec![3, 5, 2]).seed(seed).build()?;
            randomize_params(&mut net, &mut rng, 1.0);
            let mut opt = OptimizerState::for_network(&net, 1e-3);
            let g: Vec<f64> = (0..net.param_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            adam_step_network(&mut net, &g, &mut opt)?;
            let ck = Checkpoint {
                digest: [7; 32],
                epoch: 3,
                network: net,
                optimizer: Some(opt),
            };
            let mut bytes = Vec::new();
            ck.write_to(&mut bytes)?;
            let back = Checkpoint::read_from(&mut bytes.as_slice())?;
            let mut again = Vec::new();
            back.write_to(&mut again)?;
            let bits = |c: &Checkpoint| -> Vec<u64> { c.network.flat_params().iter().map(|v| v.to_bits()).collect() };
            let mut x = AlgebraTensor::vector(ck.network.descriptor(), 3);
            x.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let same_output = ck.network.forward(&x)?.data() == back.network.forward(&x)?.data();
            Ok(bytes == again && bits(&ck) == bits(&back) && back == ck && same_output)
        };
        match run() {
            Ok(true) => {}
            Ok(false) => return Check::new(NAME, false, format!("{label} changed on reload")),
            Err(e) => return Check::from_error(NAME, e),
        }
    }
    Check::new(NAME, true, "5 backends: bytes, parameters and forward outputs bit-exact".into())
}

/// Reduced-size versions of every check, for `csnet selftest`.
pub fn quick_suite() -> Vec<Check> {
    vec![
        algebra_axioms(100, 1),
        diagonal_equivalence(3, 8, 3, 10, 2),
        circulant_dft(&[2, 3, 8], 3),
        group_equivariance(2),
        gradient_check(4),
        block_reduction(5),
        checkpoint_round_trip(6),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_lexicographic() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn hand_dft() {
        let f = dft(&[1.0, 2.0, 3.0, 4.0]);
        assert!(cdist(f[0], (10.0, 0.0)) < 1e-12);
        assert!(cdist(f[1], (-2.0, 2.0)) < 1e-12);
        assert!(cdist(f[2], (-2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn real_mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = RealMlp {
            w: vec![vec![vec![0.0; 3]; 4], vec![vec![0.0; 4]; 2]],
            b: vec![vec![0.0; 4], vec![0.0; 2]],
        };
        let p: Vec<f64> = m.params().iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        m.set_params(&p);
        let data = vec![(vec![0.3, -0.7, 1.1], vec![0.2, -0.4]), (vec![-1.0, 0.5, 0.1], vec![1.0, 0.0])];
        let loss = |m: &RealMlp| -> f64 {
            data.iter()
                .map(|(x, t)| m.forward(x).iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 2.0)
                .sum::<f64>()
                / 2.0
        };
        let g = m.mse_grad(&data);
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] += 1e-6;
            let mut up = m.clone();
            up.set_params(&q);
            q[i] -= 2e-6;
            let mut down = m.clone();
            down.set_params(&q);
            let fd = (loss(&up) - loss(&down)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn quick_suite_passes() {
        for c in quick_suite() {
            assert!(c.passed, "{c}");
        }
    }
}
