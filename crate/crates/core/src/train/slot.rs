//! Fast path for matrix backends fed with slot-embedded real inputs.
//!
//! Column `j` of every hidden element depends only on column `j` of the
//! input, so sub-model `j` runs a real network whose neuron states are the
//! `s`-vectors of column `j` restricted to the block of `j` (size `s`).
//! Repacking each layer's block into an `(N_out·s) × (N_in·s)` real matrix
//! turns a batch into plain GEMMs. Columns `l ≠ j` of the outputs (needed
//! by the off-diagonal penalty) see a zero input and are driven by the
//! biases alone; they are computed once per step and shared by every
//! sub-model of the block.

use super::data::{Input, SlotBatch};
use super::loss::{base_loss, LossSpec};
use crate::algebra::{AlgebraKind, Block};
use crate::error::{Error, Result};
use crate::net::{Activation, Network};
use crate::par::{self, Parallelism};

/// Columns per task; tasks are the unit of parallel work and of the
/// fixed-order gradient reduction.
const TASK_COLUMNS: usize = 128;

/// True when `net` and `batch` can use the fast path.
pub fn supports(net: &Network, batch: &[SlotBatch<'_>]) -> bool {
    matches!(
        net.descriptor().kind(),
        AlgebraKind::Diagonal | AlgebraKind::Dense | AlgebraKind::BlockDiagonal
    ) && batch
        .iter()
        .flat_map(|b| &b.examples)
        .all(|e| matches!(e.input, Input::Real(_)))
}

struct PackedLayer {
    n_in: usize,
    n_out: usize,
    /// Row-major `(n_out·s) × (n_in·s)`; empty for the first layer.
    w: Vec<f64>,
    /// `(n_out·s) × s`: entry `(k·s+m, c)` is bias row `o+m`, column `o+c`.
    b: Option<Vec<f64>>,
    act: Activation,
}

struct PackedBlock {
    block: Block,
    layers: Vec<PackedLayer>,
}

impl PackedBlock {
    fn new(net: &Network, block: Block) -> Self {
        let storage = net.descriptor().storage_len();
        let (s, so) = (block.size, block.storage_offset);
        let layers = net
            .layers()
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let (n_out, n_in) = (layer.weights.rows(), layer.weights.cols());
                let wd = layer.weights.data();
                let w = if i == 0 {
                    Vec::new()
                } else {
                    let cols = n_in * s;
                    let mut w = vec![0.0; n_out * s * cols];
                    for k in 0..n_out {
                        for l in 0..n_in {
                            let e = &wd[(k * n_in + l) * storage + so..];
                            for m in 0..s {
                                let row = (k * s + m) * cols + l * s;
                                w[row..row + s].copy_from_slice(&e[m * s..m * s + s]);
                            }
                        }
                    }
                    w
                };
                let b = layer.bias.as_ref().map(|b| {
                    let bd = b.data();
                    let mut out = vec![0.0; n_out * s * s];
                    for k in 0..n_out {
                        out[k * s * s..(k + 1) * s * s]
                            .copy_from_slice(&bd[k * storage + so..k * storage + so + s * s]);
                    }
                    out
                });
                PackedLayer {
                    n_in,
                    n_out,
                    w,
                    b,
                    act: layer.activation,
                }
            })
            .collect();
        Self { block, layers }
    }

    /// First-layer weights seen by column `c`: `(n_out·s) × n_in`, row-major.
    fn first_layer_column(&self, net: &Network, c: usize) -> Vec<f64> {
        let storage = net.descriptor().storage_len();
        let (s, so) = (self.block.size, self.block.storage_offset);
        let l0 = &self.layers[0];
        let wd = net.layers()[0].weights.data();
        let mut out = vec![0.0; l0.n_out * s * l0.n_in];
        for k in 0..l0.n_out {
            for m in 0..s {
                let row = &mut out[(k * s + m) * l0.n_in..(k * s + m + 1) * l0.n_in];
                for (l, v) in row.iter_mut().enumerate() {
                    *v = wd[(k * l0.n_in + l) * storage + so + m * s + c];
                }
            }
        }
        out
    }
}

impl PackedBlock {
    /// [`PackedBlock::first_layer_column`] for every local slot, in one
    /// sequential pass over the weights.
    fn first_layer_all(&self, net: &Network) -> Vec<Vec<f64>> {
        let storage = net.descriptor().storage_len();
        let (s, so) = (self.block.size, self.block.storage_offset);
        let l0 = &self.layers[0];
        let n0 = l0.n_in;
        let wd = net.layers()[0].weights.data();
        let mut out = vec![vec![0.0; l0.n_out * s * n0]; s];
        for k in 0..l0.n_out {
            for l in 0..n0 {
                let e = &wd[(k * n0 + l) * storage + so..];
                for m in 0..s {
                    let dst = (k * s + m) * n0 + l;
                    for (c, col) in out.iter_mut().enumerate() {
                        col[dst] = e[m * s + c];
                    }
                }
            }
        }
        out
    }

    /// Adds per-slot first-layer gradients (layout of
    /// [`PackedBlock::first_layer_column`]) into the flat gradient.
    fn scatter_first_layer(&self, storage: usize, w_off: usize, per_slot: &[Vec<f64>], grad: &mut [f64]) {
        let (s, so) = (self.block.size, self.block.storage_offset);
        let l0 = &self.layers[0];
        let n0 = l0.n_in;
        for k in 0..l0.n_out {
            for l in 0..n0 {
                let base = w_off + (k * n0 + l) * storage + so;
                for m in 0..s {
                    let src = (k * s + m) * n0 + l;
                    for (c, g) in per_slot.iter().enumerate() {
                        if !g.is_empty() {
                            grad[base + m * s + c] += g[src];
                        }
                    }
                }
            }
        }
    }
}

/// One column of a task: a sample of local slot `c`, or (without input)
/// the bias-driven column `c` read by the row penalties.
struct Column<'a> {
    c: usize,
    input: Option<&'a [f64]>,
    target: Option<&'a [f64]>,
    scale: f64,
}

/// One unit of work: up to [`TASK_COLUMNS`] columns of one block, ordered
/// slot by slot. Later layers share their weights across slots, so each
/// runs as a single GEMM over all columns.
struct Task<'a> {
    block: usize,
    cols: Vec<Column<'a>>,
    /// Multiplicity of every local slot in the batch, for bias columns.
    row_weights: Vec<usize>,
}

impl Task<'_> {
    /// Maximal runs `(start, end, c)` of input columns sharing a slot.
    fn input_runs(&self) -> Vec<(usize, usize, usize)> {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.cols.len() {
            let c = self.cols[i].c;
            let has = self.cols[i].input.is_some();
            let mut j = i + 1;
            while j < self.cols.len() && self.cols[j].c == c && self.cols[j].input.is_some() == has {
                j += 1;
            }
            if has {
                runs.push((i, j, c));
            }
            i = j;
        }
        runs
    }

    fn stacked_inputs(&self, (start, end): (usize, usize)) -> Vec<f64> {
        let mut x = Vec::new();
        for col in &self.cols[start..end] {
            x.extend_from_slice(col.input.expect("input column"));
        }
        x
    }
}

struct Forward {
    /// Post-activation outputs per layer, column-major `rows × columns`.
    h: Vec<Vec<f64>>,
    /// Pre-activation at the activated row of every neuron: `columns × n_out`.
    p: Vec<Vec<f64>>,
}

/// `C = A·B + beta·C` on strided views. Strides are in elements.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len());
    }
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: every index reached by the kernel is bounded by the asserts above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn forward_task(pb: &PackedBlock, first: &[Vec<f64>], task: &Task<'_>) -> Forward {
    let s = pb.block.size;
    let ncols = task.cols.len();
    let runs = task.input_runs();
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(pb.layers.len());
    let mut p = Vec::with_capacity(pb.layers.len());
    for (i, layer) in pb.layers.iter().enumerate() {
        let rows = layer.n_out * s;
        let mut z = vec![0.0; rows * ncols];
        if let Some(b) = &layer.b {
            for (col, meta) in z.chunks_exact_mut(rows).zip(&task.cols) {
                for (r, v) in col.iter_mut().enumerate() {
                    *v = b[r * s + meta.c];
                }
            }
        }
        if i == 0 {
            let n0 = layer.n_in;
            for &(start, end, c) in &runs {
                let x = task.stacked_inputs((start, end));
                gemm(
                    rows,
                    n0,
                    end - start,
                    &first[c],
                    (n0, 1),
                    &x,
                    (1, n0),
                    1.0,
                    &mut z[start * rows..end * rows],
                    (1, rows),
                );
            }
        } else {
            let prev = &h[i - 1];
            let r_in = layer.n_in * s;
            gemm(rows, r_in, ncols, &layer.w, (r_in, 1), prev, (1, r_in), 1.0, &mut z, (1, rows));
        }
        let mut pre = vec![0.0; ncols * layer.n_out];
        for ((col, pcol), meta) in z
            .chunks_exact_mut(rows)
            .zip(pre.chunks_exact_mut(layer.n_out))
            .zip(&task.cols)
        {
            for k in 0..layer.n_out {
                let v = &mut col[k * s + meta.c];
                pcol[k] = *v;
                *v = layer.act.apply(*v);
            }
        }
        h.push(z);
        p.push(pre);
    }
    Forward { h, p }
}

/// Loss of the task's columns and `∂L/∂y` (column-major like the output).
fn task_loss(pb: &PackedBlock, task: &Task<'_>, fwd: &Forward, spec: &LossSpec) -> (f64, Vec<f64>) {
    let s = pb.block.size;
    let n_out = pb.layers.last().expect("nonempty").n_out;
    let rows = n_out * s;
    let y = fwd.h.last().expect("nonempty");
    let mut dy = vec![0.0; y.len()];
    let mut total = 0.0;
    let w = spec.offdiag_weight;
    let mut pred = vec![0.0; n_out];
    let mut g = vec![0.0; n_out];
    for (idx, col) in task.cols.iter().enumerate() {
        let yc = &y[idx * rows..(idx + 1) * rows];
        let dc = &mut dy[idx * rows..(idx + 1) * rows];
        let c = col.c;
        let Some(target) = col.target else {
            for (jl, &mult) in task.row_weights.iter().enumerate() {
                if mult == 0 || jl == c {
                    continue;
                }
                let m = mult as f64;
                for k in 0..n_out {
                    let v = yc[k * s + jl];
                    total += m * w * v * v;
                    dc[k * s + jl] += m * 2.0 * w * v;
                }
            }
            continue;
        };
        for k in 0..n_out {
            pred[k] = yc[k * s + c];
        }
        g.fill(0.0);
        total += col.scale * base_loss(spec.kind, &pred, target, col.scale, Some(&mut g));
        for k in 0..n_out {
            dc[k * s + c] += g[k];
        }
        if w > 0.0 && s > 1 {
            let mut pen = 0.0;
            for k in 0..n_out {
                for m in (0..s).filter(|&m| m != c) {
                    let v = yc[k * s + m];
                    pen += v * v;
                    dc[k * s + m] += col.scale * 2.0 * w * v;
                }
            }
            total += col.scale * w * pen;
        }
    }
    (total, dy)
}

struct TaskGrad {
    /// First-layer gradient per input run: local slot and the
    /// `(n_out·s) × n_in` row-major gradient of the weights it reads.
    dw_first: Vec<(usize, Vec<f64>)>,
    /// Later layers: packed `(n_out·s) × (n_in·s)`, row-major.
    dw: Vec<Vec<f64>>,
    /// Per layer, packed like the bias: `(n_out·s) × s`.
    db: Vec<Vec<f64>>,
}

fn backward_task(pb: &PackedBlock, task: &Task<'_>, fwd: &Forward, dy: Vec<f64>) -> TaskGrad {
    let s = pb.block.size;
    let ncols = task.cols.len();
    let depth = pb.layers.len();
    let mut dw = vec![Vec::new(); depth];
    let mut db = vec![Vec::new(); depth];
    let mut dw_first = Vec::new();
    let mut upstream = dy;
    for i in (0..depth).rev() {
        let layer = &pb.layers[i];
        let rows = layer.n_out * s;
        let mut dz = upstream;
        if layer.act != Activation::Identity {
            for ((col, pcol), meta) in dz
                .chunks_exact_mut(rows)
                .zip(fwd.p[i].chunks_exact(layer.n_out))
                .zip(&task.cols)
            {
                for k in 0..layer.n_out {
                    col[k * s + meta.c] *= layer.act.derivative(pcol[k]);
                }
            }
        }
        if layer.b.is_some() {
            let mut g = vec![0.0; rows * s];
            for (col, meta) in dz.chunks_exact(rows).zip(&task.cols) {
                for (r, v) in col.iter().enumerate() {
                    g[r * s + meta.c] += v;
                }
            }
            db[i] = g;
        }
        if i == 0 {
            let n0 = layer.n_in;
            for (start, end, c) in task.input_runs() {
                let x = task.stacked_inputs((start, end));
                let mut g = vec![0.0; rows * n0];
                gemm(
                    rows,
                    end - start,
                    n0,
                    &dz[start * rows..end * rows],
                    (1, rows),
                    &x,
                    (n0, 1),
                    0.0,
                    &mut g,
                    (n0, 1),
                );
                dw_first.push((c, g));
            }
            break;
        }
        let r_in = layer.n_in * s;
        let prev = &fwd.h[i - 1];
        let mut g = vec![0.0; rows * r_in];
        gemm(rows, ncols, r_in, &dz, (1, rows), prev, (r_in, 1), 0.0, &mut g, (r_in, 1));
        dw[i] = g;
        let mut dh = vec![0.0; r_in * ncols];
        gemm(r_in, rows, ncols, &layer.w, (1, r_in), &dz, (1, rows), 0.0, &mut dh, (1, r_in));
        upstream = dh;
    }
    TaskGrad { dw_first, dw, db }
}

fn build_tasks<'a>(net: &Network, blocks: &[Block], batch: &[SlotBatch<'a>], spec: &LossSpec) -> Result<Vec<Task<'a>>> {
    let desc = net.descriptor();
    let d = desc.order();
    let mut present = vec![0usize; d];
    let mut per_block: Vec<Vec<Column<'a>>> = blocks.iter().map(|_| Vec::new()).collect();
    let mut slots: Vec<&SlotBatch<'a>> = batch.iter().filter(|b| !b.examples.is_empty()).collect();
    for b in &slots {
        if b.slot >= d {
            return Err(Error::SubmodelOutOfRange { index: b.slot, count: d });
        }
    }
    slots.sort_by_key(|b| b.slot);
    for b in slots {
        present[b.slot] += 1;
        let bi = blocks
            .iter()
            .position(|bl| b.slot >= bl.offset && b.slot < bl.offset + bl.size)
            .expect("slot inside a block");
        let scale = 1.0 / b.examples.len() as f64;
        for e in &b.examples {
            let Input::Real(v) = &e.input else {
                return Err(Error::Unsupported(desc.kind()));
            };
            per_block[bi].push(Column {
                c: b.slot - blocks[bi].offset,
                input: Some(&v[..]),
                target: Some(&e.target[..]),
                scale,
            });
        }
    }
    let mut tasks = Vec::new();
    for (bi, (bl, mut cols)) in blocks.iter().zip(per_block).enumerate() {
        let mult = present[bl.offset..bl.offset + bl.size].to_vec();
        if spec.offdiag_weight > 0.0 && bl.size > 1 {
            for c in 0..bl.size {
                if mult.iter().enumerate().any(|(jl, &m)| jl != c && m > 0) {
                    cols.push(Column {
                        c,
                        input: None,
                        target: None,
                        scale: 1.0,
                    });
                }
            }
        }
        let mut rest = cols.into_iter().peekable();
        while rest.peek().is_some() {
            tasks.push(Task {
                block: bi,
                cols: rest.by_ref().take(TASK_COLUMNS).collect(),
                row_weights: mult.clone(),
            });
        }
    }
    Ok(tasks)
}

/// Loss and gradient, same convention as [`super::grad_generic`].
pub fn grad_slot(
    net: &Network,
    batch: &[SlotBatch<'_>],
    spec: &LossSpec,
    mode: Parallelism,
) -> Result<(f64, Vec<f64>)> {
    if !supports(net, batch) {
        return Err(Error::Unsupported(net.descriptor().kind()));
    }
    let desc = net.descriptor();
    let blocks = desc.blocks();
    let tasks = build_tasks(net, &blocks, batch, spec)?;
    if tasks.iter().all(|t| t.cols.iter().all(|c| c.input.is_none())) {
        return Err(Error::Dataset("empty batch".into()));
    }
    let packed: Vec<PackedBlock> = blocks.iter().map(|&b| PackedBlock::new(net, b)).collect();
    let firsts: Vec<Vec<Vec<f64>>> = packed.iter().map(|pb| pb.first_layer_all(net)).collect();
    let results = par::map_indexed(mode, tasks.len(), |t| {
        let task = &tasks[t];
        let pb = &packed[task.block];
        let fwd = forward_task(pb, &firsts[task.block], task);
        let (loss, dy) = task_loss(pb, task, &fwd, spec);
        (loss, backward_task(pb, task, &fwd, dy))
    });

    let storage = desc.storage_len();
    let offsets = net.param_offsets();
    let mut grad = vec![0.0; net.param_len()];
    let mut total = 0.0;
    // later layers and biases are summed per block in packed layout, then
    // scattered once
    let mut packed_dw: Vec<Vec<Vec<f64>>> = packed
        .iter()
        .map(|pb| pb.layers.iter().map(|l| vec![0.0; l.w.len()]).collect())
        .collect();
    let mut packed_db: Vec<Vec<Vec<f64>>> = packed
        .iter()
        .map(|pb| pb.layers.iter().map(|l| vec![0.0; l.b.as_ref().map_or(0, Vec::len)]).collect())
        .collect();
    let mut first_dw: Vec<Vec<Vec<f64>>> = packed.iter().map(|pb| vec![Vec::new(); pb.block.size]).collect();
    for (task, (loss, tg)) in tasks.iter().zip(results) {
        total += loss;
        let pb = &packed[task.block];
        for (c, dw) in tg.dw_first {
            let acc = &mut first_dw[task.block][c];
            if acc.is_empty() {
                *acc = dw;
            } else {
                acc.iter_mut().zip(&dw).for_each(|(a, v)| *a += v);
            }
        }
        for i in 0..pb.layers.len() {
            for (a, v) in packed_dw[task.block][i].iter_mut().zip(&tg.dw[i]) {
                *a += v;
            }
            for (a, v) in packed_db[task.block][i].iter_mut().zip(&tg.db[i]) {
                *a += v;
            }
        }
    }
    for (((pb, dws), dbs), fdw) in packed.iter().zip(&packed_dw).zip(&packed_db).zip(&first_dw) {
        pb.scatter_first_layer(storage, offsets[0].0, fdw, &mut grad);
        let (s, so) = (pb.block.size, pb.block.storage_offset);
        for (i, layer) in pb.layers.iter().enumerate() {
            let (w_off, b_off) = offsets[i];
            if i > 0 {
                let dw = &dws[i];
                let r_in = layer.n_in * s;
                for k in 0..layer.n_out {
                    for l in 0..layer.n_in {
                        let base = w_off + (k * layer.n_in + l) * storage + so;
                        for m in 0..s {
                            let src = &dw[(k * s + m) * r_in + l * s..(k * s + m) * r_in + l * s + s];
                            for (g, v) in grad[base + m * s..base + m * s + s].iter_mut().zip(src) {
                                *g += v;
                            }
                        }
                    }
                }
            }
            if let Some(b_off) = b_off {
                for k in 0..layer.n_out {
                    let src = &dbs[i][k * s * s..(k + 1) * s * s];
                    let base = b_off + k * storage + so;
                    for (g, v) in grad[base..base + s * s].iter_mut().zip(src) {
                        *g += v;
                    }
                }
            }
        }
    }
    Ok((total, grad))
}

/// Slot-`slot` outputs of the network for real inputs embedded on that slot.
pub fn predict_slot(
    net: &Network,
    inputs: &[&[f64]],
    slot: usize,
    mode: Parallelism,
) -> Result<Vec<Vec<f64>>> {
    let desc = net.descriptor();
    if !matches!(
        desc.kind(),
        AlgebraKind::Diagonal | AlgebraKind::Dense | AlgebraKind::BlockDiagonal
    ) {
        return inputs
            .iter()
            .map(|x| {
                net.forward(&crate::net::AlgebraTensor::embed_submodel(desc, slot, x)?)?
                    .extract_submodel(slot)
            })
            .collect();
    }
    let n0 = net.widths()[0];
    if let Some(bad) = inputs.iter().find(|x| x.len() != n0) {
        return Err(Error::ShapeMismatch {
            expected: format!("input of length {n0}"),
            found: format!("{}", bad.len()),
        });
    }
    let block = desc
        .block_of(slot)
        .ok_or(Error::SubmodelOutOfRange { index: slot, count: desc.order() })?;
    let pb = PackedBlock::new(net, block);
    let local = slot - block.offset;
    let mut first = vec![Vec::new(); block.size];
    first[local] = pb.first_layer_column(net, local);
    let chunks: Vec<&[&[f64]]> = inputs.chunks(TASK_COLUMNS).collect();
    let outs = par::map_indexed(mode, chunks.len(), |t| {
        let task = Task {
            block: 0,
            cols: chunks[t]
                .iter()
                .map(|&x| Column {
                    c: local,
                    input: Some(x),
                    target: None,
                    scale: 1.0,
                })
                .collect(),
            row_weights: Vec::new(),
        };
        let fwd = forward_task(&pb, &first, &task);
        let y = fwd.h.last().expect("nonempty");
        let s = block.size;
        let rows = y.len() / task.cols.len();
        y.chunks_exact(rows)
            .map(|col| (0..rows / s).map(|k| col[k * s + local]).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    });
    Ok(outs.into_iter().flatten().collect())
}
