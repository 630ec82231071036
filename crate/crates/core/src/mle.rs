//! Binomial likelihood of a gate set and its maximization.
//!
//! Parameters are flattened as `rho` (d^2), then `E` (d^2), then every gate
//! in label order, each row-major (d^4 entries). Probabilities are clamped to
//! `[floor, 1 - floor]` inside the likelihood so it is finite for any gate
//! set, including non-positive ones.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Counts, DataSet};
use crate::error::{GstError, Result};
use crate::model::{EffectVector, GateSet, Sequence, StateVector, SuperOperator};
use crate::optimize::{bfgs, BfgsOptions};

pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Sequences per parallel work unit. Fixed so sums are reproducible.
const CHUNK: usize = 32;
const FEASIBILITY_ESCALATIONS: usize = 8;
const INITIAL_PENALTY: f64 = 1e2;
const FEASIBILITY_MARGIN: f64 = 1e-4;

/// Flat parameter layout for gate sets with fixed dimension and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    dim: usize,
    labels: Vec<String>,
}

impl ParameterLayout {
    pub fn of(gs: &GateSet) -> Self {
        ParameterLayout {
            dim: gs.dim(),
            labels: gs.labels(),
        }
    }

    pub fn len(&self) -> usize {
        let n = self.dim * self.dim;
        2 * n + self.labels.len() * n * n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn hs(&self) -> usize {
        self.dim * self.dim
    }

    pub fn gate_offset(&self, k: usize) -> usize {
        let n = self.hs();
        2 * n + k * n * n
    }

    pub fn flatten(&self, gs: &GateSet) -> Result<DVector<f64>> {
        if gs.dim() != self.dim || gs.labels() != self.labels {
            return Err(GstError::LabelMismatch);
        }
        let mut out = Vec::with_capacity(self.len());
        out.extend(gs.rho().0.iter());
        out.extend(gs.effect().0.iter());
        for g in gs.gates().values() {
            out.extend(g.0.transpose().iter());
        }
        Ok(DVector::from_vec(out))
    }

    pub fn unflatten(&self, x: &DVector<f64>) -> Result<GateSet> {
        if x.len() != self.len() {
            return Err(GstError::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        let n = self.hs();
        let rho = StateVector(DVector::from_column_slice(&x.as_slice()[..n]));
        let effect = EffectVector(DVector::from_column_slice(&x.as_slice()[n..2 * n]));
        let gates = self
            .labels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let o = self.gate_offset(k);
                let m = nalgebra::DMatrix::from_row_slice(n, n, &x.as_slice()[o..o + n * n]);
                (l.clone(), SuperOperator(m))
            })
            .collect();
        GateSet::new(self.dim, rho, effect, gates)
    }
}

/// A dataset with sequences resolved to gate indices.
struct Compiled {
    layout: ParameterLayout,
    sequences: Vec<Vec<usize>>,
    counts: Vec<Counts>,
}

impl Compiled {
    fn new(gs: &GateSet, ds: &DataSet) -> Result<Self> {
        let mut sequences = Vec::with_capacity(ds.len());
        let mut counts = Vec::with_capacity(ds.len());
        for (key, c) in ds.iter() {
            sequences.push(gs.compile(&Sequence::from_key(key))?);
            counts.push(*c);
        }
        Ok(Compiled {
            layout: ParameterLayout::of(gs),
            sequences,
            counts,
        })
    }

    fn probability(&self, x: &[f64], seq: &[usize], buf: &mut [Vec<f64>; 2]) -> f64 {
        let n = self.layout.hs();
        let [v, w] = buf;
        v.copy_from_slice(&x[..n]);
        for &k in seq {
            let g = &x[self.layout.gate_offset(k)..];
            for (a, wa) in w.iter_mut().enumerate() {
                *wa = (0..n).map(|b| g[a * n + b] * v[b]).sum();
            }
            std::mem::swap(v, w);
        }
        (0..n).map(|a| x[n + a] * v[a]).sum()
    }

    /// Sum of `term(p_s, counts_s)` over sequences together with its
    /// gradient. `term` returns `(value, d value / d p)`.
    fn evaluate<T>(&self, x: &[f64], term: T, with_grad: bool) -> (f64, Vec<f64>)
    where
        T: Fn(f64, &Counts) -> (f64, f64) + Sync,
    {
        let n = self.layout.hs();
        let len = self.layout.len();
        let partials: Vec<(f64, Vec<f64>)> = (0..self.sequences.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut value = 0.0;
                let mut grad = if with_grad {
                    vec![0.0; len]
                } else {
                    Vec::new()
                };
                let mut forward: Vec<Vec<f64>> = Vec::new();
                let mut buf = [vec![0.0; n], vec![0.0; n]];
                for &i in chunk {
                    let seq = &self.sequences[i];
                    if !with_grad {
                        let p = self.probability(x, seq, &mut buf);
                        value += term(p, &self.counts[i]).0;
                        continue;
                    }
                    // forward[t] = G_{s_t} ... G_{s_1} rho
                    forward.resize(seq.len() + 1, vec![0.0; n]);
                    forward[0].copy_from_slice(&x[..n]);
                    for (t, &k) in seq.iter().enumerate() {
                        let g = &x[self.layout.gate_offset(k)..];
                        let (head, tail) = forward.split_at_mut(t + 1);
                        for a in 0..n {
                            tail[0][a] = (0..n).map(|b| g[a * n + b] * head[t][b]).sum();
                        }
                    }
                    let last = &forward[seq.len()];
                    let p: f64 = (0..n).map(|a| x[n + a] * last[a]).sum();
                    let (v, dp) = term(p, &self.counts[i]);
                    value += v;
                    if dp == 0.0 {
                        continue;
                    }
                    for a in 0..n {
                        grad[n + a] += dp * last[a];
                    }
                    // Walk back with u = E G_{s_L} ... G_{s_{t+1}}.
                    let mut u = x[n..2 * n].to_vec();
                    let mut u_next = vec![0.0; n];
                    for t in (0..seq.len()).rev() {
                        let o = self.layout.gate_offset(seq[t]);
                        let before = &forward[t];
                        for a in 0..n {
                            let ua = dp * u[a];
                            for b in 0..n {
                                grad[o + a * n + b] += ua * before[b];
                            }
                        }
                        let g = &x[o..];
                        for (b, nb) in u_next.iter_mut().enumerate() {
                            *nb = (0..n).map(|a| u[a] * g[a * n + b]).sum();
                        }
                        std::mem::swap(&mut u, &mut u_next);
                    }
                    for a in 0..n {
                        grad[a] += dp * u[a];
                    }
                }
                (value, grad)
            })
            .collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; if with_grad { len } else { 0 }];
        for (v, g) in partials {
            value += v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        (value, grad)
    }

    fn clip_events(&self, x: &[f64], floor: f64) -> usize {
        let mut buf = [vec![0.0; self.layout.hs()], vec![0.0; self.layout.hs()]];
        self.sequences
            .iter()
            .filter(|s| {
                let p = self.probability(x, s, &mut buf);
                !(floor..=1.0 - floor).contains(&p)
            })
            .count()
    }
}

fn check_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor < 0.5 {
        Ok(())
    } else {
        Err(GstError::InvalidArgument(format!(
            "floor {floor} must lie in (0, 0.5)"
        )))
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn nll_term(floor: f64) -> impl Fn(f64, &Counts) -> (f64, f64) + Sync {
    move |p, c| {
        let (np, nm) = (c.n_plus as f64, c.n_minus() as f64);
        let q = p.clamp(floor, 1.0 - floor);
        let value = -(xlogy(np, q) + xlogy(nm, 1.0 - q));
        let slope = if q == p {
            -(np / q - nm / (1.0 - q))
        } else {
            0.0
        };
        (value, slope)
    }
}

/// `-sum_s [n_s ln p_s + (N_s - n_s) ln(1 - p_s)]` with clamped `p_s`,
/// and the number of sequences whose probability was clamped.
pub fn neg_log_likelihood_with_clips(
    gs: &GateSet,
    ds: &DataSet,
    floor: f64,
) -> Result<(f64, usize)> {
    check_floor(floor)?;
    let c = Compiled::new(gs, ds)?;
    let x = c.layout.flatten(gs)?;
    let (v, _) = c.evaluate(x.as_slice(), nll_term(floor), false);
    Ok((v, c.clip_events(x.as_slice(), floor)))
}

pub fn neg_log_likelihood(gs: &GateSet, ds: &DataSet, floor: f64) -> Result<f64> {
    Ok(neg_log_likelihood_with_clips(gs, ds, floor)?.0)
}

/// Analytic gradient of [`neg_log_likelihood`] in the flat parameter layout.
pub fn nll_gradient(gs: &GateSet, ds: &DataSet, floor: f64) -> Result<DVector<f64>> {
    check_floor(floor)?;
    let c = Compiled::new(gs, ds)?;
    let x = c.layout.flatten(gs)?;
    let (_, g) = c.evaluate(x.as_slice(), nll_term(floor), true);
    Ok(DVector::from_vec(g))
}

/// Outcome of [`project_to_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub gate_set: GateSet,
    pub feasible: bool,
    /// Euclidean distance in the flat parameter layout.
    pub distance: f64,
    pub escalations: usize,
}

/// Nearest gate set (Euclidean in the flat parameters) whose probabilities on
/// every dataset sequence lie in `[delta, 1 - delta]`, found by quadratic-hinge
/// penalty minimization with the penalty weight escalated tenfold until the
/// result is feasible. Infeasibility after the last escalation is reported in
/// the result, not as an error.
pub fn project_to_feasible(gs: &GateSet, ds: &DataSet, delta: f64) -> Result<Projection> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(GstError::InvalidArgument(format!(
            "delta {delta} must lie in (0, 0.5)"
        )));
    }
    let c = Compiled::new(gs, ds)?;
    let x0 = c.layout.flatten(gs)?;
    let feasible = |x: &DVector<f64>| {
        let mut buf = [vec![0.0; c.layout.hs()], vec![0.0; c.layout.hs()]];
        c.sequences.iter().all(|s| {
            let p = c.probability(x.as_slice(), s, &mut buf);
            (delta..=1.0 - delta).contains(&p)
        })
    };
    if feasible(&x0) {
        return Ok(Projection {
            gate_set: gs.clone(),
            feasible: true,
            distance: 0.0,
            escalations: 0,
        });
    }
    // Aim slightly inside the bounds so a moderate penalty weight already
    // lands feasible.
    let margin = (0.1 * delta + FEASIBILITY_MARGIN).min(0.25 * (1.0 - 2.0 * delta));
    let (lo, hi) = (delta + margin, 1.0 - delta - margin);
    let opts = BfgsOptions {
        max_iter: 500,
        grad_tol: 1e-10,
        ..BfgsOptions::default()
    };
    let mut x = x0.clone();
    let mut weight = INITIAL_PENALTY;
    let mut escalations = 0;
    let mut ok = false;
    while escalations < FEASIBILITY_ESCALATIONS {
        let term = move |p: f64, _: &Counts| {
            let v = if p < lo {
                p - lo
            } else if p > hi {
                p - hi
            } else {
                0.0
            };
            (weight * v * v, 2.0 * weight * v)
        };
        let r = bfgs(
            x.clone(),
            |y| {
                let (pen, mut g) = c.evaluate(y.as_slice(), term, true);
                let diff = y - &x0;
                for (gi, di) in g.iter_mut().zip(diff.iter()) {
                    *gi += 2.0 * di;
                }
                (pen + diff.norm_squared(), DVector::from_vec(g))
            },
            &opts,
        );
        x = r.x;
        escalations += 1;
        if feasible(&x) {
            ok = true;
            break;
        }
        weight *= 10.0;
    }
    if !ok {
        log::warn!("no feasible gate set found after {escalations} penalty escalations");
    }
    Ok(Projection {
        distance: (&x - &x0).norm(),
        gate_set: c.layout.unflatten(&x)?,
        feasible: ok,
        escalations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub floor: f64,
    /// Gradient-norm tolerance; `None` means `1e-6 * sqrt(#parameters)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub delta: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            floor: DEFAULT_FLOOR,
            tol: None,
            max_iter: DEFAULT_MAX_ITER,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_nll: f64,
    pub initial_nll: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub clip_events: usize,
    pub converged: bool,
    pub feasible_start: bool,
}

/// Maximum-likelihood estimate seeded at `seed`: project the seed into the
/// region where every training probability is valid, then run BFGS on the
/// clamped negative log-likelihood. The returned estimate never has a larger
/// NLL than the seed.
pub fn mle_estimate(
    seed: &GateSet,
    ds: &DataSet,
    opts: &MleOptions,
) -> Result<(GateSet, FitReport)> {
    check_floor(opts.floor)?;
    let c = Compiled::new(seed, ds)?;
    let layout = c.layout.clone();
    let objective = |x: &DVector<f64>| {
        let (v, g) = c.evaluate(x.as_slice(), nll_term(opts.floor), true);
        (v, DVector::from_vec(g))
    };

    let x_seed = layout.flatten(seed)?;
    let (initial_nll, initial_grad) = objective(&x_seed);
    if !initial_nll.is_finite() {
        return Err(GstError::NonFiniteObjective);
    }
    let projection = project_to_feasible(seed, ds, opts.delta)?;
    let x_start = layout.flatten(&projection.gate_set)?;

    let tol = opts.tol.unwrap_or(1e-6 * (layout.len() as f64).sqrt());
    let bfgs_opts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: tol,
        ..BfgsOptions::default()
    };
    let r = bfgs(x_start, objective, &bfgs_opts);
    if !r.f.is_finite() {
        return Err(GstError::NonFiniteObjective);
    }
    let (x, f, grad_norm, converged) = if r.f <= initial_nll {
        (r.x.clone(), r.f, r.grad_norm(), r.converged)
    } else {
        let gn = initial_grad.norm();
        (x_seed, initial_nll, gn, gn < tol)
    };
    let report = FitReport {
        final_nll: f,
        initial_nll,
        iterations: r.iterations,
        gradient_norm: grad_norm,
        clip_events: c.clip_events(x.as_slice(), opts.floor),
        converged,
        feasible_start: projection.feasible,
    };
    log::info!(
        "ML fit: nll {:.6} -> {:.6} in {} iterations (|grad| = {:.3e})",
        report.initial_nll,
        report.final_nll,
        report.iterations,
        report.gradient_norm
    );
    Ok((layout.unflatten(&x)?, report))
}
