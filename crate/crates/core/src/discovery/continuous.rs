//! Continuous structure learner: a weighted adjacency `A` feeds a shared
//! one-hidden-layer tanh decoder, trained on an augmented Lagrangian of the
//! acyclicity constraint `h(A) = 0`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::acyclicity::acyclicity_h;
use super::{ContinuousConfig, ContinuousResult, DiscoveryError, LossRecord, WeightMatrix};
use crate::dataset::{MixedDataset, VariableKind};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LBFGS_MEMORY: usize = 10;
const FTOL: f64 = 1e-10;
const GTOL: f64 = 1e-6;
/// Relative objective decrease below which an epoch at frozen multipliers
/// counts as settled.
const SETTLE_TOL: f64 = 1e-7;
/// Prior precision of the decoder weights. The other parameters get a unit
/// prior spread over the sample.
const DECODER_PRECISION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum EpochOutcome {
    Continued,
    Converged,
    Failed(String),
}

#[derive(Debug, Clone)]
enum Target {
    Continuous,
    Categorical { classes: usize, codes: Vec<usize>, offset: usize },
}

/// Fixed data and parameter layout.
#[derive(Debug, Clone)]
struct Model {
    n: usize,
    d: usize,
    width: usize,
    /// Row-major `n × d` numeric encoding fed to the parents.
    x: Vec<f64>,
    targets: Vec<Target>,
    len: usize,
}

#[derive(Debug, Clone, Copy)]
struct Parts {
    nll: f64,
    kl: f64,
    mse: f64,
}

impl Model {
    fn a_index(&self, i: usize, j: usize) -> Option<usize> {
        if i == j {
            return None;
        }
        Some(i * (self.d - 1) + if j > i { j - 1 } else { j })
    }

    fn w1(&self) -> usize {
        self.d * (self.d - 1)
    }

    fn b1(&self) -> usize {
        self.w1() + self.width
    }

    fn w2(&self) -> usize {
        self.b1() + self.width
    }

    fn bias(&self) -> usize {
        self.w2() + self.width
    }

    fn adjacency(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.a_index(i, j).map_or(0.0, |k| theta[k]))
    }

    /// Data terms and their gradient, averaged over rows.
    fn evaluate(&self, theta: &[f64], grad: Option<&mut [f64]>) -> Parts {
        let (n, d, hw) = (self.n, self.d, self.width);
        let a = self.adjacency(theta);
        let w1 = &theta[self.w1()..self.w1() + hw];
        let b1 = &theta[self.b1()..self.b1() + hw];
        let w2 = &theta[self.w2()..self.w2() + hw];
        let bias = &theta[self.bias()..self.bias() + d];
        let inv_n = 1.0 / n as f64;
        let want = grad.is_some();
        let mut g_a = vec![0.0; d * d];
        let mut g_w1 = vec![0.0; hw];
        let mut g_b1 = vec![0.0; hw];
        let mut g_w2 = vec![0.0; hw];
        let mut g_bias = vec![0.0; d];
        let mut g_cat = vec![0.0; self.len - self.bias() - d];
        let cat_base = self.bias() + d;
        let (mut nll, mut sse) = (0.0, 0.0);
        let mut s = vec![0.0; d];
        let mut t = vec![0.0; hw];
        let mut logits = Vec::new();
        for r in 0..n {
            let row = &self.x[r * d..(r + 1) * d];
            for (j, sj) in s.iter_mut().enumerate() {
                *sj = (0..d).map(|k| row[k] * a[(k, j)]).sum();
            }
            for j in 0..d {
                let sj = s[j];
                let mut m = sj + bias[j];
                for h in 0..hw {
                    t[h] = tanh(w1[h] * sj + b1[h]);
                    m += w2[h] * t[h];
                }
                let gm = match &self.targets[j] {
                    Target::Continuous => {
                        let e = m - row[j];
                        nll += 0.5 * e * e + 0.5 * LN_2PI;
                        sse += e * e;
                        e
                    }
                    Target::Categorical { classes, codes, offset } => {
                        let (u, c) = theta[cat_base + offset..].split_at(*classes);
                        logits.clear();
                        logits.extend((0..*classes).map(|k| m * u[k] + c[k]));
                        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
                        let lse = mx + z.ln();
                        let y = codes[r];
                        nll += lse - logits[y];
                        let mut gm = 0.0;
                        for k in 0..*classes {
                            let p = (logits[k] - lse).exp();
                            let dl = p - if k == y { 1.0 } else { 0.0 };
                            sse += dl * dl;
                            if want {
                                gm += dl * u[k];
                                g_cat[offset + k] += dl * m;
                                g_cat[offset + classes + k] += dl;
                            }
                        }
                        gm
                    }
                };
                if !want {
                    continue;
                }
                g_bias[j] += gm;
                let mut gs = gm;
                for h in 0..hw {
                    let dz = gm * w2[h] * (1.0 - t[h] * t[h]);
                    g_w2[h] += gm * t[h];
                    g_w1[h] += dz * sj;
                    g_b1[h] += dz;
                    gs += dz * w1[h];
                }
                for k in 0..d {
                    g_a[k * d + j] += row[k] * gs;
                }
            }
        }
        let dec = self.w1()..self.bias();
        let sq_dec: f64 = theta[dec.clone()].iter().map(|v| v * v).sum();
        let sq: f64 = theta.iter().map(|v| v * v).sum::<f64>() - sq_dec;
        let kl = 0.5 * sq * inv_n + 0.5 * DECODER_PRECISION * sq_dec;
        if let Some(g) = grad {
            for i in 0..d {
                for j in 0..d {
                    if let Some(k) = self.a_index(i, j) {
                        g[k] = g_a[i * d + j] * inv_n;
                    }
                }
            }
            let put = |g: &mut [f64], at: usize, src: &[f64]| {
                for (o, v) in g[at..at + src.len()].iter_mut().zip(src) {
                    *o = v * inv_n;
                }
            };
            put(g, self.w1(), &g_w1);
            put(g, self.b1(), &g_b1);
            put(g, self.w2(), &g_w2);
            put(g, self.bias(), &g_bias);
            put(g, cat_base, &g_cat);
            for (k, (o, v)) in g.iter_mut().zip(theta).enumerate() {
                *o += v * if dec.contains(&k) { DECODER_PRECISION } else { inv_n };
            }
        }
        Parts { nll: nll * inv_n, kl, mse: sse / (n * d) as f64 }
    }
}

fn tanh(z: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * z).exp() + 1.0)
}

/// Augmented-Lagrangian objective at fixed multipliers.
fn objective(model: &Model, theta: &[f64], rho: f64, alpha: f64, grad: &mut [f64]) -> f64 {
    let parts = model.evaluate(theta, Some(grad));
    let (h, gh) = acyclicity_h(&model.adjacency(theta));
    let coef = rho * h + alpha;
    for i in 0..model.d {
        for j in 0..model.d {
            if let Some(k) = model.a_index(i, j) {
                grad[k] += coef * gh[(i, j)];
            }
        }
    }
    parts.nll + parts.kl + 0.5 * rho * h * h + alpha * h
}

enum InnerStop {
    Converged,
    /// No step could be accepted from the starting point.
    Stalled,
    Budget,
    NonFinite,
}

type History = Vec<(Vec<f64>, Vec<f64>, f64)>;

/// Limited-memory BFGS with Armijo backtracking. `hist` carries curvature
/// pairs between calls on the same objective.
fn lbfgs(mut f: impl FnMut(&[f64], &mut [f64]) -> f64, x: &mut Vec<f64>, hist: &mut History, max_iter: usize) -> (InnerStop, f64) {
    let p = x.len();
    let mut g = vec![0.0; p];
    let mut fx = f(x, &mut g);
    let f0 = fx;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return (InnerStop::NonFinite, 0.0);
    }
    let mut g_new = vec![0.0; p];
    let mut x_new = vec![0.0; p];
    for iter in 0..max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= GTOL {
            return (InnerStop::Converged, f0 - fx);
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let norm = dot(&g, &g).sqrt();
            q.iter_mut().for_each(|v| *v /= norm.max(1.0));
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let accepted = loop {
            for k in 0..p {
                x_new[k] = x[k] + step * dir[k];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                break Some(f_new);
            }
            step *= 0.5;
            if step < 1e-10 {
                break None;
            }
        };
        let Some(f_new) = accepted else {
            hist.clear();
            return (if iter == 0 { InnerStop::Stalled } else { InnerStop::Converged }, f0 - fx);
        };
        if g_new.iter().any(|v| !v.is_finite()) {
            return (InnerStop::NonFinite, 0.0);
        }
        let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if hist.len() == LBFGS_MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        std::mem::swap(x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        let done = (fx - f_new).abs() <= FTOL * fx.abs().max(1.0);
        fx = f_new;
        if done {
            return (InnerStop::Converged, f0 - fx);
        }
    }
    (InnerStop::Budget, f0 - fx)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Training state. One call to [`ContinuousLearner::step`] is one epoch.
#[derive(Debug, Clone)]
pub struct ContinuousLearner {
    model: Model,
    config: ContinuousConfig,
    variables: Vec<String>,
    theta: Vec<f64>,
    rho: f64,
    alpha: f64,
    /// `h` at the last accepted dual update.
    h_ref: f64,
    h: f64,
    epoch: u32,
    history: History,
    /// Set once epochs at frozen multipliers stop making progress.
    stalled: bool,
    losses: Vec<LossRecord>,
    converged: bool,
    failed: Option<String>,
}

impl ContinuousLearner {
    pub fn new(ds: &MixedDataset, vars: &[String], config: ContinuousConfig, seed: u64) -> Result<Self, DiscoveryError> {
        if vars.len() < 2 {
            return Err(DiscoveryError::TooFewVariables);
        }
        let idx: Vec<usize> = vars.iter().map(|v| ds.require(v)).collect::<Result<_, _>>()?;
        let n = ds.row_count();
        let d = vars.len();
        let mut x = vec![0.0; n * d];
        let mut targets = Vec::with_capacity(d);
        let mut cat_len = 0;
        for (j, &c) in idx.iter().enumerate() {
            let col = ds.column(c);
            let mean = col.iter().sum::<f64>() / n as f64;
            let spread = if config.standardize && ds.variable(c).kind == VariableKind::Continuous {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            } else {
                1.0
            };
            for r in 0..n {
                x[r * d + j] = (col[r] - mean) / spread;
            }
            targets.push(match ds.variable(c).kind {
                VariableKind::Continuous => Target::Continuous,
                VariableKind::Categorical => {
                    let classes = ds.variable(c).cardinality();
                    let t = Target::Categorical { classes, codes: ds.codes(c), offset: cat_len };
                    cat_len += 2 * classes;
                    t
                }
            });
        }
        let width = config.hidden_width;
        let len = d * (d - 1) + 3 * width + d + cat_len;
        let model = Model { n, d, width, x, targets, len };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; len];
        for h in 0..width {
            theta[model.w1() + h] = rng.random_range(-1.0..1.0);
            theta[model.b1() + h] = rng.random_range(-0.5..0.5);
        }
        let cat_base = model.bias() + d;
        for t in &model.targets {
            if let Target::Categorical { classes, offset, .. } = t {
                for k in 0..*classes {
                    theta[cat_base + offset + k] = k as f64 - (*classes - 1) as f64 / 2.0;
                }
            }
        }
        let h0 = acyclicity_h(&model.adjacency(&theta)).0;
        Ok(Self {
            model,
            rho: config.rho_init,
            config,
            variables: vars.to_vec(),
            theta,
            alpha: 0.0,
            h_ref: f64::INFINITY,
            h: h0,
            epoch: 0,
            history: Vec::new(),
            stalled: false,
            losses: Vec::new(),
            converged: false,
            failed: None,
        })
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn failure(&self) -> Option<&str> {
        self.failed.as_deref()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn losses(&self) -> &[LossRecord] {
        &self.losses
    }

    pub fn weight_matrix(&self) -> WeightMatrix {
        let a = self.model.adjacency(&self.theta);
        WeightMatrix {
            variable_order: self.variables.clone(),
            matrix: (0..self.model.d).map(|i| (0..self.model.d).map(|j| a[(i, j)]).collect()).collect(),
        }
    }

    pub fn result(&self) -> ContinuousResult {
        let matrix = self.weight_matrix();
        ContinuousResult {
            edges: threshold_edges(&matrix, self.config.threshold),
            matrix,
            losses: self.losses.clone(),
            epoch: self.epoch,
            h: self.h,
            threshold: self.config.threshold,
            converged: self.converged,
        }
    }

    /// Runs one epoch: a bounded inner solve followed by one step of the
    /// penalty schedule. On a non-finite loss the parameters are left untouched.
    pub fn step(&mut self) -> EpochOutcome {
        if let Some(msg) = &self.failed {
            return EpochOutcome::Failed(msg.clone());
        }
        if self.stalled {
            // Settled at frozen multipliers: later epochs report the final state.
            let last = *self.losses.last().expect("stalled after an epoch");
            self.epoch += 1;
            self.losses.push(LossRecord { epoch: self.epoch, ..last });
            return EpochOutcome::Converged;
        }
        let (rho, alpha) = (self.rho, self.alpha);
        let mut theta = self.theta.clone();
        let model = &self.model;
        let mut history = std::mem::take(&mut self.history);
        let (stop, gain) = lbfgs(|t, g| objective(model, t, rho, alpha, g), &mut theta, &mut history, self.config.steps_per_epoch);
        self.history = history;
        let parts = self.model.evaluate(&theta, None);
        let elbo = parts.nll + parts.kl;
        if matches!(stop, InnerStop::NonFinite) || !elbo.is_finite() || !parts.mse.is_finite() {
            let msg = format!("non-finite loss at epoch {}", self.epoch + 1);
            self.failed = Some(msg.clone());
            return EpochOutcome::Failed(msg);
        }
        self.theta = theta;
        self.epoch += 1;
        self.h = acyclicity_h(&self.model.adjacency(&self.theta)).0;
        self.losses.push(LossRecord { epoch: self.epoch, elbo, nll: parts.nll, mse: parts.mse });
        if self.converged {
            self.stalled = matches!(stop, InnerStop::Stalled) || gain <= SETTLE_TOL * self.losses[self.losses.len() - 1].elbo.abs().max(1.0);
        } else if self.h <= self.config.h_tol {
            self.converged = true;
        } else if self.h > self.config.h_shrink * self.h_ref {
            self.rho = (self.rho * self.config.rho_factor).min(self.config.rho_max);
            self.history.clear();
            self.converged = self.rho >= self.config.rho_max;
        } else {
            self.alpha += self.rho * self.h;
            self.history.clear();
            self.h_ref = self.h;
        }
        if self.converged {
            EpochOutcome::Converged
        } else {
            EpochOutcome::Continued
        }
    }
}

/// Keeps entries with `|w| ≥ tau`, then repeatedly drops the weakest edge of
/// any remaining cycle.
pub fn threshold_edges(w: &WeightMatrix, tau: f64) -> Vec<(String, String)> {
    let names = &w.variable_order;
    let mut kept: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, row) in w.matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j && v.abs() >= tau {
                kept.insert((i, j));
            }
        }
    }
    loop {
        let pairs: Vec<(&str, &str)> = kept.iter().map(|&(i, j)| (names[i].as_str(), names[j].as_str())).collect();
        let Some(cycle) = crate::graph::find_cycle(names, pairs) else {
            break;
        };
        let pos = |s: &String| names.iter().position(|n| n == s).expect("cycle node");
        let weakest = cycle
            .windows(2)
            .map(|p| (pos(&p[0]), pos(&p[1])))
            .min_by(|a, b| w.matrix[a.0][a.1].abs().total_cmp(&w.matrix[b.0][b.1].abs()).then(a.cmp(b)))
            .expect("cycle has edges");
        kept.remove(&weakest);
    }
    let mut edges: Vec<(String, String)> = kept.into_iter().map(|(i, j)| (names[i].clone(), names[j].clone())).collect();
    edges.sort();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableSpec;

    fn small_mixed() -> MixedDataset {
        let n = 40;
        let a: Vec<f64> = (0..n).map(|i| ((i * 17) % 13) as f64 * 0.3 - 1.5).collect();
        let b: Vec<f64> = (0..n).map(|i| if a[i] + ((i * 7) % 5) as f64 * 0.2 > 0.0 { 1.0 } else { 0.0 }).collect();
        let c: Vec<f64> = (0..n).map(|i| 0.7 * a[i] - b[i] + ((i * 11) % 7) as f64 * 0.1).collect();
        MixedDataset::from_columns(
            vec![
                VariableSpec::continuous("a"),
                VariableSpec::categorical("b", vec!["0".into(), "1".into()]),
                VariableSpec::continuous("c"),
            ],
            vec![a, b, c],
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = small_mixed();
        let vars: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let cfg = ContinuousConfig { hidden_width: 4, ..ContinuousConfig::default() };
        let mut l = ContinuousLearner::new(&ds, &vars, cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for v in l.theta.iter_mut() {
            *v += rng.random_range(-0.4..0.4);
        }
        let (rho, alpha) = (3.0, 0.7);
        let mut g = vec![0.0; l.theta.len()];
        objective(&l.model, &l.theta, rho, alpha, &mut g);
        let mut scratch = vec![0.0; l.theta.len()];
        for k in 0..l.theta.len() {
            let eps = 1e-6;
            let mut tp = l.theta.clone();
            tp[k] += eps;
            let fp = objective(&l.model, &tp, rho, alpha, &mut scratch);
            tp[k] -= 2.0 * eps;
            let fm = objective(&l.model, &tp, rho, alpha, &mut scratch);
            let fd = (fp - fm) / (2.0 * eps);
            assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn epoch_counter_advances_by_one() {
        let ds = small_mixed();
        let vars: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut l = ContinuousLearner::new(&ds, &vars, ContinuousConfig::default(), 1).unwrap();
        for e in 1..=3 {
            l.step();
            assert_eq!(l.epoch(), e);
            assert_eq!(l.losses().len(), e as usize);
        }
    }

    fn wm(m: Vec<Vec<f64>>) -> WeightMatrix {
        WeightMatrix { variable_order: (0..m.len()).map(|i| i.to_string()).collect(), matrix: m }
    }

    #[test]
    fn threshold_examples() {
        assert!(threshold_edges(&wm(vec![vec![0.0; 3]; 3]), 0.3).is_empty());
        let e = threshold_edges(&wm(vec![vec![0.0, 0.5], vec![0.4, 0.0]]), 0.3);
        assert_eq!(e, vec![("0".to_string(), "1".to_string())]);
        assert!(threshold_edges(&wm(vec![vec![0.0, 0.29], vec![0.0, 0.0]]), 0.3).is_empty());
        let e = threshold_edges(&wm(vec![vec![0.0, 0.3], vec![0.0, 0.0]]), 0.3);
        assert_eq!(e.len(), 1);
    }
}
