//! Brute-force ground truth: local polytope membership, Bell maximization
//! over qubit realizations and convex decomposition search.

use std::f64::consts::{PI, TAU};

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{BellFunctional, Behavior};
use crate::error::{Error, Result};
use crate::realization::{born_point, QubitRealization};
use crate::witness::parameter_derivatives;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicVertex {
    pub a_out: [i8; 2],
    pub b_out: [i8; 2],
}

impl DeterministicVertex {
    pub fn behavior(&self) -> Behavior {
        Behavior::deterministic(self.a_out.map(f64::from), self.b_out.map(f64::from))
    }
}

/// All deterministic outcome assignments, enumerated by construction.
pub fn deterministic_vertices() -> Vec<DeterministicVertex> {
    let pm = [1i8, -1];
    let mut out = Vec::new();
    for &a0 in &pm {
        for &a1 in &pm {
            for &b0 in &pm {
                for &b1 in &pm {
                    out.push(DeterministicVertex { a_out: [a0, a1], b_out: [b0, b1] });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum LocalMembership {
    Local {
        /// Convex weights in [`deterministic_vertices`] order.
        weights: Vec<f64>,
        residual: f64,
    },
    Nonlocal {
        functional: BellFunctional,
        value: f64,
        local_max: f64,
    },
}

impl LocalMembership {
    pub fn is_local(&self) -> bool {
        matches!(self, LocalMembership::Local { .. })
    }
}

const PIVOT_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-10;

/// Phase-one simplex on `A w = b, w >= 0` with one artificial per row and
/// Bland's rule. Returns the primal values of the structural columns, the
/// optimal phase-one objective and the row duals.
fn phase_one(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
    let m = a.len();
    let n = a[0].len();
    let cols = n + m;
    let mut tab = vec![vec![0.0; cols + 1]; m];
    for i in 0..m {
        let sg = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = sg * a[i][j];
        }
        tab[i][n + i] = 1.0;
        tab[i][cols] = sg * b[i];
    }
    let row_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let cost: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    let mut basis: Vec<usize> = (n..cols).collect();

    loop {
        let reduced = |tab: &Vec<Vec<f64>>, basis: &Vec<usize>, j: usize| {
            cost[j] - (0..m).map(|i| cost[basis[i]] * tab[i][j]).sum::<f64>()
        };
        let entering = (0..cols).find(|&j| !basis.contains(&j) && reduced(&tab, &basis, j) < -PIVOT_TOL);
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if tab[i][e] > PIVOT_TOL {
                let ratio = tab[i][cols] / tab[i][e];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL || (ratio <= lr + PIVOT_TOL && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else { break };
        let piv = tab[r][e];
        for v in tab[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..m {
            if i != r && tab[i][e] != 0.0 {
                let f = tab[i][e];
                for j in 0..=cols {
                    tab[i][j] -= f * tab[r][j];
                }
            }
        }
        basis[r] = e;
    }

    let mut x = vec![0.0; n];
    let mut obj = 0.0;
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i][cols];
        } else {
            obj += tab[i][cols];
        }
    }
    // y_i = c_B B^-1 e_i, read off the artificial columns
    let duals = (0..m)
        .map(|i| row_sign[i] * (0..m).map(|r| cost[basis[r]] * tab[r][n + i]).sum::<f64>())
        .collect();
    (x, obj, duals)
}

/// Feasibility of `P` as a convex combination of the deterministic vertices.
pub fn local_membership_lp(p: &Behavior) -> Result<LocalMembership> {
    p.ensure_valid()?;
    let verts: Vec<[f64; 8]> = deterministic_vertices().iter().map(|v| v.behavior().to_vector()).collect();
    let target = p.to_vector();
    let mut a = vec![vec![1.0; verts.len()]];
    let mut b = vec![1.0];
    for k in 0..8 {
        a.push(verts.iter().map(|v| v[k]).collect());
        b.push(target[k]);
    }
    let (w, obj, y) = phase_one(&a, &b);
    if obj <= FEASIBILITY_TOL {
        let mut rec = [0.0; 8];
        for (wi, v) in w.iter().zip(&verts) {
            for k in 0..8 {
                rec[k] += wi * v[k];
            }
        }
        let residual = (0..8).map(|k| (rec[k] - target[k]).abs()).fold(0.0, f64::max);
        return Ok(LocalMembership::Local { weights: w, residual });
    }
    // y0 + beta . v <= 0 on every vertex and y0 + beta . P > 0
    let mut coeffs = [0.0; 8];
    coeffs.copy_from_slice(&y[1..9]);
    let functional = BellFunctional::new(coeffs);
    let local_max = verts
        .iter()
        .map(|v| functional.value(&Behavior::from_vector(v)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LocalMembership::Nonlocal { value: functional.value(p), functional, local_max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellMax {
    pub value: f64,
    pub argmax: QubitRealization,
    /// Best value after the grid stage and after each refinement round.
    pub history: Vec<f64>,
}

fn bell_at(beta: &BellFunctional, x: &[f64; 5]) -> f64 {
    beta.value(&born_point(&QubitRealization::from_params(x)))
}

/// Coarse grid over `theta in [0, pi)` and angles in `[0, 2 pi)`, then
/// coordinate pattern search with halving steps from the best grid points.
pub fn bell_max_q2(beta: &BellFunctional, resolution: usize, refinements: usize) -> Result<BellMax> {
    if resolution < 16 {
        return Err(Error::InvalidArgument("resolution must be at least 16".into()));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument("functional has non-finite entries".into()));
    }
    const SEEDS: usize = 8;
    let n = resolution;
    let th_step = PI / n as f64;
    let ang_step = TAU / n as f64;
    let ang: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * ang_step).sin_cos()).collect();
    let c = &beta.coeffs;

    let mut top: Vec<(f64, [usize; 5])> = (0..n)
        .into_par_iter()
        .map(|it| {
            let (s2, c2) = (2.0 * it as f64 * th_step).sin_cos();
            let mut local: Vec<(f64, [usize; 5])> = Vec::new();
            for i0 in 0..n {
                for i1 in 0..n {
                    for j0 in 0..n {
                        for j1 in 0..n {
                            let (sa0, ca0) = ang[i0];
                            let (sa1, ca1) = ang[i1];
                            let (sb0, cb0) = ang[j0];
                            let (sb1, cb1) = ang[j1];
                            let v = c2 * (c[0] * ca0 + c[1] * ca1 + c[2] * cb0 + c[3] * cb1)
                                + c[4] * (ca0 * cb0 + s2 * sa0 * sb0)
                                + c[5] * (ca1 * cb0 + s2 * sa1 * sb0)
                                + c[6] * (ca0 * cb1 + s2 * sa0 * sb1)
                                + c[7] * (ca1 * cb1 + s2 * sa1 * sb1);
                            insert_top(&mut local, (v, [it, i0, i1, j0, j1]), SEEDS);
                        }
                    }
                }
            }
            local
        })
        .reduce(Vec::new, |mut a, b| {
            for e in b {
                insert_top(&mut a, e, SEEDS);
            }
            a
        });
    top.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let grid_best = top[0].0;
    let results: Vec<(f64, [f64; 5], Vec<f64>)> = top
        .iter()
        .map(|(v, idx)| {
            let x = [
                idx[0] as f64 * th_step,
                idx[1] as f64 * ang_step,
                idx[2] as f64 * ang_step,
                idx[3] as f64 * ang_step,
                idx[4] as f64 * ang_step,
            ];
            pattern_search(beta, x, *v, ang_step, refinements)
        })
        .collect();
    let best = results
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one seed");
    let mut history = vec![grid_best];
    let mut running = grid_best;
    let rounds = results.iter().map(|r| r.2.len()).max().unwrap_or(0);
    for k in 0..rounds {
        let v = results.iter().map(|r| r.2[k.min(r.2.len() - 1)]).fold(f64::NEG_INFINITY, f64::max);
        running = running.max(v);
        history.push(running);
    }
    Ok(BellMax { value: best.0, argmax: QubitRealization::from_params(&best.1), history })
}

fn insert_top(top: &mut Vec<(f64, [usize; 5])>, e: (f64, [usize; 5]), k: usize) {
    if top.len() < k || e.0 > top[top.len() - 1].0 {
        let pos = top.partition_point(|t| t.0 >= e.0);
        top.insert(pos, e);
        top.truncate(k);
    }
}

/// Maximize by coordinate moves of size `step`, halving on failure; runs at
/// least `rounds` halvings and continues until the step falls below `1e-11`.
fn pattern_search(
    beta: &BellFunctional,
    mut x: [f64; 5],
    mut v: f64,
    mut step: f64,
    rounds: usize,
) -> (f64, [f64; 5], Vec<f64>) {
    let mut history = Vec::new();
    let mut halvings = 0;
    while halvings < rounds || step > 1e-11 {
        let mut improved = true;
        while improved {
            improved = false;
            for k in 0..5 {
                for dir in [1.0, -1.0] {
                    let mut y = x;
                    y[k] += dir * step;
                    let w = bell_at(beta, &y);
                    if w > v {
                        x = y;
                        v = w;
                        improved = true;
                    }
                }
            }
        }
        history.push(v);
        step /= 2.0;
        halvings += 1;
        if halvings > 200 {
            break;
        }
    }
    (v, x, history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub found: bool,
    pub seed: u64,
    pub trials: usize,
    /// Trial index of the reported candidate.
    pub trial: Option<usize>,
    pub lambda: f64,
    pub r1: QubitRealization,
    pub r2: QubitRealization,
    pub p1: Behavior,
    pub p2: Behavior,
    /// `max |lambda P1 + (1 - lambda) P2 - P|` of the best candidate.
    pub residual: f64,
    /// `|P1 - P2|_2` of the best candidate.
    pub separation: f64,
}

/// Minimum Euclidean distance between the two parts of a decomposition.
pub const DECOMP_SEPARATION: f64 = 0.05;
/// Mixing weights are restricted to `[LAMBDA_MIN, 1 - LAMBDA_MIN]`.
pub const LAMBDA_MIN: f64 = 0.05;
/// Convex identity tolerance for a reported decomposition.
pub const DECOMP_TOL: f64 = 1e-8;

type Params = SVector<f64, 11>;
type Resid = SVector<f64, 9>;
type Jac = SMatrix<f64, 9, 11>;

fn lambda_of(z: f64) -> (f64, f64) {
    let sg = 1.0 / (1.0 + (-z).exp());
    let span = 1.0 - 2.0 * LAMBDA_MIN;
    (LAMBDA_MIN + span * sg, span * sg * (1.0 - sg))
}

fn split(x: &Params) -> (QubitRealization, QubitRealization, f64) {
    let r1 = QubitRealization::from_params(&[x[0], x[1], x[2], x[3], x[4]]);
    let r2 = QubitRealization::from_params(&[x[5], x[6], x[7], x[8], x[9]]);
    (r1, r2, x[10])
}

fn residual_and_jacobian(x: &Params, target: &[f64; 8]) -> (Resid, Jac) {
    let (r1, r2, z) = split(x);
    let (p1, p2) = (born_point(&r1).to_vector(), born_point(&r2).to_vector());
    let (d1, d2) = (parameter_derivatives(&r1), parameter_derivatives(&r2));
    let (lam, dlam) = lambda_of(z);
    let mut r = Resid::zeros();
    let mut j = Jac::zeros();
    for k in 0..8 {
        r[k] = lam * p1[k] + (1.0 - lam) * p2[k] - target[k];
        for i in 0..5 {
            j[(k, i)] = lam * d1[i][k];
            j[(k, 5 + i)] = (1.0 - lam) * d2[i][k];
        }
        j[(k, 10)] = dlam * (p1[k] - p2[k]);
    }
    let diff: Vec<f64> = (0..8).map(|k| p1[k] - p2[k]).collect();
    let dist = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dist < DECOMP_SEPARATION {
        r[8] = DECOMP_SEPARATION - dist;
        if dist > 1e-300 {
            for i in 0..5 {
                let g1: f64 = (0..8).map(|k| diff[k] * d1[i][k]).sum::<f64>() / dist;
                let g2: f64 = (0..8).map(|k| diff[k] * d2[i][k]).sum::<f64>() / dist;
                j[(8, i)] = -g1;
                j[(8, 5 + i)] = g2;
            }
        }
    }
    (r, j)
}

/// Levenberg-Marquardt from one starting point; returns the final
/// parameters and residual vector.
fn levenberg_marquardt(mut x: Params, target: &[f64; 8], max_iter: usize) -> (Params, Resid) {
    let (mut r, mut j) = residual_and_jacobian(&x, target);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        if cost < 1e-26 {
            break;
        }
        let jt = j.transpose();
        let jtj = jt * j;
        let g = jt * r;
        let mut accepted = false;
        while mu < 1e12 {
            let mut a = jtj;
            for i in 0..11 {
                a[(i, i)] += mu * (jtj[(i, i)] + 1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = chol.solve(&(-g));
            let xn = x + step;
            let (rn, jn) = residual_and_jacobian(&xn, target);
            let cn = rn.norm_squared();
            if cn < cost {
                x = xn;
                r = rn;
                j = jn;
                cost = cn;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (x, r)
}

struct Candidate {
    trial: usize,
    x: Params,
    residual: f64,
    separation: f64,
}

fn run_trial(seed: u64, trial: usize, target: &[f64; 8]) -> Candidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut x = Params::zeros();
    for i in 0..10 {
        x[i] = rng.random_range(0.0..TAU);
    }
    x[10] = rng.random_range(-2.0..2.0);
    let (x, r) = levenberg_marquardt(x, target, 150);
    let (r1, r2, _) = split(&x);
    let separation = born_point(&r1)
        .to_vector()
        .iter()
        .zip(born_point(&r2).to_vector())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let residual = (0..8).map(|k| r[k].abs()).fold(0.0, f64::max);
    Candidate { trial, x, residual, separation }
}

/// Multistart search for `P = lambda P1 + (1 - lambda) P2` with `P1`, `P2`
/// pure qubit points at distance at least [`DECOMP_SEPARATION`].
///
/// Failure to find a decomposition is evidence of extremality, not proof.
pub fn decomposition_search(p: &Behavior, trials: usize, seed: u64) -> Result<Decomposition> {
    p.ensure_valid()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let target = p.to_vector();
    let success = |c: &Candidate| c.residual <= DECOMP_TOL && c.separation >= DECOMP_SEPARATION - 1e-12;
    let found = (0..trials).into_par_iter().map(|t| run_trial(seed, t, &target)).find_first(success);
    let (best, found) = match found {
        Some(c) => (c, true),
        None => {
            let best = (0..trials)
                .into_par_iter()
                .map(|t| run_trial(seed, t, &target))
                .filter(|c| c.separation >= DECOMP_SEPARATION - 1e-12)
                .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.trial.cmp(&b.trial)))
                .unwrap_or_else(|| run_trial(seed, 0, &target));
            (best, false)
        }
    };
    let (r1, r2, z) = split(&best.x);
    Ok(Decomposition {
        found,
        seed,
        trials,
        trial: Some(best.trial),
        lambda: lambda_of(z).0,
        p1: born_point(&r1),
        p2: born_point(&r2),
        r1,
        r2,
        residual: best.residual,
        separation: best.separation,
    })
}
