//! Pure two-qubit realizations `|phi_theta> = cos(theta)|00> + sin(theta)|11>`
//! with real measurements `cos(a) Z + sin(a) X`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix2, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, SymmetryElement};
use crate::error::{Error, Result};
use crate::extremality::full_alternation_check;

/// Slack on the ordering inequalities of the canonical range.
pub const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QubitRealization {
    pub theta: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Which representative [`canonicalize_to`] looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonTarget {
    /// `theta in [0, pi)`, `0 <= a0 <= b0 <= b1 < pi`, `a0 <= a1 < pi`,
    /// reached by relabelings and periodicity only.
    Range,
    /// The range above with additionally `theta in [0, pi/4]`, using the
    /// reflections of the state that leave every behavior unchanged.
    Sector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Canonical,
    /// Canonical with `theta in (0, pi/4]`.
    Sector,
    FullyAlternating,
    StrictlyAlternating,
    NonAlternating,
}

impl QubitRealization {
    pub fn new(theta: f64, a: [f64; 2], b: [f64; 2]) -> Self {
        QubitRealization { theta, a, b }
    }

    /// `(theta, a0, a1, b0, b1)`.
    pub fn params(&self) -> [f64; 5] {
        [self.theta, self.a[0], self.a[1], self.b[0], self.b[1]]
    }

    pub fn from_params(p: &[f64; 5]) -> Self {
        QubitRealization { theta: p[0], a: [p[1], p[2]], b: [p[3], p[4]] }
    }

    pub fn max_abs_diff(&self, other: &QubitRealization) -> f64 {
        let (p, q) = (self.params(), other.params());
        (0..5).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max)
    }

    pub fn born_point(&self) -> Behavior {
        born_point(self)
    }

    pub fn is_canonical(&self) -> bool {
        in_range(&self.params(), RANGE_SLACK)
    }

    /// Realization-level action of a relabeling: flipping an output adds
    /// `pi` to the angle, input and party swaps exchange angles.
    pub fn relabel(&self, g: &SymmetryElement) -> QubitRealization {
        let mut ang = [self.a[0], self.a[1], self.b[0], self.b[1]];
        for (m, flip) in g.output_flip.iter().enumerate() {
            if *flip {
                ang[m] += PI;
            }
        }
        if g.input_swap_a {
            ang.swap(0, 1);
        }
        if g.input_swap_b {
            ang.swap(2, 3);
        }
        if g.party_swap {
            ang = [ang[2], ang[3], ang[0], ang[1]];
        }
        QubitRealization { theta: self.theta, a: [ang[0], ang[1]], b: [ang[2], ang[3]] }
    }
}

pub fn born_point(r: &QubitRealization) -> Behavior {
    let (s2, c2) = (2.0 * r.theta).sin_cos();
    let (sa, ca) = (r.a.map(f64::sin), r.a.map(f64::cos));
    let (sb, cb) = (r.b.map(f64::sin), r.b.map(f64::cos));
    let mut corr = [[0.0; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            corr[x][y] = ca[x] * cb[y] + s2 * sa[x] * sb[y];
        }
    }
    Behavior {
        marg_a: [c2 * ca[0], c2 * ca[1]],
        marg_b: [c2 * cb[0], c2 * cb[1]],
        corr,
    }
}

pub(crate) fn qubit_observable(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, s, -c)
}

pub(crate) fn state_vector(theta: f64) -> Vector4<f64> {
    Vector4::new(theta.cos(), 0.0, 0.0, theta.sin())
}

/// The eight observables `A0, A1, B0, B1, A0B0, A1B0, A0B1, A1B1` as
/// operators on the two-qubit space.
pub(crate) fn observables(r: &QubitRealization) -> [Matrix4<f64>; 8] {
    let id = Matrix2::<f64>::identity();
    let a = r.a.map(qubit_observable);
    let b = r.b.map(qubit_observable);
    [
        a[0].kronecker(&id),
        a[1].kronecker(&id),
        id.kronecker(&b[0]),
        id.kronecker(&b[1]),
        a[0].kronecker(&b[0]),
        a[1].kronecker(&b[0]),
        a[0].kronecker(&b[1]),
        a[1].kronecker(&b[1]),
    ]
}

/// Born rule evaluated by explicit operator products.
pub fn born_point_matrix(r: &QubitRealization) -> Behavior {
    let phi = state_vector(r.theta);
    let ops = observables(r);
    let mut v = [0.0; 8];
    for (k, op) in ops.iter().enumerate() {
        v[k] = phi.dot(&(op * phi));
    }
    Behavior::from_vector(&v)
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period - RANGE_SLACK {
        0.0
    } else {
        r
    }
}

fn reduce(p: &[f64; 5]) -> [f64; 5] {
    [wrap(p[0], PI), wrap(p[1], TAU), wrap(p[2], TAU), wrap(p[3], TAU), wrap(p[4], TAU)]
}

fn in_range(p: &[f64; 5], slack: f64) -> bool {
    let [th, a0, a1, b0, b1] = *p;
    p.iter().all(|v| v.is_finite())
        && (0.0..PI).contains(&th)
        && a0 >= 0.0
        && a0 <= b0 + slack
        && b0 <= b1 + slack
        && b1 < PI
        && a0 <= a1 + slack
        && a1 < PI
}

/// Reflections of the parameters that leave the behavior unchanged:
/// `(-theta, -a, b)`, `(theta, -a, -b)` and `(pi/2 - theta, pi - a, pi - b)`.
fn reflections(p: &[f64; 5]) -> [[f64; 5]; 8] {
    let mut out = [*p; 8];
    for (k, q) in out.iter_mut().enumerate() {
        if k & 1 == 1 {
            *q = [-q[0], -q[1], -q[2], q[3], q[4]];
        }
        if k & 2 == 2 {
            *q = [q[0], -q[1], -q[2], -q[3], -q[4]];
        }
        if k & 4 == 4 {
            *q = [FRAC_PI_2 - q[0], PI - q[1], PI - q[2], PI - q[3], PI - q[4]];
        }
    }
    out
}

/// Every representative of `r` inside the canonical range, with the
/// relabeling that maps `born_point(r)` onto its behavior.
pub fn orbit_in_range(r: &QubitRealization, target: CanonTarget) -> Vec<(QubitRealization, SymmetryElement)> {
    let starts: Vec<[f64; 5]> = match target {
        CanonTarget::Range => vec![r.params()],
        CanonTarget::Sector => reflections(&r.params()).to_vec(),
    };
    let mut out = Vec::new();
    for s in &starts {
        let base = QubitRealization::from_params(s);
        for g in SymmetryElement::group() {
            let q = reduce(&base.relabel(g).params());
            if in_range(&q, RANGE_SLACK) {
                if target == CanonTarget::Sector && q[0] > FRAC_PI_4 + RANGE_SLACK {
                    continue;
                }
                out.push((QubitRealization::from_params(&q), *g));
            }
        }
    }
    out
}

/// Componentwise comparison treating differences below `1e-9` as ties.
fn fuzzy_lex(a: &[f64; 5], b: &[f64; 5]) -> Ordering {
    for k in 0..5 {
        if (a[k] - b[k]).abs() > 1e-9 {
            return a[k].total_cmp(&b[k]);
        }
    }
    Ordering::Equal
}

pub fn canonicalize(r: &QubitRealization) -> (QubitRealization, SymmetryElement) {
    canonicalize_to(r, CanonTarget::Range)
}

/// Lexicographically smallest in-range representative on
/// `(theta, a0, a1, b0, b1)`. The witness `g` satisfies
/// `born_point(out) = g.apply(born_point(r))`.
pub fn canonicalize_to(r: &QubitRealization, target: CanonTarget) -> (QubitRealization, SymmetryElement) {
    let orbit = orbit_in_range(r, target);
    let mut best = orbit[0];
    for cand in orbit.iter().skip(1) {
        if fuzzy_lex(&cand.0.params(), &best.0.params()) == Ordering::Less {
            best = *cand;
        }
    }
    best
}

fn draw_canonical(rng: &mut ChaCha8Rng, sector: bool) -> QubitRealization {
    let theta = if sector {
        FRAC_PI_4 * (1.0 - rng.random::<f64>())
    } else {
        PI * rng.random::<f64>()
    };
    let mut v: [f64; 4] = std::array::from_fn(|_| PI * rng.random::<f64>());
    v.sort_by(f64::total_cmp);
    let pick = rng.random_range(1..4);
    let a1 = v[pick];
    let rest: Vec<f64> = (1..4).filter(|&k| k != pick).map(|k| v[k]).collect();
    QubitRealization { theta, a: [v[0], a1], b: [rest[0], rest[1]] }
}

/// Uniform sample from the canonical region, rejection-sampled against the
/// alternation constraints.
pub fn sample_realization(seed: u64, constraints: &[Constraint]) -> Result<QubitRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(&mut rng, constraints)
}

pub fn sample_with(rng: &mut ChaCha8Rng, constraints: &[Constraint]) -> Result<QubitRealization> {
    const ATTEMPTS: usize = 100_000;
    let sector = constraints.contains(&Constraint::Sector);
    for _ in 0..ATTEMPTS {
        let r = draw_canonical(rng, sector);
        if accepts(&r, constraints) {
            return Ok(r);
        }
    }
    Err(Error::SamplingFailed { attempts: ATTEMPTS })
}

fn accepts(r: &QubitRealization, constraints: &[Constraint]) -> bool {
    let check = |strict| full_alternation_check(r, strict).map(|a| a.holds);
    constraints.iter().all(|c| match c {
        Constraint::Canonical | Constraint::Sector => true,
        Constraint::FullyAlternating => check(false) == Ok(true),
        Constraint::StrictlyAlternating => check(true) == Ok(true),
        Constraint::NonAlternating => check(false) == Ok(false),
    })
}
