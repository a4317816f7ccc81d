//! Hand-rolled reference computations, written independently of the library,
//! and the values they produce on fixed examples.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, SQRT_2, TAU};

use chsh_core::behavior::apply_symmetry;
use chsh_core::extremality::{classify, lemma1_residuals, theorem1_behavior_check, Verdict};
use chsh_core::oracles::{bell_max_q2, local_membership_lp, LocalMembership};
use chsh_core::realization::born_point;
use chsh_core::steering::{modified_angles, steered_correlators};
use chsh_core::witness::{find_witness, orthocomplement, sector_system_residual, solve_sector, tangent_basis};
use chsh_core::{BellFunctional, Behavior, QubitRealization, SymmetryElement};

type M2 = [[f64; 2]; 2];

fn obs(a: f64) -> M2 {
    [[a.cos(), a.sin()], [a.sin(), -a.cos()]]
}

fn psi(theta: f64) -> [f64; 4] {
    [theta.cos(), 0.0, 0.0, theta.sin()]
}

/// `<psi| A (x) B |psi>` with the tensor index `2 i + j`.
fn expect(v: &[f64; 4], a: &M2, b: &M2) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s += v[2 * i + j] * a[i][k] * b[j][l] * v[2 * k + l];
                }
            }
        }
    }
    s
}

const ID: M2 = [[1.0, 0.0], [0.0, 1.0]];

fn oracle_behavior(r: &QubitRealization) -> Behavior {
    let v = psi(r.theta);
    let a = r.a.map(obs);
    let b = r.b.map(obs);
    Behavior::new(
        [expect(&v, &a[0], &ID), expect(&v, &a[1], &ID)],
        [expect(&v, &ID, &b[0]), expect(&v, &ID, &b[1])],
        [
            [expect(&v, &a[0], &b[0]), expect(&v, &a[0], &b[1])],
            [expect(&v, &a[1], &b[0]), expect(&v, &a[1], &b[1])],
        ],
    )
}

/// Bob's conditional Bloch vector `(z, x)` after Alice obtains `alpha` on
/// the observable at angle `a`.
fn conditional_bloch(theta: f64, a: f64, alpha: f64) -> [f64; 2] {
    let v = psi(theta);
    let o = obs(a);
    let mut proj = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            proj[i][k] = (ID[i][k] + alpha * o[i][k]) / 2.0;
        }
    }
    let sz = [[1.0, 0.0], [0.0, -1.0]];
    let sx = [[0.0, 1.0], [1.0, 0.0]];
    let p = expect(&v, &proj, &ID);
    [expect(&v, &proj, &sz) / p, expect(&v, &proj, &sx) / p]
}

fn angle_diff(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

fn r3() -> QubitRealization {
    QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4])
}

fn tsirelson() -> QubitRealization {
    QubitRealization::new(FRAC_PI_4, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4])
}

fn non_alternating() -> QubitRealization {
    QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [3.0 * FRAC_PI_8, 3.0 * FRAC_PI_4])
}

#[test]
fn born_point_matches_hand_rolled_expectations() {
    let pts = [
        r3(),
        tsirelson(),
        QubitRealization::new(0.3, [0.1, 2.0], [1.2, -0.4]),
        QubitRealization::new(1.3, [4.0, 0.5], [2.2, 3.1]),
        QubitRealization::new(0.0, [0.7, 0.2], [0.9, 1.9]),
    ];
    for r in &pts {
        let d = born_point(r).max_abs_diff(&oracle_behavior(r));
        assert!(d < 1e-14, "{r:?}: {d}");
    }
}

#[test]
fn frozen_r3_behavior() {
    let h = SQRT_2 / 2.0;
    let want = Behavior::new([h, 0.0], [0.5, -0.5], [[h, -h], [0.5, 0.5]]);
    assert!(oracle_behavior(&r3()).max_abs_diff(&want) < 1e-15);
    assert!(born_point(&r3()).max_abs_diff(&want) < 1e-15);
}

#[test]
fn modified_angles_match_conditional_states() {
    let pts = [r3(), QubitRealization::new(0.3, [0.1, 2.0], [1.2, -0.4]), QubitRealization::new(1.1, [3.0, 5.5], [0.2, 0.4])];
    for r in &pts {
        let at = modified_angles(r).unwrap();
        for (ia, alpha) in [1.0, -1.0].into_iter().enumerate() {
            for x in 0..2 {
                let [z, xx] = conditional_bloch(r.theta, r.a[x], alpha);
                let want = (alpha * xx).atan2(alpha * z);
                assert!(angle_diff(at[ia][x], want) < 1e-12, "{r:?} {ia} {x}");
            }
        }
    }
}

#[test]
fn frozen_r3_modified_angles() {
    let [z, x] = conditional_bloch(FRAC_PI_8, FRAC_PI_2, 1.0);
    assert!(angle_diff(x.atan2(z), FRAC_PI_4) < 1e-15);
    let [z, x] = conditional_bloch(FRAC_PI_8, FRAC_PI_2, -1.0);
    assert!(angle_diff((-x).atan2(-z), 3.0 * FRAC_PI_4) < 1e-15);
    let at = modified_angles(&r3()).unwrap();
    let want = [[0.0, FRAC_PI_4], [0.0, 3.0 * FRAC_PI_4]];
    for a in 0..2 {
        for x in 0..2 {
            assert!(angle_diff(at[a][x], want[a][x]) < 1e-15);
        }
    }
}

#[test]
fn steered_correlators_are_conditional_expectations() {
    let r = QubitRealization::new(0.3, [0.1, 2.0], [1.2, -0.4]);
    let c = steered_correlators(&born_point(&r)).unwrap().c;
    for (ia, alpha) in [1.0, -1.0].into_iter().enumerate() {
        for x in 0..2 {
            let [z, xx] = conditional_bloch(r.theta, r.a[x], alpha);
            for y in 0..2 {
                let want = alpha * (z * r.b[y].cos() + xx * r.b[y].sin());
                assert!((c[ia][x][y] - want).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn frozen_lemma1_values() {
    for r in [r3(), tsirelson()] {
        let res = lemma1_residuals(&born_point(&r)).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-12), "{res:?}");
    }
    // hand evaluation at (s, t) = (+, +): asin(cos(-3pi/8)) + asin(cos(-pi/8))
    // - asin(cos(-3pi/4)) + asin(cos(pi/4 - 3pi/4)) - pi
    let c = |x: f64| x.cos().asin();
    let want = c(-3.0 * FRAC_PI_8) + c(-FRAC_PI_8) - c(-3.0 * FRAC_PI_4) + c(FRAC_PI_4 - 3.0 * FRAC_PI_4) - PI;
    let res = lemma1_residuals(&born_point(&non_alternating())).unwrap();
    assert!((res[0] - want).abs() < 1e-12, "{} vs {want}", res[0]);
    assert!(res[0].abs() > 0.1);
}

#[test]
fn frozen_theorem1_pattern() {
    let rep = theorem1_behavior_check(&born_point(&r3())).unwrap();
    assert_eq!(rep.pattern.unwrap().eps, [[1, -1], [1, 1]]);
}

#[test]
fn frozen_classifications() {
    assert_eq!(classify(&born_point(&tsirelson())).unwrap().verdict, Verdict::ExtremalExposed);
    assert_eq!(classify(&born_point(&r3())).unwrap().verdict, Verdict::ExtremalNonExposed);
    assert_eq!(classify(&born_point(&non_alternating())).unwrap().verdict, Verdict::NonExtremalInQ);
    let r16 = QubitRealization::new(PI / 16.0, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4]);
    let p16 = born_point(&r16);
    // CHSH value 2 cos(pi/4) (1 + sin(pi/8)) < 2
    let want = SQRT_2 * (1.0 + (PI / 8.0).sin());
    assert!((p16.chsh_max() - want).abs() < 1e-12);
    assert_eq!(classify(&p16).unwrap().verdict, Verdict::Local);
}

#[test]
fn tsirelson_bound_and_lp_separation() {
    let m = bell_max_q2(&BellFunctional::chsh(), 16, 40).unwrap();
    assert!((m.value - 2.0 * SQRT_2).abs() < 1e-6);
    let p = born_point(&tsirelson());
    match local_membership_lp(&p).unwrap() {
        LocalMembership::Nonlocal { functional, value, local_max } => {
            assert!(value > local_max + 1e-6);
            assert!((functional.value(&p) - value).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

/// Central differences of the hand-rolled Born rule.
fn numeric_tangent(r: &QubitRealization) -> Vec<[f64; 8]> {
    let h = 1e-6;
    (0..5)
        .map(|k| {
            let mut hi = r.params();
            let mut lo = r.params();
            hi[k] += h;
            lo[k] -= h;
            let ph = oracle_behavior(&QubitRealization::from_params(&hi)).to_vector();
            let pl = oracle_behavior(&QubitRealization::from_params(&lo)).to_vector();
            std::array::from_fn(|i| (ph[i] - pl[i]) / (2.0 * h))
        })
        .collect()
}

fn dot(a: &[f64; 8], b: &[f64; 8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn witness_directions_are_flat_against_numeric_tangents() {
    let r = non_alternating();
    let w = find_witness(&r).unwrap().unwrap();
    assert_eq!(w.sector, (1, 1));
    let oc = orthocomplement(&tangent_basis(&r).unwrap());
    let p = born_point(&r).to_vector();
    for beta in &oc.vectors {
        for row in numeric_tangent(&r) {
            assert!(dot(beta, &row).abs() < 1e-8);
        }
        assert!((dot(beta, &w.l.to_vector()) - dot(beta, &p)).abs() < 1e-12);
    }
    assert!(local_membership_lp(&w.l).unwrap().is_local());
}

#[test]
fn sector_solution_on_local_example() {
    let r16 = QubitRealization::new(PI / 16.0, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4]);
    let sol = solve_sector(&r16, (1, 1)).unwrap();
    let res = sector_system_residual(&r16, (1, 1), &sol.coeffs).unwrap();
    assert!(res.iter().all(|v| v.abs() < 1e-10));
    assert_eq!(sol.coeffs[4], 0.0);
}

#[test]
fn frozen_relabeling_of_r3() {
    let g = SymmetryElement::party_swap();
    let q = apply_symmetry(&g, &born_point(&r3()));
    assert_eq!(q.marg_a, born_point(&r3()).marg_b);
    assert_eq!(q.corr[0][1], born_point(&r3()).corr[1][0]);
}

#[test]
fn behavior_json_roundtrip() {
    let p = born_point(&r3());
    let s = serde_json::to_string(&p).unwrap();
    assert!(s.contains("\"margA\"") && s.contains("\"corr\""));
    let q: Behavior = serde_json::from_str(&s).unwrap();
    assert_eq!(p, q);
}

#[test]
fn behavior_json_accepts_decimal_strings() {
    let q: Behavior = serde_json::from_str(r#"{"margA":["0.5",0],"margB":[0," -0.25"],"corr":[["1e-1",0],[0,"0"]]}"#).unwrap();
    assert_eq!(q, Behavior::new([0.5, 0.0], [0.0, -0.25], [[0.1, 0.0], [0.0, 0.0]]));
    assert!(serde_json::from_str::<Behavior>(r#"{"margA":["x",0],"margB":[0,0],"corr":[[0,0],[0,0]]}"#).is_err());
}
