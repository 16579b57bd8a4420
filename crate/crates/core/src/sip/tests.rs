use proptest::prelude::*;

use super::*;
use crate::dual::phi_certificate;
use crate::expr::Expr;
use crate::inner::solve_ks;
use crate::lp::{LinearProgram, RowKind, Sense};
use crate::model::{
    AmbiguitySpec, CostDef, KsSpec, KscSpec, Norm, PhiKind, PhiSpec, ProblemSpec, ScenarioSet,
    SupportBox, WcSpec,
};

fn ex(text: &str, n: usize, d: usize) -> Expr {
    Expr::parse(text, n, d).unwrap()
}

fn unit_box<T: Real>(d: usize) -> IndexSet<T> {
    IndexSet::Box {
        lower: vec![T::zero(); d],
        upper: vec![T::one(); d],
        tags: 1,
        seeds: Vec::new(),
    }
}

fn wc_spec(points: &[f64], h: &str, radius: &str) -> ProblemSpec {
    ProblemSpec::new(
        vec![0.0],
        vec![1.0],
        ScenarioSet::new(points.iter().map(|&p| vec![p]).collect(), None),
        CostDef::ClosedForm { h: ex(h, 1, 1) },
        AmbiguitySpec::Wc(WcSpec {
            radius: ex(radius, 1, 1),
            norm: Norm::L1,
            support: SupportBox {
                lower: vec![0.0],
                upper: vec![1.0],
            },
        }),
    )
}

fn ksc_spec(points: Vec<Vec<f64>>, h: &str, radius: &str, convex: bool) -> ProblemSpec {
    let d = points[0].len();
    ProblemSpec::new(
        vec![0.0],
        vec![1.0],
        ScenarioSet::new(points, None),
        CostDef::ClosedForm { h: ex(h, 1, d) },
        AmbiguitySpec::Ksc(KscSpec {
            radius: ex(radius, 1, d),
            support: SupportBox {
                lower: vec![0.0; d],
                upper: vec![1.0; d],
            },
            convex,
        }),
    )
}

fn grid_max(f: impl Fn(f64) -> f64, steps: usize) -> f64 {
    (0..=steps)
        .map(|k| f(k as f64 / steps as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn toy_problem_binds_at_zero() {
    let problem = SipProblem::<f64>::new(
        vec![-1.0],
        vec![0.0],
        vec![1.0],
        Box::new(ExprConstraint { expr: ex("x - xi", 1, 1), dim: 1 }),
        unit_box(1),
    );
    let (x, state) = solve_sip(&problem).unwrap();
    assert!(x[0].abs() <= problem.epsilon);
    assert!(state.converged);
    assert!(state.last_violation() <= problem.epsilon / 2.0);
    assert!(verify(&problem, &x).unwrap() <= problem.epsilon);
    assert_eq!(state.warnings.len(), 1);
    assert!(state.warnings[0].contains("Lipschitz"));
}

#[test]
fn lipschitz_bound_sizes_the_grid() {
    let problem = SipProblem::<f64>::new(
        vec![-1.0],
        vec![0.0],
        vec![1.0],
        Box::new(ExprConstraint { expr: ex("x - xi", 1, 1), dim: 1 }),
        unit_box(1),
    )
    .with_lipschitz(1.0);
    let state = run_sip(&problem).unwrap();
    assert!(state.warnings.is_empty());
    assert!(state.grid_points as f64 >= 1.0 / problem.epsilon);
}

#[test]
fn finite_index_set_matches_direct_lp() {
    // g(v, t) = a_t·v − b_t on three points, min −v₁ − v₂ over [0, 5]².
    let rows = [([1.0, 2.0], 4.0), ([3.0, 1.0], 6.0), ([1.0, 1.0], 2.5)];
    let points: Vec<IndexPoint<f64>> = (0..3).map(|k| IndexPoint::new(vec![], k)).collect();
    let constraint = AffineFn::new(2, move |t: &IndexPoint<f64>| {
        let (a, b) = rows[t.tag];
        Ok((a.to_vec(), -b))
    });
    let problem = SipProblem::<f64>::new(
        vec![-1.0, -1.0],
        vec![0.0; 2],
        vec![5.0; 2],
        Box::new(constraint),
        IndexSet::Finite(points),
    );
    let (_, state) = solve_sip(&problem).unwrap();

    let mut lp = LinearProgram::new(Sense::Minimize, vec![-1.0, -1.0]);
    for j in 0..2 {
        lp.set_bounds(j, 0.0, 5.0);
    }
    for (a, b) in rows {
        lp.add_row(a.to_vec(), RowKind::Le, b);
    }
    let direct = lp.solve().unwrap().objective;
    assert!((state.value() - direct).abs() < 1e-9);
    assert!(state.last_violation() <= 0.0);
}

#[test]
fn separation_examples() {
    let sep = separation_max(
        |s: &[f64], _| Ok(-(s[0] - 0.37).powi(2)),
        &[0.0],
        &[1.0],
        1,
        &GridOptions::default(),
    )
    .unwrap();
    assert!((sep.point.s[0] - 0.37).abs() < 1e-6);
    assert!(sep.value.abs() < 1e-6);

    let sep = separation_max(
        |s: &[f64], _| Ok(2.0 * s[0] - 3.0 * s[1]),
        &[-1.0, -2.0],
        &[1.0, 2.0],
        1,
        &GridOptions::default(),
    )
    .unwrap();
    assert_eq!(sep.point.s, vec![1.0, -2.0]);
    assert_eq!(sep.value, 8.0);
}

#[test]
fn tagged_separation_matches_dense_scan() {
    // h(s) = 1 − 4(s − 0.6)², samples ξ = (0.1, 0.85), fixed multipliers.
    let xi = [0.1, 0.85];
    let v = [0.2, 0.9, 0.7];
    let g = |s: f64, i: usize| 1.0 - 4.0 * (s - 0.6).powi(2) - v[i] - v[2] * (s - xi[i]).abs();
    let sep = separation_max(
        |s: &[f64], i| Ok(g(s[0], i)),
        &[0.0],
        &[1.0],
        2,
        &GridOptions::default(),
    )
    .unwrap();
    let brute = (0..2)
        .map(|i| grid_max(|s| g(s, i), 100_000))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((sep.value - brute).abs() < 1e-4);
    assert!(sep.value <= brute + 1e-12);
}

#[test]
fn non_affine_constraint_is_rejected() {
    let problem = SipProblem::<f64>::new(
        vec![-1.0],
        vec![0.0],
        vec![2.0],
        Box::new(ExprConstraint { expr: ex("x*x - xi - 0.5", 1, 1), dim: 1 }),
        unit_box(1),
    );
    assert!(matches!(solve_sip(&problem), Err(Error::Invalid(m)) if m.contains("affine")));
}

#[test]
fn iteration_cap_reports_nontermination() {
    let problem = SipProblem::<f64>::new(
        vec![-1.0],
        vec![0.0],
        vec![1.0],
        Box::new(ExprConstraint { expr: ex("x - xi", 1, 1), dim: 1 }),
        unit_box(1),
    )
    .with_max_iterations(0);
    assert!(matches!(solve_sip(&problem), Err(Error::NonTermination { iterations: 0, .. })));
    assert!(!run_sip(&problem).unwrap().converged);
}

#[test]
fn master_infeasible_is_an_error() {
    let problem = SipProblem::<f64>::new(
        vec![1.0],
        vec![0.0],
        vec![1.0],
        Box::new(ExprConstraint { expr: ex("2 - x + xi", 1, 1), dim: 1 }),
        unit_box(1),
    );
    assert!(matches!(solve_sip(&problem), Err(Error::Invalid(m)) if m.contains("infeasible")));
}

#[test]
fn wass_constant_cost_for_any_radius() {
    for r in ["0", "0.3", "2"] {
        let spec = wc_spec(&[0.4], "1.5", r);
        let (value, _) = wass_cont_value::<f64>(&spec, &[0.5]).unwrap();
        assert!((value - 1.5).abs() < 1e-9, "r = {r}: {value}");
    }
}

#[test]
fn wass_zero_radius_gives_empirical_mean() {
    let spec = wc_spec(&[0.1, 0.45, 0.8], "2*exp(-20*(xi - 0.5)^2) + x*xi", "0");
    let x = [0.3];
    let mean = spec.costs(&x).unwrap().iter().sum::<f64>() / 3.0;
    let (value, state) = wass_cont_value::<f64>(&spec, &x).unwrap();
    assert!((value - mean).abs() < 1e-6, "{value} vs {mean}");
    for v in &state.master_values {
        assert!(*v <= value + 1e-9);
    }
}

#[test]
fn wass_large_radius_reaches_the_box_maximum() {
    let spec = wc_spec(&[0.2, 0.7], "1 - 4*(xi - 0.35)^2 + 0.5*xi", "1");
    let x = [0.5];
    let problem = build_wass_cont::<f64>(&spec, &x).unwrap();
    let (v, state) = solve_sip(&problem).unwrap();
    let top = grid_max(|s| 1.0 - 4.0 * (s - 0.35f64).powi(2) + 0.5 * s, 100_000);
    assert!(state.value() >= top - problem.epsilon);
    assert!(state.value() <= top + 1e-9);
    assert!(verify(&problem, &v).unwrap() <= problem.epsilon);
}

#[test]
fn wass_rejects_samples_outside_the_box() {
    let spec = wc_spec(&[0.4, 1.2], "xi", "0.1");
    assert!(matches!(build_wass_cont::<f64>(&spec, &[0.5]), Err(Error::Invalid(_))));
}

#[test]
fn ks_grid_example() {
    let support = SupportBox {
        lower: vec![0.0],
        upper: vec![1.0],
    };
    let grid = KsCellGrid::new(&[vec![0.7], vec![0.3]], &support).unwrap();
    assert_eq!(grid.counts, vec![0, 1, 2]);
    assert_eq!(grid.bounds(&[0]), (vec![0.0], vec![0.3]));
    assert_eq!(grid.bounds(&[1]), (vec![0.3], vec![0.7]));
    assert_eq!(grid.bounds(&[2]), (vec![0.7], vec![1.0]));

    let err = KsCellGrid::new(&[vec![0.3], vec![0.3]], &support).unwrap_err();
    assert!(err.to_string().contains("jitter"));
}

#[test]
fn ks_zero_radius_recovers_the_empirical_mean() {
    // h decreasing in every coordinate peaks at each cell's lower corner,
    // which for the cells holding samples is the sample itself.
    let points = vec![vec![0.15, 0.6], vec![0.5, 0.2], vec![0.8, 0.9]];
    let spec = ksc_spec(points.clone(), "exp(-xi1 - 2*xi2) - x*xi1", "0", false);
    let x = [0.4];
    let mean = spec.costs(&x).unwrap().iter().sum::<f64>() / 3.0;
    let (value, program, sol) = ks_cont_value::<f64>(&spec, &x).unwrap();
    assert!((value - mean).abs() < 1e-7, "{value} vs {mean}");
    assert_eq!(program.grid.num_cells(), 16);
    let mass: f64 = sol.masses.iter().sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn ks_one_dimensional_zero_radius_matches_finite_family() {
    let points = vec![vec![0.62], vec![0.1], vec![0.35], vec![0.9]];
    let h = "2 - 3*xi + x";
    let spec = ksc_spec(points.clone(), h, "0", false);
    let x = [0.2];
    let (value, _, _) = ks_cont_value::<f64>(&spec, &x).unwrap();
    let mut finite = spec.clone();
    finite.ambiguity = AmbiguitySpec::Ks(KsSpec {
        radius: ex("0", 1, 1),
        order: None,
    });
    let wc = solve_ks(&finite.ks_instance(&x).unwrap()).unwrap();
    assert!((value - wc.value).abs() < 1e-7);
}

#[test]
fn ks_full_radius_takes_the_largest_cell_supremum() {
    let spec = ksc_spec(vec![vec![0.3], vec![0.7]], "1 - (xi - 0.55)^2", "1", false);
    let (value, program, _) = ks_cont_value::<f64>(&spec, &[0.0]).unwrap();
    let top = program.cell_sup.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((value - top).abs() < 1e-9);
    assert!((value - 1.0).abs() < 1e-9);
}

#[test]
fn ks_convex_flag_uses_corners() {
    let points = vec![vec![0.3, 0.4], vec![0.7, 0.1]];
    let h = "(xi1 - 0.5)^2 + (xi2 - 0.2)^2";
    let corners = build_ks_cont::<f64>(&ksc_spec(points.clone(), h, "0.2", true), &[0.0]).unwrap();
    let searched = build_ks_cont::<f64>(&ksc_spec(points, h, "0.2", false), &[0.0]).unwrap();
    assert_eq!(corners.cell_points, 2);
    for (a, b) in corners.cell_sup.iter().zip(&searched.cell_sup) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn phi_sip_matches_lagrangian_dual() {
    let cases = [
        (vec![1.0, 3.0, 2.0], vec![0.2, 0.5, 0.3], 0.1, PhiKind::Kl),
        (vec![0.0, 1.0], vec![0.5, 0.5], 0.2, PhiKind::Kl),
        (vec![4.0, -1.0, 2.5, 0.5], vec![0.25; 4], 0.3, PhiKind::ChiSq),
        (vec![1.0, 2.0, 3.0], vec![0.0, 0.6, 0.4], 0.05, PhiKind::ChiSq),
    ];
    for (h, w, r, phi) in cases {
        // With h(ξ) = ξ the scenario points are the costs.
        let spec = ProblemSpec::new(
            vec![0.0],
            vec![1.0],
            ScenarioSet::new(h.iter().map(|&v| vec![v]).collect(), Some(w)),
            CostDef::ClosedForm { h: ex("xi", 1, 1) },
            AmbiguitySpec::Phi(PhiSpec {
                radius: ex(&r.to_string(), 1, 1),
                phi,
            }),
        );
        let x = [0.5];
        let inst = spec.phi_instance(&x).unwrap();
        let problem = build_phi_sip::<f64>(&spec, &x).unwrap().with_epsilon(1e-6);
        let (_, state) = solve_sip(&problem).unwrap();
        let dual = phi_certificate(&inst).unwrap().value;
        assert!((state.value() - dual).abs() < 1e-4, "{phi:?}: {} vs {dual}", state.value());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ks_counts_match_the_empirical_cdf(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..0.99, 2), 1..6),
    ) {
        let support = SupportBox { lower: vec![0.0; 2], upper: vec![1.0; 2] };
        let grid = match KsCellGrid::new(&raw, &support) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };
        for f in 0..grid.num_cells() {
            let cell = grid.cell(f);
            prop_assert_eq!(grid.flat(&cell), f);
            let (corner, _) = grid.bounds(&cell);
            let brute = raw
                .iter()
                .filter(|p| p.iter().zip(&corner).all(|(a, c)| a <= c))
                .count();
            prop_assert_eq!(grid.count(&cell), brute);
        }
        prop_assert_eq!(*grid.counts.last().unwrap(), raw.len());
    }

    #[test]
    fn masters_are_relaxations(a in 0.1f64..2.0, c in -1.0f64..1.0) {
        // min v subject to v ≥ c + a·exp(−9(t − 0.6)²) on [0, 1].
        let problem = SipProblem::<f64>::new(
            vec![1.0],
            vec![-10.0],
            vec![10.0],
            Box::new(ExprConstraint {
                expr: ex(&format!("{c} + {a}*exp(-9*(xi - 0.6)^2) - x"), 1, 1),
                dim: 1,
            }),
            unit_box(1),
        );
        let (_, state) = solve_sip(&problem).unwrap();
        let top = grid_max(|t| c + a * (-9.0 * (t - 0.6f64).powi(2)).exp(), 100_000);
        prop_assert!(state.value() <= top + 1e-9);
        prop_assert!(state.value() >= top - problem.epsilon);
        for v in &state.master_values {
            prop_assert!(*v <= state.value() + 1e-12);
        }
        prop_assert!(verify(&problem, &state.x).unwrap() <= problem.epsilon);
    }
}
