//! Acceptance checks. Each test prints one PASS/FAIL line to stderr, which
//! bypasses libtest's output capture, then asserts.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ddro::dual::{dual_value, phi_certificate, validate_duality, DualCertificate};
use ddro::expr::Expr;
use ddro::inner::{transport_distance, worst_case};
use ddro::model::{
    distance_matrix, AmbiguitySpec, CostDef, DySpec, Family, KsSpec, MomentRow, Norm,
    PhiKind, PhiSpec, ProblemSpec, RecourseRow, ScenarioSet, SmSpec, SupportBox, WSpec, WcSpec,
};
use ddro::outer::{minimize, objective_value, SolveOptions};
use ddro::sip::{build_phi_sip, build_wass_cont, solve_sip, verify, KsCellGrid};

fn report(id: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict}  {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A literal safe to splice into an expression.
fn lit(v: f64) -> String {
    format!("({v:?})")
}

fn ex(text: &str, n: usize, d: usize) -> Expr {
    Expr::parse(text, n, d).unwrap_or_else(|e| panic!("{text}: {e}"))
}

fn random_points(r: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn random_weights(r: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|_| r.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn random_x(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(0.0..1.0)).collect()
}

/// Random cost mixing decision and scenario components.
fn random_cost(r: &mut ChaCha8Rng, n: usize, d: usize) -> String {
    let mut h = lit(r.gen_range(-1.0..1.0));
    for k in 1..=d {
        let j = 1 + (k - 1) % n;
        h += &format!(
            " + {}*xi{k} + {}*x{j}*xi{k} + {}*(xi{k} - x{j})^2",
            lit(r.gen_range(-1.0..1.0)),
            lit(r.gen_range(-1.0..1.0)),
            lit(r.gen_range(-0.5..0.5)),
        );
    }
    h
}

fn spec(
    n: usize,
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    cost: CostDef,
    ambiguity: AmbiguitySpec,
) -> ProblemSpec {
    ProblemSpec::new(vec![0.0; n], vec![1.0; n], ScenarioSet::new(points, weights), cost, ambiguity)
}

fn closed(h: &str, n: usize, d: usize) -> CostDef {
    CostDef::ClosedForm { h: ex(h, n, d) }
}

fn mean_of(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> f64 {
    points.iter().map(|p| f(p)).sum::<f64>() / points.len() as f64
}

fn random_sm(r: &mut ChaCha8Rng) -> ProblemSpec {
    let (n, d) = (2, r.gen_range(1..=3));
    let count = r.gen_range(2..=8);
    let points = random_points(r, count, d);
    let moments = (0..r.gen_range(1..=4))
        .map(|_| {
            let (a, b) = (r.gen_range(1..=d), r.gen_range(1..=d));
            let f = if r.gen_bool(0.5) { format!("xi{a}") } else { format!("xi{a}*xi{b}") };
            let fx = ex(&f, n, d);
            let m = mean_of(&points, |p| fx.eval(&[0.0, 0.0], Some(p)).unwrap());
            // The uniform distribution stays feasible for every x.
            MomentRow {
                f: fx,
                lower: ex(&format!("{} - {}*x1", lit(m - r.gen_range(0.0..0.3)), lit(r.gen_range(0.0..0.5))), n, d),
                upper: ex(&format!("{} + {}*x2", lit(m + r.gen_range(0.0..0.3)), lit(r.gen_range(0.0..0.5))), n, d),
            }
        })
        .collect();
    let p_upper = r.gen_bool(0.5).then(|| {
        (0..count)
            .map(|_| ex(&format!("{} + 0.2*x1", lit(1.0 / count as f64 + r.gen_range(0.0..0.4))), n, d))
            .collect()
    });
    let h = random_cost(r, n, d);
    spec(
        n,
        points,
        None,
        closed(&h, n, d),
        AmbiguitySpec::Sm(SmSpec { moments, p_lower: None, p_upper }),
    )
}

fn random_norm(r: &mut ChaCha8Rng) -> Norm {
    [Norm::L1, Norm::L2, Norm::Linf][r.gen_range(0..3)]
}

fn random_w(r: &mut ChaCha8Rng) -> ProblemSpec {
    let (n, d) = (2, r.gen_range(1..=3));
    let count = r.gen_range(2..=8);
    let points = random_points(r, count, d);
    let weights = random_weights(r, count);
    let radius = format!("{} + {}*x1", lit(r.gen_range(0.0..0.5)), lit(r.gen_range(0.0..0.5)));
    let h = random_cost(r, n, d);
    spec(
        n,
        points,
        Some(weights),
        closed(&h, n, d),
        AmbiguitySpec::W(WSpec { radius: ex(&radius, n, d), norm: random_norm(r) }),
    )
}

fn random_ks(r: &mut ChaCha8Rng) -> ProblemSpec {
    let (n, d) = (2, r.gen_range(1..=3));
    let count = r.gen_range(2..=8);
    let points = random_points(r, count, d);
    let weights = random_weights(r, count);
    let radius = format!("{} + {}*x2", lit(r.gen_range(0.0..0.3)), lit(r.gen_range(0.0..0.3)));
    let h = random_cost(r, n, d);
    spec(
        n,
        points,
        Some(weights),
        closed(&h, n, d),
        AmbiguitySpec::Ks(KsSpec { radius: ex(&radius, n, d), order: None }),
    )
}

fn random_phi(r: &mut ChaCha8Rng, phi: PhiKind, max_count: usize) -> ProblemSpec {
    let (n, d) = (2, r.gen_range(1..=3));
    let count = r.gen_range(2..=max_count);
    let points = random_points(r, count, d);
    let weights = random_weights(r, count);
    let radius = format!("{} + {}*x1", lit(r.gen_range(0.01..0.5)), lit(r.gen_range(0.0..0.5)));
    let h = random_cost(r, n, d);
    spec(
        n,
        points,
        Some(weights),
        closed(&h, n, d),
        AmbiguitySpec::Phi(PhiSpec { radius: ex(&radius, n, d), phi }),
    )
}

/// Mean and covariance are the sample moments shifted slightly with `x`, so
/// the uniform distribution is strictly feasible.
fn random_dy(r: &mut ChaCha8Rng) -> ProblemSpec {
    let (n, d) = (1, r.gen_range(1..=3));
    let count = r.gen_range(d + 1..=8);
    let points = random_points(r, count, d);
    let centre: Vec<f64> = (0..d).map(|k| mean_of(&points, |p| p[k])).collect();
    let mean = (0..d)
        .map(|k| ex(&format!("{} + 0.05*x", lit(centre[k])), n, d))
        .collect();
    let cov = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let s = mean_of(&points, |p| (p[a] - centre[a]) * (p[b] - centre[b]));
                    ex(&lit(s + if a == b { 0.1 } else { 0.0 }), n, d)
                })
                .collect()
        })
        .collect();
    let alpha = ex(&lit(r.gen_range(0.2..1.0)), n, d);
    let beta = ex(&lit(r.gen_range(1.5..3.0)), n, d);
    let h = random_cost(r, n, d);
    spec(n, points, None, closed(&h, n, d), AmbiguitySpec::Dy(DySpec { mean, cov, alpha, beta }))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs())
}

#[test]
fn c01_strong_duality_lp_families() {
    let mut details = Vec::new();
    let mut pass = true;
    let builders: [(&str, fn(&mut ChaCha8Rng) -> ProblemSpec); 3] =
        [("sm", random_sm), ("w", random_w), ("ks", random_ks)];
    for (name, build) in builders {
        let start = std::time::Instant::now();
        let mut r = rng(1);
        let mut worst = 0.0f64;
        let mut failures = 0;
        for _ in 0..100 {
            let s = build(&mut r);
            for _ in 0..5 {
                let x = random_x(&mut r, 2);
                match (worst_case(&s, &x), dual_value(&s, &x)) {
                    (Ok(p), Ok(c)) => worst = worst.max(rel(p.value, c.value())),
                    _ => failures += 1,
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        pass &= failures == 0 && worst <= 1e-6 && secs < 60.0;
        details.push(format!("{name} max rel gap {worst:.2e}, {failures} errors, {secs:.1}s"));
    }
    report(1, "strong duality, LP families", pass, &details.join("; "));
}

#[test]
fn c02_strong_duality_dy() {
    let mut r = rng(2);
    let (mut worst, mut min_eig, mut failures) = (0.0f64, f64::INFINITY, Vec::new());
    for k in 0..50 {
        let s = random_dy(&mut r);
        let x = random_x(&mut r, 1);
        let gap = validate_duality(&s, &x, Family::Dy);
        let cert = dual_value(&s, &x);
        match (gap, cert) {
            (Ok(g), Ok(DualCertificate::Dy(c))) => {
                worst = worst.max(g.rel_gap);
                min_eig = min_eig.min(c.y_min_eigenvalue);
            }
            (g, c) => failures.push(format!("#{k}: {:?} {:?}", g.err(), c.err())),
        }
    }
    let pass = failures.is_empty() && worst <= 5e-6 && min_eig >= -1e-8;
    report(
        2,
        "strong duality, DY",
        pass,
        &format!("max rel gap {worst:.2e}, min eigenvalue of Y {min_eig:.2e}, errors {failures:?}"),
    );
}

#[test]
fn c03_strong_duality_phi() {
    let mut details = Vec::new();
    let mut pass = true;
    for phi in [PhiKind::Kl, PhiKind::ChiSq] {
        let mut r = rng(3);
        let (mut worst, mut failures) = (0.0f64, 0);
        for _ in 0..50 {
            let s = random_phi(&mut r, phi, 8);
            let x = random_x(&mut r, 2);
            match validate_duality(&s, &x, Family::Phi) {
                Ok(g) => worst = worst.max(g.rel_gap),
                Err(_) => failures += 1,
            }
        }
        let (mut sip_worst, mut sip_failures) = (0.0f64, 0);
        for _ in 0..10 {
            let s = random_phi(&mut r, phi, 4);
            let x = random_x(&mut r, 2);
            let kkt = phi_certificate(&s.phi_instance(&x).unwrap()).unwrap().value;
            match build_phi_sip(&s, &x).and_then(|p| solve_sip(&p)) {
                Ok((_, state)) => sip_worst = sip_worst.max((state.value() - kkt).abs()),
                Err(_) => sip_failures += 1,
            }
        }
        pass &= failures == 0 && worst <= 1e-5 && sip_failures == 0 && sip_worst <= 1e-4;
        details.push(format!(
            "{phi:?} max rel gap {worst:.2e} ({failures} errors), semi-infinite vs KKT {sip_worst:.2e} ({sip_failures} errors)"
        ));
    }
    report(3, "strong duality, PHI", pass, &details.join("; "));
}

/// Best `Σ p_k h_k` over the step-1e-3 grid on the 3-point simplex.
fn simplex_grid_max(h: [f64; 3], member: impl Fn(&[f64; 3]) -> bool + Sync) -> Option<f64> {
    const STEPS: usize = 1000;
    (0..=STEPS)
        .into_par_iter()
        .filter_map(|i| {
            (0..=STEPS - i)
                .filter_map(|j| {
                    let p = [i as f64 / 1e3, j as f64 / 1e3, (STEPS - i - j) as f64 / 1e3];
                    member(&p).then(|| p[0] * h[0] + p[1] * h[1] + p[2] * h[2])
                })
                .max_by(f64::total_cmp)
        })
        .max_by(f64::total_cmp)
}

const SLACK: f64 = 1e-12;

/// Sorted 1-D scenarios with a positive reference and a decision-dependent
/// parameter `a + b·x`.
struct Line {
    xi: [f64; 3],
    reference: [f64; 3],
    a: f64,
    b: f64,
    x: f64,
}

impl Line {
    fn new(r: &mut ChaCha8Rng) -> Self {
        let mut xi = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        xi.sort_by(f64::total_cmp);
        let w = random_weights(r, 3);
        Self {
            xi,
            reference: [w[0], w[1], w[2]],
            a: r.gen_range(0.05..0.3),
            b: r.gen_range(0.0..0.2),
            x: r.gen_range(0.0..1.0),
        }
    }

    fn param(&self) -> f64 {
        self.a + self.b * self.x
    }

    fn param_expr(&self) -> Expr {
        ex(&format!("{} + {}*x", lit(self.a), lit(self.b)), 1, 1)
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.xi.iter().map(|&v| vec![v]).collect()
    }

    fn weights(&self) -> Option<Vec<f64>> {
        Some(self.reference.to_vec())
    }

    /// Largest CDF difference and the area between the CDFs.
    fn cdf_gaps(&self, p: &[f64; 3]) -> (f64, f64) {
        let (mut cum, mut sup, mut area) = (0.0, 0.0f64, 0.0);
        for k in 0..3 {
            cum += p[k] - self.reference[k];
            sup = sup.max(cum.abs());
            if k < 2 {
                area += cum.abs() * (self.xi[k + 1] - self.xi[k]);
            }
        }
        (sup, area)
    }

    fn in_ball(&self, family: Family, p: &[f64; 3]) -> bool {
        let budget = self.param();
        match family {
            Family::W => self.cdf_gaps(p).1 <= budget + SLACK,
            Family::Ks => self.cdf_gaps(p).0 <= budget + SLACK,
            Family::Phi => {
                let div: f64 = (0..3)
                    .map(|k| {
                        let t = p[k] / self.reference[k];
                        self.reference[k] * if t > 0.0 { t * t.ln() - t + 1.0 } else { 1.0 }
                    })
                    .sum();
                div <= budget + SLACK
            }
            Family::Sm => {
                let (m1, m2) = (mean_of_p(p, self.xi, |v| v), mean_of_p(p, self.xi, |v| v * v));
                let (r1, r2) = (mean_of_p(&self.reference, self.xi, |v| v), mean_of_p(&self.reference, self.xi, |v| v * v));
                (m1 - r1).abs() <= budget + SLACK && (m2 - r2).abs() <= budget + SLACK
            }
            _ => unreachable!(),
        }
    }

    fn spec(&self, family: Family, cost: CostDef) -> ProblemSpec {
        let radius = self.param_expr();
        let ambiguity = match family {
            Family::W => AmbiguitySpec::W(WSpec { radius, norm: Norm::L1 }),
            Family::Ks => AmbiguitySpec::Ks(KsSpec { radius, order: None }),
            Family::Phi => AmbiguitySpec::Phi(PhiSpec { radius, phi: PhiKind::Kl }),
            Family::Sm => {
                let r1 = mean_of_p(&self.reference, self.xi, |v| v);
                let r2 = mean_of_p(&self.reference, self.xi, |v| v * v);
                let row = |f: &str, centre: f64| MomentRow {
                    f: ex(f, 1, 1),
                    lower: ex(&format!("{} - {} - {}*x", lit(centre), lit(self.a), lit(self.b)), 1, 1),
                    upper: ex(&format!("{} + {} + {}*x", lit(centre), lit(self.a), lit(self.b)), 1, 1),
                };
                AmbiguitySpec::Sm(SmSpec {
                    moments: vec![row("xi", r1), row("xi^2", r2)],
                    p_lower: None,
                    p_upper: None,
                })
            }
            _ => unreachable!(),
        };
        ProblemSpec::new(vec![0.0], vec![1.0], ScenarioSet::new(self.points(), self.weights()), cost, ambiguity)
    }
}

fn mean_of_p(p: &[f64; 3], xi: [f64; 3], f: impl Fn(f64) -> f64) -> f64 {
    (0..3).map(|k| p[k] * f(xi[k])).sum()
}

/// `h = c0 + c1·ξ + c2·(ξ − x)²`.
struct Quadratic([f64; 3]);

impl Quadratic {
    fn random(r: &mut ChaCha8Rng) -> Self {
        Self([r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5)])
    }

    fn at(&self, x: f64, xi: f64) -> f64 {
        self.0[0] + self.0[1] * xi + self.0[2] * (xi - x).powi(2)
    }

    fn cost(&self) -> CostDef {
        let [a, b, c] = self.0;
        closed(&format!("{} + {}*xi + {}*(xi - x)^2", lit(a), lit(b), lit(c)), 1, 1)
    }
}

struct DyLine {
    xi: [f64; 3],
    mean: f64,
    shift: f64,
    var: f64,
    alpha: f64,
    beta: f64,
    x: f64,
}

impl DyLine {
    fn new(r: &mut ChaCha8Rng) -> Self {
        let mut xi = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        xi.sort_by(f64::total_cmp);
        let mean = xi.iter().sum::<f64>() / 3.0;
        let var = xi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0 + 0.05;
        Self {
            xi,
            mean,
            shift: r.gen_range(-0.05..0.05),
            var,
            alpha: r.gen_range(0.1..0.8),
            beta: r.gen_range(1.2..2.5),
            x: r.gen_range(0.0..1.0),
        }
    }

    fn centre(&self) -> f64 {
        self.mean + self.shift * self.x
    }

    fn member(&self, p: &[f64; 3]) -> bool {
        let mu = self.centre();
        let m = mean_of_p(p, self.xi, |v| v);
        let second = mean_of_p(p, self.xi, |v| (v - mu).powi(2));
        (m - mu).powi(2) / self.var <= self.alpha + SLACK && second <= self.beta * self.var + SLACK
    }

    fn spec(&self, cost: CostDef) -> ProblemSpec {
        ProblemSpec::new(
            vec![0.0],
            vec![1.0],
            ScenarioSet::new(self.xi.iter().map(|&v| vec![v]).collect(), None),
            cost,
            AmbiguitySpec::Dy(DySpec {
                mean: vec![ex(&format!("{} + {}*x", lit(self.mean), lit(self.shift)), 1, 1)],
                cov: vec![vec![ex(&lit(self.var), 1, 1)]],
                alpha: ex(&lit(self.alpha), 1, 1),
                beta: ex(&lit(self.beta), 1, 1),
            }),
        )
    }
}

#[test]
fn c04_brute_force_on_the_simplex() {
    let mut r = rng(4);
    let mut details = Vec::new();
    let mut pass = true;
    for family in [Family::Sm, Family::Dy, Family::W, Family::Phi, Family::Ks] {
        let (mut worst, mut failures) = (0.0f64, 0);
        for _ in 0..20 {
            let q = Quadratic::random(&mut r);
            let (s, x, grid) = if family == Family::Dy {
                let line = DyLine::new(&mut r);
                let h = line.xi.map(|v| q.at(line.x, v));
                (line.spec(q.cost()), line.x, simplex_grid_max(h, |p| line.member(p)))
            } else {
                let line = Line::new(&mut r);
                let h = line.xi.map(|v| q.at(line.x, v));
                (line.spec(family, q.cost()), line.x, simplex_grid_max(h, |p| line.in_ball(family, p)))
            };
            match (worst_case(&s, &[x]), grid) {
                (Ok(wc), Some(g)) => worst = worst.max((wc.value - g).abs()),
                _ => failures += 1,
            }
        }
        pass &= failures == 0 && worst <= 2e-3;
        details.push(format!("{family} {worst:.1e}"));
    }
    report(4, "brute force on a 1e-3 simplex grid", pass, &format!("max |Φ − grid|: {}", details.join(", ")));
}

/// Area between the CDFs of two distributions on sorted points.
fn cdf_area(points: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut area = 0.0;
    for k in 0..points.len() - 1 {
        cum += p[k] - q[k];
        area += cum.abs() * (points[k + 1] - points[k]);
    }
    area
}

#[test]
fn c05_wasserstein_closed_form() {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (na, nb) = (r.gen_range(1..=6), r.gen_range(1..=6));
        let mut tagged: Vec<(f64, bool)> = (0..na + nb)
            .map(|k| (r.gen_range(-2.0..2.0), k < na))
            .collect();
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let points: Vec<f64> = tagged.iter().map(|t| t.0).collect();
        let p: Vec<f64> = tagged.iter().map(|t| if t.1 { 1.0 / na as f64 } else { 0.0 }).collect();
        let q: Vec<f64> = tagged.iter().map(|t| if t.1 { 0.0 } else { 1.0 / nb as f64 }).collect();
        let dist = distance_matrix(&points.iter().map(|&v| vec![v]).collect::<Vec<_>>(), Norm::L1);
        let lp = transport_distance(&p, &q, &dist).unwrap();
        worst = worst.max((lp - cdf_area(&points, &p, &q)).abs());
    }
    report(5, "1-D Wasserstein closed form", worst <= 1e-8, &format!("max |LP − CDF area| {worst:.1e}"));
}

fn budget_spec(family: Family, points: &[Vec<f64>], weights: &[f64], h: &str, budget: f64) -> ProblemSpec {
    let d = points[0].len();
    let radius = ex(&lit(budget), 1, d);
    let ambiguity = match family {
        Family::W => AmbiguitySpec::W(WSpec { radius, norm: Norm::L2 }),
        Family::Phi => AmbiguitySpec::Phi(PhiSpec { radius, phi: PhiKind::ChiSq }),
        Family::Ks => AmbiguitySpec::Ks(KsSpec { radius, order: None }),
        _ => unreachable!(),
    };
    spec(1, points.to_vec(), Some(weights.to_vec()), closed(h, 1, d), ambiguity)
}

#[test]
fn c06_budget_monotonicity() {
    let mut r = rng(6);
    let mut details = Vec::new();
    let mut pass = true;
    for family in [Family::W, Family::Phi, Family::Ks] {
        let (mut drop, mut zero_err, mut failures) = (0.0f64, 0.0f64, 0);
        for _ in 0..20 {
            let d = r.gen_range(1..=3);
            let count = r.gen_range(2..=8);
            let points = random_points(&mut r, count, d);
            let weights = random_weights(&mut r, count);
            let h = random_cost(&mut r, 1, d);
            let x = random_x(&mut r, 1);
            let top = r.gen_range(0.2..2.0);
            let ladder: Vec<f64> = (0..=10)
                .map(|k| {
                    worst_case(&budget_spec(family, &points, &weights, &h, top * k as f64 / 10.0), &x)
                        .map(|w| w.value)
                        .unwrap_or_else(|_| {
                            failures += 1;
                            f64::NAN
                        })
                })
                .collect();
            for w in ladder.windows(2) {
                drop = drop.max(w[0] - w[1]);
            }
            let hx = ex(&h, 1, d);
            let nominal: f64 = points
                .iter()
                .zip(&weights)
                .map(|(p, w)| w * hx.eval(&x, Some(p)).unwrap())
                .sum();
            zero_err = zero_err.max((ladder[0] - nominal).abs());
        }
        pass &= failures == 0 && drop <= 1e-9 && zero_err <= 1e-8;
        details.push(format!("{family} largest decrease {drop:.1e}, zero budget error {zero_err:.1e}"));
    }
    report(6, "budget monotonicity", pass, &details.join("; "));
}

#[test]
fn c07_continuous_wasserstein_exchange() {
    let mut r = rng(7);
    let (mut worst_residual, mut worst_mean, mut failures) = (0.0f64, 0.0f64, Vec::new());
    for k in 0..8 {
        let d = if k < 5 { 1 } else { 2 };
        let count = r.gen_range(2..=4);
        let points: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..d).map(|_| r.gen_range(0.05..0.95)).collect())
            .collect();
        let mut h = format!("{}*x1*xi1", lit(r.gen_range(-1.0..1.0)));
        for j in 1..=d {
            h += &format!(
                " + {}*exp(-{}*(xi{j} - {})^2)",
                lit(r.gen_range(0.5..2.0)),
                lit(r.gen_range(2.0..20.0)),
                lit(r.gen_range(0.0..1.0))
            );
        }
        let x = random_x(&mut r, 1);
        for radius in [r.gen_range(0.02..0.3), 0.0] {
            let s = spec(
                1,
                points.clone(),
                None,
                closed(&h, 1, d),
                AmbiguitySpec::Wc(WcSpec {
                    radius: ex(&lit(radius), 1, d),
                    norm: random_norm(&mut r),
                    support: SupportBox { lower: vec![0.0; d], upper: vec![1.0; d] },
                }),
            );
            let outcome = build_wass_cont(&s, &x).and_then(|problem| {
                let (v, state) = solve_sip(&problem)?;
                Ok((verify(&problem, &v)?, state.value()))
            });
            match outcome {
                Ok((residual, value)) => {
                    worst_residual = worst_residual.max(residual);
                    if radius == 0.0 {
                        let hx = ex(&h, 1, d);
                        let mean = mean_of(&points, |p| hx.eval(&x, Some(p)).unwrap());
                        worst_mean = worst_mean.max((value - mean).abs());
                    }
                }
                Err(e) => failures.push(format!("#{k}: {e}")),
            }
        }
    }
    let pass = failures.is_empty() && worst_residual <= 1e-4 && worst_mean <= 1e-6;
    report(
        7,
        "continuous Wasserstein exchange",
        pass,
        &format!("max verification residual {worst_residual:.1e}, r = 0 error {worst_mean:.1e}, errors {failures:?}"),
    );
}

#[test]
fn c08_cell_grid_counts() {
    let mut r = rng(8);
    let mut mismatches = 0;
    for _ in 0..100 {
        let d = r.gen_range(1..=2);
        let count = r.gen_range(1..=6);
        // Distinct coordinates per dimension, inside (0, 1].
        let coords: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let mut ranks: Vec<usize> = (1..=count).collect();
                for i in (1..count).rev() {
                    ranks.swap(i, r.gen_range(0..=i));
                }
                ranks.iter().map(|&k| k as f64 / count as f64).collect()
            })
            .collect();
        let points: Vec<Vec<f64>> = (0..count).map(|i| (0..d).map(|k| coords[k][i]).collect()).collect();
        let support = SupportBox { lower: vec![0.0; d], upper: vec![1.0; d] };
        let grid = KsCellGrid::new(&points, &support).unwrap();
        for flat in 0..grid.num_cells() {
            let (corner, _) = grid.bounds(&grid.cell(flat));
            let brute = points
                .iter()
                .filter(|p| p.iter().zip(&corner).all(|(v, c)| v <= c))
                .count();
            mismatches += usize::from(brute != grid.counts[flat]);
        }
    }
    report(8, "cell grid counts", mismatches == 0, &format!("{mismatches} mismatched cells over 100 sample sets"));
}

/// Recourse `h = min y` subject to `y ≥ a(ξ − x)`, `y ≥ b(x − ξ)`, `y ≥ c`.
struct Recourse {
    a: f64,
    b: f64,
    c: f64,
}

impl Recourse {
    fn random(r: &mut ChaCha8Rng) -> Self {
        Self { a: r.gen_range(0.5..2.0), b: r.gen_range(0.5..2.0), c: r.gen_range(-0.5..0.2) }
    }

    fn at(&self, x: f64, xi: f64) -> f64 {
        (self.a * (xi - x)).max(self.b * (x - xi)).max(self.c)
    }

    fn cost(&self) -> CostDef {
        let row = |t: f64, rhs: String| RecourseRow {
            w: vec![ex("1", 1, 1)],
            t: vec![ex(&lit(t), 1, 1)],
            rhs: ex(&rhs, 1, 1),
        };
        CostDef::Recourse {
            q: vec![ex("1", 1, 1)],
            rows: vec![
                row(self.a, format!("{}*xi", lit(self.a))),
                row(-self.b, format!("{}*xi", lit(-self.b))),
                row(0.0, lit(self.c)),
            ],
        }
    }
}

#[test]
fn c09_two_stage_nested_brute_force() {
    let mut r = rng(9);
    let mut details = Vec::new();
    let mut pass = true;
    for family in [Family::Sm, Family::W, Family::Phi, Family::Ks] {
        let (mut worst, mut failures) = (0.0f64, 0);
        for _ in 0..10 {
            let line = Line::new(&mut r);
            let recourse = Recourse::random(&mut r);
            let h = line.xi.map(|v| recourse.at(line.x, v));
            let grid = simplex_grid_max(h, |p| line.in_ball(family, p));
            match (worst_case(&line.spec(family, recourse.cost()), &[line.x]), grid) {
                (Ok(wc), Some(g)) => worst = worst.max((wc.value - g).abs()),
                _ => failures += 1,
            }
        }
        pass &= failures == 0 && worst <= 2e-3;
        details.push(format!("{family} {worst:.1e}"));
    }
    report(9, "two-stage against nested brute force", pass, &format!("max |Φ − grid|: {}", details.join(", ")));
}

fn outer_instances() -> Vec<(&'static str, ProblemSpec)> {
    let pts = |v: &[f64]| v.iter().map(|&p| vec![p]).collect::<Vec<_>>();
    let one = |t: &str| ex(t, 1, 1);
    vec![
        (
            "W budget spend",
            ProblemSpec::new(
                vec![0.0],
                vec![1.0],
                ScenarioSet::new(pts(&[0.0, 1.0]), None),
                closed("xi", 1, 1),
                AmbiguitySpec::W(WSpec {
                    radius: one("abs(0.6 - 0.8*x)/2 + (0.6 - 0.8*x)/2"),
                    norm: Norm::L1,
                }),
            )
            .with_objective(one("0.3*x")),
        ),
        (
            "KS shrinking band",
            ProblemSpec::new(
                vec![0.0],
                vec![2.0],
                ScenarioSet::new(pts(&[0.0, 0.5, 1.0, 2.0]), None),
                closed("(xi - x)^2", 1, 1),
                AmbiguitySpec::Ks(KsSpec { radius: one("0.3*exp(-x)"), order: None }),
            )
            .with_objective(one("0.1*x")),
        ),
        (
            "KL radius bought down",
            ProblemSpec::new(
                vec![0.0],
                vec![1.0],
                ScenarioSet::new(pts(&[-1.0, 0.0, 0.5, 1.5]), None),
                closed("abs(xi - 0.4)", 1, 1),
                AmbiguitySpec::Phi(PhiSpec { radius: one("0.5*(1 - x)^2 + 0.01"), phi: PhiKind::Kl }),
            )
            .with_objective(one("0.4*x^2")),
        ),
    ]
}

#[test]
fn c10_outer_search() {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, s) in outer_instances() {
        let (lo, hi) = (s.lower[0], s.upper[0]);
        let steps = ((hi - lo) * 1e3).round() as usize;
        let scan = (0..=steps)
            .map(|k| objective_value(&s, &[lo + (hi - lo) * k as f64 / steps as f64]).unwrap())
            .fold(f64::INFINITY, f64::min);
        let options = SolveOptions { seed: 11, ..SolveOptions::default() };
        let a = minimize(&s, &options).unwrap();
        let b = minimize(&s, &options).unwrap();
        let deterministic = format!("{a:?}") == format!("{b:?}");
        let err = (a.best_value - scan).abs();
        pass &= err <= 2e-3 && deterministic;
        details.push(format!("{name} |F* − scan| {err:.1e}, deterministic {deterministic}"));
    }
    report(10, "outer search", pass, &details.join("; "));
}
