use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PhiInstance, PhiKind, ProblemSpec};
use crate::scalar::Real;

/// Lagrangian dual of the divergence-ball worst case.
///
/// The Lagrangian is
/// `L(p) = Σ h_i p_i + α(Σ ref_i φ(p_i/ref_i) − radius) + β(Σ p_i − 1) + Σ λ_i p_i`
/// with `α ≤ 0` and `β` free, maximized over `p`. `λ_i ≥ 0` prices
/// `p_i ≥ 0` and is nonzero only where the stationarity row
/// `α φ'(p_i/ref_i) + β + h_i + λ_i = 0` would otherwise need a negative
/// `p_i`. Scenarios with zero reference weight are pinned at zero and carry
/// no multiplier.
///
/// When the radius is zero the ball is the single point `ref` and the dual
/// infimum is only approached as `α → −∞`; `alpha` is then `None` and
/// `value` is the limit.
#[derive(Debug, Clone, Serialize)]
pub struct PhiCertificate<T> {
    pub alpha: Option<T>,
    pub beta: T,
    pub lambda: Vec<T>,
    /// Maximizer of the Lagrangian at the reported multipliers.
    pub p: Vec<T>,
    pub value: T,
    /// Largest stationarity or sign violation.
    pub residual: T,
}

/// Golden-section iterations on the divergence multiplier.
const GOLDEN_STEPS: usize = 200;
/// Bisection steps on the normalization multiplier.
const BISECT_STEPS: usize = 200;

struct Lagrangian<'a, T> {
    inst: &'a PhiInstance<T>,
    /// Scenarios with positive reference weight.
    support: Vec<usize>,
}

impl<'a, T: Real> Lagrangian<'a, T> {
    /// `argmax_{t ≥ 0} s·t − weight·φ(t)` for `weight > 0`.
    fn best_ratio(&self, s: T, weight: T) -> T {
        match self.inst.phi {
            PhiKind::Kl => (s / weight - T::one()).exp(),
            PhiKind::ChiSq => (T::one() + s / (T::lit(2.0) * weight)).max(T::zero()),
        }
    }

    fn ratios(&self, weight: T, beta: T) -> Vec<T> {
        self.support
            .iter()
            .map(|&i| self.best_ratio(self.inst.costs[i] + beta, weight))
            .collect()
    }

    fn mass(&self, weight: T, beta: T) -> T {
        self.support
            .iter()
            .zip(self.ratios(weight, beta))
            .map(|(&i, t)| self.inst.reference[i] * t)
            .sum()
    }

    /// Normalization multiplier minimizing the dual for a fixed divergence
    /// multiplier `−weight`; it makes the maximizer sum to one.
    fn beta(&self, weight: T) -> T {
        // The maximizer has ratio 1 where h_i + β = weight·φ'(1), so the
        // extreme costs bracket the root.
        let h = |i: &usize| self.inst.costs[*i];
        let shift = weight * self.inst.phi.derivative(T::one());
        let mut lo = shift - self.support.iter().map(h).fold(T::neg_infinity(), T::max);
        let mut hi = shift - self.support.iter().map(h).fold(T::infinity(), T::min);
        for _ in 0..BISECT_STEPS {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.mass(weight, mid) >= T::one() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / T::lit(2.0)
    }

    /// Dual function at `α = −weight`, minimized over `β`.
    fn value(&self, weight: T) -> (T, T) {
        if weight <= T::zero() {
            // Without the divergence term the maximum over the simplex is
            // the largest cost on the support.
            let top = self
                .support
                .iter()
                .map(|&i| self.inst.costs[i])
                .fold(T::neg_infinity(), T::max);
            return (top, -top);
        }
        let beta = self.beta(weight);
        let mut total = weight * self.inst.radius - beta;
        for (&i, t) in self.support.iter().zip(self.ratios(weight, beta)) {
            let s = self.inst.costs[i] + beta;
            total += self.inst.reference[i] * (s * t - weight * self.inst.phi.value(t));
        }
        (total, beta)
    }
}

/// Maximizer of `Σ costs_i p_i − weight·Σ ref_i φ(p_i/ref_i)` over the
/// simplex; the radius of `inst` is ignored.
pub(crate) fn simplex_argmax<T: Real>(inst: &PhiInstance<T>, weight: T) -> Vec<T> {
    let n = inst.costs.len();
    let support: Vec<usize> = (0..n).filter(|&i| inst.reference[i] > T::zero()).collect();
    let lag = Lagrangian { inst, support };
    let mut p = vec![T::zero(); n];
    if weight <= T::zero() {
        let best = lag
            .support
            .iter()
            .copied()
            .max_by(|&i, &j| inst.costs[i].partial_cmp(&inst.costs[j]).unwrap())
            .unwrap();
        p[best] = T::one();
        return p;
    }
    let beta = lag.beta(weight);
    for (&i, t) in lag.support.iter().zip(lag.ratios(weight, beta)) {
        p[i] = inst.reference[i] * t;
    }
    p
}

pub fn phi_certificate<T: Real>(inst: &PhiInstance<T>) -> Result<PhiCertificate<T>> {
    if inst.radius < T::zero() {
        return Err(Error::param("radius", inst.radius.as_f64(), "must be nonnegative"));
    }
    if inst.phi == PhiKind::Kl && inst.reference.iter().any(|&r| r <= T::zero()) {
        return Err(Error::param("weights", 0.0, "reference weights must be positive under KL"));
    }
    let n = inst.costs.len();
    let support: Vec<usize> = (0..n).filter(|&i| inst.reference[i] > T::zero()).collect();
    let lag = Lagrangian { inst, support };

    if inst.radius == T::zero() {
        let value = crate::scalar::dot(&inst.reference, &inst.costs);
        return Ok(PhiCertificate {
            alpha: None,
            beta: -value,
            lambda: vec![T::zero(); n],
            p: inst.reference.clone(),
            value,
            residual: T::zero(),
        });
    }

    // The reference point has zero divergence, so the optimal multiplier is
    // at most (max h − ref·h) / radius.
    let (top, _) = lag.value(T::zero());
    let nominal = crate::scalar::dot(&inst.reference, &inst.costs);
    let weight_max = T::lit(2.0) * (top - nominal) / inst.radius + T::one();

    let ratio = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (T::zero(), weight_max);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (lag.value(c).0, lag.value(d).0);
    for _ in 0..GOLDEN_STEPS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = lag.value(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = lag.value(d).0;
        }
        if b - a <= T::epsilon() * (T::one() + b) {
            break;
        }
    }
    // Candidate endpoints too: the minimum may sit at weight 0.
    let weight = [T::zero(), a, (a + b) / T::lit(2.0), b]
        .into_iter()
        .min_by(|&u, &v| lag.value(u).0.partial_cmp(&lag.value(v).0).unwrap())
        .unwrap();
    if weight >= weight_max * T::lit(0.999) {
        return Err(Error::BracketExhausted {
            what: "divergence multiplier".into(),
            lo: -weight_max.as_f64(),
            hi: 0.0,
        });
    }
    let (value, beta) = lag.value(weight);

    let mut p = vec![T::zero(); n];
    let mut lambda = vec![T::zero(); n];
    let mut residual = T::zero();
    if weight > T::zero() {
        for (&i, t) in lag.support.iter().zip(lag.ratios(weight, beta)) {
            p[i] = inst.reference[i] * t;
            let stationarity = -weight * inst.phi.derivative(t) + beta + inst.costs[i];
            if t == T::zero() {
                // Clipped at zero: the bound multiplier absorbs the slope.
                lambda[i] = -stationarity;
                residual = residual.max(-lambda[i]);
            } else {
                residual = residual.max(stationarity.abs());
            }
        }
    } else {
        // The divergence constraint is slack; all mass can sit on the best
        // scenarios, so λ_i = top − h_i.
        let best = lag
            .support
            .iter()
            .copied()
            .max_by(|&i, &j| inst.costs[i].partial_cmp(&inst.costs[j]).unwrap())
            .unwrap();
        p[best] = T::one();
        for &i in &lag.support {
            lambda[i] = -(beta + inst.costs[i]);
            residual = residual.max(-lambda[i]);
        }
    }
    let mass: T = p.iter().copied().sum();
    residual = residual.max((mass - T::one()).abs());

    Ok(PhiCertificate {
        alpha: Some(-weight),
        beta,
        lambda,
        p,
        value,
        residual,
    })
}

pub fn dual_value_phi<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<PhiCertificate<T>> {
    phi_certificate(&spec.phi_instance(x)?)
}
