use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{AmbiguitySpec, ProblemSpec, SupportBox};
use crate::scalar::Real;

use super::{separation_max, GridOptions};

/// Partition of the support box by the sample coordinates.
///
/// Along dimension `k` the sorted coordinates `c_1 < … < c_N` split
/// `[a_k, b_k]` into `[a_k, c_1), [c_1, c_2), …, [c_N, b_k]`. Cell `j` (one
/// index per dimension) has lower corner `(c_{j_k})_k` with `c_0 = a`, and
/// `counts` holds the number of samples componentwise at or below that
/// corner, that is `N` times the empirical CDF there.
#[derive(Debug, Clone, Serialize)]
pub struct KsCellGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Sorted sample coordinates per dimension.
    pub coords: Vec<Vec<f64>>,
    /// Cumulative counts, first dimension fastest.
    pub counts: Vec<usize>,
    pub samples: usize,
}

impl KsCellGrid {
    pub fn new(points: &[Vec<f64>], support: &SupportBox) -> Result<Self> {
        let n = points.len();
        let d = support.lower.len();
        let mut coords = Vec::with_capacity(d);
        for k in 0..d {
            let mut c: Vec<f64> = points.iter().map(|p| p[k]).collect();
            c.sort_by(f64::total_cmp);
            if c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invalid(format!(
                    "coordinate {k} repeats across samples; jitter or remove ties so the cell grid is well defined"
                )));
            }
            if n > 0 && (c[0] <= support.lower[k] || c[n - 1] > support.upper[k]) {
                return Err(Error::Invalid(format!(
                    "coordinate {k} of the samples must lie in (lower, upper] of the support box"
                )));
            }
            coords.push(c);
        }
        let mut grid = Self {
            lower: support.lower.clone(),
            upper: support.upper.clone(),
            coords,
            counts: Vec::new(),
            samples: n,
        };
        // A sample with rank r along dimension k is the lower corner of cell
        // r + 1 there; prefix sums of the histogram give the counts.
        let mut counts = vec![0usize; grid.num_cells()];
        for p in points {
            let cell: Vec<usize> = (0..d)
                .map(|k| grid.coords[k].partition_point(|&c| c < p[k]) + 1)
                .collect();
            counts[grid.flat(&cell)] += 1;
        }
        let side = n + 1;
        let mut stride = 1;
        for _ in 0..d {
            for f in 0..counts.len() {
                if (f / stride) % side > 0 {
                    counts[f] += counts[f - stride];
                }
            }
            stride *= side;
        }
        grid.counts = counts;
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn num_cells(&self) -> usize {
        (self.samples + 1).pow(self.dim() as u32)
    }

    pub fn flat(&self, cell: &[usize]) -> usize {
        cell.iter()
            .rev()
            .fold(0, |acc, &j| acc * (self.samples + 1) + j)
    }

    pub fn cell(&self, mut flat: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|_| {
                let j = flat % (self.samples + 1);
                flat /= self.samples + 1;
                j
            })
            .collect()
    }

    /// Corners of the closed cell.
    pub fn bounds(&self, cell: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.samples;
        let lo = (0..self.dim())
            .map(|k| if cell[k] == 0 { self.lower[k] } else { self.coords[k][cell[k] - 1] })
            .collect();
        let hi = (0..self.dim())
            .map(|k| if cell[k] == n { self.upper[k] } else { self.coords[k][cell[k]] })
            .collect();
        (lo, hi)
    }

    pub fn count(&self, cell: &[usize]) -> usize {
        self.counts[self.flat(cell)]
    }
}

/// The finite program for the continuous CDF ball once every cell's
/// supremum of `h` is known.
///
/// Writing `q_j` for the mass placed in cell `j` (at the point where `h`
/// peaks) and `Q_j = Σ_{k ≤ j} q_k` for the mass componentwise below it,
/// the primal is `max Σ q_j sup_j` subject to `Σ q = 1`, `q ≥ 0` and
/// `|Q_j − counts_j/N| ≤ radius`. The LP held here is its dual,
/// `min γ + Σ_j (c_j + radius)·up_j + (c_j − radius)·down_j` subject to
/// `γ + Σ_{j ≥ k} (up_j + down_j) ≥ sup_k` for every cell `k`, with
/// `up ≥ 0`, `down ≤ 0` and `c_j = counts_j/N`. Variables are ordered
/// `γ`, `up`, `down`.
#[derive(Debug, Clone, Serialize)]
pub struct KsContProgram<T> {
    pub grid: KsCellGrid,
    pub radius: T,
    /// Supremum of `h(x, ·)` over each closed cell.
    pub cell_sup: Vec<T>,
    /// Whether suprema were taken at cell corners.
    pub convex: bool,
    /// Points per dimension of the per-cell search, 2 for corners.
    pub cell_points: usize,
    pub lp: LinearProgram<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsContSolution<T> {
    pub value: T,
    pub gamma: T,
    pub up: Vec<T>,
    pub down: Vec<T>,
    /// Worst-case mass per cell.
    pub masses: Vec<T>,
}

/// `build_ks_cont_with` using the default grid.
pub fn build_ks_cont<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<KsContProgram<T>> {
    build_ks_cont_with(spec, x, &GridOptions::default())
}

pub fn build_ks_cont_with<T: Real>(
    spec: &ProblemSpec,
    x: &[T],
    options: &GridOptions,
) -> Result<KsContProgram<T>> {
    let AmbiguitySpec::Ksc(ksc) = &spec.ambiguity else {
        return Err(Error::Unsupported {
            family: spec.family().to_string(),
            operation: "the continuous CDF reformulation".into(),
        });
    };
    let (radius, support) = spec.continuous_params(x)?;
    let grid = KsCellGrid::new(&spec.scenarios.points, support)?;
    let d = grid.dim();
    let cells = grid.num_cells();

    let cell_sup: Vec<T> = (0..cells)
        .into_par_iter()
        .map(|f| -> Result<T> {
            let (lo, hi) = grid.bounds(&grid.cell(f));
            let lo: Vec<T> = lo.into_iter().map(T::lit).collect();
            let hi: Vec<T> = hi.into_iter().map(T::lit).collect();
            if ksc.convex {
                let mut best = T::neg_infinity();
                for mask in 0..1usize << d {
                    let corner: Vec<T> = (0..d)
                        .map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] })
                        .collect();
                    best = best.max(spec.cost_at(x, &corner)?);
                }
                Ok(best)
            } else {
                Ok(separation_max(|s: &[T], _| spec.cost_at(x, s), &lo, &hi, 1, options)?.value)
            }
        })
        .collect::<Result<_>>()?;

    let total = T::count(grid.samples);
    let mut cost = vec![T::one(); 1 + 2 * cells];
    let mut lp_bounds = Vec::with_capacity(2 * cells);
    for j in 0..cells {
        let c = T::count(grid.counts[j]) / total;
        cost[1 + j] = c + radius;
        cost[1 + cells + j] = c - radius;
        lp_bounds.push((1 + j, T::zero(), T::infinity()));
        lp_bounds.push((1 + cells + j, T::neg_infinity(), T::zero()));
    }
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    lp.set_bounds(0, T::neg_infinity(), T::infinity());
    for (j, l, u) in lp_bounds {
        lp.set_bounds(j, l, u);
    }
    for k in 0..cells {
        let below = grid.cell(k);
        let mut entries = vec![(0, T::one())];
        for j in 0..cells {
            if grid.cell(j).iter().zip(&below).all(|(a, b)| a >= b) {
                entries.push((1 + j, T::one()));
                entries.push((1 + cells + j, T::one()));
            }
        }
        lp.add_sparse_row(&entries, RowKind::Ge, cell_sup[k]);
    }
    Ok(KsContProgram {
        grid,
        radius,
        cell_sup,
        convex: ksc.convex,
        cell_points: if ksc.convex { 2 } else { options.points },
        lp,
    })
}

impl<T: Real> KsContProgram<T> {
    pub fn solve(&self) -> Result<KsContSolution<T>> {
        let sol = self.lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Invalid(format!(
                "continuous CDF dual reported {:?}",
                sol.status
            )));
        }
        let cells = self.grid.num_cells();
        Ok(KsContSolution {
            value: sol.objective,
            gamma: sol.x[0],
            up: sol.x[1..1 + cells].to_vec(),
            down: sol.x[1 + cells..].to_vec(),
            masses: sol.duals,
        })
    }
}

/// Worst-case expectation over the continuous CDF ball at `x`.
pub fn ks_cont_value<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<(T, KsContProgram<T>, KsContSolution<T>)> {
    let program = build_ks_cont(spec, x)?;
    let sol = program.solve()?;
    Ok((sol.value, program, sol))
}
