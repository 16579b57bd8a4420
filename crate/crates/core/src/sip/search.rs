use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::scalar::Real;

use super::IndexPoint;

/// Grid-and-refine settings for the separation search.
#[derive(Debug, Clone, Serialize)]
pub struct GridOptions {
    /// Grid points per dimension.
    pub points: usize,
    /// Step halvings in the coordinate refinement.
    pub rounds: usize,
    pub shrink: f64,
    /// Best grid points refined per tag.
    pub starts: usize,
    /// Cap on grid points per tag.
    pub max_points: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: 64,
            rounds: 40,
            shrink: 0.5,
            starts: 4,
            max_points: 1 << 20,
        }
    }
}

/// Best index point found and its value, which is attained and so a lower
/// bound on the true maximum.
#[derive(Debug, Clone, Serialize)]
pub struct Separation<T> {
    pub point: IndexPoint<T>,
    pub value: T,
    pub evaluations: usize,
}

const CHUNK: usize = 4096;

#[derive(Clone)]
struct Candidate<T> {
    value: T,
    tag: usize,
    flat: usize,
}

fn better<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> bool {
    a.value > b.value || (a.value == b.value && (a.tag, a.flat) < (b.tag, b.flat))
}

fn keep_top<T: Real>(top: &mut Vec<Candidate<T>>, c: Candidate<T>, k: usize) {
    let pos = top.iter().position(|t| better(&c, t)).unwrap_or(top.len());
    if pos < k {
        top.insert(pos, c);
        top.truncate(k);
    }
}

/// Maximizes `f(s, tag)` over `[lower, upper] × {0, …, tags − 1}`.
///
/// A uniform grid is scanned for every tag, then the best `starts` grid
/// points of each tag are polled along coordinates and diagonals, halving
/// the step after each pass that fails to improve. Ties go to the lower tag and grid position, so the
/// result does not depend on scheduling.
pub fn separation_max<T, F>(
    f: F,
    lower: &[T],
    upper: &[T],
    tags: usize,
    options: &GridOptions,
) -> Result<Separation<T>>
where
    T: Real,
    F: Fn(&[T], usize) -> Result<T> + Sync,
{
    let d = lower.len();
    let mut per_dim = options.points.max(2);
    while d > 0 && per_dim > 2 && (per_dim as f64).powi(d as i32) > options.max_points as f64 {
        per_dim -= 1;
    }
    let total = if d == 0 { 1 } else { per_dim.pow(d as u32) };
    let point_at = |flat: usize| -> Vec<T> {
        let mut rest = flat;
        (0..d)
            .map(|k| {
                let i = rest % per_dim;
                rest /= per_dim;
                lower[k] + (upper[k] - lower[k]) * T::count(i) / T::count(per_dim - 1)
            })
            .collect()
    };
    let keep = options.starts.max(1);

    let jobs: Vec<(usize, usize)> = (0..tags)
        .flat_map(|tag| (0..total).step_by(CHUNK).map(move |from| (tag, from)))
        .collect();
    let partial: Vec<Vec<Candidate<T>>> = jobs
        .par_iter()
        .map(|&(tag, from)| -> Result<Vec<Candidate<T>>> {
            let mut top = Vec::with_capacity(keep + 1);
            for flat in from..(from + CHUNK).min(total) {
                let value = f(&point_at(flat), tag)?;
                if value.is_nan() {
                    continue;
                }
                keep_top(&mut top, Candidate { value, tag, flat }, keep);
            }
            Ok(top)
        })
        .collect::<Result<_>>()?;
    // Best grid points per tag: a tag whose peak sits between grid points
    // can rank below another tag's on the grid and still win after refining.
    let mut per_tag: Vec<Vec<Candidate<T>>> = vec![Vec::with_capacity(keep + 1); tags];
    for c in partial.into_iter().flatten() {
        keep_top(&mut per_tag[c.tag], c, keep);
    }
    let mut top: Vec<Candidate<T>> = per_tag.into_iter().flatten().collect();
    top.sort_by(|a, b| if better(a, b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
    let mut evaluations = total * tags;
    if top.is_empty() {
        return Err(crate::error::Error::Invalid(
            "separation objective is NaN on the whole grid".into(),
        ));
    }
    if options.starts == 0 {
        let c = &top[0];
        return Ok(Separation {
            point: IndexPoint::new(point_at(c.flat), c.tag),
            value: c.value,
            evaluations,
        });
    }

    let step0: Vec<T> = (0..d)
        .map(|k| (upper[k] - lower[k]) / T::count(per_dim - 1))
        .collect();
    let refined: Vec<(Vec<T>, T, usize)> = top
        .par_iter()
        .map(|c| refine(&f, point_at(c.flat), c.value, c.tag, &step0, lower, upper, options))
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, &Vec<T>, T)> = None;
    for (c, (s, value, evals)) in top.iter().zip(&refined) {
        evaluations += evals;
        if best.as_ref().map_or(true, |b| *value > b.2) {
            best = Some((c.tag, s, *value));
        }
    }
    let (tag, s, value) = best.unwrap();
    Ok(Separation {
        point: IndexPoint::new(s.clone(), tag),
        value,
        evaluations,
    })
}

/// `±e_k` for every coordinate, then the `2^d` diagonals for small `d`.
/// Coordinate moves alone stall on ridges that run diagonally, as in the
/// max-norm cone `−λ‖s − ξ‖_∞`.
fn poll_directions<T: Real>(d: usize) -> Vec<Vec<T>> {
    let mut dirs = Vec::new();
    for k in 0..d {
        for sign in [T::one(), -T::one()] {
            let mut e = vec![T::zero(); d];
            e[k] = sign;
            dirs.push(e);
        }
    }
    if (2..=MAX_DIAGONAL_DIM).contains(&d) {
        for mask in 0..1usize << d {
            dirs.push((0..d).map(|k| if mask >> k & 1 == 1 { -T::one() } else { T::one() }).collect());
        }
    }
    dirs
}

const MAX_DIAGONAL_DIM: usize = 4;

#[allow(clippy::too_many_arguments)]
fn refine<T, F>(
    f: &F,
    mut cur: Vec<T>,
    mut best: T,
    tag: usize,
    step0: &[T],
    lower: &[T],
    upper: &[T],
    options: &GridOptions,
) -> Result<(Vec<T>, T, usize)>
where
    T: Real,
    F: Fn(&[T], usize) -> Result<T>,
{
    let d = cur.len();
    let mut step = step0.to_vec();
    let directions = poll_directions::<T>(d);
    let shrink = T::lit(options.shrink);
    let mut evals = 0;
    let mut halvings = 0;
    // Polls on a finite lattice cannot improve forever, but cap them anyway.
    let mut polls = 0;
    while halvings < options.rounds && polls < 100 * options.rounds.max(1) {
        polls += 1;
        let mut improved = false;
        for dir in &directions {
            let cand: Vec<T> = (0..d)
                .map(|k| (cur[k] + dir[k] * step[k]).max(lower[k]).min(upper[k]))
                .collect();
            if cand == cur {
                continue;
            }
            let value = f(&cand, tag)?;
            evals += 1;
            if value > best {
                best = value;
                cur = cand;
                improved = true;
            }
        }
        if !improved {
            for s in &mut step {
                *s *= shrink;
            }
            halvings += 1;
        }
    }
    Ok((cur, best, evals))
}
