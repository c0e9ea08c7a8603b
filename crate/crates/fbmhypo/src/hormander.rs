//! Lie bracket families of the vector fields, the pointwise spanning
//! (Hörmander) check, and a sampled dissipativity certificate for the drift.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::expr::{eval, lie_bracket, FieldExpr, VectorFieldSet};
use crate::rng::stream_rng;

/// Brackets `V_I = [V_{i1}, [V_{i2}, ..., V_{ik}]]` for all multi-indices
/// `I ∈ {0..d}^{k-1} × {1..d}`, `k ≤ level`.
#[derive(Debug, Clone)]
pub struct BracketFamily {
    pub level: usize,
    pub entries: Vec<(Vec<usize>, FieldExpr)>,
}

impl BracketFamily {
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    /// Entries of exactly level `k`.
    pub fn level_entries(&self, k: usize) -> impl Iterator<Item = &(Vec<usize>, FieldExpr)> {
        self.entries.iter().filter(move |(i, _)| i.len() == k)
    }
    pub fn get(&self, index: &[usize]) -> Option<&FieldExpr> {
        self.entries.iter().find(|(i, _)| i == index).map(|(_, v)| v)
    }
}

pub fn bracket_family(fields: &VectorFieldSet, level: usize) -> Result<BracketFamily> {
    if level == 0 {
        return Err(invalid("bracket level must be at least 1"));
    }
    let d = fields.d();
    let mut entries: Vec<(Vec<usize>, FieldExpr)> = (1..=d).map(|i| (vec![i], fields.field(i).clone())).collect();
    let mut prev: Vec<(Vec<usize>, FieldExpr)> = entries.clone();
    for _ in 2..=level {
        let mut next = Vec::with_capacity(prev.len() * (d + 1));
        for i in 0..=d {
            for (idx, v) in &prev {
                let mut new_idx = Vec::with_capacity(idx.len() + 1);
                new_idx.push(i);
                new_idx.extend_from_slice(idx);
                next.push((new_idx, lie_bracket(fields.field(i), v)?));
            }
        }
        entries.extend(next.iter().cloned());
        prev = next;
    }
    Ok(BracketFamily { level, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// smallest singular value of the greedily selected n vectors
    /// (0 when fewer than n independent vectors exist)
    pub sigma_min: f64,
    /// n-th singular value of the full stacked matrix
    pub sigma_n: f64,
    pub satisfied: bool,
    pub family_size: usize,
}

/// Rank of `{U(x0) : U in the family}` with threshold `1e-10 σ_max`.
pub fn rank_of_family(family: &BracketFamily, n: usize, x0: &[f64]) -> Result<RankReport> {
    let cols: Vec<Vec<f64>> = family
        .entries
        .iter()
        .map(|(_, v)| eval(v, x0))
        .collect::<Result<_>>()?;
    Ok(rank_of_vectors(&cols, n, family.len()))
}

fn rank_of_vectors(cols: &[Vec<f64>], n: usize, family_size: usize) -> RankReport {
    let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax && s > 0.0).count();
    let mut sorted: Vec<f64> = sv.iter().cloned().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_n = if sorted.len() >= n { sorted[n - 1] } else { 0.0 };
    let sigma_min = if rank == n { greedy_sigma_min(cols, n, smax) } else { 0.0 };
    RankReport {
        rank,
        sigma_min,
        sigma_n,
        satisfied: rank == n,
        family_size,
    }
}

/// Pick n vectors by largest residual after projection (pivoted
/// Gram-Schmidt) and return the smallest singular value of their matrix.
fn greedy_sigma_min(cols: &[Vec<f64>], n: usize, smax: f64) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < n {
        let mut best = (usize::MAX, 0.0);
        let mut best_res = Vec::new();
        for (j, c) in cols.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let mut r = c.clone();
            for q in &basis {
                let p: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > best.1 {
                best = (j, norm);
                best_res = r;
            }
        }
        if best.0 == usize::MAX || best.1 <= 1e-10 * smax {
            return 0.0;
        }
        basis.push(best_res.iter().map(|v| v / best.1).collect());
        chosen.push(best.0);
    }
    let m = DMatrix::from_fn(n, n, |i, j| cols[chosen[j]][i]);
    m.svd(false, false).singular_values.iter().cloned().fold(f64::MAX, f64::min)
}

/// Hörmander's spanning condition at `x0` with brackets up to `level`.
pub fn hormander_rank(fields: &VectorFieldSet, level: usize, x0: &[f64]) -> Result<RankReport> {
    let family = bracket_family(fields, level)?;
    rank_of_family(&family, fields.n(), x0)
}

/// Infimum of `sigma_min` over `n_points` points drawn uniformly from the
/// ball of radius `radius` (an empirical proxy for a uniform lower bound).
pub fn sampled_sigma_min(fields: &VectorFieldSet, level: usize, radius: f64, n_points: usize, seed: u64) -> Result<f64> {
    let family = bracket_family(fields, level)?;
    let n = fields.n();
    let mut rng = stream_rng(seed, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..n_points {
        let x = ball_point(&mut rng, n, radius);
        worst = worst.min(rank_of_family(&family, n, &x)?.sigma_min);
    }
    Ok(worst)
}

fn unit_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn ball_point(rng: &mut impl Rng, n: usize, radius: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64);
    unit_vector(rng, n).into_iter().map(|a| a * r).collect()
}

/// Sampled certificate for `<x, V0(x)> ≤ M1 - M2 |x|²`.
///
/// `m2` is the largest value in (0, 1] compatible with the samples on the
/// outer shell `R/2 ≤ |x| ≤ R`; `m1` the smallest non-negative constant that
/// then makes the inequality hold on every sample. This certifies the
/// samples only, not the whole space.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub m1: f64,
    pub m2: f64,
    pub satisfied: bool,
    pub counterexample: Option<Vec<f64>>,
    pub n_points: usize,
}

pub fn dissipativity_check(v0: &FieldExpr, radius: f64, n_samples: usize, seed: u64) -> Result<DissipativityReport> {
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    let n = v0.len();
    let mut rng = stream_rng(seed, 0);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let shells = 16;
    let dirs: Vec<Vec<f64>> = {
        let mut d: Vec<Vec<f64>> = (0..n)
            .flat_map(|i| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut e = vec![0.0; n];
                    e[i] = s;
                    e
                })
            })
            .collect();
        d.extend((0..n_samples).map(|_| unit_vector(&mut rng, n)));
        d
    };
    for j in 1..=shells {
        let r = radius * j as f64 / shells as f64;
        points.extend(dirs.iter().map(|u| u.iter().map(|a| a * r).collect()));
    }
    // coarse cube grid
    let per_axis = ((2000f64).powf(1.0 / n as f64).floor() as usize).clamp(3, 201);
    let total = per_axis.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let p: Vec<f64> = (0..n)
            .map(|_| {
                let i = rem % per_axis;
                rem /= per_axis;
                -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64
            })
            .collect();
        points.push(p);
    }
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        let v = eval(v0, p)?;
        let inner: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
        let r2: f64 = p.iter().map(|a| a * a).sum();
        values.push((inner, r2));
    }
    let mut q_min = f64::INFINITY;
    let mut arg = None;
    for (i, &(inner, r2)) in values.iter().enumerate() {
        let r = r2.sqrt();
        if r >= 0.5 * radius - 1e-12 && r <= radius * (1.0 + 1e-12) {
            let q = -inner / r2;
            if q < q_min {
                q_min = q;
                arg = Some(i);
            }
        }
    }
    if !(q_min > 0.0) {
        return Ok(DissipativityReport {
            m1: f64::INFINITY,
            m2: 0.0,
            satisfied: false,
            counterexample: arg.map(|i| points[i].clone()),
            n_points: points.len(),
        });
    }
    let m2 = q_min.min(1.0);
    let m1 = values.iter().map(|(inner, r2)| inner + m2 * r2).fold(0.0, f64::max);
    Ok(DissipativityReport {
        m1,
        m2,
        satisfied: true,
        counterexample: None,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypoelliptic_brackets() {
        let fs = VectorFieldSet::parse("V0 = [0, x1]; V1 = [1, 0]", 2, 1).unwrap();
        let fam = bracket_family(&fs, 2).unwrap();
        assert_eq!(fam.len(), 3);
        let b01 = fam.get(&[0, 1]).unwrap();
        assert_eq!(eval(b01, &[0.3, 0.1]).unwrap(), vec![0.0, -1.0]);
        assert!(fam.get(&[1, 1]).unwrap().iter().all(|e| e.is_zero()));
        let r1 = hormander_rank(&fs, 1, &[0.0, 0.0]).unwrap();
        assert_eq!((r1.rank, r1.satisfied), (1, false));
        let r2 = hormander_rank(&fs, 2, &[0.0, 0.0]).unwrap();
        assert_eq!((r2.rank, r2.satisfied), (2, true));
        assert!(r2.sigma_min > 0.5);
    }

    #[test]
    fn dissipativity_examples() {
        let v = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1).unwrap();
        let r = dissipativity_check(v.drift(), 10.0, 8, 1).unwrap();
        assert!(r.satisfied && r.m2 == 1.0 && r.m1 == 0.0);
        let v = VectorFieldSet::parse("V0 = [x1]; V1 = [1]", 1, 1).unwrap();
        let r = dissipativity_check(v.drift(), 10.0, 8, 1).unwrap();
        assert!(!r.satisfied);
        assert!(r.counterexample.unwrap()[0] != 0.0);
    }
}
