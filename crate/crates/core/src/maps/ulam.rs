//! Ulam discretizations of the transfer operators.
//!
//! The induced map on `Ω` is discretized by stratified sampling of first
//! returns. The full map is discretized exactly: every branch is monotone, so
//! the Lebesgue fraction of a bin sent into another bin is a difference of
//! preimages.

use rayon::prelude::*;
use serde::Serialize;

use super::{Branch, MapSpec, OMEGA_LO};
use crate::error::{LabError, Result};
use crate::stats::{log_log_fit, LineFit};

/// Return times above this count towards the landing law used to close rows
/// for orbits that exceed the cap.
const LONG_RETURN: u64 = 100;

#[derive(Debug, Clone, Serialize)]
pub struct UlamMatrix {
    bins: usize,
    /// Row-major `bins × bins`.
    matrix: Vec<f64>,
    nonreturn_rate: f64,
    warning: Option<String>,
    /// Landing law assigned to orbits that did not return within the cap.
    closure: Vec<f64>,
}

impl UlamMatrix {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.bins + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.bins..(i + 1) * self.bins]
    }

    pub fn nonreturn_rate(&self) -> f64 {
        self.nonreturn_rate
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn max_row_defect(&self) -> f64 {
        (0..self.bins)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.bins)
    }

    /// Left fixed probability vector.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        gth_stationary(&self.matrix, self.bins)
    }

    /// `v ↦ vP`.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        left_multiply(&self.matrix, self.bins, v)
    }

    /// Modulus of the second eigenvalue by power iteration on the complement
    /// of the fixed vector. Returns the geometric-mean contraction over the
    /// second half of the iterations.
    pub fn second_eigenvalue_modulus(&self, iters: usize) -> Result<f64> {
        if iters < 4 {
            return Err(LabError::domain("need at least 4 power iterations"));
        }
        let pi = self.stationary()?;
        let mut v: Vec<f64> = (0..self.bins)
            .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
            .collect();
        let mut log_growth = 0.0;
        for it in 0..iters {
            let s: f64 = v.iter().sum();
            for (x, p) in v.iter_mut().zip(&pi) {
                *x -= s * p;
            }
            let before = norm(&v);
            if before == 0.0 {
                return Ok(0.0);
            }
            for x in v.iter_mut() {
                *x /= before;
            }
            v = self.apply_left(&v);
            let s: f64 = v.iter().sum();
            let after = norm(&v.iter().zip(&pi).map(|(x, p)| x - s * p).collect::<Vec<_>>());
            if it >= iters / 2 {
                if after == 0.0 {
                    return Ok(0.0);
                }
                log_growth += after.ln();
            }
        }
        Ok((log_growth / (iters - iters / 2) as f64).exp())
    }

    /// Pushes the piecewise-constant density with bin masses `weights`
    /// through one exact induced step, using `points_per_bin` points offset
    /// from the construction grid, and returns the total variation distance
    /// between the resulting bin masses and `weights`.
    pub fn invariance_tv(&self, spec: &MapSpec, weights: &[f64], points_per_bin: usize, cap: u64) -> Result<f64> {
        if weights.len() != self.bins {
            return Err(LabError::domain("weight vector length differs from the bin count"));
        }
        let bins = self.bins;
        let pushed: Vec<Vec<f64>> = (0..bins)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0; bins];
                let w = weights[i] / points_per_bin as f64;
                for s in 0..points_per_bin {
                    let x = bin_point(i, bins, (s as f64 + 0.25) / points_per_bin as f64);
                    match spec.first_return(x, cap) {
                        Ok(o) => out[bin_index(o.landing, bins)] += w,
                        Err(_) => {
                            for (o, c) in out.iter_mut().zip(&self.closure) {
                                *o += w * c;
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let mut total = vec![0.0; bins];
        for row in &pushed {
            for (t, r) in total.iter_mut().zip(row) {
                *t += r;
            }
        }
        Ok(0.5 * total.iter().zip(weights).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn bin_index(x: f64, bins: usize) -> usize {
    (((x - OMEGA_LO) * 2.0 * bins as f64) as usize).min(bins - 1)
}

/// The point at relative position `frac ∈ [0, 1)` inside bin `i` of `Ω`.
fn bin_point(i: usize, bins: usize, frac: f64) -> f64 {
    OMEGA_LO + 0.5 * (i as f64 + frac) / bins as f64
}

/// Discretizes the induced map on `Ω` over `bins` equal bins, sampling
/// `points_per_bin` stratified first returns per bin.
///
/// Orbits that exceed `cap` are assigned the landing law of the long returns
/// (those with return time above a fixed threshold), which keeps every row
/// stochastic.
pub fn ulam_matrix(spec: &MapSpec, bins: usize, points_per_bin: usize, cap: u64) -> Result<UlamMatrix> {
    if bins < 16 {
        return Err(LabError::domain(format!("need at least 16 bins, got {bins}")));
    }
    if points_per_bin < 1000 {
        return Err(LabError::domain(format!("need at least 1000 points per bin, got {points_per_bin}")));
    }
    struct RowData {
        counts: Vec<f64>,
        long: Vec<f64>,
        lost: usize,
    }
    let rows: Vec<RowData> = (0..bins)
        .into_par_iter()
        .map(|i| {
            let mut counts = vec![0.0; bins];
            let mut long = vec![0.0; bins];
            let mut lost = 0;
            for s in 0..points_per_bin {
                let x = bin_point(i, bins, (s as f64 + 0.5) / points_per_bin as f64);
                match spec.first_return(x, cap) {
                    Ok(o) => {
                        let j = bin_index(o.landing, bins);
                        counts[j] += 1.0;
                        if o.phi > LONG_RETURN {
                            long[j] += 1.0;
                        }
                    }
                    Err(_) => lost += 1,
                }
            }
            RowData { counts, long, lost }
        })
        .collect();

    let mut closure = vec![0.0; bins];
    for r in &rows {
        for (c, l) in closure.iter_mut().zip(&r.long) {
            *c += l;
        }
    }
    let total: f64 = closure.iter().sum();
    if total > 0.0 {
        closure.iter_mut().for_each(|c| *c /= total);
    } else {
        closure.iter_mut().for_each(|c| *c = 1.0 / bins as f64);
    }

    let mut matrix = Vec::with_capacity(bins * bins);
    let mut lost_total = 0usize;
    for r in &rows {
        lost_total += r.lost;
        let mut row: Vec<f64> = r
            .counts
            .iter()
            .zip(&closure)
            .map(|(c, q)| c + r.lost as f64 * q)
            .collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
        matrix.extend(row);
    }
    let nonreturn_rate = lost_total as f64 / (bins * points_per_bin) as f64;
    let warning = (nonreturn_rate > 1e-6).then(|| {
        format!(
            "{lost_total} of {} orbits did not return within {cap} iterations (rate {nonreturn_rate:.2e}); \
             their mass follows the landing law of long returns",
            bins * points_per_bin
        )
    });
    Ok(UlamMatrix {
        bins,
        matrix,
        nonreturn_rate,
        warning,
        closure,
    })
}

/// `vP` for a row-major square matrix.
fn left_multiply(p: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, &pij) in out.iter_mut().zip(&p[i * n..(i + 1) * n]) {
            *o += vi * pij;
        }
    }
    out
}

/// Stationary vector of an irreducible stochastic matrix by
/// Grassmann–Taksar–Heyman elimination, which never subtracts and so stays
/// accurate for nearly decomposable chains.
pub(crate) fn gth_stationary(p: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut a = p.to_vec();
    for k in (1..n).rev() {
        let s: f64 = a[k * n..k * n + k].iter().sum();
        if !(s > 0.0) {
            return Err(LabError::NumericalFailure {
                context: format!("stationary vector: state {k} cannot reach lower states"),
                achieved: s,
                requested: f64::MIN_POSITIVE,
            });
        }
        for i in 0..k {
            a[i * n + k] /= s;
        }
        for i in 0..k {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let (head, tail) = a.split_at_mut(k * n);
            let row_i = &mut head[i * n..i * n + k];
            let row_k = &tail[..k];
            for (x, y) in row_i.iter_mut().zip(row_k) {
                *x += aik * y;
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i * n + k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}

/// Bin layout for the full-map discretization: one bin `[0, 2^{-octaves-1})`
/// at the fixed point, then `per_octave` equal bins in each dyadic octave
/// `[2^{-o-1}, 2^{-o})` for `o = octaves, …, 1`, and `per_octave` equal bins
/// on `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradedGrid {
    pub per_octave: usize,
    pub octaves: usize,
}

impl Default for GradedGrid {
    fn default() -> Self {
        GradedGrid {
            per_octave: 32,
            octaves: 24,
        }
    }
}

impl GradedGrid {
    pub fn edges(&self) -> Vec<f64> {
        let mut e = vec![0.0];
        for o in (0..=self.octaves).rev() {
            let lo = 0.5f64.powi(o as i32 + 1);
            for s in 0..self.per_octave {
                e.push(lo * (1.0 + s as f64 / self.per_octave as f64));
            }
        }
        e.push(1.0);
        e
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityProfile {
    /// `(bin midpoint, density)`, excluding the bin at the fixed point; the
    /// density has mean 1 on `Ω`.
    pub points: Vec<(f64, f64)>,
    /// Log-log fit of the density over `[1e-3, 1e-1]`.
    pub exponent: LineFit,
    /// Sup-norm change on `[1/4, 1]` during the last power step.
    pub stabilization: f64,
    pub iters: usize,
    pub grid: GradedGrid,
}

impl DensityProfile {
    pub fn min_on_omega(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.0 >= OMEGA_LO)
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_on_omega(&self) -> f64 {
        self.points.iter().filter(|p| p.0 >= OMEGA_LO).map(|p| p.1).fold(0.0, f64::max)
    }
}

/// An endpoint of a preimage interval, stored as `edge − offset`.
#[derive(Clone, Copy)]
struct Split {
    edge: f64,
    offset: f64,
}

/// The exact Ulam matrix of the full map on the graded grid.
pub(crate) fn graded_matrix(spec: &MapSpec, edges: &[f64]) -> Vec<f64> {
    let n = edges.len() - 1;
    let branches = spec.branches();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let (a, b) = (edges[i], edges[i + 1]);
            for br in &branches {
                let lo = a.max(br.lo);
                let hi = b.min(br.hi);
                if hi <= lo {
                    continue;
                }
                add_piece(spec, br, lo, hi, b - a, edges, &mut row);
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    rows.concat()
}

/// Adds to `row` the Lebesgue measure of the points of `[lo, hi) ⊂ branch`
/// landing in each bin, divided by the source bin `width`.
fn add_piece(spec: &MapSpec, br: &Branch, lo: f64, hi: f64, width: f64, edges: &[f64], row: &mut [f64]) {
    let n = edges.len() - 1;
    // edge e lies at or below the image of x iff e − x ≤ shift(x); comparing
    // offsets instead of images keeps the tiny moves near 0 visible
    let below = |e: f64, x: f64| e - x <= spec.shift(br, x);
    let first = edges[1..n].partition_point(|&e| below(e, lo));
    let last = edges[1..n].partition_point(|&e| e - hi < spec.shift(br, hi));
    for j in first..=last {
        let (c, d) = (edges[j], edges[j + 1]);
        let lower = if below(c, lo) {
            Split { edge: lo, offset: 0.0 }
        } else {
            Split {
                edge: c,
                offset: spec.preimage_offset(br, c),
            }
        };
        let upper = if d - hi >= spec.shift(br, hi) {
            Split { edge: hi, offset: 0.0 }
        } else {
            Split {
                edge: d,
                offset: spec.preimage_offset(br, d),
            }
        };
        let len = (upper.edge - lower.edge) - (upper.offset - lower.offset);
        if len > 0.0 {
            row[j] += len / width;
        }
    }
}

/// Infinite invariant density of the full map, normalized to mean 1 on `Ω`.
///
/// The stationary vector of the exact graded Ulam matrix is computed by
/// elimination; `iters` power steps from it then serve as a stabilization
/// diagnostic, and a change above `1e-4` in sup norm on `[1/4, 1]` is
/// reported as a numerical failure.
pub fn infinite_density_profile(spec: &MapSpec, grid: GradedGrid, iters: usize) -> Result<DensityProfile> {
    if grid.per_octave < 2 || grid.octaves < 4 {
        return Err(LabError::domain("graded grid needs at least 2 bins per octave and 4 octaves"));
    }
    if grid.octaves > 60 {
        return Err(LabError::domain("at most 60 octaves are supported"));
    }
    let edges = grid.edges();
    let n = edges.len() - 1;
    let p = graded_matrix(spec, &edges);
    let mut pi = gth_stationary(&p, n)?;
    let density = |v: &[f64]| -> Vec<f64> {
        let omega: f64 = (0..n).filter(|&i| edges[i] >= OMEGA_LO).map(|i| v[i]).sum();
        let scale = (1.0 - OMEGA_LO) / omega;
        (0..n).map(|i| v[i] / (edges[i + 1] - edges[i]) * scale).collect()
    };
    let mut h = density(&pi);
    let mut stabilization = 0.0;
    for _ in 0..iters {
        pi = left_multiply(&p, n, &pi);
        let next = density(&pi);
        stabilization = (0..n)
            .filter(|&i| edges[i] >= 0.25)
            .map(|i| (next[i] - h[i]).abs())
            .fold(0.0, f64::max);
        h = next;
    }
    if stabilization > 1e-4 {
        return Err(LabError::NumericalFailure {
            context: format!("density profile did not stabilize after {iters} power steps"),
            achieved: stabilization,
            requested: 1e-4,
        });
    }
    let points: Vec<(f64, f64)> = (1..n).map(|i| (0.5 * (edges[i] + edges[i + 1]), h[i])).collect();
    let exponent = log_log_fit(&points, 1e-3, 1e-1)?;
    Ok(DensityProfile {
        points,
        exponent,
        stabilization,
        iters,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gth_matches_two_state_chain() {
        let (a, b) = (0.3, 0.1);
        let p = [1.0 - a, a, b, 1.0 - b];
        let pi = gth_stationary(&p, 2).unwrap();
        assert!((pi[0] - b / (a + b)).abs() < 1e-15);
        // nearly decomposable: tiny escape rate
        let e = 1e-15;
        let p = [1.0 - e, e, 0.5, 0.5];
        let pi = gth_stationary(&p, 2).unwrap();
        assert!((pi[1] / pi[0] - 2.0 * e).abs() < 1e-28);
        assert!(gth_stationary(&[1.0, 0.0, 0.0, 1.0], 2).is_err());
    }

    #[test]
    fn graded_rows_are_stochastic_and_exact_on_omega() {
        let spec = MapSpec::t(0.5).unwrap();
        let grid = GradedGrid {
            per_octave: 8,
            octaves: 10,
        };
        let edges = grid.edges();
        let n = edges.len() - 1;
        assert_eq!(n, 1 + 11 * 8);
        let p = graded_matrix(&spec, &edges);
        for i in 0..n {
            let s: f64 = p[i * n..(i + 1) * n].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // bins on Ω map linearly: bin [1/2 + k/16, 1/2 + (k+1)/16) lands in [k/8, (k+1)/8)
        let first_omega = n - 8;
        let row = &p[first_omega * n..(first_omega + 1) * n];
        let target_mass: f64 = (0..n).filter(|&j| edges[j + 1] <= 0.125 + 1e-15).map(|j| row[j]).sum();
        assert!((target_mass - 1.0).abs() < 1e-12, "{target_mass}");
        // a bin deep in the graded region only moves up by the tiny excess
        let i = 5;
        let (a, b) = (edges[i], edges[i + 1]);
        // the escaping piece is [b − δ, b) with δ = excess(b − δ)
        let mut delta = spec.excess(b);
        for _ in 0..50 {
            delta = spec.excess(b - delta);
        }
        let escape = delta / (b - a);
        assert!((p[i * n + i + 1] - escape).abs() < 1e-9 * escape, "{} {escape}", p[i * n + i + 1]);
    }

    #[test]
    fn ulam_rows_and_fixed_vector() {
        let spec = MapSpec::t(0.5).unwrap();
        let u = ulam_matrix(&spec, 16, 1000, 100_000).unwrap();
        assert!(u.max_row_defect() < 1e-12);
        let pi = u.stationary().unwrap();
        assert!(pi.iter().all(|&x| x >= 0.0));
        let back = u.apply_left(&pi);
        let diff: f64 = back.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff < 1e-12);
        assert!(ulam_matrix(&spec, 8, 1000, 10).is_err());
        assert!(ulam_matrix(&spec, 16, 10, 10).is_err());
    }
}
