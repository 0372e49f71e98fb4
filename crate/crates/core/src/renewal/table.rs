//! Exact distributions of the partial sums `φ_k = φ^{(1)} + … + φ^{(k)}`.
//!
//! Row `k` is stored in lattice coordinates: entry `j` is `P(φ_k = kξ + p j)`,
//! so values off the lattice `kξ + pℤ` are zero by construction. Each row is
//! the previous one convolved with the increment pmf and truncated to `[0, M]`;
//! the mass beyond `M` is carried analytically:
//!
//! `P(φ_k > M) = P(φ_{k−1} > M) + Σ_m P(φ_{k−1} = m) P(φ > M − m)`.

use std::io::Write;

use serde::Serialize;

use super::convolve::{truncated_power, ConvolutionMethod, Convolver};
use super::law::LatticeLaw;
use crate::error::{LabError, Result};
use crate::observable::TestFunction;
use crate::regvar::RegVarying;
use crate::sum::{compensated_sum, Neumaier};

/// Upper bound on stored table entries (about 480 MB of `f64`).
pub const MAX_TABLE_ENTRIES: usize = 60_000_000;

/// Rows whose mass inside `[0, M]` falls below this are treated as empty,
/// together with every later row (the partial sums increase in `k`).
pub const NEGLIGIBLE_ROW_MASS: f64 = 1e-18;

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub law: &'a LatticeLaw,
    pub order: u64,
    /// `probs[j] = P(φ_order = order·ξ + p j)`
    pub probs: &'a [f64],
    pub overflow: f64,
}

impl RowView<'_> {
    /// `P(φ_order = m)`
    pub fn prob(&self, m: u64) -> f64 {
        let base = self.order * self.law.drift();
        let p = self.law.period();
        if m < base || (m - base) % p != 0 {
            return 0.0;
        }
        self.probs.get(((m - base) / p) as usize).copied().unwrap_or(0.0)
    }

    /// Coordinate of lattice index `j`.
    pub fn coordinate(&self, j: usize) -> u64 {
        self.order * self.law.drift() + self.law.period() * j as u64
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }
}

/// Streams rows `k = 1, 2, …` without storing them.
pub struct RowSweep {
    law: LatticeLaw,
    k_max: u64,
    m_max: u64,
    conv: Convolver,
    tails: Vec<f64>,
    row: Vec<f64>,
    k: u64,
    overflow: f64,
    exhausted: bool,
}

impl RowSweep {
    pub fn new(law: &LatticeLaw, k_max: u64, m_max: u64, method: ConvolutionMethod) -> Result<Self> {
        if k_max == 0 {
            return Err(LabError::domain("need at least one convolution order"));
        }
        let first = row_len(law, 1, m_max);
        Ok(Self {
            law: law.clone(),
            k_max,
            m_max,
            conv: Convolver::new(law.pmf_vec(first), method),
            tails: (0..first as u64).map(|j| law.tail_index(j)).collect(),
            row: Vec::new(),
            k: 0,
            overflow: 0.0,
            exhausted: false,
        })
    }

    /// Advances to the next order; `None` after `k_max` or once the remaining
    /// rows are negligible.
    pub fn next_row(&mut self) -> Option<RowView<'_>> {
        if self.exhausted || self.k >= self.k_max {
            return None;
        }
        let k = self.k + 1;
        let len = row_len(&self.law, k, self.m_max);
        if k == 1 {
            self.row = self.law.pmf_vec(len);
            self.overflow = self.law.survival(self.m_max as f64);
        } else {
            // mass of the previous row that the next increment pushes past M;
            // for entry i the jump must exceed M − (k−1)ξ − p i, whose lattice
            // tail index is len − 1 − i (or the full mass when i ≥ len)
            let mut spill = Neumaier::new();
            for (i, &x) in self.row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                spill.add(if i < len { x * self.tails[len - 1 - i] } else { x });
            }
            let mut acc = Neumaier::new();
            acc.add(self.overflow);
            acc.add(spill.value());
            self.overflow = acc.value().min(1.0);
            self.row = if len == 0 { Vec::new() } else { self.conv.step(&self.row, len) };
        }
        self.k = k;
        if compensated_sum(self.row.iter().copied()) < NEGLIGIBLE_ROW_MASS {
            self.exhausted = true;
            return None;
        }
        Some(RowView {
            law: &self.law,
            order: k,
            probs: &self.row,
            overflow: self.overflow,
        })
    }

    /// First order whose row was dropped as negligible, if any.
    pub fn negligible_from(&self) -> Option<u64> {
        self.exhausted.then_some(self.k)
    }
}

fn row_len(law: &LatticeLaw, k: u64, m_max: u64) -> usize {
    let base = k.saturating_mul(law.drift());
    if base > m_max {
        0
    } else {
        ((m_max - base) / law.period() + 1) as usize
    }
}

/// Rows `1..=K` restricted to `[0, M]`, with per-row overflow mass.
#[derive(Debug, Clone)]
pub struct ConvolutionTable {
    law: LatticeLaw,
    k_max: u64,
    m_max: u64,
    rows: Vec<Vec<f64>>,
    overflow: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    gamma: f64,
    p: u64,
    xi: u64,
    #[serde(rename = "K")]
    k_max: u64,
    #[serde(rename = "M")]
    m_max: u64,
    overflow: &'a [f64],
}

impl ConvolutionTable {
    pub fn build(law: &LatticeLaw, k_max: u64, m_max: u64) -> Result<Self> {
        Self::build_with(law, k_max, m_max, ConvolutionMethod::Auto)
    }

    pub fn build_with(law: &LatticeLaw, k_max: u64, m_max: u64, method: ConvolutionMethod) -> Result<Self> {
        if m_max == 0 {
            return Err(LabError::domain("coordinate bound must be positive"));
        }
        let projected: u128 = (1..=k_max).map(|k| row_len(law, k, m_max) as u128).sum();
        let mut sweep = RowSweep::new(law, k_max, m_max, method)?;
        let mut rows = Vec::new();
        let mut overflow = Vec::new();
        let mut stored = 0usize;
        while let Some(row) = sweep.next_row() {
            stored += row.probs.len();
            if stored > MAX_TABLE_ENTRIES {
                let shrink = (MAX_TABLE_ENTRIES as f64 / projected as f64).sqrt();
                return Err(LabError::Resource {
                    what: format!("table of order {k_max} up to {m_max} needs more than {MAX_TABLE_ENTRIES} entries"),
                    suggestion: format!("M ≤ {} or the streaming sweep", (m_max as f64 * shrink).floor()),
                });
            }
            rows.push(row.probs.to_vec());
            overflow.push(row.overflow);
        }
        while (rows.len() as u64) < k_max {
            rows.push(Vec::new());
            overflow.push(1.0);
        }
        Ok(Self {
            law: law.clone(),
            k_max,
            m_max,
            rows,
            overflow,
        })
    }

    pub fn law(&self) -> &LatticeLaw {
        &self.law
    }

    pub fn k_max(&self) -> u64 {
        self.k_max
    }

    pub fn m_max(&self) -> u64 {
        self.m_max
    }

    pub fn row(&self, k: u64) -> Option<RowView<'_>> {
        if k == 0 || k > self.k_max {
            return None;
        }
        let i = (k - 1) as usize;
        Some(RowView {
            law: &self.law,
            order: k,
            probs: &self.rows[i],
            overflow: self.overflow[i],
        })
    }

    /// `P(φ_k = m)` for `k ≤ K`, `m ≤ M`; order 0 is the point mass at 0.
    pub fn prob(&self, k: u64, m: u64) -> f64 {
        if m > self.m_max || k > self.k_max {
            return f64::NAN;
        }
        if k == 0 {
            return if m == 0 { 1.0 } else { 0.0 };
        }
        self.row(k).map_or(0.0, |r| r.prob(m))
    }

    /// `P(φ_k > M)` for `k ≤ K`.
    pub fn overflow(&self, k: u64) -> f64 {
        match k {
            0 => 0.0,
            k if k > self.k_max => f64::NAN,
            k => self.overflow[(k - 1) as usize],
        }
    }

    /// `max_k |Σ_m P(φ_k = m) + P(φ_k > M) − 1|`
    pub fn conservation_error(&self) -> f64 {
        (1..=self.k_max)
            .map(|k| {
                let r = self.row(k).expect("in range");
                (r.mass() + r.overflow - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_{k ≤ min(n, K)} g(k/a(n)) P(φ_k = n)`
    pub fn tied_sum(&self, n: u64, a: &RegVarying, g: &dyn TestFunction) -> Result<f64> {
        if n > self.m_max {
            return Err(LabError::Range(format!("n = {n} exceeds the table bound {}", self.m_max)));
        }
        let an = a.eval(n.max(1) as f64)?;
        Ok(compensated_sum((1..=self.k_max.min(n)).map(|k| {
            let p = self.prob(k, n);
            if p == 0.0 {
                0.0
            } else {
                g.eval(k as f64 / an) * p
            }
        })))
    }

    /// Writes `k,m,prob` for every stored lattice point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,m,prob")?;
        for k in 1..=self.k_max {
            let row = self.row(k).expect("in range");
            for (j, &p) in row.probs.iter().enumerate() {
                writeln!(out, "{k},{},{p:.16e}", row.coordinate(j))?;
            }
        }
        Ok(())
    }

    /// JSON sidecar `{gamma, p, xi, K, M, overflow[]}`.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            gamma: self.law.gamma(),
            p: self.law.period(),
            xi: self.law.drift(),
            k_max: self.k_max,
            m_max: self.m_max,
            overflow: &self.overflow,
        })
        .expect("plain data serializes")
    }
}

/// `P(φ_n = ·)` on `[0, M]` for a single order, by binary powering.
#[derive(Debug, Clone)]
pub struct PowerRow {
    law: LatticeLaw,
    order: u64,
    probs: Vec<f64>,
}

impl PowerRow {
    pub fn view(&self) -> RowView<'_> {
        RowView {
            law: &self.law,
            order: self.order,
            probs: &self.probs,
            overflow: f64::NAN,
        }
    }
}

pub fn convolution_power(law: &LatticeLaw, n: u64, m_max: u64) -> Result<PowerRow> {
    convolution_power_with(law, n, m_max, ConvolutionMethod::Auto)
}

pub fn convolution_power_with(law: &LatticeLaw, n: u64, m_max: u64, method: ConvolutionMethod) -> Result<PowerRow> {
    if n == 0 {
        return Err(LabError::domain("order must be positive"));
    }
    let len = row_len(law, n, m_max);
    let probs = if len == 0 {
        Vec::new()
    } else {
        truncated_power(&law.pmf_vec(len), n, len, method)?
    };
    Ok(PowerRow {
        law: law.clone(),
        order: n,
        probs,
    })
}

/// `A_n(g) = Σ_k g(k/a(n)) P(φ_k = n)` for every `n ≤ M` and a fixed list of
/// observables, accumulated from a streaming sweep.
#[derive(Debug, Clone)]
pub struct TiedSums {
    law: LatticeLaw,
    a: RegVarying,
    m_max: u64,
    sums: Vec<Vec<f64>>,
    orders_used: u64,
}

impl TiedSums {
    pub fn compute(
        law: &LatticeLaw,
        a: &RegVarying,
        observables: &[&dyn TestFunction],
        m_max: u64,
    ) -> Result<Self> {
        Self::compute_with(law, a, observables, m_max, ConvolutionMethod::Auto)
    }

    pub fn compute_with(
        law: &LatticeLaw,
        a: &RegVarying,
        observables: &[&dyn TestFunction],
        m_max: u64,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        let size = m_max as usize + 1;
        let a_n: Vec<f64> = (0..size).map(|n| a.eval(n.max(1) as f64)).collect::<Result<_>>()?;
        let mut sums = vec![vec![0.0; size]; observables.len()];
        let k_max = m_max / law.drift();
        let mut sweep = RowSweep::new(law, k_max.max(1), m_max, method)?;
        let mut orders_used = 0;
        while let Some(row) = sweep.next_row() {
            orders_used = row.order;
            let k = row.order as f64;
            for (j, &p) in row.probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let n = row.coordinate(j) as usize;
                let x = k / a_n[n];
                for (acc, g) in sums.iter_mut().zip(observables) {
                    acc[n] += g.eval(x) * p;
                }
            }
        }
        Ok(Self {
            law: law.clone(),
            a: *a,
            m_max,
            sums,
            orders_used,
        })
    }

    pub fn law(&self) -> &LatticeLaw {
        &self.law
    }

    pub fn return_sequence(&self) -> &RegVarying {
        &self.a
    }

    pub fn m_max(&self) -> u64 {
        self.m_max
    }

    /// Number of orders actually convolved before rows became negligible.
    pub fn orders_used(&self) -> u64 {
        self.orders_used
    }

    /// `A_n` for observable `which` (index into the list given at construction).
    pub fn get(&self, which: usize, n: u64) -> Result<f64> {
        if n > self.m_max {
            return Err(LabError::Range(format!("n = {n} exceeds the sweep bound {}", self.m_max)));
        }
        self.sums
            .get(which)
            .map(|s| s[n as usize])
            .ok_or_else(|| LabError::domain(format!("no observable with index {which}")))
    }

    pub fn series(&self, which: usize) -> &[f64] {
        &self.sums[which]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::Observable;

    /// Independent oracle: DP over the integer line in plain coordinates.
    fn naive_rows(law: &LatticeLaw, k_max: usize, m_max: usize) -> Vec<Vec<f64>> {
        let pmf: Vec<f64> = (0..=m_max as u64).map(|m| law.pmf(m)).collect();
        let mut rows = vec![pmf.clone()];
        for _ in 1..k_max {
            let prev = rows.last().unwrap();
            let mut next = vec![0.0; m_max + 1];
            for (m, &x) in prev.iter().enumerate() {
                for (s, &y) in pmf.iter().enumerate().take(m_max + 1 - m) {
                    next[m + s] += x * y;
                }
            }
            rows.push(next);
        }
        rows
    }

    #[test]
    fn first_row_is_pmf() {
        let law = LatticeLaw::new(0.5, 1, 1).unwrap();
        let t = ConvolutionTable::build(&law, 3, 500).unwrap();
        for m in 0..=500 {
            assert_eq!(t.prob(1, m), law.pmf(m));
        }
        let p1 = law.pmf(1);
        assert!((t.prob(2, 2) - p1 * p1).abs() < 1e-17);
        assert!((t.prob(2, 2) - 0.085_786_437_626_904_95).abs() < 1e-15);
    }

    #[test]
    fn matches_plain_coordinate_dp() {
        for &(g, p, xi) in &[(0.5, 1, 1), (0.5, 3, 1), (0.7, 4, 3), (0.3, 2, 1)] {
            let law = LatticeLaw::new(g, p, xi).unwrap();
            let (k_max, m_max) = (25usize, 400usize);
            let oracle = naive_rows(&law, k_max, m_max);
            for method in [ConvolutionMethod::Direct, ConvolutionMethod::Fft] {
                let t = ConvolutionTable::build_with(&law, k_max as u64, m_max as u64, method).unwrap();
                for k in 1..=k_max {
                    for m in 0..=m_max {
                        let (x, y) = (t.prob(k as u64, m as u64), oracle[k - 1][m]);
                        assert!((x - y).abs() <= 1e-15 + 1e-12 * y, "{method:?} k={k} m={m}: {x} vs {y}");
                        if y == 0.0 {
                            assert_eq!(x, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn conservation_holds() {
        for &(g, p, xi) in &[(0.5, 1, 1), (0.5, 3, 2), (0.7, 1, 1)] {
            let law = LatticeLaw::new(g, p, xi).unwrap();
            let t = ConvolutionTable::build(&law, 300, 3000).unwrap();
            assert!(t.conservation_error() < 1e-12, "{}", t.conservation_error());
        }
    }

    #[test]
    fn resource_error_suggests_smaller_bound() {
        let law = LatticeLaw::new(0.9, 1, 1).unwrap();
        match ConvolutionTable::build(&law, 200_000, 200_000) {
            Err(LabError::Resource { suggestion, .. }) => assert!(suggestion.contains('M')),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn tied_sums_match_table() {
        let law = LatticeLaw::new(0.6, 2, 1).unwrap();
        let a = law.return_sequence();
        let obs = [Observable::Const(1.0), Observable::Identity];
        let refs: Vec<&dyn TestFunction> = obs.iter().map(|o| o as &dyn TestFunction).collect();
        let sums = TiedSums::compute(&law, &a, &refs, 2000).unwrap();
        let table = ConvolutionTable::build(&law, 2000, 2000).unwrap();
        for n in [1u64, 2, 3, 17, 500, 1999, 2000] {
            for (i, g) in obs.iter().enumerate() {
                let x = sums.get(i, n).unwrap();
                let y = table.tied_sum(n, &a, g).unwrap();
                assert!((x - y).abs() < 1e-13, "n={n} {g}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn power_row_matches_table_row() {
        let law = LatticeLaw::new(0.5, 3, 2).unwrap();
        let t = ConvolutionTable::build(&law, 40, 5000).unwrap();
        for method in [ConvolutionMethod::Direct, ConvolutionMethod::Fft] {
            let row = convolution_power_with(&law, 37, 5000, method).unwrap();
            for m in 0..=5000 {
                let (x, y) = (row.view().prob(m), t.prob(37, m));
                assert!((x - y).abs() < 1e-15 + 1e-11 * y, "m={m}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn csv_and_sidecar() {
        let law = LatticeLaw::new(0.5, 2, 1).unwrap();
        let t = ConvolutionTable::build(&law, 2, 6).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,m,prob");
        // row 1: m = 1,3,5; row 2: m = 2,4,6
        assert_eq!(lines.len(), 1 + 3 + 3);
        let back: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(back.to_bits(), law.pmf(1).to_bits());
        let json: serde_json::Value = serde_json::from_str(&t.sidecar_json()).unwrap();
        assert_eq!(json["K"], 2);
        assert_eq!(json["overflow"].as_array().unwrap().len(), 2);
    }
}
