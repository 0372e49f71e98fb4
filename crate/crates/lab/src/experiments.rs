//! Dispatch from an experiment kind to the library checks.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde_json::json;
use tdlab::maps::{
    darling_kac_empirical, infinite_density_profile, map_tied_down_estimate, return_tail, GradedGrid, MapSpec,
};
use tdlab::regvar::{equidist_average, lemma22_limit, lemma22_sum, Interval, LatticeWindow};
use tdlab::renewal::{
    convolution_power, mc_tied_down_continuous, nagaev_check, periodic_llt_profile, ContinuousLaw, LatticeLaw, Reach,
    TiedSums,
};
use tdlab::stable::sample_mean;
use tdlab::walk::{bridge_local_time_mc, total_variation, BridgeSampler, BridgeTable, WalkLaw};
use tdlab::{Observable, RegVarying, StableFamily, TestFunction};

use crate::config::{ExperimentConfig, ExperimentKind, MapFamilyName, Resolved};
use crate::report::{render_report, render_timings, Report, Verdict};
use crate::CliError;

/// Build identifier recorded in run metadata.
pub const GIT_DESCRIBE: &str = env!("LAB_GIT_DESCRIBE");

/// Verdicts and output files of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: String,
    pub verdicts: Vec<Verdict>,
    /// `(file name, contents)` for every data file.
    pub files: Vec<(String, String)>,
    pub metadata: serde_json::Value,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn report(&self) -> Report {
        Report::from([(self.id.clone(), self.verdicts.clone())])
    }

    /// Writes the data files, `meta.json`, `report.json` and `timings.json`
    /// into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        let mut meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        meta.push('\n');
        std::fs::write(dir.join("meta.json"), meta)?;
        let report = self.report();
        std::fs::write(dir.join("report.json"), render_report(&report))?;
        std::fs::write(dir.join("timings.json"), render_timings(&report))
    }
}

/// 17 significant digits, enough to round-trip any binary64.
fn e17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv(String);

impl Csv {
    fn new(header: &str) -> Self {
        Csv(format!("{header}\n"))
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let r = cfg.resolve()?;
    let start = Instant::now();
    let (mut verdicts, files) = match r.kind {
        ExperimentKind::Dist => dist(&r)?,
        ExperimentKind::Lemma22 => lemma22(&r)?,
        ExperimentKind::Equidist => equidist(&r)?,
        ExperimentKind::RenewalSrt | ExperimentKind::RenewalTied => renewal_tied(&r)?,
        ExperimentKind::RenewalLlt => renewal_llt(&r)?,
        ExperimentKind::RenewalNagaev => renewal_nagaev(&r)?,
        ExperimentKind::RenewalContinuous => renewal_continuous(&r)?,
        ExperimentKind::MapTail => map_tail(&r)?,
        ExperimentKind::MapDensity => map_density(&r)?,
        ExperimentKind::MapDk => map_dk(&r)?,
        ExperimentKind::MapTied => map_tied(&r)?,
        ExperimentKind::WalkBridge => walk_bridge(&r)?,
    };
    let runtime = start.elapsed();
    for v in &mut verdicts {
        v.runtime = runtime;
    }
    let metadata = json!({
        "kind": r.kind.name(),
        "gamma": r.gamma,
        "p": r.p,
        "xi": r.xi,
        "n": r.n,
        "trials": r.trials,
        "seed": r.seed,
        "g": r.g.to_string(),
        "bins": r.bins,
        "iters": r.iters,
        "kappa": r.kappa,
        "family": r.family.to_string(),
        "mc_n": r.mc_n,
        "git_describe": GIT_DESCRIBE,
    });
    Ok(Outcome {
        id: r.kind.name().to_string(),
        verdicts,
        files,
        metadata,
    })
}

type Produced = (Vec<Verdict>, Vec<(String, String)>);

fn dist(r: &Resolved) -> Result<Produced, CliError> {
    let family = StableFamily::new(r.gamma)?;
    let mut verdicts = Vec::new();
    let mut density = Csv::new("x,density,cdf");
    for x in log_grid(0.05, 20.0, 400) {
        density.row(&[e17(x), e17(family.density(x)?), e17(family.cdf(x)?)]);
    }
    let mut ml = Csv::new("y,ml_density");
    for i in 1..=500 {
        let y = 5.0 * i as f64 / 500.0;
        ml.row(&[e17(y), e17(family.ml_density(y)?)]);
    }
    if r.gamma == 0.5 {
        let mut levy: f64 = 0.0;
        for x in log_grid(0.05, 20.0, 400) {
            let exact = x.powf(-1.5) * (-1.0 / (PI * x)).exp() / PI;
            levy = levy.max((family.density(x)? - exact).abs());
        }
        verdicts.push(Verdict::at_most("levy-density-sup-error", levy, 1e-6));
        let mut half_normal: f64 = 0.0;
        for i in 1..=500 {
            let y = 5.0 * i as f64 / 500.0;
            let exact = 2.0 / PI * (-y * y / PI).exp();
            half_normal = half_normal.max((family.ml_density(y)? - exact).abs());
        }
        verdicts.push(Verdict::at_most("half-normal-density-sup-error", half_normal, 1e-6));
    }
    let mut split: f64 = 0.0;
    for x in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        split = split.max((family.cdf(x)? + family.survival(x)? - 1.0).abs());
    }
    verdicts.push(Verdict::at_most("cdf-plus-survival-error", split, 1e-12));
    let z = family.sample(r.seed, r.trials as usize)?;
    let y: Vec<f64> = z.iter().map(|z| z.powf(-r.gamma)).collect();
    for k in 1..=3u32 {
        let est = sample_mean(&y, |v| v.powi(k as i32));
        verdicts.push(
            Verdict::within(format!("ml-moment-{k}"), est.mean, family.ml_moment(k), 4.0 * est.std_error).seeded(r.seed),
        );
    }
    Ok((
        verdicts,
        vec![("stable_density.csv".into(), density.0), ("ml_density.csv".into(), ml.0)],
    ))
}

fn lemma22(r: &Resolved) -> Result<Produced, CliError> {
    let family = StableFamily::new(r.gamma)?;
    let a = RegVarying::new(r.gamma, 1.0)?;
    let window = LatticeWindow {
        p: r.p,
        xi: r.xi as i64,
        residues: Interval::new(0.0, 1.0)?,
        c: 0.05,
        d: 40.0,
    };
    let limit = lemma22_limit(&family, &r.g, window.c, window.d, window.residues.length())?;
    let tol = if r.p == 1 { 0.02 } else { 0.03 };
    let horizons: Vec<u64> = if r.p == 1 { vec![r.n] } else { (0..r.p).map(|i| r.n + i).collect() };
    let mut csv = Csv::new("n,sum,limit");
    let mut verdicts = Vec::new();
    for n in horizons {
        let sum = lemma22_sum(&a, &family, &window, &r.g, n)?
            .value()
            .ok_or_else(|| CliError::Usage(format!("lemma22: the grid window is empty at n = {n}")))?;
        csv.row(&[n.to_string(), e17(sum), e17(limit)]);
        verdicts.push(Verdict::within(format!("weighted-sum-n{n}"), sum / limit, 1.0, tol));
    }
    Ok((verdicts, vec![("weighted_sum.csv".into(), csv.0)]))
}

fn equidist(r: &Resolved) -> Result<Produced, CliError> {
    let nu = r.n as usize;
    let mut weights = vec![1.0 / nu as f64; nu + 1];
    weights[0] = 0.0;
    let mut csv = Csv::new("case,value,comparison");
    let mut verdicts = Vec::new();
    let irr = equidist_average(&weights, 2f64.sqrt(), 1.0, Interval::new(0.0, 0.5)?, 0.0)?;
    csv.row(&["irrational".into(), e17(irr.value), e17(irr.comparison)]);
    verdicts.push(Verdict::within("irrational-rotation", irr.value / irr.comparison, 1.0, 0.01));
    if r.p > 1 {
        let lat = equidist_average(&weights, r.xi as f64, r.p as f64, Interval::new(0.0, 1.0)?, 0.0)?;
        csv.row(&["lattice".into(), e17(lat.value), e17(lat.comparison)]);
        verdicts.push(Verdict::within("lattice-rotation", lat.value / lat.comparison, 1.0, 0.01));
    }
    Ok((verdicts, vec![("equidist.csv".into(), csv.0)]))
}

fn renewal_tied(r: &Resolved) -> Result<Produced, CliError> {
    let law = LatticeLaw::new(r.gamma, r.p, r.xi)?;
    let family = StableFamily::new(r.gamma)?;
    let a = law.return_sequence();
    let one = Observable::Const(1.0);
    let sums = TiedSums::compute(&law, &a, &[&one as &dyn TestFunction, &r.g], r.n)?;
    let mut verdicts = Vec::new();
    if r.kind == ExperimentKind::RenewalSrt {
        // the pointwise ratio is asserted only for γ > 1/2; below that the
        // Cesàro deviation is the asserted quantity
        match sums.srt_profile(0, r.n)? {
            Reach::Reached(s) if r.gamma > 0.5 => verdicts.push(Verdict::within("srt-ratio", s.ratio, 1.0, 0.1)),
            Reach::Reached(_) => {
                verdicts.push(Verdict::at_most("cesaro-deviation", sums.cesaro_deviation(0, r.n, 1.0)?, 0.05))
            }
            Reach::Unreachable => verdicts.push(Verdict::at_most("unreachable-mass", sums.get(0, r.n)?, 0.0)),
        }
    } else {
        let target = family.tied_down_expect(&r.g)?;
        match sums.tied_down_functional(1, r.n)? {
            Reach::Reached(v) => verdicts.push(Verdict::within("tied-down-functional", v, target, 0.1 * target.abs())),
            Reach::Unreachable => verdicts.push(Verdict::at_most("unreachable-mass", sums.get(1, r.n)?.abs(), 0.0)),
        }
    }
    let mut csv = Csv::new("n,tied_sum_one,tied_sum_g,u_n");
    for n in 1..=r.n {
        csv.row(&[n.to_string(), e17(sums.get(0, n)?), e17(sums.get(1, n)?), e17(a.u_rate(n))]);
    }
    Ok((verdicts, vec![("tied_sums.csv".into(), csv.0)]))
}

fn renewal_llt(r: &Resolved) -> Result<Produced, CliError> {
    let law = LatticeLaw::new(r.gamma, r.p, r.xi)?;
    let family = StableFamily::new(r.gamma)?;
    let a = law.return_sequence();
    let scale = a.inverse(r.n as f64)?;
    let m_max = (3.0 * scale).ceil() as u64 + 2 * r.p;
    let row = convolution_power(&law, r.n, m_max)?;
    let profile = periodic_llt_profile(&row.view(), &a, &family, (0.5, 3.0), 200)?;
    let verdicts = vec![
        Verdict::at_most("off-lattice-max", profile.off_lattice_max, 0.0),
        Verdict::at_most("llt-max-deviation", profile.max_deviation, 0.05 * profile.max_target),
    ];
    let mut csv = Csv::new("k,kappa,lhs,rhs");
    for p in &profile.points {
        csv.row(&[p.k.to_string(), e17(p.kappa), e17(p.lhs), e17(p.rhs)]);
    }
    Ok((verdicts, vec![("llt_profile.csv".into(), csv.0)]))
}

fn renewal_nagaev(r: &Resolved) -> Result<Produced, CliError> {
    let law = LatticeLaw::new(r.gamma, r.p, r.xi)?;
    let family = StableFamily::new(r.gamma)?;
    let mut verdicts = Vec::new();
    for t in [0.5, 1.0] {
        let (lhs, rhs) = nagaev_check(&law, &family, t, r.n)?;
        verdicts.push(Verdict::at_most(format!("char-fn-gap-t{t}"), (lhs - rhs).norm(), 0.02));
    }
    let mut csv = Csv::new("t,lhs_re,lhs_im,rhs_re,rhs_im");
    for i in 0..=40 {
        let t = i as f64 * 0.05;
        let (lhs, rhs) = nagaev_check(&law, &family, t, r.n)?;
        csv.row(&[e17(t), e17(lhs.re), e17(lhs.im), e17(rhs.re), e17(rhs.im)]);
    }
    Ok((verdicts, vec![("char_fn.csv".into(), csv.0)]))
}

fn renewal_continuous(r: &Resolved) -> Result<Produced, CliError> {
    let law = ContinuousLaw::pareto(r.gamma, 1.0)?;
    let family = StableFamily::new(r.gamma)?;
    let a = law.return_sequence();
    let window = Interval::new(0.0, 0.5)?;
    let est = mc_tied_down_continuous(&law, &a, r.n as f64, window, &r.g, r.trials as usize, r.seed, false)?;
    let target = window.length() * family.tied_down_expect(&r.g)?;
    let verdicts = vec![Verdict::within("window-renewal-sum", est.mean, target, 3.0 * est.std_error).seeded(r.seed)];
    let mut csv = Csv::new("n,estimate,std_error,target");
    csv.row(&[r.n.to_string(), e17(est.mean), e17(est.std_error), e17(target)]);
    Ok((verdicts, vec![("estimate.csv".into(), csv.0)]))
}

fn map_spec(r: &Resolved) -> Result<MapSpec, CliError> {
    Ok(match r.family {
        MapFamilyName::T => MapSpec::t(r.gamma)?,
        MapFamilyName::R => MapSpec::r(r.gamma, r.kappa)?,
    })
}

fn map_tail(r: &Resolved) -> Result<Produced, CliError> {
    let spec = map_spec(r)?;
    let tail = return_tail(&spec, r.trials as usize, r.n, r.seed)?;
    let fit = tail.slope(100, 100_000)?;
    let missing = (1..=20).filter(|&t| tail.frequency(t) == 0.0).count();
    let verdicts = vec![
        Verdict::within("return-tail-slope", fit.slope, -r.gamma, 0.05).seeded(r.seed),
        Verdict::at_most("unvisited-return-times-1-20", missing as f64, 0.0).seeded(r.seed),
    ];
    let mut csv = Csv::new("t,survival");
    for (t, s) in tail.profile(1, r.n, 200) {
        csv.row(&[(t as u64).to_string(), e17(s)]);
    }
    Ok((verdicts, vec![("return_tail.csv".into(), csv.0)]))
}

fn map_density(r: &Resolved) -> Result<Produced, CliError> {
    let spec = map_spec(r)?;
    let grid = GradedGrid {
        per_octave: r.bins as usize,
        ..GradedGrid::default()
    };
    let profile = infinite_density_profile(&spec, grid, r.iters as usize)?;
    let verdicts = vec![
        Verdict::within("density-exponent", profile.exponent.slope, -1.0 / r.gamma, 0.1),
        Verdict::at_least("min-density-on-omega", profile.min_on_omega(), f64::MIN_POSITIVE),
        Verdict::at_most("stabilization", profile.stabilization, 1e-4),
    ];
    let mut csv = Csv::new("x,value");
    for (x, h) in &profile.points {
        csv.row(&[e17(*x), e17(*h)]);
    }
    Ok((verdicts, vec![("density.csv".into(), csv.0)]))
}

fn map_dk(r: &Resolved) -> Result<Produced, CliError> {
    let spec = map_spec(r)?;
    let family = StableFamily::new(r.gamma)?;
    let dk = darling_kac_empirical(&spec, r.n, r.trials as usize, r.seed)?;
    let m2 = family.ml_moment(2);
    let verdicts = vec![
        Verdict::at_most("darling-kac-ks", dk.ks_distance, 0.05).seeded(r.seed),
        Verdict::within("second-moment", dk.second_moment, m2, 0.05 * m2).seeded(r.seed),
    ];
    let width = 0.05;
    let scaled: Vec<f64> = dk.counts.iter().map(|&s| s as f64 / dk.a_hat).collect();
    let top = scaled.iter().copied().fold(0.0, f64::max);
    let bins = (top / width).floor() as usize + 1;
    let mut hist = vec![0u64; bins];
    for y in &scaled {
        hist[(y / width).floor() as usize] += 1;
    }
    let mut csv = Csv::new("x,value,ml_density");
    for (i, c) in hist.iter().enumerate() {
        let x = (i as f64 + 0.5) * width;
        let value = *c as f64 / (scaled.len() as f64 * width);
        csv.row(&[e17(x), e17(value), e17(family.ml_density(x)?)]);
    }
    Ok((verdicts, vec![("darling_kac.csv".into(), csv.0)]))
}

fn map_tied(r: &Resolved) -> Result<Produced, CliError> {
    let spec = map_spec(r)?;
    let early = r.n / 10;
    let tied = map_tied_down_estimate(&spec, r.n, r.trials as usize, &r.g, r.seed, &[early, r.n])?;
    let d_early = tied.at(early).unwrap_or(f64::NAN);
    let d_late = tied.at(r.n).unwrap_or(f64::NAN);
    let verdicts = vec![
        Verdict::at_most("cesaro-deviation", d_late, 0.1).seeded(r.seed),
        Verdict::at_most(format!("deviation-decrease-vs-n{early}"), d_late, d_early).seeded(r.seed),
    ];
    let mut dev = Csv::new("n,deviation");
    for (n, d) in &tied.deviations {
        dev.row(&[n.to_string(), e17(*d)]);
    }
    let mut a_hat = Csv::new("n,a_hat");
    for (n, v) in tied.a_hat.iter().enumerate().skip(1) {
        a_hat.row(&[n.to_string(), e17(*v)]);
    }
    Ok((
        verdicts,
        vec![("deviations.csv".into(), dev.0), ("return_sequence.csv".into(), a_hat.0)],
    ))
}

fn walk_bridge(r: &Resolved) -> Result<Produced, CliError> {
    let law = WalkLaw::lazy();
    let family = StableFamily::new(law.gamma())?;
    let table = BridgeTable::build(&law, r.n)?;
    let m1 = family.ml_moment(2);
    let m2 = family.ml_moment(3);
    let mut verdicts = vec![
        Verdict::within("bridge-mean-ratio", table.conditional_moment(1), m1, 0.05 * m1),
        Verdict::within("bridge-second-moment", table.conditional_moment(2), m2, 0.05 * m2),
    ];
    let exact = BridgeTable::build(&law, r.mc_n)?.conditional_pmf();
    let mc = bridge_local_time_mc(&law, r.mc_n, r.trials as usize, r.seed, BridgeSampler::Exact)?;
    verdicts.push(Verdict::at_most("dp-mc-total-variation", total_variation(&exact, &mc.pmf), 0.01).seeded(r.seed));
    let mut pmf = Csv::new("local_time,probability");
    for (l, p) in table.conditional_pmf().iter().enumerate() {
        pmf.row(&[l.to_string(), e17(*p)]);
    }
    let mut cmp = Csv::new("local_time,exact,monte_carlo");
    for (l, p) in exact.iter().enumerate() {
        cmp.row(&[l.to_string(), e17(*p), e17(mc.pmf.get(l).copied().unwrap_or(0.0))]);
    }
    Ok((
        verdicts,
        vec![("bridge_pmf.csv".into(), pmf.0), ("bridge_mc.csv".into(), cmp.0)],
    ))
}
