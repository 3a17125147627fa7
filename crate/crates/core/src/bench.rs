//! Monte Carlo harness for drifts, run lengths and detection delays.
//!
//! Every path draws from its own child stream of the trial's [`RngStream`],
//! so results are identical for any number of rayon workers.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::models::ScoreModel;
use crate::rng::RngStream;
use crate::samplers::Source;
use crate::stats::{Estimate, Running};

pub const SWEEP_HEADER: &str = "omega,arl,arl_stderr,arl_censored,edd,edd_stderr,edd_censored";
pub const DRIFT_HEADER: &str = "trial,drift_pre,drift_pre_stderr,drift_post,drift_post_stderr";

const ARL_TAG: u64 = 0;
const EDD_TAG: u64 = 1;

/// Mean and standard error of `z(X)` over `n` draws from `model`.
pub fn estimate_drift(model: &ScoreModel, detector: &Detector, n: usize, rng: &RngStream) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 draws".into()));
    }
    if model.dim() != detector.dim() {
        return Err(Error::DimensionMismatch { expected: detector.dim(), got: model.dim() });
    }
    let mut src = Source::new(model)?;
    let mut rng = rng.rng();
    let mut acc = Running::new();
    for _ in 0..n {
        let x = src.draw(&mut rng);
        acc.push(detector.rho() * detector.raw_score_unchecked(&x, &mut rng));
    }
    Ok(acc.estimate())
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub p_inf: ScoreModel,
    pub p_post: ScoreModel,
    pub detector: Detector,
    pub paths: usize,
    pub cap: u64,
    pub rng: RngStream,
}

impl TrialSpec {
    pub fn new(
        p_inf: ScoreModel,
        p_post: ScoreModel,
        detector: Detector,
        paths: usize,
        cap: u64,
        rng: RngStream,
    ) -> Result<Self> {
        if paths == 0 {
            return Err(Error::InvalidArgument("paths must be at least 1".into()));
        }
        if cap == 0 {
            return Err(Error::InvalidArgument("cap must be at least 1".into()));
        }
        for m in [&p_inf, &p_post] {
            if m.dim() != detector.dim() {
                return Err(Error::DimensionMismatch { expected: detector.dim(), got: m.dim() });
            }
            if !m.supports_sampling() {
                return Err(Error::NoSampler(m.type_name()));
            }
        }
        Ok(Self { p_inf, p_post, detector, paths, cap, rng })
    }

    pub fn with_paths(&self, paths: usize) -> Result<Self> {
        Self::new(self.p_inf.clone(), self.p_post.clone(), self.detector.clone(), paths, self.cap, self.rng)
    }

    pub fn with_detector(&self, detector: Detector) -> Result<Self> {
        Self::new(self.p_inf.clone(), self.p_post.clone(), detector, self.paths, self.cap, self.rng)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub mean_stop: f64,
    pub stderr: f64,
    pub censored: usize,
    pub paths: usize,
    pub drift_pre: Option<Estimate>,
    pub drift_post: Option<Estimate>,
    /// Set when censored paths were counted at the cap.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    pub arl: Estimate,
    pub arl_censored: usize,
    pub edd: Estimate,
    pub edd_censored: usize,
}

struct PathRecord {
    /// First crossing per threshold, `None` when censored.
    crossings: Vec<Option<u64>>,
    sum: f64,
    sum_sq: f64,
    steps: u64,
}

/// Runs one path until every threshold is crossed or the cap is reached.
fn run_path(detector: &Detector, law: &ScoreModel, omegas: &[f64], cap: u64, stream: RngStream) -> PathRecord {
    let mut rng = stream.rng();
    let mut crossings = vec![None; omegas.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut next = 0;
    let mut z_stat = 0.0f64;
    let mut n = 0u64;
    if !omegas.is_empty() {
        let mut src = Source::new(law).expect("sampler checked by TrialSpec");
        while n < cap && next < omegas.len() {
            let x = src.draw(&mut rng);
            let z = detector.rho() * detector.raw_score_unchecked(&x, &mut rng);
            sum += z;
            sum_sq += z * z;
            n += 1;
            z_stat = (z_stat + z).max(0.0);
            while next < omegas.len() && z_stat >= omegas[next] {
                crossings[next] = Some(n);
                next += 1;
            }
        }
    }
    PathRecord { crossings, sum, sum_sq, steps: n }
}

fn simulate(spec: &TrialSpec, law: &ScoreModel, tag: u64, omegas: &[f64], paths: usize) -> Vec<PathRecord> {
    let root = spec.rng.child(tag);
    (0..paths as u64)
        .into_par_iter()
        .map(|k| run_path(&spec.detector, law, omegas, spec.cap, root.child(k)))
        .collect()
}

/// Per-threshold mean stopping time (censored runs at the cap) and censoring count.
fn summarize(records: &[PathRecord], index: usize, cap: u64) -> (Estimate, usize) {
    let mut acc = Running::new();
    let mut censored = 0;
    for r in records {
        match r.crossings[index] {
            Some(t) => acc.push(t as f64),
            None => {
                censored += 1;
                acc.push(cap as f64);
            }
        }
    }
    (acc.estimate(), censored)
}

/// Pooled increment mean over all steps of all paths, in path order.
fn pooled_drift(records: &[PathRecord]) -> Option<Estimate> {
    let (mut n, mut s, mut s2) = (0u64, 0.0, 0.0);
    for r in records {
        n += r.steps;
        s += r.sum;
        s2 += r.sum_sq;
    }
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Some(Estimate { mean, stderr: (var / nf).sqrt() })
}

fn summary(records: &[PathRecord], cap: u64) -> (f64, f64, usize) {
    let (e, censored) = summarize(records, 0, cap);
    (e.mean, e.stderr, censored)
}

/// Mean time to false alarm with all data drawn from `p_inf`.
pub fn estimate_arl(spec: &TrialSpec) -> TrialSummary {
    let records = simulate(spec, &spec.p_inf, ARL_TAG, &[spec.detector.threshold()], spec.paths);
    let (mean_stop, stderr, censored) = summary(&records, spec.cap);
    TrialSummary {
        mean_stop,
        stderr,
        censored,
        paths: spec.paths,
        drift_pre: pooled_drift(&records),
        drift_post: None,
        lower_bound: censored > 0,
    }
}

/// Mean delay with the change at time 1, so all data come from `p_post`.
pub fn estimate_edd(spec: &TrialSpec) -> TrialSummary {
    let records = simulate(spec, &spec.p_post, EDD_TAG, &[spec.detector.threshold()], spec.paths);
    let (mean_stop, stderr, censored) = summary(&records, spec.cap);
    TrialSummary {
        mean_stop,
        stderr,
        censored,
        paths: spec.paths,
        drift_pre: None,
        drift_post: pooled_drift(&records),
        lower_bound: censored > 0,
    }
}

/// ARL and EDD for every threshold in one pass per path.
pub fn arl_edd_sweep(base: &TrialSpec, omegas: &[f64]) -> Result<Vec<SweepRow>> {
    arl_edd_sweep_with(base, omegas, base.paths, base.paths)
}

pub fn arl_edd_sweep_with(base: &TrialSpec, omegas: &[f64], arl_paths: usize, edd_paths: usize) -> Result<Vec<SweepRow>> {
    if arl_paths == 0 || edd_paths == 0 {
        return Err(Error::InvalidArgument("paths must be at least 1".into()));
    }
    if omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("thresholds must be finite and >= 0".into()));
    }
    if omegas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
    }
    if omegas.is_empty() {
        return Ok(Vec::new());
    }
    let arl = simulate(base, &base.p_inf, ARL_TAG, omegas, arl_paths);
    let edd = simulate(base, &base.p_post, EDD_TAG, omegas, edd_paths);
    Ok(omegas
        .iter()
        .enumerate()
        .map(|(i, &omega)| {
            let (arl_e, arl_c) = summarize(&arl, i, base.cap);
            let (edd_e, edd_c) = summarize(&edd, i, base.cap);
            SweepRow { omega, arl: arl_e, arl_censored: arl_c, edd: edd_e, edd_censored: edd_c }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.omega, r.arl.mean, r.arl.stderr, r.arl_censored, r.edd.mean, r.edd.stderr, r.edd_censored
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub trial: String,
    pub pre: Estimate,
    pub post: Estimate,
}

/// Pre- and post-change drifts of one trial, from independent child streams.
pub fn drift_row(name: &str, spec: &TrialSpec, n: usize) -> Result<DriftRow> {
    let root = spec.rng.child(2);
    Ok(DriftRow {
        trial: name.to_string(),
        pre: estimate_drift(&spec.p_inf, &spec.detector, n, &root.child(0))?,
        post: estimate_drift(&spec.p_post, &spec.detector, n, &root.child(1))?,
    })
}

pub fn write_drift_csv<W: Write>(rows: &[DriftRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{DRIFT_HEADER}")?;
    for r in rows {
        if r.trial.contains([',', '\n', '"']) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "trial name contains a CSV delimiter"));
        }
        writeln!(out, "{},{},{},{},{}", r.trial, r.pre.mean, r.pre.stderr, r.post.mean, r.post.stderr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Gaussian;
    use nalgebra::DMatrix;

    fn g(m: f64) -> ScoreModel {
        Gaussian::new(vec![m, m], DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 2.0])).unwrap().into()
    }

    fn spec(omega: f64, paths: usize) -> TrialSpec {
        let det = Detector::from_models(g(-0.25), g(0.25), omega, 1.0).unwrap();
        TrialSpec::new(g(-0.25), g(0.25), det, paths, 10_000, RngStream::new(5)).unwrap()
    }

    #[test]
    fn zero_threshold_stops_at_one() {
        let s = spec(0.0, 50);
        for summary in [estimate_arl(&s), estimate_edd(&s)] {
            assert_eq!(summary.mean_stop, 1.0);
            assert_eq!(summary.stderr, 0.0);
            assert_eq!(summary.censored, 0);
            assert!(!summary.lower_bound);
        }
        let rows = arl_edd_sweep(&s, &[0.0]).unwrap();
        assert_eq!(rows[0].arl.mean, 1.0);
        assert_eq!(rows[0].edd.mean, 1.0);
    }

    #[test]
    fn censoring_is_flagged() {
        let det = Detector::from_models(g(-0.25), g(0.25), 50.0, 1.0).unwrap();
        let s = TrialSpec::new(g(-0.25), g(0.25), det, 20, 5, RngStream::new(1)).unwrap();
        let out = estimate_arl(&s);
        assert_eq!(out.censored, 20);
        assert_eq!(out.mean_stop, 5.0);
        assert!(out.lower_bound);
    }

    #[test]
    fn sweep_matches_single_threshold_runs() {
        let s = spec(3.0, 40);
        let rows = arl_edd_sweep(&s, &[1.0, 3.0]).unwrap();
        assert_eq!(rows[1].edd.mean, estimate_edd(&s).mean_stop);
        assert_eq!(rows[1].arl.mean, estimate_arl(&s).mean_stop);
        assert!(rows[0].edd.mean <= rows[1].edd.mean);
    }

    #[test]
    fn sweep_rejects_unsorted() {
        assert!(arl_edd_sweep(&spec(1.0, 2), &[2.0, 1.0]).is_err());
        assert!(arl_edd_sweep(&spec(1.0, 2), &[1.0, 1.0]).is_err());
        assert!(arl_edd_sweep(&spec(1.0, 2), &[]).unwrap().is_empty());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&[], &mut buf).unwrap();
        assert_eq!(buf, format!("{SWEEP_HEADER}\n").into_bytes());
        let rows = arl_edd_sweep(&spec(0.0, 3), &[0.0]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{SWEEP_HEADER}\n0,1,0,0,1,0,0\n"));
    }

    #[test]
    fn drift_matches_closed_form() {
        let s = spec(1.0, 1);
        let row = drift_row("R-AA", &s, 20_000).unwrap();
        let gap = (0.5f64 / 2.2).powi(2);
        assert!(row.pre.agrees_with(-gap, 4.0), "{:?}", row.pre);
        assert!(row.post.agrees_with(gap, 4.0), "{:?}", row.post);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let s = spec(2.0, 64);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| arl_edd_sweep(&s, &[1.0, 2.0]).unwrap());
        let b = four.install(|| arl_edd_sweep(&s, &[1.0, 2.0]).unwrap());
        assert_eq!(a, b);
    }
}
