use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rscusum::bench::{arl_edd_sweep_with, drift_row, write_drift_csv, write_sweep_csv, TrialSpec};
use rscusum::calibration::{gaussian_rho_star, solve_rho_star, threshold_for_arl, RhoSolution};
use rscusum::lfd::{solve_polytope_lfd, train_beta_networks, verify_drift_condition, LfdPair, Provenance, Verdict};
use rscusum::samplers::sample;
use rscusum::{Detector, DetectorState, RngStream};
use serde::Serialize;

use crate::config::{DetectorSection, ExperimentConfig, Family};
use crate::CliError;

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Input("this command needs a seed (--seed or config \"seed\")".into()))
    }

    fn file(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn build_detector(cfg: &ExperimentConfig, d: &DetectorSection) -> Result<Detector, CliError> {
    Ok(Detector::from_models(cfg.resolve(&d.model_inf)?, cfg.resolve(&d.model_post)?, d.threshold, d.rho)?)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Inconclusive => "INCONCLUSIVE",
        Verdict::Fail => "FAIL",
    }
}

pub fn cmd_lfd(cfg: &ExperimentConfig, ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let fam = cfg.families.as_ref().ok_or_else(|| CliError::Input("config has no \"families\" section".into()))?;
    let seed = ctx.seed()?;
    let basis_inf = cfg.resolve_family(&fam.inf)?;
    let basis_post = cfg.resolve_family(&fam.post)?;
    let pair: LfdPair = match (&fam.inf, &fam.post) {
        (Family::Polytope(a), Family::Polytope(b)) => {
            let sol = solve_polytope_lfd(a, b)?;
            writeln!(out, "q_inf mean: {:?}", sol.mean_inf)?;
            writeln!(out, "q_post mean: {:?}", sol.mean_post)?;
            if !sol.unique {
                writeln!(out, "warning: the nearest pair is not unique; returning one minimizer")?;
            }
            sol.pair
        }
        _ => {
            let train = rscusum::lfd::TrainConfig { seed, ..cfg.lfd.train.clone() };
            let outcome = train_beta_networks(&basis_inf, &basis_post, &train)?;
            writeln!(out, "average beta_inf: {:?}", outcome.report.beta_inf)?;
            writeln!(out, "average beta_post: {:?}", outcome.report.beta_post)?;
            write_json(&ctx.file("beta_report.json")?, &outcome.report)?;
            outcome.pair
        }
    };
    writeln!(out, "fisher_gap: {}", pair.fisher_gap)?;
    let mut rng = RngStream::new(seed).child(1).rng();
    let report = verify_drift_condition(&basis_inf, &pair, cfg.lfd.drift_check_samples, &mut rng)?;
    for v in &report.vertices {
        writeln!(
            out,
            "vertex {}: D_F(P||Q_inf)={} D_F(P||Q_1)={} gap={} (se {}) {}",
            v.index,
            v.to_inf.mean,
            v.to_post.mean,
            v.gap.mean,
            v.gap.stderr,
            verdict_name(v.verdict)
        )?;
    }
    writeln!(out, "drift condition: {}", verdict_name(report.verdict))?;
    write_json(&ctx.file("lfd_pair.json")?, &pair)?;
    write_json(&ctx.file("drift_check.json")?, &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    gamma: f64,
    omega: f64,
}

#[derive(Serialize)]
struct CalibrationReport {
    version: u32,
    seed: u64,
    solution: RhoSolution,
    closed_form: Option<RhoSolution>,
    thresholds: Vec<ThresholdRow>,
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let sec = cfg.calibration.as_ref().ok_or_else(|| CliError::Input("config has no \"calibration\" section".into()))?;
    let seed = ctx.seed()?;
    let p_inf = cfg.resolve(&sec.p_inf)?;
    let pair = LfdPair {
        q_inf: cfg.resolve(&sec.q_inf)?,
        q_post: cfg.resolve(&sec.q_post)?,
        fisher_gap: f64::NAN,
        provenance: Provenance::Analytic,
    };
    let mut rng = RngStream::new(seed).rng();
    let solution = solve_rho_star(&p_inf, &pair, sec.samples, &mut rng, sec.tol)?;
    let closed_form = p_inf.as_gaussian().and_then(|g| gaussian_rho_star(g, &pair));
    if solution.degenerate {
        writeln!(out, "degenerate case: h(rho) < 0 on the whole search range; rho_star set to the cap")?;
    }
    writeln!(out, "rho_star: {} (monte carlo, {} samples)", solution.rho_star, solution.samples)?;
    if let Some(cf) = &closed_form {
        writeln!(out, "rho_star: {} (closed form)", cf.rho_star)?;
    }
    let thresholds = sec
        .gammas
        .iter()
        .map(|&gamma| Ok(ThresholdRow { gamma, omega: threshold_for_arl(gamma, solution.rho_star)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    if !thresholds.is_empty() {
        writeln!(out, "thresholds for a detector with rho = 1:")?;
        writeln!(out, "gamma,omega")?;
        for t in &thresholds {
            writeln!(out, "{},{}", t.gamma, t.omega)?;
        }
    }
    let report = CalibrationReport { version: crate::config::CONFIG_VERSION, seed, solution, closed_form, thresholds };
    write_json(&ctx.file("calibration.json")?, &report)
}

fn check_trial_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Input(format!("trial name '{name}' must use only letters, digits, '-', '_' or '.'")))
    }
}

pub fn cmd_bench(cfg: &ExperimentConfig, ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.trials.is_empty() {
        return Err(CliError::Input("config has no trials".into()));
    }
    let seed = ctx.seed()?;
    let b = &cfg.bench;
    let root = RngStream::new(seed);
    // Resolve everything before any simulation runs.
    let specs = cfg
        .trials
        .iter()
        .enumerate()
        .map(|(k, t)| {
            check_trial_name(&t.name)?;
            let det = build_detector(cfg, &t.detector)?;
            let spec = TrialSpec::new(cfg.resolve(&t.p_inf)?, cfg.resolve(&t.p_post)?, det, b.arl_paths, b.cap, root.child(k as u64))?;
            Ok((t.name.as_str(), spec))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut drifts = Vec::with_capacity(specs.len());
    for (name, spec) in &specs {
        let row = drift_row(name, spec, b.drift_samples)?;
        writeln!(
            out,
            "{name}: drift pre {} (se {}), post {} (se {})",
            row.pre.mean, row.pre.stderr, row.post.mean, row.post.stderr
        )?;
        drifts.push(row);
        let rows = arl_edd_sweep_with(spec, &b.omegas, b.arl_paths, b.edd_paths)?;
        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv)?;
        fs::write(ctx.file(&format!("sweep_{name}.csv"))?, csv)?;
    }
    let mut csv = Vec::new();
    write_drift_csv(&drifts, &mut csv)?;
    fs::write(ctx.file("drift_table.csv")?, csv)?;
    writeln!(out, "wrote drift_table.csv and {} sweep files to {}", specs.len(), ctx.out.display())?;
    Ok(())
}

/// Parses one stream line: numbers separated by whitespace and/or commas.
/// Returns `None` for blank lines.
pub fn parse_stream_line(line: &str, dim: usize, line_no: usize) -> Result<Option<Vec<f64>>, CliError> {
    let tokens: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Ok(None);
    }
    let bad = |why: String| CliError::Input(format!("line {line_no}: {why}"));
    if tokens.len() != dim {
        return Err(bad(format!("expected {dim} values, found {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(bad(format!("'{t}' is not a finite number"))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn cmd_detect(
    cfg: &ExperimentConfig,
    ctx: &Context,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let sec = cfg.detector.as_ref().ok_or_else(|| CliError::Input("config has no \"detector\" section".into()))?;
    let det = build_detector(cfg, sec)?;
    // Probe noise only matters for score mixtures with learned weights.
    let seed = if det.is_deterministic() { ctx.seed.unwrap_or(0) } else { ctx.seed()? };
    let mut rng = RngStream::new(seed).rng();
    let mut state = DetectorState::new();
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let read = input.read_line(&mut line).map_err(|e| CliError::Input(format!("line {}: {e}", line_no + 1)))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let Some(x) = parse_stream_line(&line, det.dim(), line_no)? else { continue };
        det.step(&mut state, &x, &mut rng)?;
        if state.stopped_at.is_some() {
            break;
        }
    }
    match state.stopped_at {
        Some(t) => writeln!(out, "alarm: stopping index {t}, final statistic {}", state.statistic)?,
        None => writeln!(out, "no alarm: {} observations, final statistic {}", state.n, state.statistic)?,
    }
    Ok(())
}

pub fn cmd_sample(cfg: &ExperimentConfig, ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let sec = cfg.sample.as_ref().ok_or_else(|| CliError::Input("config has no \"sample\" section".into()))?;
    let model = cfg.resolve(&sec.model)?;
    let mut rng = RngStream::new(ctx.seed()?).rng();
    let xs = sample(&model, sec.n, &mut rng)?;
    let mut text = String::new();
    for x in &xs {
        let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = ctx.file("samples.csv")?;
    fs::write(&path, text)?;
    writeln!(out, "wrote {} samples to {}", xs.len(), path.display())?;
    Ok(())
}
