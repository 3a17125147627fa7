//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting unless `ACCEPTANCE_STRICT=1`, in which case any
//! failing criterion makes the process exit 1.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::Instant;

use common::*;
use rscusum::bench::{arl_edd_sweep_with, estimate_arl, estimate_drift, estimate_edd, SweepRow, TrialSpec};
use rscusum::calibration::{solve_rho_star, threshold_for_arl};
use rscusum::lfd::{
    batch_loss_and_grad, gaussian_polytope_lfd, solve_polytope_lfd, train_beta_networks, verify_drift_condition,
    BetaNetwork, TrainConfig, Verdict,
};
use rscusum::models::{fisher_gaussian, hutchinson_laplacian, BetaWeights};
use rscusum::samplers::{sample, Source};
use rscusum::stats::{Estimate, Running};
use rscusum::{Detector, Gaussian, GaussianMixture, RngStream, ScoreMixture, ScoreModel};
use rscusum_cli::config::ExperimentConfig;
use rscusum_cli::{cmd_bench, Context};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gauss(m: &ScoreModel) -> &Gaussian {
    m.as_gaussian().unwrap()
}

/// `D_F(P‖Q_∞) − D_F(P‖Q₁)` for the reference Gaussians.
fn closed_drift(p: &ScoreModel, q_inf: &ScoreModel, q_post: &ScoreModel) -> f64 {
    fisher_gaussian(gauss(p), gauss(q_inf)).unwrap() - fisher_gaussian(gauss(p), gauss(q_post)).unwrap()
}

fn c1_drift_table() -> Outcome {
    struct Row {
        name: &'static str,
        p_inf: ScoreModel,
        p_post: ScoreModel,
        robust: bool,
        published: (f64, f64),
    }
    let rows = [
        Row { name: "R-AA", p_inf: r_inf_a(), p_post: r_post_a(), robust: true, published: (-0.0518, 0.0495) },
        Row { name: "R-AB", p_inf: r_inf_a(), p_post: r_post_b(), robust: true, published: (-0.0511, 0.155) },
        Row { name: "R-BA", p_inf: r_inf_b(), p_post: r_post_a(), robust: true, published: (-0.311, 0.0519) },
        Row { name: "R-BB", p_inf: r_inf_b(), p_post: r_post_b(), robust: true, published: (-0.309, 0.157) },
        Row { name: "N", p_inf: r_inf_a(), p_post: r_post_a(), robust: false, published: (0.124, 0.584) },
    ];
    let root = RngStream::new(SEED).child(1);
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let det = if r.robust { robust_detector(0.0, 1.0) } else { nonrobust_detector(0.0, 1.0) };
        let (qi, qp) = (&det.config().model_inf, &det.config().model_post);
        let stream = root.child(k as u64);
        let pre = estimate_drift(&r.p_inf, &det, 50_000, &stream.child(0)).unwrap();
        let post = estimate_drift(&r.p_post, &det, 50_000, &stream.child(1)).unwrap();
        let exact = (closed_drift(&r.p_inf, qi, qp), closed_drift(&r.p_post, qi, qp));
        for (label, est, published, exact) in [("pre", pre, r.published.0, exact.0), ("post", post, r.published.1, exact.1)] {
            let published_ok = (est.mean - published).abs() <= 0.01;
            let exact_ok = est.agrees_with(exact, 3.0);
            if !(published_ok && exact_ok) {
                pass = false;
                detail.push(format!(
                    "{} {label}: {:.4}±{:.4} vs published {published} (ok={published_ok}) closed {exact:.6} (ok={exact_ok})",
                    r.name, est.mean, est.stderr
                ));
            }
        }
    }
    if detail.is_empty() {
        detail.push("all 10 drifts within ±0.01 of the published values and 3 stderr of closed form".into());
    }
    outcome(pass, detail.join("; "))
}

fn c2_lfd() -> Outcome {
    let (a, b) = polytopes();
    let pair = gaussian_polytope_lfd(&a, &b).unwrap();
    let sol = solve_polytope_lfd(&a, &b).unwrap();
    let means_ok = sol.mean_inf == [-0.25, -0.25] && sol.mean_post == [0.25, 0.25];
    let exact_gap = (0.5f64 / 2.2).powi(2);
    let gap_ok = (pair.fisher_gap - 0.0516529).abs() <= 1e-6 && (pair.fisher_gap - exact_gap).abs() <= 1e-9;
    outcome(
        means_ok && gap_ok,
        format!("means {:?} / {:?}, fisher_gap {}", sol.mean_inf, sol.mean_post, pair.fisher_gap),
    )
}

fn c3_rho_star() -> (Outcome, f64) {
    let pair = gaussian_lfd();
    let mut rng = RngStream::new(SEED).child(3).rng();
    let sol = solve_rho_star(&r_inf_a(), &pair, 4_000_000, &mut rng, 0.002).unwrap();
    let ok = (sol.rho_star - 2.2).abs() <= 0.02 && !sol.degenerate;
    (outcome(ok, format!("rho_star {:.5} from {} samples (closed form 2.2)", sol.rho_star, sol.samples)), sol.rho_star)
}

fn c4_arl_bound(rho_star: f64) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, gamma) in [20.0, 50.0].into_iter().enumerate() {
        // The bound e^{ρ*ω} is for the unscaled statistic; also scaling by ρ* would only give e^ω.
        let omega = threshold_for_arl(gamma, rho_star).unwrap();
        let det = robust_detector(omega, 1.0);
        let spec =
            TrialSpec::new(r_inf_a(), r_post_a(), det, 2000, 100_000, RngStream::new(SEED).child(4).child(k as u64))
                .unwrap();
        let s = estimate_arl(&spec);
        pass &= s.mean_stop >= gamma;
        detail.push(format!("gamma {gamma}: omega {omega:.4}, ARL {:.1}±{:.1} ({} censored)", s.mean_stop, s.stderr, s.censored));
    }
    outcome(pass, detail.join("; "))
}

fn c5_edd() -> Outcome {
    let omega = 10.0;
    let mut pass = true;
    let mut detail = Vec::new();
    let posts = [("R-AA", r_post_a()), ("R-AB", r_post_b()), ("R-BA", r_post_a()), ("R-BB", r_post_b())];
    let pres = [r_inf_a(), r_inf_a(), r_inf_b(), r_inf_b()];
    for (k, ((name, p_post), p_inf)) in posts.into_iter().zip(pres).enumerate() {
        let det = robust_detector(omega, 1.0);
        let mu = closed_drift(&p_post, &det.config().model_inf, &det.config().model_post);
        // Lorden: expected overshoot is at most E[(z⁺)²]/E[z].
        let mut rng = RngStream::new(SEED).child(5).child(100 + k as u64).rng();
        let mut src = Source::new(&p_post).unwrap();
        let zsq: Running = (0..50_000)
            .map(|_| det.instantaneous_score(&src.draw(&mut rng), &mut rng).unwrap().max(0.0).powi(2))
            .collect();
        let overshoot = zsq.mean() / mu;
        let spec = TrialSpec::new(p_inf, p_post, det, 5000, 100_000, RngStream::new(SEED).child(5).child(k as u64)).unwrap();
        let s = estimate_edd(&spec);
        let (lo, hi) = (0.85 * omega / mu, 1.15 * (omega + overshoot) / mu);
        let ok = s.mean_stop >= lo && s.mean_stop <= hi && s.censored == 0;
        pass &= ok;
        detail.push(format!("{name}: {:.1} in [{lo:.1}, {hi:.1}]", s.mean_stop));
    }
    outcome(pass, detail.join("; "))
}

fn c6_reverse_triangle() -> Outcome {
    let pair = gaussian_lfd();
    let (qi, qp) = (pair.q_inf.clone(), pair.q_post.clone());
    let lhs = fisher_gaussian(gauss(&qp), gauss(&qi)).unwrap();
    let root = RngStream::new(SEED).child(6);
    let mut pick = root.child(0).rng();
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for k in 0..20u64 {
        use rand::Rng;
        let w: f64 = pick.random();
        let r1: ScoreModel = GaussianMixture::new(vec![gauss(&r_post_a()).clone(), gauss(&r_post_b()).clone()], vec![w, 1.0 - w])
            .unwrap()
            .into();
        let mut rng = root.child(1 + k).rng();
        let xs = sample(&r1, 20_000, &mut rng).unwrap();
        let gap: Running = xs
            .iter()
            .map(|x| {
                let s = r1.score(x).unwrap();
                let (a, b) = (qi.score(x).unwrap(), qp.score(x).unwrap());
                let d = |u: &[f64]| 0.5 * s.iter().zip(u).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                d(&a) - d(&b)
            })
            .collect();
        let e: Estimate = gap.estimate();
        let slack = e.mean + 3.0 * e.stderr - lhs;
        worst = worst.min(slack);
        pass &= slack >= 0.0;
    }
    outcome(pass, format!("D_F(Q1||Qinf)={lhs:.6}; smallest slack over 20 mixtures {worst:.4}"))
}

fn c7_oracles() -> Outcome {
    let mut rng = RngStream::new(SEED).child(7).rng();
    let fam = gbrbm_family(&mut rng);
    let gmm: ScoreModel =
        GaussianMixture::new(vec![gauss(&r_inf_a()).clone(), gauss(&r_inf_b()).clone()], vec![0.5, 0.5]).unwrap().into();
    let mix: ScoreModel = ScoreMixture::new(fam.inf.to_vec(), BetaWeights::Constant(vec![0.4, 0.6])).unwrap().into();
    let families = [("gaussian", r_inf_a(), 2.0), ("gmm", gmm, 3.0), ("gbrbm", fam.post[0].clone(), 1.0), ("score_mixture", mix, 1.0)];
    let (mut worst_s, mut worst_l) = (0.0f64, 0.0f64);
    for (_, model, scale) in &families {
        for _ in 0..100 {
            let x = normal_point(model.dim(), *scale, &mut rng);
            let fd = fd_gradient(|y| model.log_unnormalized(y).unwrap(), &x, 1e-5);
            worst_s = worst_s.max(rel_err(&model.score(&x).unwrap(), &fd));
            let lap = fd_divergence(|y| model.score(y).unwrap(), &x, 1e-4);
            worst_l = worst_l.max((model.laplacian(&x, &mut rng).unwrap() - lap).abs());
        }
    }
    outcome(
        worst_s <= 1e-5 && worst_l <= 1e-4,
        format!("4 families x 100 points: worst score rel err {worst_s:.2e}, worst laplacian abs err {worst_l:.2e}"),
    )
}

fn c8_hutchinson() -> Outcome {
    let mut rng = RngStream::new(SEED).child(8).rng();
    let mut detail = Vec::new();
    let mut pass = true;
    // Exact Gaussian traces.
    for m in [r_inf_a(), r_post_b()] {
        let x = normal_point(2, 1.0, &mut rng);
        let e = hutchinson_laplacian(&m, &x, 1000, &mut rng).unwrap();
        let exact = -gauss(&m).trace_precision();
        pass &= e.agrees_with(exact, 3.0);
        detail.push(format!("gaussian {:.4}±{:.4} vs {exact:.4}", e.mean, e.stderr));
    }
    let std10: ScoreModel = ScoreMixture::new(vec![Gaussian::isotropic(vec![0.0; 10], 1.0).unwrap().into()], BetaWeights::Constant(vec![1.0]))
        .unwrap()
        .into();
    let e = hutchinson_laplacian(&std10, &normal_point(10, 1.0, &mut rng), 10_000, &mut rng).unwrap();
    pass &= (e.mean + 10.0).abs() <= 0.5;
    detail.push(format!("-x in d=10: {:.3}", e.mean));
    // Learned-weight mixture over two GBRBMs at a Gibbs-sampled point.
    let fam = gbrbm_family(&mut rng);
    let net = BetaNetwork::random(10, 5, 2, &mut rng);
    let mix: ScoreModel = ScoreMixture::new(fam.post.to_vec(), BetaWeights::Network(net)).unwrap().into();
    let x = Source::new(&fam.post[0]).unwrap().draw(&mut rng);
    let ten = hutchinson_laplacian(&mix, &x, 10, &mut rng).unwrap();
    let many = hutchinson_laplacian(&mix, &x, 10_000, &mut rng).unwrap();
    let se = ten.stderr.hypot(many.stderr);
    let ok = (ten.mean - many.mean).abs() <= 3.0 * se;
    pass &= ok;
    detail.push(format!("10 probes {:.3}±{:.3} vs 10000 probes {:.3}±{:.3}", ten.mean, ten.stderr, many.mean, many.stderr));
    outcome(pass, detail.join("; "))
}

fn c9_gradients() -> Outcome {
    let mut rng = RngStream::new(SEED).child(9).rng();
    let fam = gbrbm_family(&mut rng);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let ni = BetaNetwork::random(10, 5, 2, &mut rng);
        let np = BetaNetwork::random(10, 5, 2, &mut rng);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| normal_point(10, 1.5, &mut rng)).collect();
        let (_, grad) = batch_loss_and_grad(&ni, &np, &fam.inf, &fam.post, &xs);
        let n_inf = ni.params().len();
        let theta: Vec<f64> = ni.params().iter().chain(np.params()).copied().collect();
        let loss_at = |t: &[f64]| {
            let a = BetaNetwork::from_params(10, 5, 2, t[..n_inf].to_vec()).unwrap();
            let b = BetaNetwork::from_params(10, 5, 2, t[n_inf..].to_vec()).unwrap();
            batch_loss_and_grad(&a, &b, &fam.inf, &fam.post, &xs).0
        };
        let fd = fd_gradient(loss_at, &theta, 1e-6);
        worst = worst.max(rel_err(&grad, &fd));
    }
    outcome(worst <= 1e-5, format!("50 parameter points: worst relative gradient error {worst:.2e}"))
}

fn c10_gbrbm() -> Outcome {
    let root = RngStream::new(SEED).child(10);
    let fam = gbrbm_family(&mut root.child(0).rng());
    let cfg = TrainConfig { seed: SEED, ..Default::default() };
    let trained = train_beta_networks(&fam.inf, &fam.post, &cfg).unwrap();
    let (bi, bp) = (&trained.report.beta_inf, &trained.report.beta_post);
    let b_ok = bi.iter().any(|&b| b > 0.9) && bp.iter().any(|&b| b > 0.9);
    let pair = trained.pair;
    let report = verify_drift_condition(&fam.inf, &pair, 50_000, &mut root.child(1).rng()).unwrap();
    let a_ok = report.verdict == Verdict::Pass;
    let det = Detector::from_models(pair.q_inf.clone(), pair.q_post.clone(), 0.0, 1.0).unwrap();
    let mut c_ok = true;
    let mut drifts = Vec::new();
    for (i, p_inf) in fam.inf.iter().enumerate() {
        for (j, p_post) in fam.post.iter().enumerate() {
            let s = root.child(10 + 2 * i as u64 + j as u64);
            let pre = estimate_drift(p_inf, &det, 20_000, &s.child(0)).unwrap();
            let post = estimate_drift(p_post, &det, 20_000, &s.child(1)).unwrap();
            c_ok &= pre.mean < -3.0 * pre.stderr && post.mean > 3.0 * post.stderr;
            drifts.push(format!("R-{i}{j} {:.3}/{:.3}", pre.mean, post.mean));
        }
    }
    let nonrobust = Detector::from_models(fam.inf[0].clone(), fam.post[1].clone(), 0.0, 1.0).unwrap();
    let n_pre = estimate_drift(&fam.inf[1], &nonrobust, 20_000, &root.child(20)).unwrap();
    let d_ok = n_pre.mean > 3.0 * n_pre.stderr;
    let gaps: Vec<String> = report.vertices.iter().map(|v| format!("{:.3}", v.gap.mean)).collect();
    outcome(
        a_ok && b_ok && c_ok && d_ok,
        format!(
            "(a) drift check {:?} gaps {gaps:?}; (b) beta_inf {bi:.3?} beta_post {bp:.3?}; (c) {}; (d) N pre {:.3}±{:.3}",
            report.verdict,
            drifts.join(", "),
            n_pre.mean,
            n_pre.stderr
        ),
    )
}

/// EDD at a given ARL by linear interpolation of EDD against ln ARL.
fn edd_at(rows: &[SweepRow], arl: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.arl_censored == 0).map(|r| (r.arl.mean.ln(), r.edd.mean)).collect();
    let t = arl.ln();
    pts.windows(2).find(|w| w[0].0 <= t && t <= w[1].0).map(|w| {
        let f = if w[1].0 > w[0].0 { (t - w[0].0) / (w[1].0 - w[0].0) } else { 0.0 };
        w[0].1 + f * (w[1].1 - w[0].1)
    })
}

fn c11_shape() -> Outcome {
    let robust_omegas: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
    let n_omegas: Vec<f64> = (0..=40).map(|k| k as f64).collect();
    let root = RngStream::new(SEED).child(11);
    let spec = |det: Detector, k: u64| TrialSpec::new(r_inf_a(), r_post_a(), det, 2000, 100_000, root.child(k)).unwrap();
    let robust = arl_edd_sweep_with(&spec(robust_detector(0.0, 1.0), 0), &robust_omegas, 2000, 5000).unwrap();
    let nonrobust = arl_edd_sweep_with(&spec(nonrobust_detector(0.0, 1.0), 1), &n_omegas, 2000, 5000).unwrap();
    let top = |rows: &[SweepRow]| rows.iter().filter(|r| r.arl_censored == 0).map(|r| r.arl.mean).fold(0.0, f64::max);
    let hi = top(&robust).min(top(&nonrobust));
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut margin = f64::INFINITY;
    let mut arl = 20.0f64;
    while arl <= hi {
        if let (Some(a), Some(b)) = (edd_at(&robust, arl), edd_at(&nonrobust, arl)) {
            checked += 1;
            margin = margin.min(b - a);
            if a >= b {
                violations.push(format!("ARL {arl:.0}: robust {a:.2} vs nonrobust {b:.2}"));
            }
        }
        arl *= 1.1;
    }
    let pass = violations.is_empty() && checked > 0;
    let detail = if pass {
        format!("robust EDD below nonrobust at all {checked} ARL grid points in [20, {hi:.0}], smallest gap {margin:.2} (robust {:.2} vs nonrobust {:.2} at ARL 20)", edd_at(&robust, 20.0).unwrap_or(f64::NAN), edd_at(&nonrobust, 20.0).unwrap_or(f64::NAN))
    } else {
        format!("{} of {checked} grid points violate, first: {}", violations.len(), violations.first().cloned().unwrap_or_default())
    };
    outcome(pass, detail)
}

fn c12_determinism() -> Outcome {
    let cfg_text = r#"{
      "version": 1,
      "models": {
        "a": {"type": "gaussian", "mean": [-0.25, -0.25], "cov": [[2.0, 0.2], [0.2, 2.0]]},
        "b": {"type": "gaussian", "mean": [0.25, 0.25], "cov": [[2.0, 0.2], [0.2, 2.0]]}
      },
      "trials": [{"name": "R-AA", "p_inf": "a", "p_post": "b", "detector": {"model_inf": "a", "model_post": "b"}}],
      "bench": {"omegas": [0.5, 1.0, 2.0], "arl_paths": 300, "edd_paths": 300, "cap": 20000, "drift_samples": 2000}
    }"#;
    let cfg = ExperimentConfig::from_json(cfg_text).unwrap();
    let run = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context { seed: Some(SEED), out: dir.path().to_path_buf() };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        pool.install(|| cmd_bench(&cfg, &ctx, &mut Vec::new())).unwrap();
        let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
        (read("sweep_R-AA.csv"), read("drift_table.csv"))
    };
    let (a, b, c) = (run(1), run(1), run(3));
    outcome(a == b && a == c, format!("sweep {} bytes, drift table {} bytes; identical across reruns and 1 vs 3 workers", a.0.len(), a.1.len()))
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "{} [{n:>2}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((n, name, o));
    };
    record(1, "drift table (Gaussian)", &mut c1_drift_table);
    record(2, "LFD identification", &mut c2_lfd);
    let mut rho = 2.2;
    record(3, "rho* closed-form check", &mut || {
        let (o, r) = c3_rho_star();
        rho = r;
        o
    });
    record(4, "ARL lower bound", &mut || c4_arl_bound(rho));
    record(5, "EDD asymptotics", &mut c5_edd);
    record(6, "reverse triangle inequality", &mut c6_reverse_triangle);
    record(7, "score/Laplacian oracles", &mut c7_oracles);
    record(8, "Hutchinson estimator", &mut c8_hutchinson);
    record(9, "BetaNetwork gradient check", &mut c9_gradients);
    record(10, "GBRBM experiment", &mut c10_gbrbm);
    record(11, "robust vs nonrobust ARL/EDD ordering", &mut c11_shape);
    record(12, "bench determinism", &mut c12_determinism);
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed in {:.0}s", results.len(), started.elapsed().as_secs_f64());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
