//! Dispatch of one experiment and persistence of its artifacts.
//!
//! Every experiment renders its outputs in memory first; the runner then
//! writes them together with `config.json`, `summary.txt` and a manifest
//! holding the SHA-256 of each file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use heatlift_core::audit::{audit_lift, sampler_covariance_check};
use heatlift_core::convergence::{convergence_study, NormKind};
use heatlift_core::covariance::{cov_fourier, cov_theta};
use heatlift_core::dyadic::lift_level;
use heatlift_core::ldp::{
    approximation_distances, cameron_martin_path, chaos_experiment, cm_lift_uniform_convergence,
    cm_regularity_check, rate_function, schilder_point_check, tail_curve, CMControl, TailCurve,
};
use heatlift_core::rough::write_sheet_binary;
use heatlift_core::sampler::sample_field;
use heatlift_core::scan::bound_scan;
use heatlift_core::stats::mean_se;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, OutputFormat};
use crate::error::{RunError, RunResult};
use crate::manifest::{Manifest, OutputFile, Versions, MANIFEST_FILE, MANIFEST_SCHEMA};

/// Rendered result of an experiment, not yet on disk.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// Main report, also used for `summary.txt`.
    pub report: Value,
    pub summary: String,
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub report: Value,
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report serializes");
    out.push(b'\n');
    out
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> heatlift_core::Result<()>) -> RunResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Table output in the configured format: `stem.csv` or `stem.json`.
fn table(
    cfg: &ExperimentConfig,
    stem: &str,
    json: &impl Serialize,
    csv: impl FnOnce(&mut Vec<u8>) -> heatlift_core::Result<()>,
) -> RunResult<(String, Vec<u8>)> {
    Ok(match cfg.format {
        OutputFormat::Csv => (format!("{stem}.csv"), csv_bytes(csv)?),
        OutputFormat::Json => (format!("{stem}.json"), to_json(json)),
    })
}

fn sample(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.sample;
    let f = sample_field(&cfg.spectral, p.replica)?;
    let mut files = vec![table(cfg, "field", &f, |w| f.write_csv(w))?];
    if p.binary {
        files.push(("field.hlfs".into(), csv_bytes(|w| f.write_binary(w))?));
    }
    if p.lift_cache {
        let sheet = lift_level(&f, cfg.spectral.grid_level)?;
        files.push((
            "lift.hlrs".into(),
            csv_bytes(|w| write_sheet_binary(&sheet, w))?,
        ));
    }
    let last = f.time_slice(f.n_times() - 1);
    let max_abs = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let final_mean_sq = last.iter().map(|v| v * v).sum::<f64>() / last.len() as f64;
    let report = json!({
        "replica": p.replica,
        "n_times": f.n_times(),
        "nodes": f.nodes(),
        "dim": f.dim(),
        "max_abs": max_abs,
        "final_mean_sq": final_mean_sq,
    });
    let summary = format!(
        "sample replica {} on {} times x {} nodes x {} components\nmax |psi| = {max_abs:.6e}\nmean psi^2 at final time = {final_mean_sq:.6e}\n",
        p.replica,
        f.n_times(),
        f.nodes(),
        f.dim()
    );
    Ok(Outcome {
        report,
        summary,
        files,
    })
}

#[derive(Serialize)]
struct CovRow {
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    theta: f64,
    fourier: f64,
    diff: f64,
}

fn cov_check(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.cov_check;
    let mut rows = Vec::new();
    for &s in &p.times {
        for &t in &p.times {
            for &x in &p.positions {
                for &y in &p.positions {
                    let theta = cov_theta(s, x, t, y)?;
                    let fourier = cov_fourier(s, x, t, y)?;
                    rows.push(CovRow {
                        s,
                        x,
                        t,
                        y,
                        theta,
                        fourier,
                        diff: (theta - fourier).abs(),
                    });
                }
            }
        }
    }
    let worst = rows.iter().max_by(|a, b| a.diff.total_cmp(&b.diff));
    let max_diff = worst.map_or(0.0, |r| r.diff);
    let passed = max_diff <= p.tolerance;
    let mut summary = format!(
        "dual covariance check over {} points: max |theta - fourier| = {max_diff:.3e} (tolerance {:.1e}) {}\n",
        rows.len(),
        p.tolerance,
        if passed { "PASS" } else { "FAIL" }
    );
    let mut report = json!({
        "points": rows.len(),
        "max_abs_diff": max_diff,
        "argmax": worst.map(|r| json!({"s": r.s, "x": r.x, "t": r.t, "y": r.y})),
        "tolerance": p.tolerance,
        "passed": passed,
    });
    if p.mc_replicas > 0 {
        let pts = sampler_covariance_check(&cfg.spectral, p.mc_replicas, p.mc_points)?;
        let max_z = pts.iter().fold(0.0f64, |m, q| m.max(q.z_score.abs()));
        let mc_passed = max_z <= p.mc_z_limit;
        let _ = writeln!(
            summary,
            "sampler vs truncated oracle at {} quadruples, {} replicas: max |z| = {max_z:.3} (limit {}) {}",
            pts.len(),
            p.mc_replicas,
            p.mc_z_limit,
            if mc_passed { "PASS" } else { "FAIL" }
        );
        report["sampler"] = json!({
            "replicas": p.mc_replicas,
            "max_abs_z": max_z,
            "z_limit": p.mc_z_limit,
            "passed": mc_passed,
            "points": pts,
        });
    }
    let csv = |w: &mut Vec<u8>| -> heatlift_core::Result<()> {
        use std::io::Write;
        writeln!(w, "# schema: heatlift.covcheck.v1")?;
        writeln!(w, "s,x,t,y,theta,fourier,abs_diff")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{:e},{:e},{:e}",
                r.s, r.x, r.t, r.y, r.theta, r.fourier, r.diff
            )?;
        }
        Ok(())
    };
    let files = vec![
        ("cov_check.json".into(), to_json(&report)),
        table(cfg, "cov_grid", &rows, csv)?,
    ];
    Ok(Outcome {
        report,
        summary,
        files,
    })
}

fn bounds_scan(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.bounds_scan;
    let reports = p
        .bounds
        .iter()
        .map(|&b| bound_scan(b, p.kappa, &p.grid))
        .collect::<heatlift_core::Result<Vec<_>>>()?;
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{:<7} max ratio {:.6e}, refined {:.6e}, refinement ratio {}, stable {}, diverged {}",
            r.bound_id.name(),
            r.max_ratio,
            r.refined_max_ratio,
            r.refinement_ratio
                .map_or("n/a".into(), |v| format!("{v:.4}")),
            r.stable,
            r.diverged
        );
    }
    let csv = |w: &mut Vec<u8>| -> heatlift_core::Result<()> {
        use std::io::Write;
        writeln!(w, "# schema: heatlift.boundscan.v1")?;
        writeln!(
            w,
            "bound_id,kappa,max_ratio,refined_max_ratio,refinement_ratio,stable,diverged,evaluated,s,t,x,y,h"
        )?;
        for r in &reports {
            let a = r.argmax;
            writeln!(
                w,
                "{},{},{:e},{:e},{},{},{},{},{},{},{},{},{}",
                r.bound_id.name(),
                r.kappa.map_or(String::new(), |k| k.to_string()),
                r.max_ratio,
                r.refined_max_ratio,
                r.refinement_ratio
                    .map_or(String::new(), |v| format!("{v:e}")),
                r.stable,
                r.diverged,
                r.evaluated,
                a.map_or(String::new(), |a| a.s.to_string()),
                a.map_or(String::new(), |a| a.t.to_string()),
                a.map_or(String::new(), |a| a.x.to_string()),
                a.map_or(String::new(), |a| a.y.to_string()),
                a.map_or(String::new(), |a| a.h.to_string()),
            )?;
        }
        Ok(())
    };
    let files = vec![table(cfg, "bounds_scan", &reports, csv)?];
    Ok(Outcome {
        report: serde_json::to_value(&reports).expect("report serializes"),
        summary,
        files,
    })
}

fn lift_check(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let a = audit_lift(&cfg.spectral, &cfg.lift_check)?;
    let summary = format!(
        "lift audit: {} slices, {} telescoping cases, {} dilation cases\n\
         max Chen defect          {:.3e}\n\
         max symmetric defect     {:.3e}\n\
         max telescoping defect   {:.3e}\n\
         max homogeneity defect   {:.3e} (relative)\n\
         max dilation defect      {:.3e} (relative)\n",
        a.slices,
        a.telescope_cases,
        a.dilation_cases,
        a.chen_defect,
        a.symmetric_defect,
        a.telescope_defect,
        a.homogeneity_defect,
        a.dilation_defect
    );
    Ok(Outcome {
        report: serde_json::to_value(a).expect("report serializes"),
        summary,
        files: vec![("lift_check.json".into(), to_json(&a))],
    })
}

fn converge(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let table_ = convergence_study(&cfg.spectral, &cfg.converge)?;
    let mut summary = format!(
        "convergence over k = {}..={} with {} replicas; eta1 = {:.4}, eta2 = {:.4}\n",
        cfg.converge.k_min, cfg.converge.k_max, cfg.converge.replicas, table_.eta1, table_.eta2
    );
    for f in &table_.fits {
        let note = if f.norm_kind == NormKind::Besov {
            " (informational)"
        } else {
            ""
        };
        let _ = writeln!(
            summary,
            "level {} {}: log2 slope {:.4} +- {:.4}{note}",
            f.level, f.norm_kind, f.slope, f.slope_se
        );
    }
    let files = vec![
        table(cfg, "convergence", &table_, |w| table_.write_csv(w))?,
        ("fits.json".into(), to_json(&table_.fits)),
    ];
    Ok(Outcome {
        report: serde_json::to_value(&table_).expect("report serializes"),
        summary,
        files,
    })
}

fn tails(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.tails;
    let mut curve = TailCurve::default();
    let mut per_k = Vec::new();
    let mut summary = String::new();
    for &k in &p.k_list {
        let d = approximation_distances(&cfg.spectral, k, p.replicas)?;
        let c = tail_curve(&d, p.delta, &p.eps_list, k)?;
        let m = mean_se(&d);
        per_k.push(json!({"k": k, "mean_distance": m.mean, "distance_se": m.se}));
        for r in &c.rows {
            let _ = writeln!(
                summary,
                "k={k} eps={} delta={}: p = {:.4e} [{:.4e}, {:.4e}], eps^2 log p = {:.4}{}",
                r.epsilon,
                r.delta,
                r.probability,
                r.ci_low.unwrap_or(f64::NAN),
                r.ci_high.unwrap_or(f64::NAN),
                r.eps2_log_p,
                if r.upper_bound_only {
                    " (upper bound)"
                } else {
                    ""
                }
            );
        }
        curve.rows.extend(c.rows);
    }
    let report = json!({"distances": per_k, "rows": curve.rows});
    let files = vec![table(cfg, "tails", &curve, |w| curve.write_csv(w))?];
    Ok(Outcome {
        report,
        summary,
        files,
    })
}

fn chaos(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let r = chaos_experiment(&cfg.spectral, &cfg.chaos)?;
    let mut summary = format!(
        "chaos functional of degree {} over {} replicas\n",
        r.degree, r.replicas
    );
    for m in &r.ratios {
        let _ = writeln!(
            summary,
            "q={}: |Z|_q/|Z|_2 = {:.5} +- {:.5}",
            m.q, m.ratio, m.se
        );
    }
    match (r.exponent, r.exponent_se) {
        (Some(p), Some(se)) => {
            let _ = writeln!(summary, "growth exponent {p:.4} +- {se:.4}");
        }
        _ => summary.push_str("degenerate functional: no ratios\n"),
    }
    if let Some(g) = r.gaussian_check {
        let _ = writeln!(
            summary,
            "|Z|_4/|Z|_2 = {:.5} +- {:.5} vs 3^(1/4) = {:.5} (z = {:.2})",
            g.ratio, g.se, g.target, g.z_score
        );
    }
    let csv = |w: &mut Vec<u8>| -> heatlift_core::Result<()> {
        use std::io::Write;
        writeln!(w, "# schema: heatlift.chaos.v1")?;
        writeln!(w, "q,ratio,se")?;
        for m in &r.ratios {
            writeln!(w, "{},{:e},{:e}", m.q, m.ratio, m.se)?;
        }
        Ok(())
    };
    let files = vec![
        ("chaos.json".into(), to_json(&r)),
        table(cfg, "chaos_ratios", &r.ratios, csv)?,
    ];
    Ok(Outcome {
        report: serde_json::to_value(&r).expect("report serializes"),
        summary,
        files,
    })
}

fn cm(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.cm;
    let ctrl = CMControl::new(p.controls.clone());
    let path = cameron_martin_path(&ctrl, &cfg.spectral)?;
    let rate = rate_function(&ctrl);
    let reg = cm_regularity_check(&path, p.q, p.gamma)?;
    let rows = cm_lift_uniform_convergence(&path, &p.k_list)?;
    let mut summary = format!(
        "Cameron-Martin path with {} controls: |h|_H^2 = {:.6}, rate I = {:.6}\n\
         1/2-Hoelder constant {:.6e}, q-variation majorant {:.6e} (q = {}, gamma = {})\n",
        p.controls.len(),
        path.norm_sq,
        rate,
        reg.holder_half,
        reg.q_variation,
        reg.q,
        reg.gamma
    );
    for r in &rows {
        let _ = writeln!(
            summary,
            "k={}: pointwise {:.4e}, level 1 {:.4e}, level 2 {:.4e}",
            r.k, r.pointwise, r.level1, r.level2
        );
    }
    let report = json!({
        "norm_sq": path.norm_sq,
        "rate": rate,
        "regularity": reg,
        "uniform": rows,
    });
    let csv = |w: &mut Vec<u8>| -> heatlift_core::Result<()> {
        use std::io::Write;
        writeln!(w, "# schema: heatlift.cm_uniform.v1")?;
        writeln!(w, "k,pointwise,level1,level2")?;
        for r in &rows {
            writeln!(w, "{},{:e},{:e},{:e}", r.k, r.pointwise, r.level1, r.level2)?;
        }
        Ok(())
    };
    let files = vec![
        ("cm.json".into(), to_json(&report)),
        table(cfg, "cm_uniform", &rows, csv)?,
    ];
    Ok(Outcome {
        report,
        summary,
        files,
    })
}

fn schilder(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    let p = &cfg.schilder;
    let a = match p.threshold {
        Some(a) => a,
        None => cov_theta(p.t, p.x, p.t, p.x)?.sqrt(),
    };
    let r = schilder_point_check(p.t, p.x, a, &p.eps_list)?;
    let mut summary = format!(
        "pointwise tail at (t, x) = ({}, {}), a = {a:.6}, sigma^2 = {:.6}, limit {:.6}\n",
        p.t, p.x, r.sigma_sq, r.limit
    );
    for row in &r.curve.rows {
        let _ = writeln!(
            summary,
            "eps={}: eps^2 log p = {:.6}",
            row.epsilon, row.eps2_log_p
        );
    }
    let _ = writeln!(
        summary,
        "monotone from below: {}, relative gap at smallest eps: {}",
        r.monotone_from_below,
        r.relative_gap.map_or("n/a".into(), |g| format!("{g:.4}"))
    );
    let files = vec![
        ("schilder.json".into(), to_json(&r)),
        table(cfg, "schilder_curve", &r.curve, |w| r.curve.write_csv(w))?,
    ];
    Ok(Outcome {
        report: serde_json::to_value(&r).expect("report serializes"),
        summary,
        files,
    })
}

/// Runs the experiment in the calling thread pool and renders its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    match cfg.experiment {
        Experiment::Sample => sample(cfg),
        Experiment::CovCheck => cov_check(cfg),
        Experiment::BoundsScan => bounds_scan(cfg),
        Experiment::LiftCheck => lift_check(cfg),
        Experiment::Converge => converge(cfg),
        Experiment::Tails => tails(cfg),
        Experiment::Chaos => chaos(cfg),
        Experiment::Cm => cm(cfg),
        Experiment::Schilder => schilder(cfg),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> RunResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))
}

/// Validates, runs on a pool of `cfg.threads` workers and writes every
/// artifact plus the manifest into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> RunResult<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()?;
    let outcome = pool.install(|| run_experiment(cfg))?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut files = outcome.files;
    files.push(("config.json".into(), to_json(&cfg.hashed_view())));
    files.push((
        "summary.txt".into(),
        format!("experiment: {}\n{}", cfg.experiment, outcome.summary).into_bytes(),
    ));
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        write_file(dir, name, bytes)?;
        outputs.push(OutputFile::of(name, bytes));
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        experiment: cfg.experiment.name().into(),
        config_hash: cfg.content_hash(),
        seed: cfg.spectral.seed,
        threads: cfg.threads,
        versions: Versions::current(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
        config: cfg.clone(),
    };
    write_file(dir, MANIFEST_FILE, &to_json(&manifest))?;
    Ok(RunRecord {
        output_dir: dir.clone(),
        manifest,
        report: outcome.report,
    })
}
