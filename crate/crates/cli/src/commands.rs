//! `cfrac`, `lyap` and `gordon`: compute everything, then write outputs.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use quasilab_core::{exclusion_report, lyapunov_scan, lyapunov_with, GordonOptions, GordonReport, Verdict};

use crate::config::RunConfig;
use crate::output::{line_plot, num, write_file, Csv, HLine, Series};
use crate::CliError;

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, exit_code: 0 }
    }
}

fn summary_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CfracRow {
    n: usize,
    p: String,
    q: String,
    r_n: Option<f64>,
    dist_bound: Option<f64>,
}

#[derive(Serialize)]
struct CfracSummary<'a> {
    command: &'static str,
    frequency: &'a str,
    depth: usize,
    rational: bool,
    beta_hat: Option<f64>,
    running_max: Option<f64>,
    rows: Vec<CfracRow>,
}

pub fn cmd_cfrac(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = &cfg.frequency;
    let depth = f.depth();
    let convergents = f.convergents(depth)?;
    let beta = f.beta_estimate(depth)?;
    let mut csv = Csv::new(&["n", "p", "q", "r_n", "dist_bound"]);
    let mut rows = Vec::with_capacity(depth);
    for (i, c) in convergents.iter().enumerate() {
        let n = i + 1;
        let r_n = match beta.levels.get(i) {
            Some(level) => level.ratio,
            None if f.is_rational() => f64::INFINITY,
            None => f64::NAN,
        };
        // Shallow truncations cannot certify ‖q_n ω‖ to relative precision;
        // 1/q_{n+1} still bounds it for every ω with these quotients.
        let dist = match (f.distance_to_integers(&c.q), convergents.get(i + 1)) {
            (Ok(d), _) => d.value + d.error_bound,
            (Err(_), Some(next)) => 1.0 / next.q.to_f64().unwrap_or(f64::INFINITY),
            (Err(_), None) => f64::NAN,
        };
        csv.row(&[n.to_string(), c.p.to_string(), c.q.to_string(), num(r_n), num(dist)]);
        rows.push(CfracRow {
            n,
            p: c.p.to_string(),
            q: c.q.to_string(),
            r_n: r_n.is_finite().then_some(r_n),
            dist_bound: dist.is_finite().then_some(dist),
        });
    }
    write_file(&cfg.csv_path, csv.as_str())?;
    if let Some(path) = &cfg.summary_path {
        let finite = |v: f64| v.is_finite().then_some(v);
        let summary = CfracSummary {
            command: "cfrac",
            frequency: &cfg.frequency_label,
            depth,
            rational: f.is_rational(),
            beta_hat: finite(beta.beta_hat),
            running_max: finite(beta.running_max),
            rows,
        };
        write_file(path, &summary_json(&summary))?;
    }
    let mut out = format!("frequency: {}\nbeta_hat: {}\n", cfg.frequency_label, num(beta.beta_hat));
    out.push_str(csv.as_str());
    Ok(Outcome::ok(out))
}

#[derive(Serialize)]
struct LyapRow {
    energy: f64,
    l_hat: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct LyapSummary<'a> {
    command: &'static str,
    frequency: &'a str,
    potential: &'a str,
    length: f64,
    n_phases: usize,
    h: f64,
    rows: Vec<LyapRow>,
}

pub fn cmd_lyap(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let table = lyapunov_scan(&cfg.potential, &cfg.frequency, grid, &cfg.lyapunov)?;
    let mut csv = Csv::new(&["E", "L_hat", "stderr", "length", "n_phases"]);
    for est in &table {
        csv.row(&[
            num(est.energy),
            num(est.l_hat),
            num(est.stderr),
            num(est.length),
            est.n_phases.to_string(),
        ]);
    }
    write_file(&cfg.csv_path, csv.as_str())?;
    if let Some(path) = &cfg.svg_path {
        let series = [Series {
            label: "L_hat".into(),
            points: table.iter().map(|e| (e.energy, e.l_hat)).collect(),
        }];
        let title = format!("Lyapunov exponent, {}", cfg.potential.label());
        write_file(path, &line_plot(&title, "E", "L_hat", &series, &[]))?;
    }
    if let Some(path) = &cfg.summary_path {
        let summary = LyapSummary {
            command: "lyap",
            frequency: &cfg.frequency_label,
            potential: cfg.potential.label(),
            length: cfg.lyapunov.length,
            n_phases: cfg.lyapunov.n_phases,
            h: cfg.lyapunov.h,
            rows: table
                .iter()
                .map(|e| LyapRow {
                    energy: e.energy,
                    l_hat: e.l_hat,
                    stderr: e.stderr,
                })
                .collect(),
        };
        write_file(path, &summary_json(&summary))?;
    }
    Ok(Outcome::ok(csv.as_str().to_string()))
}

#[derive(Serialize)]
struct ScaleSummary {
    q: u64,
    d1: f64,
    d2: f64,
    three_block_norms: [f64; 3],
    three_block_max: f64,
    defect_bound_ref: f64,
    violation: bool,
}

#[derive(Serialize)]
struct EnergySummary {
    energy: f64,
    l_hat: f64,
    l_stderr: f64,
    verdict: &'static str,
    violation: bool,
    reasons: Vec<String>,
    scales: Vec<ScaleSummary>,
}

#[derive(Serialize)]
struct GordonSummary<'a> {
    command: &'static str,
    frequency: &'a str,
    potential: &'a str,
    gamma: f64,
    beta_hat: Option<f64>,
    epsilon: f64,
    margin: f64,
    max_q: u64,
    ladder: Vec<u64>,
    n_phi: usize,
    verdict_counts: VerdictCounts,
    energies: Vec<EnergySummary>,
}

#[derive(Serialize, Default)]
struct VerdictCounts {
    excluded_consistent: usize,
    inconclusive: usize,
    regime_not_met: usize,
}

pub fn cmd_gordon(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let ladder = cfg.frequency.resonant_scales(cfg.epsilon, cfg.max_q)?;
    let opts = GordonOptions {
        h: cfg.lyapunov.h,
        n_phi: cfg.n_phi,
    };
    let reports: Vec<GordonReport> = grid
        .par_iter()
        .map(|&e| {
            let est = lyapunov_with(&cfg.potential, &cfg.frequency, e, &cfg.lyapunov)?;
            exclusion_report(&cfg.potential, &cfg.frequency, e, &ladder, &est, cfg.margin, &opts)
        })
        .collect::<quasilab_core::Result<_>>()?;

    let mut csv = Csv::new(&["E", "q", "D1", "D2", "n_phi", "min_max_block", "verdict"]);
    let mut counts = VerdictCounts::default();
    let mut any_violation = false;
    for r in &reports {
        match r.verdict {
            Verdict::ExcludedConsistent => counts.excluded_consistent += 1,
            Verdict::Inconclusive => counts.inconclusive += 1,
            Verdict::RegimeNotMet => counts.regime_not_met += 1,
        }
        any_violation |= r.violation;
        if r.records.is_empty() {
            csv.row(&[
                num(r.energy),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                r.verdict.as_str().into(),
            ]);
        }
        for s in &r.records {
            csv.row(&[
                num(r.energy),
                s.q.to_string(),
                num(s.d1),
                num(s.d2),
                s.n_phi.to_string(),
                num(s.three_block_max),
                r.verdict.as_str().into(),
            ]);
        }
    }
    write_file(&cfg.csv_path, csv.as_str())?;

    let beta = ladder.beta_hat;
    let threshold = cfg.potential.gamma() * beta - cfg.margin;
    if let Some(path) = &cfg.svg_path {
        let series = [
            Series {
                label: "L_hat".into(),
                points: reports.iter().map(|r| (r.energy, r.l_hat)).collect(),
            },
            Series {
                label: "L_hat + 3 stderr".into(),
                points: reports.iter().map(|r| (r.energy, r.l_hat + 3.0 * r.l_stderr)).collect(),
            },
        ];
        let hline = [HLine {
            label: "gamma beta_hat - margin".into(),
            y: threshold,
        }];
        let title = format!("Exclusion regime, {}", cfg.potential.label());
        write_file(path, &line_plot(&title, "E", "L_hat", &series, &hline))?;
    }
    if let Some(path) = &cfg.summary_path {
        let summary = GordonSummary {
            command: "gordon",
            frequency: &cfg.frequency_label,
            potential: cfg.potential.label(),
            gamma: cfg.potential.gamma(),
            beta_hat: beta.is_finite().then_some(beta),
            epsilon: ladder.epsilon,
            margin: cfg.margin,
            max_q: cfg.max_q,
            ladder: ladder.qs(),
            n_phi: quasilab_core::phi_net(cfg.n_phi).len(),
            verdict_counts: counts,
            energies: reports
                .iter()
                .map(|r| EnergySummary {
                    energy: r.energy,
                    l_hat: r.l_hat,
                    l_stderr: r.l_stderr,
                    verdict: r.verdict.as_str(),
                    violation: r.violation,
                    reasons: r.reasons.clone(),
                    scales: r
                        .records
                        .iter()
                        .map(|s| ScaleSummary {
                            q: s.q,
                            d1: s.d1,
                            d2: s.d2,
                            three_block_norms: s.three_block_norms,
                            three_block_max: s.three_block_max,
                            defect_bound_ref: s.defect_bound_ref,
                            violation: s.violation,
                        })
                        .collect(),
                })
                .collect(),
        };
        write_file(path, &summary_json(&summary))?;
    }
    let mut out = csv.as_str().to_string();
    if any_violation {
        out.push_str("three-block violation detected; see summary reasons\n");
    }
    Ok(Outcome {
        stdout: out,
        exit_code: if any_violation { 3 } else { 0 },
    })
}
