use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{read_metrics, MetricsRecord, METRICS_HEADER};
use super::train::mean_std;
use crate::agents::Algo;
use crate::envs::EnvKind;
use crate::error::{Error, Result};

/// Arm key ordered as plain DDPG, DDPG with gating, plain SAC, SAC with gating.
type ArmKey = (Algo, bool);

fn arm_label((algo, an2n): ArmKey) -> String {
    super::metrics::arm_name(algo, an2n)
}

/// Mean return against step for one (env, arm), across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub env: EnvKind,
    pub arm: String,
    pub seeds: Vec<u64>,
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    /// Population standard deviation across seeds at each step.
    pub std: Vec<f64>,
}

/// Final-epoch return of one (env, arm), aggregated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env: EnvKind,
    pub arm: String,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub arms: Vec<String>,
    pub envs: Vec<EnvKind>,
    pub curves: Vec<Curve>,
    pub summary: Vec<SummaryRow>,
}

/// Group records into runs and check the inputs form a complete grid:
/// every env has the same arms, every (env, arm) the same seeds, and every
/// run of an (env, arm) the same evaluation steps.
pub fn build_report(records: &[MetricsRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Mismatch("no metrics records to report".into()));
    }
    // (env, arm) → seed → records in epoch order.
    let mut runs: BTreeMap<(EnvKind, ArmKey), BTreeMap<u64, Vec<&MetricsRecord>>> = BTreeMap::new();
    let mut run_ids: BTreeMap<(EnvKind, ArmKey, u64), &str> = BTreeMap::new();
    for r in records {
        let key = (r.env, (r.algo, r.an2n), r.seed);
        match run_ids.get(&key) {
            Some(&id) if id != r.run_id => {
                return Err(Error::Mismatch(format!(
                    "runs `{id}` and `{}` both claim {} {} seed {}",
                    r.run_id,
                    r.env,
                    r.arm(),
                    r.seed
                )))
            }
            _ => {
                run_ids.insert(key, &r.run_id);
            }
        }
        runs.entry((r.env, (r.algo, r.an2n))).or_default().entry(r.seed).or_default().push(r);
    }

    let envs: BTreeSet<EnvKind> = runs.keys().map(|(e, _)| *e).collect();
    let arms: BTreeSet<ArmKey> = runs.keys().map(|(_, a)| *a).collect();
    let seeds: BTreeSet<u64> = records.iter().map(|r| r.seed).collect();
    let mut problems = Vec::new();
    for &env in &envs {
        for &arm in &arms {
            match runs.get(&(env, arm)) {
                None => problems.push(format!("  {env} {}: missing", arm_label(arm))),
                Some(by_seed) => {
                    let have: BTreeSet<u64> = by_seed.keys().copied().collect();
                    if have != seeds {
                        problems.push(format!("  {env} {}: seeds {:?}, expected {:?}", arm_label(arm), have, seeds));
                    }
                }
            }
        }
    }
    if !problems.is_empty() {
        let listing: Vec<String> = runs
            .iter()
            .map(|((env, arm), by_seed)| {
                format!("  present: {env} {} seeds {:?}", arm_label(*arm), by_seed.keys().collect::<Vec<_>>())
            })
            .collect();
        return Err(Error::Mismatch(format!("{}\n{}", problems.join("\n"), listing.join("\n"))));
    }

    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for ((env, arm), by_seed) in &runs {
        let mut grid: Option<Vec<u64>> = None;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for (seed, recs) in by_seed {
            let mut recs = recs.clone();
            recs.sort_by_key(|r| r.epoch);
            if recs.windows(2).any(|w| w[0].epoch == w[1].epoch || w[0].step >= w[1].step) {
                return Err(Error::Mismatch(format!(
                    "{env} {} seed {seed}: duplicate epochs or non-increasing steps",
                    arm_label(*arm)
                )));
            }
            let steps: Vec<u64> = recs.iter().map(|r| r.step).collect();
            match &grid {
                None => grid = Some(steps),
                Some(g) if *g != steps => {
                    return Err(Error::Mismatch(format!(
                        "{env} {} seed {seed}: evaluation steps differ from the other seeds",
                        arm_label(*arm)
                    )))
                }
                Some(_) => {}
            }
            columns.push(recs.iter().map(|r| r.eval_return_mean).collect());
        }
        let steps = grid.unwrap_or_default();
        let (mean, std): (Vec<f64>, Vec<f64>) =
            (0..steps.len()).map(|i| mean_std(&columns.iter().map(|c| c[i]).collect::<Vec<_>>())).unzip();
        let seed_list: Vec<u64> = by_seed.keys().copied().collect();
        let finals: Vec<f64> = columns.iter().map(|c| *c.last().expect("at least one record")).collect();
        let (fm, fs) = mean_std(&finals);
        summary.push(SummaryRow { env: *env, arm: arm_label(*arm), seeds: seed_list.clone(), mean: fm, std: fs });
        curves.push(Curve { env: *env, arm: arm_label(*arm), seeds: seed_list, steps, mean, std });
    }
    Ok(Report { arms: arms.into_iter().map(arm_label).collect(), envs: envs.into_iter().collect(), curves, summary })
}

/// Env rows, arm columns, `mean±std` of the final-epoch return.
pub fn summary_csv(report: &Report) -> String {
    let mut out = String::from("env");
    for arm in &report.arms {
        out.push(',');
        out.push_str(arm);
    }
    out.push('\n');
    for env in &report.envs {
        out.push_str(env.name());
        for arm in &report.arms {
            let row =
                report.summary.iter().find(|r| r.env == *env && &r.arm == arm).expect("grid checked in build_report");
            let _ = write!(out, ",{:.2}±{:.2}", row.mean, row.std);
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// A standalone SVG of every arm's mean curve with a ±1 std band.
pub fn curves_svg(env: EnvKind, curves: &[&Curve]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let max_step = curves.iter().flat_map(|c| c.steps.iter()).copied().max().unwrap_or(1) as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for (m, s) in c.mean.iter().zip(&c.std) {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |step: f64| left + pw * step / max_step.max(1.0);
    let y = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}: evaluation return (mean ± 1 std across seeds)</text>"#,
        left + pw / 2.0,
        env
    );
    for t in nice_ticks(lo, hi, 6) {
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" x2="{}" y1="{yy:.2}" y2="{yy:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y(t) + 4.0,
            t,
            yy = y(t)
        );
    }
    for t in nice_ticks(0.0, max_step, 5) {
        let _ = writeln!(
            svg,
            r##"<line x1="{xx:.2}" x2="{xx:.2}" y1="{top}" y2="{}" stroke="#e0e0e0"/><text x="{xx:.2}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 18.0,
            t,
            xx = x(t)
        );
    }
    let _ = writeln!(svg, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">environment steps</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">return</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let upper = c.steps.iter().zip(c.mean.iter().zip(&c.std)).map(|(&s, (m, d))| (x(s as f64), y(m + d)));
        let lower = c.steps.iter().zip(c.mean.iter().zip(&c.std)).rev().map(|(&s, (m, d))| (x(s as f64), y(m - d)));
        let band: Vec<String> = upper.chain(lower).map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
        let line: Vec<String> =
            c.steps.iter().zip(&c.mean).map(|(&s, &m)| format!("{:.2},{:.2}", x(s as f64), y(m))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{colour}" fill-opacity="0.18" stroke="none"/>"#,
            band.join(" ")
        );
        let _ =
            writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, line.join(" "));
        let ly = top + 16.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{colour}" stroke-width="3"/><text x="{}" y="{}">{} (n={})</text>"#,
            left + pw + 12.0,
            left + pw + 36.0,
            left + pw + 42.0,
            ly + 4.0,
            c.arm,
            c.seeds.len()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Every metrics CSV directly inside each directory (files whose first line
/// is the metrics header).
pub fn collect_metrics(dirs: &[PathBuf]) -> Result<Vec<MetricsRecord>> {
    let mut records = Vec::new();
    let mut found = 0;
    for dir in dirs {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            if text.lines().next().map(str::trim_end) != Some(METRICS_HEADER) {
                continue;
            }
            found += 1;
            records.extend(read_metrics(&p)?);
        }
    }
    if found == 0 {
        return Err(Error::Mismatch(format!("no metrics files found in {dirs:?}")));
    }
    Ok(records)
}

/// Write `summary.csv` and one `curves_<env>.svg` per env into `out_dir`.
/// Returns the written paths.
pub fn write_report(records: &[MetricsRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report = build_report(records)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_csv(&report)).map_err(|e| Error::io(&summary_path, e))?;
    written.push(summary_path);
    for env in &report.envs {
        let curves: Vec<&Curve> = report.curves.iter().filter(|c| c.env == *env).collect();
        let path = out_dir.join(format!("curves_{env}.svg"));
        std::fs::write(&path, curves_svg(*env, &curves)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(env: EnvKind, algo: Algo, an2n: bool, seed: u64, epoch: u64, ret: f64) -> MetricsRecord {
        MetricsRecord {
            run_id: format!("{env}-{algo}-{an2n}-{seed}"),
            seed,
            env,
            algo,
            an2n,
            epoch,
            step: 1000 * epoch,
            eval_return_mean: ret,
            eval_return_std: 0.0,
            key_fraction: 0.0,
            sim_threshold: 0.95,
            fifo_len: 0,
            critic_loss: 0.0,
            wall_ms: 0,
        }
    }

    fn grid(seeds: &[u64]) -> Vec<MetricsRecord> {
        let mut out = Vec::new();
        for algo in [Algo::Ddpg, Algo::Sac] {
            for an2n in [false, true] {
                for &s in seeds {
                    for e in 1..=3 {
                        let ret = -100.0 + 10.0 * e as f64 + s as f64 + if an2n { 5.0 } else { 0.0 };
                        out.push(rec(EnvKind::Pendulum, algo, an2n, s, e, ret));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn one_seed_has_zero_band() {
        let report = build_report(&grid(&[0])).unwrap();
        assert!(report.curves.iter().all(|c| c.std.iter().all(|&s| s == 0.0)));
    }

    #[test]
    fn five_seeds_give_one_curve_per_arm() {
        let report = build_report(&grid(&[0, 5, 10, 15, 20])).unwrap();
        assert_eq!(report.curves.len(), 4);
        assert_eq!(report.arms, vec!["ddpg", "ddpg+an2n", "sac", "sac+an2n"]);
        assert!(report.curves.iter().all(|c| c.seeds == vec![0, 5, 10, 15, 20]));
    }

    #[test]
    fn summary_is_mean_of_final_epochs() {
        let report = build_report(&grid(&[0, 5, 10, 15, 20])).unwrap();
        let row = report.summary.iter().find(|r| r.arm == "sac+an2n").unwrap();
        // Final epoch returns: −70 + seed + 5.
        let finals = [-65.0, -60.0, -55.0, -50.0, -45.0];
        let mean = finals.iter().sum::<f64>() / 5.0;
        let var = finals.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / 5.0;
        assert_eq!(row.mean, mean);
        assert!((row.std - var.sqrt()).abs() < 1e-12);
        let csv = summary_csv(&report);
        assert!(csv.starts_with("env,ddpg,ddpg+an2n,sac,sac+an2n\npendulum,"));
        assert!(csv.contains("-55.00±7.07"));
    }

    #[test]
    fn missing_arm_is_rejected_with_listing() {
        let mut records = grid(&[0, 5]);
        records.push(rec(EnvKind::Cliff, Algo::Ddpg, false, 0, 1, 1.0));
        let err = build_report(&records).unwrap_err().to_string();
        assert!(err.contains("cliff ddpg+an2n: missing"), "{err}");
        assert!(err.contains("present: pendulum sac seeds [0, 5]"), "{err}");
    }

    #[test]
    fn uneven_seeds_are_rejected() {
        let records: Vec<_> = grid(&[0, 5]).into_iter().filter(|r| !(r.seed == 5 && r.algo == Algo::Sac)).collect();
        assert!(matches!(build_report(&records), Err(Error::Mismatch(_))));
    }

    #[test]
    fn svg_is_self_contained() {
        let report = build_report(&grid(&[0, 5])).unwrap();
        let curves: Vec<&Curve> = report.curves.iter().collect();
        let svg = curves_svg(EnvKind::Pendulum, &curves);
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(!svg.contains("href"));
    }

    #[test]
    fn report_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&grid(&[0]), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files.iter().all(|f| f.exists()));
    }
}
