//! Output layout for fit runs: per-chain `samples.csv`, `summary.txt` and
//! `manifest.txt` inside `<out>/tau-<τ>/` (or `<out>/mean/`), plus combined
//! figure-data CSVs at the top level. Everything written is deterministic in
//! (data, config, seed).

use crate::diagnostics::{summarize, FigureRow};
use crate::joint::PosteriorSample;
use crate::Result;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Directory name of one chain's output under the run directory.
pub fn chain_dir_name(sample: &PosteriorSample) -> String {
    match sample.tau {
        Some(tau) => format!("tau-{tau}"),
        None => "mean".to_string(),
    }
}

/// One column per parameter (sorted by name), one row per stored draw.
pub fn write_samples_csv(path: &Path, sample: &PosteriorSample) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<&String> = sample.draws.keys().collect();
    w.write_record(names.iter().map(|s| s.as_str()))?;
    let n = sample.n_draws();
    for i in 0..n {
        w.write_record(sample.draws.values().map(|v| format!("{}", v[i])))?;
    }
    w.flush().map_err(crate::Error::from)?;
    Ok(())
}

pub fn write_summary_txt(path: &Path, sample: &PosteriorSample) -> Result<()> {
    let summary = summarize(sample);
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}  {}",
        "parameter", "mean", "sd", "2.5%", "50%", "97.5%", "ess", "geweke", "signif"
    )?;
    for (name, s) in &summary.parameters {
        writeln!(
            f,
            "{:<24} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.1} {:>8.2}  {}",
            name,
            s.mean,
            s.sd,
            s.quantiles[0],
            s.quantiles[2],
            s.quantiles[4],
            s.ess,
            s.geweke_z,
            if s.significant { "*" } else { "" }
        )?;
    }
    Ok(())
}

/// Per-chain manifest: tool version, spec hash, seed and τ.
pub fn write_chain_manifest(path: &Path, sample: &PosteriorSample) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "tool_version: {TOOL_VERSION}")?;
    writeln!(f, "spec_hash: {}", sample.spec_hash)?;
    writeln!(f, "seed: {}", sample.seed)?;
    match sample.tau {
        Some(tau) => writeln!(f, "tau: {tau}")?,
        None => writeln!(f, "tau: none")?,
    }
    writeln!(f, "stored_draws: {}", sample.n_draws())?;
    Ok(())
}

/// Write one chain's directory; returns the directory path.
pub fn write_chain(out_dir: &Path, sample: &PosteriorSample) -> Result<PathBuf> {
    let dir = out_dir.join(chain_dir_name(sample));
    fs::create_dir_all(&dir)?;
    write_samples_csv(&dir.join("samples.csv"), sample)?;
    write_summary_txt(&dir.join("summary.txt"), sample)?;
    write_chain_manifest(&dir.join("manifest.txt"), sample)?;
    Ok(dir)
}

/// Read a `samples.csv` back into a sample (metadata is not recoverable
/// from the CSV and is left empty). Used by the summarize subcommand.
pub fn read_samples_csv(path: &Path) -> Result<PosteriorSample> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut sample = PosteriorSample::empty(None, 0, String::new());
    for name in &names {
        sample.draws.insert(name.clone(), Vec::new());
    }
    for rec in rdr.records() {
        let rec = rec?;
        for (name, field) in names.iter().zip(rec.iter()) {
            let v: f64 = field.parse().map_err(|_| {
                crate::Error::Data(format!("non-numeric value {field:?} in column {name}"))
            })?;
            sample.draws.get_mut(name).expect("header column").push(v);
        }
    }
    Ok(sample)
}

/// Long-format figure data (tau, draw, significant) for one parameter.
pub fn write_figure_csv(path: &Path, rows: &[FigureRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau", "draw", "significant"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.tau),
            format!("{}", r.draw),
            format!("{}", r.significant),
        ])?;
    }
    w.flush().map_err(crate::Error::from)?;
    Ok(())
}

/// Top-level run manifest: tool version, config hash, mode, master seed.
pub fn write_run_manifest(
    out_dir: &Path,
    mode: &str,
    config_hash: &str,
    master_seed: u64,
    chains: usize,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut f = fs::File::create(out_dir.join("manifest.txt"))?;
    writeln!(f, "tool_version: {TOOL_VERSION}")?;
    writeln!(f, "mode: {mode}")?;
    writeln!(f, "config_hash: {config_hash}")?;
    writeln!(f, "seed: {master_seed}")?;
    writeln!(f, "chains: {chains}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::emit_figure_data;

    fn sample_with(tau: Option<f64>) -> PosteriorSample {
        let mut s = PosteriorSample::empty(tau, 7, "abc".into());
        s.draws.insert("alpha".into(), vec![-0.5, -0.4, -0.6]);
        s.draws.insert("beta_l.time".into(), vec![1.0, 1.1, 0.9]);
        s
    }

    #[test]
    fn samples_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_with(Some(0.25));
        let written = write_chain(dir.path(), &s).unwrap();
        assert!(written.ends_with("tau-0.25"));
        let text = std::fs::read_to_string(written.join("samples.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "alpha,beta_l.time");
        assert_eq!(lines.next().unwrap(), "-0.5,1");
        assert_eq!(text.lines().count(), 4);
        let manifest = std::fs::read_to_string(written.join("manifest.txt")).unwrap();
        assert!(manifest.contains("seed: 7"));
        assert!(manifest.contains("tau: 0.25"));
        assert!(std::fs::read_to_string(written.join("summary.txt"))
            .unwrap()
            .contains("alpha"));
    }

    #[test]
    fn mean_chain_dir() {
        let s = sample_with(None);
        assert_eq!(chain_dir_name(&s), "mean");
    }

    #[test]
    fn byte_identical_on_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_with(Some(0.5));
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_chain(&a, &s).unwrap();
        write_chain(&b, &s).unwrap();
        let fa = std::fs::read(a.join("tau-0.5/samples.csv")).unwrap();
        let fb = std::fs::read(b.join("tau-0.5/samples.csv")).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn samples_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_with(Some(0.5));
        let path = dir.path().join("samples.csv");
        write_samples_csv(&path, &s).unwrap();
        let back = read_samples_csv(&path).unwrap();
        assert_eq!(back.draws, s.draws);
    }

    #[test]
    fn figure_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let battery = vec![sample_with(Some(0.1)), sample_with(Some(0.9))];
        let rows = emit_figure_data(&battery, "alpha");
        let path = dir.path().join("figure-alpha.csv");
        write_figure_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().starts_with("0.1,"));
    }
}
