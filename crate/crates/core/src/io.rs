//! File ingestion (edge lists, covariate CSVs, community labels) and the
//! machine-readable report formats.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, FitResult};
use crate::network::{AdjacencyMatrix, CommunityAssignment};
use crate::rank::RankSelectionReport;
use crate::sim::ExperimentReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    Zero,
    One,
}

/// Description of an edge-list file: whitespace-separated `i j [w]` lines,
/// `#` comments.
#[derive(Clone, Debug)]
pub struct EdgeListFile {
    pub path: std::path::PathBuf,
    pub indexing: Indexing,
    pub weighted: bool,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct EdgeListStats {
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

/// Parse an edge list into a symmetric adjacency matrix on `n` nodes
/// (inferred from the largest index when `n` is None). Duplicates collapse
/// to the maximum weight; self-loops are dropped and counted.
pub fn read_edge_list(
    file: &EdgeListFile,
    n: Option<usize>,
) -> Result<(AdjacencyMatrix, EdgeListStats)> {
    let reader = std::io::BufReader::new(std::fs::File::open(&file.path)?);
    let path = file.path.display().to_string();
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut stats = EdgeListStats::default();
    let mut max_node = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut parts = text.split_whitespace();
        let parse_node = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                path: path.clone(),
                line: lineno + 1,
                detail: "expected `i j [w]`".into(),
            })?;
            let raw: usize = tok.parse().map_err(|_| Error::Parse {
                path: path.clone(),
                line: lineno + 1,
                detail: format!("bad node index `{tok}`"),
            })?;
            match file.indexing {
                Indexing::Zero => Ok(raw),
                Indexing::One => raw.checked_sub(1).ok_or_else(|| Error::Parse {
                    path: path.clone(),
                    line: lineno + 1,
                    detail: "node index 0 in a 1-based file".into(),
                }),
            }
        };
        let i = parse_node(parts.next())?;
        let j = parse_node(parts.next())?;
        let w = if file.weighted {
            let tok = parts.next().ok_or_else(|| Error::Parse {
                path: path.clone(),
                line: lineno + 1,
                detail: "missing weight".into(),
            })?;
            let w: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.clone(),
                line: lineno + 1,
                detail: format!("bad weight `{tok}`"),
            })?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Parse {
                    path: path.clone(),
                    line: lineno + 1,
                    detail: format!("weight {w} outside [0, 1]"),
                });
            }
            w
        } else {
            1.0
        };
        if i == j {
            stats.self_loops_dropped += 1;
            continue;
        }
        max_node = max_node.max(i).max(j);
        let key = (i.min(j), i.max(j));
        match edges.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                stats.duplicates_collapsed += 1;
                let cur = e.get_mut();
                *cur = cur.max(w);
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(w);
            }
        }
    }
    let n = match n {
        Some(n) => {
            if max_node >= n && !edges.is_empty() {
                return Err(Error::DimensionMismatch {
                    detail: format!("edge references node {} but n = {n}", max_node + 1),
                });
            }
            n
        }
        None => max_node + 1,
    };
    stats.edges = edges.len();
    let mut a = Array2::zeros((n, n));
    for (&(i, j), &w) in &edges {
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    Ok((AdjacencyMatrix::new(a)?, stats))
}

/// One integer community label per line, 1-based.
pub fn read_communities(path: &Path, n: usize) -> Result<CommunityAssignment> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let display = path.display().to_string();
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let raw: usize = text.parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            detail: format!("bad community label `{text}`"),
        })?;
        if raw == 0 {
            return Err(Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                detail: "labels are 1-based".into(),
            });
        }
        labels.push(raw - 1);
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            detail: format!("{} community labels for {n} nodes", labels.len()),
        });
    }
    CommunityAssignment::new(labels)
}

/// A loaded regression problem.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub x_names: Vec<String>,
    pub y: Array1<f64>,
    pub a: AdjacencyMatrix,
    pub communities: Option<CommunityAssignment>,
    /// Per-column factors applied by standardization.
    pub scales: Vec<f64>,
    pub edge_stats: EdgeListStats,
}

/// Read network + covariates (+ optional communities). Numeric CSV columns
/// are used directly; non-numeric columns expand to dummy indicators with
/// the first level seen as the reference. All columns are standardized to
/// norm sqrt(n).
pub fn read_dataset(
    network: &EdgeListFile,
    covariates: &Path,
    response: &str,
    communities: Option<&Path>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(covariates)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let resp_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn { name: response.to_string() })?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch { detail: "covariate file has no data rows".into() });
    }

    let mut y = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        y[i] = row.get(resp_idx).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
            Error::NonNumericResponse { name: response.to_string(), row: i + 1 }
        })?;
    }

    // Assemble covariate columns: numeric as-is, categorical as dummies.
    let mut columns: Vec<(String, Array1<f64>)> = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == resp_idx {
            continue;
        }
        let parsed: Vec<Option<f64>> =
            rows.iter().map(|row| row.get(c).and_then(|v| v.parse::<f64>().ok())).collect();
        if parsed.iter().all(|v| v.is_some()) {
            let col = Array1::from_iter(parsed.into_iter().map(|v| v.expect("checked")));
            columns.push((name.clone(), col));
        } else {
            // categorical: dummy per level beyond the reference (first seen)
            let mut levels: Vec<String> = Vec::new();
            for row in &rows {
                let v = row.get(c).cloned().unwrap_or_default();
                if !levels.contains(&v) {
                    levels.push(v);
                }
            }
            for level in levels.iter().skip(1) {
                let col = Array1::from_iter(rows.iter().map(|row| {
                    if row.get(c).map(|v| v == level).unwrap_or(false) {
                        1.0
                    } else {
                        0.0
                    }
                }));
                columns.push((format!("{name}={level}"), col));
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::DimensionMismatch { detail: "no covariate columns".into() });
    }
    let mut x = Array2::zeros((n, columns.len()));
    let mut x_names = Vec::with_capacity(columns.len());
    for (j, (name, col)) in columns.into_iter().enumerate() {
        x.column_mut(j).assign(&col);
        x_names.push(name);
    }
    let (x, scales) = estimator::standardize_columns(&x.view())?;

    let (a, edge_stats) = read_edge_list(network, Some(n))?;
    let communities = match communities {
        Some(path) => Some(read_communities(path, n)?),
        None => None,
    };
    Ok(Dataset { x, x_names, y, a, communities, scales, edge_stats })
}

// ---------------------------------------------------------------------------
// Report formats
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub theta: f64,
    pub beta: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkEffectReport {
    pub chisq: f64,
    pub df: usize,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct FitDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_hat: Option<f64>,
    pub sigma_hat: Vec<f64>,
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_method: Option<String>,
    pub degree_floor_applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// The JSON fit report. Field names are part of the output contract.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub coefficients: Vec<CoefficientRow>,
    pub network_effect: Option<NetworkEffectReport>,
    pub sigma2: f64,
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub diagnostics: FitDiagnostics,
}

/// Assemble the report from a fit. Degenerate directions produce null
/// inference fields rather than an error.
pub fn build_fit_report(fit: &FitResult, names: &[String], d_hat: Option<f64>) -> FitReport {
    let p = fit.beta_hat.len();
    let mut coefficients = Vec::with_capacity(p);
    for j in 0..p {
        let name = names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
        let row = match estimator::coefficient_test(fit, j) {
            Ok(inf) => CoefficientRow {
                name,
                theta: fit.theta_hat[j],
                beta: fit.beta_hat[j],
                se: Some(inf.std_error),
                z: finite_or_none(inf.z),
                p: Some(inf.pvalue),
                ci_lo: Some(inf.ci_lo),
                ci_hi: Some(inf.ci_hi),
            },
            Err(_) => CoefficientRow {
                name,
                theta: fit.theta_hat[j],
                beta: fit.beta_hat[j],
                se: None,
                z: None,
                p: None,
                ci_lo: None,
                ci_hi: None,
            },
        };
        coefficients.push(row);
    }
    let network_effect = fit
        .network_effect
        .as_ref()
        .map(|ne| NetworkEffectReport { chisq: ne.chisq, df: ne.df, p: ne.pvalue });
    FitReport {
        coefficients,
        network_effect,
        sigma2: fit.sigma2_hat,
        r: fit.r_used,
        k: fit.k,
        diagnostics: FitDiagnostics {
            d_hat,
            sigma_hat: fit.sigma_hat_values.clone(),
            fallback: fit.fallback,
            rank_method: fit.rank_report.as_ref().map(|r| format!("{:?}", r.method).to_lowercase()),
            degree_floor_applied: fit.degree_floor_applied,
            timestamp: None,
        },
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn write_fit_report<W: Write>(report: &FitReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_fit_report(text: &str) -> Result<FitReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_rank_report<W: Write>(report: &RankSelectionReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

/// CSV emission for experiment reports: one row per method and metric.
pub fn write_experiment_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "density",
        "network",
        "effects",
        "method",
        "metric",
        "value",
        "mc_stderr",
        "replicates",
        "failures",
    ])?;
    let s = &report.scenario;
    let effects = match &s.effects {
        crate::sim::EffectKind::Eigenspace { .. } => "eigenspace".to_string(),
        crate::sim::EffectKind::ZeroGamma => "zero_gamma".to_string(),
        crate::sim::EffectKind::SmoothLaplacian => "smooth".to_string(),
    };
    let network = match s.network {
        crate::sim::NetworkKind::Sbm => "sbm",
        crate::sim::NetworkKind::Dcbm => "dcbm",
    };
    for m in &report.methods {
        let metrics: [(&str, Option<crate::sim::Metric>); 5] = [
            ("bias_sd_ratio", m.bias_sd_ratio),
            ("coverage", m.coverage),
            ("rejection_rate", m.rejection_rate),
            ("relative_mse", m.relative_mse),
            ("fallback_rate", m.fallback_rate),
        ];
        for (name, metric) in metrics {
            if let Some(metric) = metric {
                w.write_record([
                    s.n.to_string(),
                    s.density.label(),
                    network.to_string(),
                    effects.clone(),
                    m.method.label().to_string(),
                    name.to_string(),
                    format!("{:.6e}", metric.value),
                    format!("{:.6e}", metric.mc_stderr),
                    report.replicates.to_string(),
                    m.failures.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

pub fn write_experiment_json<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

/// Machine-readable error envelope printed on stderr by the CLI.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    })
    .to_string()
}
