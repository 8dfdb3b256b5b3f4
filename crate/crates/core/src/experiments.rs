//! Parameter sweeps over the bundled fixtures and their CSV / gnuplot output.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::fixtures;
use crate::latency::{cloud_fraction, LatencyError, Scheme, OBJECTIVE_TOLERANCE};
use crate::model::{Role, Topology, GIGABYTE, MEGABYTE};
use crate::solver::{solve_exact, Budget, SolveReport, SolveStatus, SolverError};

pub const CSV_HEADER: &str =
    "swept_param,value,scheme,mean_latency_s,objective_s,cloud_fraction,status";

/// Sensor data rate used for the initial fixture solves.
pub const INITIAL_DATA_RATE: u64 = 100 * MEGABYTE;
pub const INITIAL_BETA: f64 = 0.8;
/// MEC speeds of the slow, medium and fast curves.
pub const MEC_SPEEDS: [f64; 3] = [50e6, 250e6, 1e9];
pub const COMPARISON_EPSILON: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep has no values")]
    EmptySweep,
    #[error("sweep values must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("{param} = {value} is outside its domain ({domain})")]
    OutOfDomain {
        param: SweepParam,
        value: f64,
        domain: &'static str,
    },
    #[error("sweep has no schemes")]
    NoSchemes,
    #[error("an epsilon sweep only applies to P1")]
    EpsilonNeedsP1,
    #[error("{0} fixture is infeasible")]
    InfeasibleFixture(&'static str),
    #[error("dense objective {dense} exceeds sparse objective {sparse}")]
    DenseWorse { sparse: f64, dense: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Uniform data rate of every sensor, bytes/s.
    DataRate,
    /// Throughput of every MEC device, bytes/s.
    MecThroughput,
    /// Fixed channel fraction of P1.
    Epsilon,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DataRate => "D_lambda",
            SweepParam::MecThroughput => "omega_mec",
            SweepParam::Epsilon => "epsilon",
        }
    }

    fn check(self, value: f64) -> Result<(), ExperimentError> {
        let (ok, domain) = match self {
            SweepParam::DataRate => (
                value >= 1.0 && value <= u64::MAX as f64 && value.fract() == 0.0,
                "whole bytes/s, at least 1",
            ),
            SweepParam::MecThroughput => (value > 0.0 && value.is_finite(), "positive"),
            SweepParam::Epsilon => (value > 0.0 && value <= 1.0, "(0, 1]"),
        };
        if ok {
            Ok(())
        } else {
            Err(ExperimentError::OutOfDomain {
                param: self,
                value,
                domain,
            })
        }
    }

    fn apply(self, topology: &Topology, value: f64) -> Topology {
        match self {
            SweepParam::DataRate => topology.with_uniform_data_rate(value as u64),
            SweepParam::MecThroughput => topology.with_role_throughput(Role::Mec, value),
            SweepParam::Epsilon => topology.clone(),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D_lambda" | "d_lambda" | "data-rate" => Ok(SweepParam::DataRate),
            "omega_mec" | "omega-mec" => Ok(SweepParam::MecThroughput),
            "epsilon" => Ok(SweepParam::Epsilon),
            _ => Err(format!(
                "unknown sweep parameter {s:?} (expected D_lambda, omega_mec or epsilon)"
            )),
        }
    }
}

/// A scheme before the topology's downlink ratio is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    P1 { epsilon: f64 },
    P2,
    P3,
}

impl SchemeKind {
    pub fn resolve(self, beta: f64) -> Result<Scheme, LatencyError> {
        match self {
            SchemeKind::P1 { epsilon } => Scheme::fixed(epsilon),
            SchemeKind::P2 => Scheme::decoupled(beta),
            SchemeKind::P3 => Ok(Scheme::combined()),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::P1 { .. } => "P1",
            SchemeKind::P2 => "P2",
            SchemeKind::P3 => "P3",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::EmptySweep);
        }
        if self.schemes.is_empty() {
            return Err(ExperimentError::NoSchemes);
        }
        for pair in self.values.windows(2) {
            if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(ExperimentError::NotIncreasing {
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        for &v in &self.values {
            self.param.check(v)?;
        }
        if self.param == SweepParam::Epsilon
            && self
                .schemes
                .iter()
                .any(|s| !matches!(s, SchemeKind::P1 { .. }))
        {
            return Err(ExperimentError::EpsilonNeedsP1);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub scheme: &'static str,
    /// `None` for infeasible points.
    pub mean_latency: Option<f64>,
    pub objective: Option<f64>,
    pub cloud_fraction: Option<f64>,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.param,
                r.value,
                r.scheme,
                opt(r.mean_latency),
                opt(r.objective),
                opt(r.cloud_fraction),
                r.status
            );
        }
        out
    }

    /// One gnuplot data block per scheme: `value mean objective cloud`,
    /// blocks separated by two blank lines so `index` can address them.
    pub fn to_plot_data(&self) -> String {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.scheme) {
                labels.push(r.scheme);
            }
        }
        let blocks: Vec<String> = labels
            .iter()
            .map(|&label| self.plot_block(&format!("scheme {label}"), |r| r.scheme == label))
            .collect();
        blocks.join("\n\n")
    }

    fn plot_block(&self, title: &str, keep: impl Fn(&SweepRow) -> bool) -> String {
        let mut out = format!("# {title}\n");
        for r in self.rows.iter().filter(|r| keep(r)) {
            let cell = |v: Option<f64>| v.map_or("NaN".to_string(), |x| x.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {}",
                r.value,
                cell(r.mean_latency),
                cell(r.objective),
                cell(r.cloud_fraction)
            );
        }
        out
    }

    /// Rows of one scheme, in sweep order.
    pub fn series(&self, scheme: &str) -> impl Iterator<Item = &SweepRow> {
        let scheme = scheme.to_string();
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn all_optimal(&self) -> bool {
        self.rows.iter().all(|r| r.status == SolveStatus::Optimal)
    }
}

fn row(
    topology: &Topology,
    param: SweepParam,
    value: f64,
    scheme: &'static str,
    report: &SolveReport,
) -> Result<SweepRow, ExperimentError> {
    let cloud = if report.is_feasible() && !topology.cloud_ids().is_empty() {
        Some(cloud_fraction(topology, &report.assignment)?)
    } else {
        None
    };
    Ok(SweepRow {
        param,
        value,
        scheme,
        mean_latency: report.mean_latency(),
        objective: report.objective(),
        cloud_fraction: cloud,
        status: report.status,
    })
}

/// Solve every (value, scheme) point. Infeasible points are kept as
/// flagged rows.
pub fn run_sweep(
    base: &Topology,
    spec: &SweepSpec,
    budget: &Budget,
) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len() * spec.schemes.len());
    for &value in &spec.values {
        let topology = spec.param.apply(base, value);
        for &kind in &spec.schemes {
            let kind = match (spec.param, kind) {
                (SweepParam::Epsilon, SchemeKind::P1 { .. }) => SchemeKind::P1 { epsilon: value },
                _ => kind,
            };
            let scheme = kind.resolve(topology.beta())?;
            let report = solve_exact(&topology, &scheme, budget)?;
            rows.push(row(&topology, spec.param, value, kind.label(), &report)?);
        }
    }
    Ok(SweepResult { rows })
}

/// A fixture with every sensor at `data_rate` and downlink ratio `beta`.
pub fn with_initial_params(topology: &Topology) -> Topology {
    topology
        .with_uniform_data_rate(INITIAL_DATA_RATE)
        .with_beta(INITIAL_BETA)
}

#[derive(Debug, Clone)]
pub struct InitialRun {
    pub sparse: SolveReport,
    pub dense: SolveReport,
}

/// P3 solves of both fixtures. Errors if either is infeasible or the dense
/// network does worse than the sparse one.
pub fn run_initial(
    sparse: &Topology,
    dense: &Topology,
    budget: &Budget,
) -> Result<InitialRun, ExperimentError> {
    let scheme = Scheme::combined();
    let sparse = solve_exact(&with_initial_params(sparse), &scheme, budget)?;
    let dense = solve_exact(&with_initial_params(dense), &scheme, budget)?;
    let (Some(s), Some(d)) = (sparse.objective(), dense.objective()) else {
        return Err(ExperimentError::InfeasibleFixture(
            if sparse.is_feasible() {
                "dense"
            } else {
                "sparse"
            },
        ));
    };
    if d > s + OBJECTIVE_TOLERANCE {
        return Err(ExperimentError::DenseWorse {
            sparse: s,
            dense: d,
        });
    }
    Ok(InitialRun { sparse, dense })
}

/// Data rates 10, 20, ..., 100 MB/s.
pub fn default_data_rates() -> Vec<f64> {
    (1..=10).map(|k| (k * 10 * MEGABYTE) as f64).collect()
}

#[derive(Debug, Clone)]
pub struct SpeedCurve {
    pub mec_throughput: f64,
    pub result: SweepResult,
}

/// P3 data-rate sweep, one curve per MEC speed.
pub fn run_dlambda_sweep(
    base: &Topology,
    data_rates: &[f64],
    mec_speeds: &[f64],
    budget: &Budget,
) -> Result<Vec<SpeedCurve>, ExperimentError> {
    let spec = SweepSpec {
        param: SweepParam::DataRate,
        values: data_rates.to_vec(),
        schemes: vec![SchemeKind::P3],
    };
    mec_speeds
        .iter()
        .map(|&omega| {
            SweepParam::MecThroughput.check(omega)?;
            let topology = base.with_role_throughput(Role::Mec, omega);
            Ok(SpeedCurve {
                mec_throughput: omega,
                result: run_sweep(&topology, &spec, budget)?,
            })
        })
        .collect()
}

/// One gnuplot block per MEC speed.
pub fn speed_curves_plot_data(curves: &[SpeedCurve]) -> String {
    curves
        .iter()
        .map(|c| {
            let title = format!("omega_mec {}", c.mec_throughput);
            c.result.plot_block(&title, |_| true)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// P1 (at `epsilon`), P2 and P3 over the given data rates.
pub fn run_scheme_comparison(
    base: &Topology,
    data_rates: &[f64],
    epsilon: f64,
    budget: &Budget,
) -> Result<SweepResult, ExperimentError> {
    let spec = SweepSpec {
        param: SweepParam::DataRate,
        values: data_rates.to_vec(),
        schemes: vec![SchemeKind::P1 { epsilon }, SchemeKind::P2, SchemeKind::P3],
    };
    run_sweep(base, &spec, budget)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through the points. `None` with fewer than two
/// distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    // a perfectly flat series is perfectly explained by its mean
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Files written by [`reproduce`], relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct ReproduceOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write(
    dir: &Path,
    name: &str,
    text: &str,
    files: &mut Vec<PathBuf>,
) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(PathBuf::from(name));
    Ok(())
}

fn speed_label(omega: f64) -> String {
    if omega >= GIGABYTE as f64 {
        format!("{}GBps", omega / GIGABYTE as f64)
    } else {
        format!("{}MBps", omega / MEGABYTE as f64)
    }
}

/// Run every experiment on the bundled fixtures and write reports, CSVs and
/// gnuplot data into `out_dir`.
pub fn reproduce(out_dir: &Path, budget: &Budget) -> Result<ReproduceOutput, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let sparse = fixtures::sparse();
    let dense = fixtures::dense();

    let initial = run_initial(&sparse, &dense, budget)?;
    let mut csv = String::from("topology,status,mean_latency_s,objective_s,cloud_fraction\n");
    for (name, topology, report) in [
        ("sparse", &sparse, &initial.sparse),
        ("dense", &dense, &initial.dense),
    ] {
        let doc = serde_json::to_string_pretty(&report.to_json(false)).expect("report serializes");
        write(
            out_dir,
            &format!("initial_{name}.json"),
            &(doc + "\n"),
            &mut files,
        )?;
        let cloud = cloud_fraction(topology, &report.assignment)?;
        let _ = writeln!(
            csv,
            "{name},{},{},{},{cloud}",
            report.status,
            opt(report.mean_latency()),
            opt(report.objective())
        );
        let _ = writeln!(
            summary,
            "initial {name}: mean latency {:.1} ms, objective {:.6} s",
            report.mean_latency().unwrap_or(f64::NAN) * 1e3,
            report.objective().unwrap_or(f64::NAN)
        );
    }
    write(out_dir, "initial.csv", &csv, &mut files)?;

    let rates = default_data_rates();
    let curves = run_dlambda_sweep(&sparse, &rates, &MEC_SPEEDS, budget)?;
    for c in &curves {
        let name = format!("dlambda_omega_{}.csv", speed_label(c.mec_throughput));
        write(out_dir, &name, &c.result.to_csv(), &mut files)?;
        let xs: Vec<f64> = c.result.rows.iter().map(|r| r.value).collect();
        let ys: Vec<f64> = c
            .result
            .rows
            .iter()
            .map(|r| r.mean_latency.unwrap_or(f64::NAN))
            .collect();
        let fit = linear_fit(&xs, &ys);
        let _ = writeln!(
            summary,
            "D_lambda sweep at omega_mec {}: R^2 {:.6}, cloud fraction {}",
            speed_label(c.mec_throughput),
            fit.map_or(f64::NAN, |f| f.r_squared),
            c.result
                .rows
                .iter()
                .map(|r| opt(r.cloud_fraction))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    write(
        out_dir,
        "dlambda.dat",
        &speed_curves_plot_data(&curves),
        &mut files,
    )?;

    let comparison_rates: Vec<f64> = [10, 25, 50, 100]
        .iter()
        .map(|&m| (m * MEGABYTE) as f64)
        .collect();
    let comparison = run_scheme_comparison(&sparse, &comparison_rates, COMPARISON_EPSILON, budget)?;
    write(
        out_dir,
        "scheme_comparison.csv",
        &comparison.to_csv(),
        &mut files,
    )?;
    write(
        out_dir,
        "scheme_comparison.dat",
        &comparison.to_plot_data(),
        &mut files,
    )?;
    for r in &comparison.rows {
        let _ = writeln!(
            summary,
            "scheme comparison {} at {} MB/s: objective {} ({})",
            r.scheme,
            r.value / MEGABYTE as f64,
            opt(r.objective),
            r.status
        );
    }

    write(out_dir, "summary.txt", &summary, &mut files)?;
    Ok(ReproduceOutput { files, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            param: SweepParam::DataRate,
            values: vec![],
            schemes: vec![SchemeKind::P3],
        };
        assert!(matches!(spec.validate(), Err(ExperimentError::EmptySweep)));
        spec.values = vec![2e6, 2e6];
        assert!(matches!(
            spec.validate(),
            Err(ExperimentError::NotIncreasing { .. })
        ));
        spec.values = vec![1e6, 1.5];
        assert!(spec.validate().is_err());
        spec.values = vec![0.5, 1e6];
        assert!(matches!(
            spec.validate(),
            Err(ExperimentError::OutOfDomain { .. })
        ));
        spec.values = vec![1e6, 2e6];
        assert!(spec.validate().is_ok());
        spec.param = SweepParam::Epsilon;
        spec.values = vec![0.1, 0.5];
        assert!(matches!(
            spec.validate(),
            Err(ExperimentError::EpsilonNeedsP1)
        ));
        spec.schemes = vec![SchemeKind::P1 { epsilon: 0.2 }];
        assert!(spec.validate().is_ok());
        spec.values = vec![0.5, 1.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn param_names_round_trip() {
        for p in [
            SweepParam::DataRate,
            SweepParam::MecThroughput,
            SweepParam::Epsilon,
        ] {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("rho".parse::<SweepParam>().is_err());
    }

    #[test]
    fn fit_of_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
        let noisy = linear_fit(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(noisy.r_squared < 0.9);
    }

    #[test]
    fn sweep_rows_and_csv() {
        let spec = SweepSpec {
            param: SweepParam::DataRate,
            values: vec![10e6, 20e6],
            schemes: vec![SchemeKind::P2, SchemeKind::P3],
        };
        let result = run_sweep(&fixtures::tiny(), &spec, &Budget::default()).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result.all_optimal());
        let csv = result.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("D_lambda,10000000,P2,"));
        let plot = result.to_plot_data();
        assert_eq!(plot.matches("\n\n\n").count(), 1);
        assert!(plot.starts_with("# scheme P2\n10000000 "));
    }

    #[test]
    fn infeasible_points_are_flagged() {
        // the tiny MEC and cloud together hold far less than 2 x 1 TB/s
        let spec = SweepSpec {
            param: SweepParam::DataRate,
            values: vec![1e6, 1e15],
            schemes: vec![SchemeKind::P3],
        };
        let result = run_sweep(&fixtures::tiny(), &spec, &Budget::default()).unwrap();
        assert_eq!(result.rows[0].status, SolveStatus::Optimal);
        assert_eq!(result.rows[1].status, SolveStatus::Infeasible);
        assert!(result
            .to_csv()
            .ends_with("D_lambda,1000000000000000,P3,,,,infeasible\n"));
    }
}
