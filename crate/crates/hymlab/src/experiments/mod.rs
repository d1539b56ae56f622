//! Configured end-to-end studies and their reporting.
//!
//! A convergence study solves the metric Dirichlet problem once per level in
//! a ladder, evaluates the induced fiber potentials over the base, and
//! compares them against a reference transport field. Rows land in a CSV and
//! a JSON report carrying a digest that reproduces across runs and thread
//! counts; wall time is recorded but masked out of the digest, since it is
//! the one column no rerun can reproduce.

mod props;

pub use props::{run_property_suites, PropertySummary, SuiteResult};

use crate::envelope::{
    graph_sweep_envelope, toric_geodesic_exact, HolomorphicGraphFamily, PotentialField,
};
use crate::geometry::{toric_potential, DomainGrid, SphereGrid};
use crate::hym::{boundary_from_potentials, solve_hym_with_report, HermitianMetricField};
use crate::quantization::{fs_values, GramMatrix};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Base domain selector, mirroring the grid constructors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Annulus { r0: f64, rings: usize, angles: usize },
    BiAnnulus { r0: f64, rings: usize, angles: usize },
    Disc { side: usize },
}

impl DomainSpec {
    pub fn m(&self) -> usize {
        match self {
            DomainSpec::BiAnnulus { .. } => 2,
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<DomainGrid> {
        match *self {
            DomainSpec::Annulus { r0, rings, angles } => DomainGrid::annulus(r0, rings, angles),
            DomainSpec::BiAnnulus { r0, rings, angles } => {
                DomainGrid::bi_annulus(r0, rings, angles)
            }
            DomainSpec::Disc { side } => DomainGrid::disc(side),
        }
    }
}

/// Fiber window used to evaluate and compare potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub n_t: usize,
    pub n_theta: usize,
    pub t_max: f64,
}

impl WindowSpec {
    pub fn build(&self) -> Result<SphereGrid> {
        SphereGrid::windowed(self.n_t, self.n_theta, self.t_max)
    }
}

/// Wide single-ray window for moment quadrature; the boundary families are
/// rotation invariant, so one ray integrates their moments exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub n_t: usize,
    pub t_max: f64,
}

impl QuadratureSpec {
    pub fn build(&self) -> Result<SphereGrid> {
        SphereGrid::windowed(self.n_t, 1, self.t_max)
    }
}

/// Boundary potential family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// The same constant on every boundary node; the reference is that
    /// constant, and the error column must match the flat one exactly.
    Constant { value: f64 },
    /// One invariant profile on every boundary node; the reference is the
    /// profile itself, so the ladder isolates the quantization gap.
    AnalyticFormula { amp: f64, shift: f64 },
    /// Distinct invariant profiles on the two circles of an annulus, profile
    /// 0 outer and profile 1 inner; the reference is the transport field
    /// between them.
    ToricEndpoints {
        amp0: f64,
        shift0: f64,
        amp1: f64,
        shift1: f64,
    },
}

/// How the reference field is produced: closed forms where the family admits
/// one, or the graph-probe sweep run on the same boundary data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSpec {
    ClosedForm,
    GraphSweep,
}

fn default_reference() -> ReferenceSpec {
    ReferenceSpec::ClosedForm
}

fn default_envelope_tol() -> f64 {
    1e-7
}

fn default_envelope_sweeps() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of base factors; must agree with the domain.
    pub m: usize,
    pub domain: DomainSpec,
    pub window: WindowSpec,
    pub quadrature: QuadratureSpec,
    /// Strictly increasing ladder of levels.
    pub k_list: Vec<usize>,
    pub boundary: BoundarySpec,
    #[serde(default = "default_reference")]
    pub reference: ReferenceSpec,
    pub solver_tol: f64,
    pub max_sweeps: usize,
    #[serde(default = "default_envelope_tol")]
    pub envelope_tol: f64,
    #[serde(default = "default_envelope_sweeps")]
    pub envelope_sweeps: usize,
    pub seed: u64,
    #[serde(default)]
    pub outdir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Flat-boundary ladder whose error column is the closed form
    /// `log(k+1)/k` to quadrature accuracy.
    pub fn constant_study() -> ExperimentConfig {
        ExperimentConfig {
            m: 1,
            domain: DomainSpec::Annulus {
                r0: 0.3,
                rings: 33,
                angles: 1,
            },
            window: WindowSpec {
                n_t: 33,
                n_theta: 1,
                t_max: 8.0,
            },
            quadrature: QuadratureSpec {
                n_t: 256,
                t_max: 32.0,
            },
            k_list: vec![1, 2, 4, 8, 16],
            boundary: BoundarySpec::Constant { value: 0.0 },
            reference: ReferenceSpec::ClosedForm,
            solver_tol: 1e-10,
            max_sweeps: 50_000,
            envelope_tol: default_envelope_tol(),
            envelope_sweeps: default_envelope_sweeps(),
            seed: 7,
            outdir: None,
        }
    }

    /// Transport ladder between distinct invariant endpoint profiles.
    pub fn transport_study() -> ExperimentConfig {
        ExperimentConfig {
            m: 1,
            domain: DomainSpec::Annulus {
                r0: 0.3,
                rings: 65,
                angles: 1,
            },
            window: WindowSpec {
                n_t: 65,
                n_theta: 1,
                t_max: 8.0,
            },
            quadrature: QuadratureSpec {
                n_t: 256,
                t_max: 32.0,
            },
            k_list: vec![4, 8, 16, 32],
            boundary: BoundarySpec::ToricEndpoints {
                amp0: 0.0,
                shift0: 0.0,
                amp1: 0.4,
                shift1: 1.0,
            },
            reference: ReferenceSpec::ClosedForm,
            solver_tol: 1e-9,
            max_sweeps: 200_000,
            envelope_tol: default_envelope_tol(),
            envelope_sweeps: default_envelope_sweeps(),
            seed: 7,
            outdir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m != self.domain.m() {
            return Err(Error::InvalidConfig(format!(
                "m = {} but the domain has {} factors",
                self.m,
                self.domain.m()
            )));
        }
        if self.k_list.is_empty() {
            return Err(Error::InvalidConfig("the level list is empty".into()));
        }
        if self.k_list[0] < 1 {
            return Err(Error::InvalidConfig("levels start at 1".into()));
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "the level list must be strictly increasing".into(),
            ));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol.is_finite()) {
            return Err(Error::InvalidConfig(
                "relaxation tolerance must be positive".into(),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("need at least one sweep".into()));
        }
        if !(self.envelope_tol > 0.0) || self.envelope_sweeps == 0 {
            return Err(Error::InvalidConfig(
                "envelope reference needs a positive tolerance and sweep budget".into(),
            ));
        }
        self.domain.build()?;
        self.window.build()?;
        let quad = self.quadrature.build()?;
        quad.supports_level(*self.k_list.last().unwrap())?;
        let unit = |a: f64| (0.0..1.0).contains(&a);
        match self.boundary {
            BoundarySpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidConfig("boundary constant not finite".into()));
                }
            }
            BoundarySpec::AnalyticFormula { amp, shift } => {
                if !unit(amp) || !shift.is_finite() {
                    return Err(Error::InvalidConfig(
                        "profile weight must sit in [0, 1) with a finite shift".into(),
                    ));
                }
            }
            BoundarySpec::ToricEndpoints {
                amp0,
                shift0,
                amp1,
                shift1,
            } => {
                if !matches!(self.domain, DomainSpec::Annulus { .. }) {
                    return Err(Error::InvalidConfig(
                        "endpoint profiles need the two circles of an annulus".into(),
                    ));
                }
                if !unit(amp0) || !unit(amp1) || !shift0.is_finite() || !shift1.is_finite() {
                    return Err(Error::InvalidConfig(
                        "profile weights must sit in [0, 1) with finite shifts".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One level of a study. `sup_error` is `None` when the relaxation for that
/// level was flagged instead of solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    pub sup_error: Option<f64>,
    pub hym_residual: f64,
    pub iters: usize,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub rows: Vec<KRow>,
    /// Least-squares constant for the model `C log(k+1)/k` over converged
    /// rows, with the relative residual of that fit; absent when nothing
    /// converged.
    pub fit_constant: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Hex digest of the CSV with the wall-time column zeroed.
    pub determinism_digest: String,
}

pub const CSV_HEADER: &str = "k,sup_error,hym_residual,iters,seconds";

fn csv_line(r: &KRow, mask_seconds: bool) -> String {
    let sup = match r.sup_error {
        Some(v) => format!("{v}"),
        None => "nan".into(),
    };
    let secs = if mask_seconds {
        "0".into()
    } else {
        format!("{:.3}", r.seconds)
    };
    format!("{},{},{},{},{}", r.k, sup, r.hym_residual, r.iters, secs)
}

fn csv_text(rows: &[KRow], mask_seconds: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r, mask_seconds));
        out.push('\n');
    }
    out
}

impl ConvergenceReport {
    pub fn csv(&self) -> String {
        csv_text(&self.rows, false)
    }

    /// Writes `errors.csv` and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("errors.csv"), self.csv())?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)?;
        Ok(())
    }
}

fn digest_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Boundary potential slices over `sgrid`, one per boundary node in
/// `dgrid.boundary_nodes()` order.
pub fn boundary_slices(
    spec: &BoundarySpec,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
) -> Vec<Vec<f64>> {
    let nx = sgrid.n_nodes();
    let profile = |amp: f64, shift: f64| -> Vec<f64> {
        (0..nx)
            .map(|xi| toric_potential(sgrid.t(xi), amp, shift))
            .collect()
    };
    let bnodes = dgrid.boundary_nodes();
    match *spec {
        BoundarySpec::Constant { value } => {
            bnodes.iter().map(|_| vec![value; nx]).collect()
        }
        BoundarySpec::AnalyticFormula { amp, shift } => {
            let s = profile(amp, shift);
            bnodes.iter().map(|_| s.clone()).collect()
        }
        BoundarySpec::ToricEndpoints {
            amp0,
            shift0,
            amp1,
            shift1,
        } => {
            let outer = profile(amp0, shift0);
            let inner = profile(amp1, shift1);
            let f = dgrid.factor(0);
            bnodes
                .iter()
                .map(|&b| {
                    let (i0, _) = f.split(dgrid.local(b, 0));
                    if i0 == 0 {
                        inner.clone()
                    } else {
                        outer.clone()
                    }
                })
                .collect()
        }
    }
}

/// The field a study compares against: the family's closed form, or the
/// swept envelope of the same boundary data when the config asks for it.
pub fn reference_field(
    config: &ExperimentConfig,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
) -> Result<PotentialField> {
    match config.reference {
        ReferenceSpec::ClosedForm => match config.boundary {
            BoundarySpec::Constant { value } => Ok(PotentialField::from_fn(
                dgrid.clone(),
                sgrid.clone(),
                |_, _| value,
            )),
            BoundarySpec::AnalyticFormula { amp, shift } => Ok(PotentialField::from_fn(
                dgrid.clone(),
                sgrid.clone(),
                |_, xi| toric_potential(sgrid.t(xi), amp, shift),
            )),
            BoundarySpec::ToricEndpoints {
                amp0,
                shift0,
                amp1,
                shift1,
            } => toric_geodesic_exact(amp0, shift0, amp1, shift1, dgrid, sgrid)
                .map_err(|e| e.at_stage("transport reference")),
        },
        ReferenceSpec::GraphSweep => {
            let v = boundary_slices(&config.boundary, dgrid, sgrid);
            graph_sweep_envelope(
                &v,
                &HolomorphicGraphFamily::default(),
                dgrid,
                sgrid,
                config.envelope_tol,
                config.envelope_sweeps,
            )
            .map_err(|e| e.at_stage("envelope reference"))
        }
    }
}

/// Worst gap over base nodes and window points between the potentials
/// induced by the metric field and the reference.
fn sup_fs_gap(
    field: &HermitianMetricField,
    sgrid: &SphereGrid,
    vref: &PotentialField,
) -> Result<f64> {
    let nx = sgrid.n_nodes();
    let gaps: Vec<f64> = (0..field.grid.n_nodes())
        .into_par_iter()
        .map(|p| {
            let g = GramMatrix {
                k: field.k,
                mat: field.values[p].clone(),
                tag: field.tag,
            };
            let fs = fs_values(&g, sgrid)?;
            let mut worst = 0.0f64;
            for xi in 0..nx {
                worst = worst.max((fs[xi] - vref.at(p, xi)).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

fn level_row(
    config: &ExperimentConfig,
    k: usize,
    slices: &[Vec<f64>],
    vref: &PotentialField,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
    qgrid: &SphereGrid,
) -> Result<KRow> {
    let t0 = Instant::now();
    let boundary = boundary_from_potentials(k, slices, dgrid, qgrid)
        .map_err(|e| e.at_stage(format!("boundary data at k={k}")))?;
    match solve_hym_with_report(&boundary, dgrid, config.solver_tol, config.max_sweeps) {
        Ok((field, rep)) => {
            let gap = sup_fs_gap(&field, sgrid, vref)
                .map_err(|e| e.at_stage(format!("potential evaluation at k={k}")))?;
            if !gap.is_finite() {
                return Err(Error::Mismatch(format!("non-finite error at k={k}")));
            }
            Ok(KRow {
                k,
                sup_error: Some(gap),
                hym_residual: rep.residual,
                iters: rep.sweeps,
                seconds: t0.elapsed().as_secs_f64(),
                converged: true,
            })
        }
        Err(Error::NonConvergence {
            sweeps, residual, ..
        }) => Ok(KRow {
            k,
            sup_error: None,
            hym_residual: residual,
            iters: sweeps,
            seconds: t0.elapsed().as_secs_f64(),
            converged: false,
        }),
        Err(e) => Err(e.at_stage(format!("relaxation at k={k}"))),
    }
}

fn fit_log_over_k(rows: &[KRow]) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.sup_error
                .map(|e| (((r.k as f64) + 1.0).ln() / r.k as f64, e))
        })
        .collect();
    if pts.is_empty() {
        return (None, None);
    }
    let den: f64 = pts.iter().map(|(m, _)| m * m).sum();
    let c = pts.iter().map(|(m, e)| m * e).sum::<f64>() / den;
    let ss: f64 = pts.iter().map(|(_, e)| e * e).sum();
    let rr: f64 = pts.iter().map(|(m, e)| (e - c * m) * (e - c * m)).sum();
    let rel = if ss > 0.0 { (rr / ss).sqrt() } else { 0.0 };
    (Some(c), Some(rel))
}

/// Runs the ladder of the config: per level, boundary Gram data, the metric
/// solve, and the induced-potential comparison against the reference field.
/// A level whose relaxation does not converge is flagged in its row; any
/// other failure aborts the study with its stage attached.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let dgrid = config.domain.build()?;
    let sgrid = config.window.build()?;
    let qgrid = config.quadrature.build()?;
    let slices = boundary_slices(&config.boundary, &dgrid, &qgrid);
    let vref = reference_field(config, &dgrid, &sgrid)?;
    let rows: Vec<KRow> = config
        .k_list
        .par_iter()
        .map(|&k| level_row(config, k, &slices, &vref, &dgrid, &sgrid, &qgrid))
        .collect::<Result<Vec<_>>>()?;
    let (fit_constant, fit_residual) = fit_log_over_k(&rows);
    let determinism_digest = digest_hex(&csv_text(&rows, true));
    Ok(ConvergenceReport {
        config: config.clone(),
        rows,
        fit_constant,
        fit_residual,
        determinism_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_constant(k_list: Vec<usize>, value: f64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::constant_study();
        cfg.domain = DomainSpec::Annulus {
            r0: 0.3,
            rings: 9,
            angles: 1,
        };
        cfg.window = WindowSpec {
            n_t: 17,
            n_theta: 1,
            t_max: 6.0,
        };
        cfg.k_list = k_list;
        cfg.boundary = BoundarySpec::Constant { value };
        cfg
    }

    #[test]
    fn closed_form_ladder_matches_the_flat_reference() {
        let cfg = small_constant(vec![1, 2, 4, 8], 0.0);
        let report = run_convergence_study(&cfg).unwrap();
        assert_eq!(report.rows.len(), 4);
        for r in &report.rows {
            assert!(r.converged);
            let expect = ((r.k as f64) + 1.0).ln() / r.k as f64;
            let got = r.sup_error.unwrap();
            assert!(
                (got - expect).abs() < 1e-6,
                "k={} got {got} want {expect}",
                r.k
            );
        }
        assert!((report.fit_constant.unwrap() - 1.0).abs() < 1e-4);
        assert!(report.fit_residual.unwrap() < 1e-4);
        assert_eq!(report.determinism_digest.len(), 64);
    }

    #[test]
    fn constant_shifts_leave_the_error_column_alone() {
        let base = run_convergence_study(&small_constant(vec![1, 2], 0.0)).unwrap();
        let lifted = run_convergence_study(&small_constant(vec![1, 2], 0.37)).unwrap();
        for (a, b) in base.rows.iter().zip(&lifted.rows) {
            let d = (a.sup_error.unwrap() - b.sup_error.unwrap()).abs();
            assert!(d <= 1e-10, "k={} drifted by {d:.3e}", a.k);
        }
    }

    #[test]
    fn transport_ladder_errors_shrink_and_fit_the_model() {
        let mut cfg = ExperimentConfig::transport_study();
        cfg.domain = DomainSpec::Annulus {
            r0: 0.3,
            rings: 17,
            angles: 1,
        };
        cfg.window = WindowSpec {
            n_t: 17,
            n_theta: 1,
            t_max: 8.0,
        };
        cfg.k_list = vec![2, 4, 8];
        let report = run_convergence_study(&cfg).unwrap();
        let errs: Vec<f64> = report.rows.iter().map(|r| r.sup_error.unwrap()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "errors {errs:?}");
        assert!(report.fit_residual.unwrap() < 0.3);
        for r in &report.rows {
            assert!(r.converged && r.hym_residual <= cfg.solver_tol);
        }
    }

    #[test]
    fn reruns_reproduce_the_digest_and_the_masked_rows() {
        let cfg = small_constant(vec![1, 2], 0.0);
        let a = run_convergence_study(&cfg).unwrap();
        let b = run_convergence_study(&cfg).unwrap();
        assert_eq!(a.determinism_digest, b.determinism_digest);
        assert_eq!(csv_text(&a.rows, true), csv_text(&b.rows, true));

        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: ConvergenceReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn flagged_levels_keep_the_study_alive() {
        let mut cfg = ExperimentConfig::transport_study();
        cfg.domain = DomainSpec::Annulus {
            r0: 0.3,
            rings: 9,
            angles: 1,
        };
        cfg.window = WindowSpec {
            n_t: 17,
            n_theta: 1,
            t_max: 6.0,
        };
        cfg.k_list = vec![2];
        cfg.solver_tol = 1e-30;
        cfg.max_sweeps = 60;
        let report = run_convergence_study(&cfg).unwrap();
        let row = &report.rows[0];
        assert!(!row.converged);
        assert!(row.sup_error.is_none());
        assert!(row.hym_residual > cfg.solver_tol);
        assert!(report.fit_constant.is_none());
        assert!(report.csv().contains("nan"));
    }

    #[test]
    fn bad_ladders_and_mismatched_families_are_rejected() {
        let mut cfg = small_constant(vec![], 0.0);
        assert!(matches!(
            run_convergence_study(&cfg),
            Err(Error::InvalidConfig(_))
        ));
        cfg.k_list = vec![4, 4];
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.k_list = vec![4, 2];
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.k_list = vec![33];
        assert!(matches!(cfg.validate(), Err(Error::Capacity { .. })));

        let mut cfg = ExperimentConfig::transport_study();
        cfg.m = 2;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));

        let mut cfg = ExperimentConfig::transport_study();
        cfg.domain = DomainSpec::Disc { side: 17 };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));

        let mut cfg = ExperimentConfig::transport_study();
        cfg.boundary = BoundarySpec::ToricEndpoints {
            amp0: 0.0,
            shift0: 0.0,
            amp1: 1.2,
            shift1: 1.0,
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_files_round_trip_with_spelled_out_families() {
        let text = r#"{
            "m": 1,
            "domain": { "kind": "annulus", "r0": 0.3, "rings": 9, "angles": 1 },
            "window": { "n_t": 17, "n_theta": 1, "t_max": 6.0 },
            "quadrature": { "n_t": 256, "t_max": 32.0 },
            "k_list": [1, 2],
            "boundary": { "family": "toric-endpoints",
                          "amp0": 0.0, "shift0": 0.0, "amp1": 0.4, "shift1": 1.0 },
            "solver_tol": 1e-9,
            "max_sweeps": 10000,
            "seed": 11
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.reference, ReferenceSpec::ClosedForm);
        assert_eq!(cfg.seed, 11);
        let echo: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(echo, cfg);

        let bad = text.replace("toric-endpoints", "mystery-family");
        assert!(matches!(
            ExperimentConfig::from_json(&bad),
            Err(Error::Json(_))
        ));
    }

    #[test]
    fn the_sweep_reference_tracks_the_exact_transport_field() {
        let mut cfg = ExperimentConfig::transport_study();
        cfg.domain = DomainSpec::Annulus {
            r0: 0.3,
            rings: 9,
            angles: 1,
        };
        cfg.window = WindowSpec {
            n_t: 17,
            n_theta: 1,
            t_max: 6.0,
        };
        let dgrid = cfg.domain.build().unwrap();
        let sgrid = cfg.window.build().unwrap();
        let exact = reference_field(&cfg, &dgrid, &sgrid).unwrap();
        cfg.reference = ReferenceSpec::GraphSweep;
        let swept = reference_field(&cfg, &dgrid, &sgrid).unwrap();
        let mut gap = 0.0f64;
        for p in 0..dgrid.n_nodes() {
            for xi in 0..sgrid.n_nodes() {
                gap = gap.max((swept.at(p, xi) - exact.at(p, xi)).abs());
            }
        }
        assert!(gap < 5e-2, "sweep vs exact transport gap {gap:.3e}");
    }
}
