//! Hermitian metric fields on the base domain: the Dirichlet problem for the
//! vanishing of the contracted curvature (a Hermitian-harmonic map into the
//! positive matrices), driven by geodesic relaxation, plus its diagnostics.
//!
//! Fields assign one positive Hermitian matrix per domain node; boundary
//! nodes carry prescribed data that a solve never touches. The boundary data
//! of interest comes from dualizing the Gram matrices of sphere potentials.

mod checkpoint;
mod residual;
mod solver;
mod subharmonic;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub(crate) use checkpoint::{read_header_line, GridDesc};
pub use residual::{curvature_contraction, residual_ratios, residual_sup};
pub use solver::{solve_hym, solve_hym_flow, solve_hym_with_report, SolveReport};
pub use subharmonic::{check_subharmonic_norm, random_sections, SectionSample};

use crate::geometry::DomainGrid;
use crate::linalg::{herm_defect, offdiag_max, CMat, HermEigen};
use crate::quantization::{dual_gram, hilbert_map, BasisTag};
use crate::{Error, Result};
use rayon::prelude::*;

/// Positive Hermitian matrix data on every node of a domain grid.
#[derive(Clone, Debug)]
pub struct HermitianMetricField {
    pub k: usize,
    pub grid: DomainGrid,
    pub values: Vec<CMat>,
    pub tag: BasisTag,
}

impl HermitianMetricField {
    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn at(&self, node: usize) -> &CMat {
        &self.values[node]
    }

    /// Constant field, mostly for diagnostics and tests.
    pub fn constant(k: usize, grid: DomainGrid, value: CMat, tag: BasisTag) -> Self {
        let values = vec![value; grid.n_nodes()];
        HermitianMetricField {
            k,
            grid,
            values,
            tag,
        }
    }

    /// True when every node matrix is diagonal to roundoff; such fields admit
    /// the scalar solve path and exact log interpolation.
    pub fn is_diagonal(&self) -> bool {
        self.values
            .iter()
            .all(|m| offdiag_max(m) <= 1e-13 * (1.0 + m.norm()))
    }
}

/// Dirichlet data for a solve: one dual-side Gram matrix per boundary node,
/// in `grid.boundary_nodes()` order.
#[derive(Clone, Debug)]
pub struct BoundaryMetrics {
    pub k: usize,
    pub entries: Vec<(usize, CMat)>,
}

impl BoundaryMetrics {
    /// Validates Hermitian positivity of every matrix and coverage of the
    /// grid's boundary node set.
    pub fn new(k: usize, grid: &DomainGrid, mats: Vec<CMat>) -> Result<BoundaryMetrics> {
        let bnodes = grid.boundary_nodes();
        if mats.len() != bnodes.len() {
            return Err(Error::Mismatch(format!(
                "{} boundary matrices for {} boundary nodes",
                mats.len(),
                bnodes.len()
            )));
        }
        for m in &mats {
            if m.nrows() != k + 1 || m.ncols() != k + 1 {
                return Err(Error::Mismatch(format!(
                    "boundary matrix is {}x{}, expected {}",
                    m.nrows(),
                    m.ncols(),
                    k + 1
                )));
            }
            if herm_defect(m) > 1e-10 * (1.0 + m.norm()) {
                return Err(Error::Mismatch("boundary matrix not Hermitian".into()));
            }
            if HermEigen::new(m).min() <= 0.0 {
                return Err(Error::IllConditioned { cond: f64::INFINITY });
            }
        }
        Ok(BoundaryMetrics {
            k,
            entries: bnodes.into_iter().zip(mats).collect(),
        })
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries
            .iter()
            .all(|(_, m)| offdiag_max(m) <= 1e-13 * (1.0 + m.norm()))
    }
}

/// Dual Gram matrices of the given boundary potentials: one sphere-sampled
/// potential slice per boundary node, in `grid.boundary_nodes()` order.
pub fn boundary_from_potentials(
    k: usize,
    slices: &[Vec<f64>],
    grid: &DomainGrid,
    sgrid: &crate::geometry::SphereGrid,
) -> Result<BoundaryMetrics> {
    let bnodes = grid.boundary_nodes();
    if slices.len() != bnodes.len() {
        return Err(Error::Mismatch(format!(
            "{} potential slices for {} boundary nodes",
            slices.len(),
            bnodes.len()
        )));
    }
    let mats = slices
        .par_iter()
        .map(|s| Ok(dual_gram(&hilbert_map(k, s, sgrid)?)?.mat))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryMetrics {
        k,
        entries: bnodes.into_iter().zip(mats).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_sphere_grid;
    use crate::linalg::C64;

    #[test]
    fn zero_potential_gives_doubling_boundary() {
        let grid = DomainGrid::annulus(0.2, 5, 1).unwrap();
        let sgrid = build_sphere_grid(256, 1).unwrap();
        let slices = vec![vec![0.0; sgrid.n_nodes()]; grid.boundary_nodes().len()];
        let b = boundary_from_potentials(1, &slices, &grid, &sgrid).unwrap();
        for (_, m) in &b.entries {
            assert!((m[(0, 0)].re - 2.0).abs() < 1e-10);
            assert!((m[(1, 1)].re - 2.0).abs() < 1e-10);
            assert!(m[(0, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn constant_potential_scales_boundary() {
        let grid = DomainGrid::annulus(0.2, 5, 1).unwrap();
        let sgrid = build_sphere_grid(256, 1).unwrap();
        let c = 0.9f64;
        let zero = vec![vec![0.0; sgrid.n_nodes()]; 2];
        let cons = vec![vec![c; sgrid.n_nodes()]; 2];
        let b0 = boundary_from_potentials(1, &zero, &grid, &sgrid).unwrap();
        let bc = boundary_from_potentials(1, &cons, &grid, &sgrid).unwrap();
        for ((_, m0), (_, mc)) in b0.entries.iter().zip(&bc.entries) {
            // dual turns the e^{-kc} weight decay into e^{+kc} growth; k=1 here
            let want = m0 * C64::new(c.exp(), 0.0);
            assert!((mc - &want).norm() < 1e-10 * want.norm());
        }
        assert!(bc.is_diagonal());
    }
}
