//! Discrete contracted curvature and the geodesic relaxation drive.
//!
//! Everything is assembled in the working frame of each factor (second
//! differences of w = rho + i.theta or w = z) and converted to the chart
//! frame by the factor's |dw/dz|^2. The sign convention is fixed so that
//! H = e^{|z|^2} I has contraction +1 times the identity.
//!
//! Two discretizations of the same operator live here. `curvature_contraction`
//! uses plain centered differences of H. The solver's drive replaces the
//! second difference with a sum of matrix logarithms log(S^{-1} H_n S^{-1}),
//! S = H^{1/2}, which agrees to second order but is exactly zero on fields
//! whose log is lattice-linear; that makes separable closed forms exact fixed
//! points of the relaxation instead of O(h^2) near-solutions.

use super::HermitianMetricField;
use crate::geometry::DomainGrid;
use crate::linalg::{herm_log, herm_op_norm, herm_part, C64, CMat, HermEigen};
use crate::Result;
use rayon::prelude::*;

pub(crate) struct DriveParts {
    /// Hermitian drive matrix, chart-weighted over factors.
    pub m: CMat,
    /// Relaxation normalization: sum over factors and active axes of
    /// chart_factor / step^2.
    pub weight: f64,
    pub s: CMat,
    pub sinv: CMat,
}

/// Karcher-style drive at an interior node. Collapsed axes (a node that is
/// its own wrap neighbor) contribute nothing and are left out of the weight.
pub(crate) fn node_drive_parts(
    values: &[CMat],
    grid: &DomainGrid,
    p: usize,
) -> DriveParts {
    let h = &values[p];
    let n = h.nrows();
    let eig = HermEigen::new(h);
    let s = eig.apply(f64::sqrt);
    let sinv = eig.apply(|x| 1.0 / x.sqrt());
    let hinv = eig.apply(|x| 1.0 / x);
    let mut acc = CMat::zeros(n, n);
    let mut weight = 0.0;
    for j in 0..grid.m() {
        let cf = grid.chart_factor(p, j);
        let st = grid.stencil(p, j);
        let f = grid.factor(j);
        let steps = [f.d0, f.d1];
        let mut lap = CMat::zeros(n, n);
        let mut diffs: [Option<CMat>; 2] = [None, None];
        for axis in 0..2 {
            let nm = st[2 * axis];
            let np = st[2 * axis + 1];
            if nm == p && np == p {
                continue;
            }
            let d = steps[axis];
            let tm = herm_log(&herm_part(&(&sinv * &values[nm] * &sinv)));
            let tp = herm_log(&herm_part(&(&sinv * &values[np] * &sinv)));
            lap += (tp + tm) / C64::new(d * d, 0.0);
            diffs[axis] = Some((&values[np] - &values[nm]) / C64::new(2.0 * d, 0.0));
            weight += cf / (d * d);
        }
        let mut mj = &s * lap * &s;
        if let (Some(d0), Some(d1)) = (&diffs[0], &diffs[1]) {
            let comm = d1 * &hinv * d0 - d0 * &hinv * d1;
            mj -= comm * C64::new(0.0, 1.0);
        }
        acc += mj * C64::new(0.25 * cf, 0.0);
    }
    DriveParts {
        m: herm_part(&acc),
        weight,
        s,
        sinv,
    }
}

/// Contracted curvature of the field by centered differences, one matrix per
/// interior node in `grid.interior_nodes()` order. For each factor this is
/// H^{-1} (H_{w wbar} - H_{wbar} H^{-1} H_w) times the chart factor, summed.
/// The result is self-adjoint for the H inner product, not entrywise
/// Hermitian.
pub fn curvature_contraction(field: &HermitianMetricField) -> Result<Vec<CMat>> {
    let grid = &field.grid;
    let values = &field.values;
    let out = grid
        .interior_nodes()
        .par_iter()
        .map(|&p| {
            let h = &values[p];
            let n = h.nrows();
            let hinv = HermEigen::new(h).apply(|x| 1.0 / x);
            let mut r = CMat::zeros(n, n);
            for j in 0..grid.m() {
                let cf = grid.chart_factor(p, j);
                let st = grid.stencil(p, j);
                let f = grid.factor(j);
                let (d0, d1) = (f.d0, f.d1);
                let lap = (&values[st[1]] + &values[st[0]] - h * C64::new(2.0, 0.0))
                    / C64::new(d0 * d0, 0.0)
                    + (&values[st[3]] + &values[st[2]] - h * C64::new(2.0, 0.0))
                        / C64::new(d1 * d1, 0.0);
                let g0 = (&values[st[1]] - &values[st[0]]) / C64::new(2.0 * d0, 0.0);
                let g1 = (&values[st[3]] - &values[st[2]]) / C64::new(2.0 * d1, 0.0);
                let hw = (&g0 - &g1 * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0);
                let hwb = (&g0 + &g1 * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0);
                let p_mat = lap * C64::new(0.25, 0.0) - &hwb * &hinv * &hw;
                r += &hinv * p_mat * C64::new(cf, 0.0);
            }
            r
        })
        .collect();
    Ok(out)
}

/// Residual of each interior node: operator norm of the drive over the
/// operator norm of H there.
pub fn residual_ratios(field: &HermitianMetricField) -> Vec<f64> {
    field
        .grid
        .interior_nodes()
        .par_iter()
        .map(|&p| {
            let parts = node_drive_parts(&field.values, &field.grid, p);
            herm_op_norm(&parts.m) / herm_op_norm(&field.values[p])
        })
        .collect()
}

pub fn residual_sup(field: &HermitianMetricField) -> f64 {
    residual_ratios(field).into_iter().fold(0.0, f64::max)
}
