//! Geodesic relaxation for the Dirichlet problem of the contracted-curvature
//! equation.
//!
//! Interior nodes move along geodesics of the positive-matrix cone toward the
//! weighted Karcher combination of their stencil neighbors, corrected by the
//! first-order commutator term that the complex structure adds. Sweeps run in
//! two lattice colors; updates within a color read a frozen snapshot, so the
//! result is independent of thread scheduling. Diagonal boundary data keeps
//! the whole field diagonal and collapses each node update to scalar
//! successive overrelaxation on the log eigenvalues, which is the path the
//! production runs take.

use super::residual::{node_drive_parts, residual_sup};
use super::{BoundaryMetrics, HermitianMetricField};
use crate::geometry::{DomainGrid, FactorKind, NO_NODE};
use crate::linalg::{geodesic_dist_sq, herm_exp, herm_log, herm_part, C64, CMat, HermEigen};
use crate::quantization::BasisTag;
use crate::{Error, Result};
use rayon::prelude::*;

const STALL_WINDOW: usize = 10;

/// Overrelaxation factor from the model Jacobi spectral radius of the grid:
/// Dirichlet axes contribute their slowest sine mode, periodic axes their
/// constant mode, weighted by 1/step^2. Exact for the scalar Laplace problem,
/// a good setting for the nonlinear sweeps.
fn relax_omega(grid: &DomainGrid) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grid.m() {
        let f = grid.factor(j);
        let w0 = 1.0 / (f.d0 * f.d0);
        num += w0 * (std::f64::consts::PI / (f.n0 - 1) as f64).cos();
        den += w0;
        if f.n1 > 1 {
            let w1 = 1.0 / (f.d1 * f.d1);
            num += if f.periodic1 {
                w1
            } else {
                w1 * (std::f64::consts::PI / (f.n1 - 1) as f64).cos()
            };
            den += w1;
        }
    }
    let mu = (num / den).clamp(0.0, 1.0 - 1e-12);
    (2.0 / (1.0 + (1.0 - mu * mu).sqrt())).min(1.95)
}

/// Per-solve telemetry. `residual_history[s]` is the relative residual after
/// sweep `s` (entry 0 is the initial guess), `energy_history` tracks the sum
/// over stencil edges of squared geodesic distance over step^2, and
/// `energy_monotone` is that sequence's non-increase up to roundoff slack.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub sweeps: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub energy_monotone: bool,
}

pub fn solve_hym(
    boundary: &BoundaryMetrics,
    grid: &DomainGrid,
    tol: f64,
    max_iters: usize,
) -> Result<HermitianMetricField> {
    solve_hym_with_report(boundary, grid, tol, max_iters).map(|(f, _)| f)
}

pub fn solve_hym_with_report(
    boundary: &BoundaryMetrics,
    grid: &DomainGrid,
    tol: f64,
    max_iters: usize,
) -> Result<(HermitianMetricField, SolveReport)> {
    run(boundary, grid, tol, max_iters, None)
}

/// Explicit-Euler variant: every interior node steps simultaneously from the
/// same snapshot with a fixed normalized time step `dt` in (0, 1). Slower
/// than relaxation; kept as a cross-check of the stationary state.
pub fn solve_hym_flow(
    boundary: &BoundaryMetrics,
    grid: &DomainGrid,
    dt: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(HermitianMetricField, SolveReport)> {
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "flow step must lie in (0,1), got {dt}"
        )));
    }
    run(boundary, grid, tol, max_iters, Some(dt))
}

struct Edge {
    p: usize,
    q: usize,
    inv_d2: f64,
}

fn run(
    boundary: &BoundaryMetrics,
    grid: &DomainGrid,
    tol: f64,
    max_iters: usize,
    flow_dt: Option<f64>,
) -> Result<(HermitianMetricField, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let k = boundary.k;
    let dim = k + 1;
    let bnodes = grid.boundary_nodes();
    if boundary.entries.len() != bnodes.len()
        || boundary
            .entries
            .iter()
            .zip(&bnodes)
            .any(|((node, _), b)| node != b)
    {
        return Err(Error::Mismatch(
            "boundary data does not cover this grid's boundary node set".into(),
        ));
    }
    for (_, m) in &boundary.entries {
        if m.nrows() != dim {
            return Err(Error::Mismatch(format!(
                "boundary matrix is {}x{}, field dimension is {dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        if HermEigen::new(m).min() <= 0.0 {
            return Err(Error::IllConditioned { cond: f64::INFINITY });
        }
    }

    let interior = grid.interior_nodes();
    let by_color = split_colors(grid, &interior);
    let edges = plus_edges(grid);
    let omega = relax_omega(grid);

    let mut field = HermitianMetricField {
        k,
        grid: grid.clone(),
        values: init_values(boundary, grid, dim),
        tag: BasisTag::Dual,
    };

    let diag_path = flow_dt.is_none() && boundary.is_diagonal();
    let mut logs: Vec<Vec<f64>> = Vec::new();
    if diag_path {
        logs = field
            .values
            .iter()
            .map(|m| (0..dim).map(|c| m[(c, c)].re.ln()).collect())
            .collect();
    }

    let mut res_hist = Vec::new();
    let mut energy_hist = Vec::new();
    let mut sweeps = 0usize;
    loop {
        let res = if diag_path {
            diag_residual(&logs, grid, &interior)
        } else {
            dense_residual(&field.values, grid, &interior)
        };
        let energy = if diag_path {
            diag_energy(&logs, &edges)
        } else {
            dense_energy(&field.values, &edges)
        };
        res_hist.push(res);
        energy_hist.push(energy);

        if res <= tol {
            break;
        }
        // stuck: neither the residual nor the energy has moved over a window.
        // Windowed minima, because near-optimal overrelaxation decays with an
        // oscillation, and the energy alone flattens out at the positive
        // Dirichlet energy of the solution well before convergence.
        let stalled = res_hist.len() >= 2 * STALL_WINDOW && {
            let n = res_hist.len();
            let best = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
            let r_now = best(&res_hist[n - STALL_WINDOW..]);
            let r_then = best(&res_hist[n - 2 * STALL_WINDOW..n - STALL_WINDOW]);
            let e_now = *energy_hist.last().unwrap();
            let e_then = energy_hist[n - 1 - STALL_WINDOW];
            r_now >= 0.999 * r_then && e_then - e_now <= 1e-14 * (1.0 + e_now.abs())
        };
        if sweeps >= max_iters || stalled {
            return Err(Error::NonConvergence {
                sweeps,
                residual: res,
                energy_monotone: monotone(&energy_hist),
                residual_history: res_hist,
            });
        }

        if diag_path {
            diag_sweep(&mut logs, grid, &by_color, omega);
        } else {
            dense_sweep(&mut field.values, grid, &by_color, omega, flow_dt);
        }
        sweeps += 1;
    }

    if diag_path {
        for &p in &interior {
            let d = nalgebra::DVector::from_iterator(
                dim,
                logs[p].iter().map(|&u| C64::new(u.exp(), 0.0)),
            );
            field.values[p] = CMat::from_diagonal(&d);
        }
    }
    // boundary nodes carry the prescribed matrices bit for bit
    for (node, m) in &boundary.entries {
        field.values[*node] = m.clone();
    }
    let final_res = residual_sup(&field);
    let report = SolveReport {
        sweeps,
        residual: final_res,
        energy_monotone: monotone(&energy_hist),
        residual_history: res_hist,
        energy_history: energy_hist,
    };
    Ok((field, report))
}

fn monotone(energy: &[f64]) -> bool {
    energy
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14)
}

fn split_colors(grid: &DomainGrid, interior: &[usize]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &p in interior {
        let mut s = 0usize;
        for j in 0..grid.m() {
            let (i0, i1) = grid.factor(j).split(grid.local(p, j));
            s += i0 + i1;
        }
        out[s % 2].push(p);
    }
    out
}

/// Every lattice edge once, as the plus-direction link of its lower end.
fn plus_edges(grid: &DomainGrid) -> Vec<Edge> {
    let mut edges = Vec::new();
    for p in 0..grid.n_nodes() {
        for j in 0..grid.m() {
            let f = grid.factor(j);
            for (a, d) in [(1usize, f.d0), (3, f.d1)] {
                let q = grid.neighbor(p, j, a);
                if q == NO_NODE || q == p {
                    continue;
                }
                edges.push(Edge {
                    p,
                    q,
                    inv_d2: 1.0 / (d * d),
                });
            }
        }
    }
    edges
}

fn init_values(boundary: &BoundaryMetrics, grid: &DomainGrid, dim: usize) -> Vec<CMat> {
    let mut values = vec![CMat::identity(dim, dim); grid.n_nodes()];
    let mut blog = vec![None; grid.n_nodes()];
    for (node, m) in &boundary.entries {
        values[*node] = m.clone();
        blog[*node] = Some(herm_log(m));
    }
    let radial_interp =
        grid.m() == 1 && grid.factor(0).kind == FactorKind::LogPolar;
    if radial_interp {
        let f = grid.factor(0);
        for p in grid.interior_nodes() {
            let (i0, i1) = f.split(grid.local(p, 0));
            let inner = grid.node_of_locals(&[f.local(0, i1)]).unwrap();
            let outer = grid.node_of_locals(&[f.local(f.n0 - 1, i1)]).unwrap();
            let s = i0 as f64 / (f.n0 - 1) as f64;
            let mix = blog[inner].as_ref().unwrap() * C64::new(1.0 - s, 0.0)
                + blog[outer].as_ref().unwrap() * C64::new(s, 0.0);
            values[p] = herm_part(&herm_exp(&mix));
        }
    } else {
        let mut mean = CMat::zeros(dim, dim);
        for l in blog.iter().flatten() {
            mean += l;
        }
        mean /= C64::new(boundary.entries.len() as f64, 0.0);
        let a = herm_part(&herm_exp(&mean));
        for p in grid.interior_nodes() {
            values[p] = a.clone();
        }
    }
    values
}

fn dense_sweep(
    values: &mut [CMat],
    grid: &DomainGrid,
    by_color: &[Vec<usize>; 2],
    omega: f64,
    flow_dt: Option<f64>,
) {
    if let Some(dt) = flow_dt {
        // flow mode steps everything at once from one snapshot
        let all: Vec<usize> = by_color.concat();
        for (p, h) in step_nodes(values, grid, &all, dt) {
            values[p] = h;
        }
        return;
    }
    for nodes in by_color {
        for (p, h) in step_nodes(values, grid, nodes, omega) {
            values[p] = h;
        }
    }
}

fn step_nodes(
    values: &[CMat],
    grid: &DomainGrid,
    nodes: &[usize],
    omega: f64,
) -> Vec<(usize, CMat)> {
    nodes
        .par_iter()
        .map(|&p| {
            let parts = node_drive_parts(values, grid, p);
            let expo =
                herm_part(&(&parts.sinv * &parts.m * &parts.sinv)) * C64::new(2.0 * omega / parts.weight, 0.0);
            let h = &parts.s * herm_exp(&expo) * &parts.s;
            (p, herm_part(&h))
        })
        .collect()
}

fn dense_residual(values: &[CMat], grid: &DomainGrid, interior: &[usize]) -> f64 {
    interior
        .par_iter()
        .map(|&p| {
            let parts = node_drive_parts(values, grid, p);
            crate::linalg::herm_op_norm(&parts.m) / crate::linalg::herm_op_norm(&values[p])
        })
        .reduce(|| 0.0, f64::max)
}

// Fixed-size chunks keep the association order of the sum independent of the
// thread schedule, so repeated runs reproduce energy histories bit for bit.
fn dense_energy(values: &[CMat], edges: &[Edge]) -> f64 {
    let parts: Vec<f64> = edges
        .par_chunks(512)
        .map(|c| {
            c.iter()
                .map(|e| e.inv_d2 * geodesic_dist_sq(&values[e.p], &values[e.q]))
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}

/// num[c] = sum_j cf sum_axes (u_minus + u_plus)/d^2 and the normalization
/// W = sum_j cf sum_axes 1/d^2, skipping collapsed axes.
fn diag_star(
    logs: &[Vec<f64>],
    grid: &DomainGrid,
    p: usize,
) -> (Vec<f64>, f64) {
    let dim = logs[p].len();
    let mut num = vec![0.0; dim];
    let mut w = 0.0;
    for j in 0..grid.m() {
        let cf = grid.chart_factor(p, j);
        let st = grid.stencil(p, j);
        let f = grid.factor(j);
        for (axis, d) in [(0usize, f.d0), (1, f.d1)] {
            let nm = st[2 * axis];
            let np = st[2 * axis + 1];
            if nm == p && np == p {
                continue;
            }
            let s = cf / (d * d);
            w += s;
            for c in 0..dim {
                num[c] += s * (logs[nm][c] + logs[np][c]);
            }
        }
    }
    (num, w)
}

fn diag_sweep(
    logs: &mut Vec<Vec<f64>>,
    grid: &DomainGrid,
    by_color: &[Vec<usize>; 2],
    omega: f64,
) {
    for color in 0..2 {
        let updates: Vec<(usize, Vec<f64>)> = by_color[color]
            .par_iter()
            .map(|&p| {
                let (num, w) = diag_star(logs, grid, p);
                let new = logs[p]
                    .iter()
                    .zip(&num)
                    .map(|(&u, &s)| (1.0 - omega) * u + omega * s / (2.0 * w))
                    .collect();
                (p, new)
            })
            .collect();
        for (p, u) in updates {
            logs[p] = u;
        }
    }
}

fn diag_residual(logs: &[Vec<f64>], grid: &DomainGrid, interior: &[usize]) -> f64 {
    interior
        .par_iter()
        .map(|&p| {
            let (num, w) = diag_star(logs, grid, p);
            let mut drive = 0.0f64;
            let mut scale = 0.0f64;
            for (c, &u) in logs[p].iter().enumerate() {
                let lam = u.exp();
                drive = drive.max(0.25 * lam * (num[c] - 2.0 * w * u).abs());
                scale = scale.max(lam);
            }
            drive / scale
        })
        .reduce(|| 0.0, f64::max)
}

fn diag_energy(logs: &[Vec<f64>], edges: &[Edge]) -> f64 {
    let parts: Vec<f64> = edges
        .par_chunks(512)
        .map(|c| {
            c.iter()
                .map(|e| {
                    e.inv_d2
                        * logs[e.p]
                            .iter()
                            .zip(&logs[e.q])
                            .map(|(&a, &b)| (a - b) * (a - b))
                            .sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}
