//! The linear comparison problem: relax
//! `sum_j cf_j/4 * lap_w h + C(t) (h_tt + h_thth / 4) + source = 0`
//! to stationarity, with `C(t) = (e^{t/2} + e^{-t/2})^2` the inverse fiber
//! area density, the base values pinned on the boundary rings and reflection
//! closure at the ends of the `t` window. With the unit source fixed at 2
//! the solution dominates every candidate in the envelope class that shares
//! its boundary data: the discrete operator is an M-matrix, so the
//! comparison argument carries over without loss.

use crate::envelope::PotentialField;
use crate::geometry::{DomainGrid, SphereGrid};
use crate::{Error, Result};
use rayon::prelude::*;

const MAX_SWEEPS: usize = 500_000;
const CHECK_EVERY: usize = 32;

pub fn harmonic_majorant(
    v: &[Vec<f64>],
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
) -> Result<PotentialField> {
    let src = vec![2.0; dgrid.n_nodes() * sgrid.n_nodes()];
    relax_comparison(v, dgrid, sgrid, &src)
}

/// Weights of the fiber part of the stencil at one `t` row. The window ends
/// use a reflected ghost, which doubles the inward weight.
struct FiberRow {
    w_lo: f64,
    w_hi: f64,
    w_th: f64,
}

fn fiber_rows(sgrid: &SphereGrid) -> Vec<FiberRow> {
    let dt = sgrid.dt();
    let dth = sgrid.dtheta();
    (0..sgrid.n_t)
        .map(|it| {
            let t = -sgrid.t_max + it as f64 * dt;
            let c = (t / 2.0).exp() + (-t / 2.0).exp();
            let cap = c * c;
            let (w_lo, w_hi) = if it == 0 {
                (0.0, 2.0 * cap / (dt * dt))
            } else if it == sgrid.n_t - 1 {
                (2.0 * cap / (dt * dt), 0.0)
            } else {
                (cap / (dt * dt), cap / (dt * dt))
            };
            let w_th = if sgrid.n_theta > 1 {
                cap / (4.0 * dth * dth)
            } else {
                0.0
            };
            FiberRow { w_lo, w_hi, w_th }
        })
        .collect()
}

pub(crate) fn relax_comparison(
    v: &[Vec<f64>],
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
    src: &[f64],
) -> Result<PotentialField> {
    let nx = sgrid.n_nodes();
    let nd = dgrid.n_nodes();
    let boundary = dgrid.boundary_nodes();
    if v.len() != boundary.len() {
        return Err(Error::Mismatch(format!(
            "{} boundary rows supplied, grid has {}",
            v.len(),
            boundary.len()
        )));
    }
    for row in v {
        if row.len() != nx {
            return Err(Error::Mismatch(format!(
                "boundary row has {} fiber values, expected {nx}",
                row.len()
            )));
        }
        if !row.iter().all(|x| x.is_finite()) {
            return Err(Error::Mismatch("boundary data is not finite".into()));
        }
    }
    if src.len() != nd * nx {
        return Err(Error::Mismatch("source array does not cover the product grid".into()));
    }

    let interior = dgrid.interior_nodes();
    // base-side stencil: (neighbor, weight) pairs and their weight sum
    let mut zlinks: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nd];
    let mut zdiag = vec![0.0; nd];
    for &p in &interior {
        let mut links = Vec::new();
        let mut diag = 0.0;
        for j in 0..dgrid.m() {
            let f = dgrid.factor(j);
            let cf = dgrid.chart_factor(p, j);
            let st = dgrid.stencil(p, j);
            let w0 = cf / (4.0 * f.d0 * f.d0);
            let w1 = cf / (4.0 * f.d1 * f.d1);
            for (a, &q) in st.iter().enumerate() {
                if q == p {
                    continue; // collapsed angular axis
                }
                let w = if a < 2 { w0 } else { w1 };
                links.push((q, w));
                diag += w;
            }
        }
        zlinks[p] = links;
        zdiag[p] = diag;
    }
    let rows = fiber_rows(sgrid);
    let nth = sgrid.n_theta;

    let mut vals = vec![0.0; nd * nx];
    let mut mean = 0.0;
    for (row, &b) in v.iter().zip(&boundary) {
        for (xi, &x) in row.iter().enumerate() {
            vals[b * nx + xi] = x;
            mean += x;
        }
    }
    mean /= (boundary.len() * nx) as f64;
    for &p in &interior {
        for xi in 0..nx {
            vals[p * nx + xi] = mean;
        }
    }

    // two colors; every stencil link flips the total lattice parity
    let mut colors: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &p in &interior {
        let mut parity = 0usize;
        for j in 0..dgrid.m() {
            let (i0, i1) = dgrid.factor(j).split(dgrid.local(p, j));
            parity += i0 + i1;
        }
        for xi in 0..nx {
            let it = xi / nth;
            let ith = xi % nth;
            colors[(parity + it + ith) % 2].push(p * nx + xi);
        }
    }

    let star = |vals: &[f64], cell: usize| -> (f64, f64) {
        let p = cell / nx;
        let xi = cell % nx;
        let it = xi / nth;
        let ith = xi % nth;
        let row = &rows[it];
        let mut acc = src[cell];
        let mut diag = zdiag[p];
        for &(q, w) in &zlinks[p] {
            acc += w * vals[q * nx + xi];
        }
        if row.w_lo > 0.0 {
            acc += row.w_lo * vals[cell - nth];
            diag += row.w_lo;
        }
        if row.w_hi > 0.0 {
            acc += row.w_hi * vals[cell + nth];
            diag += row.w_hi;
        }
        if row.w_th > 0.0 {
            let lo = p * nx + it * nth + (ith + nth - 1) % nth;
            let hi = p * nx + it * nth + (ith + 1) % nth;
            acc += row.w_th * (vals[lo] + vals[hi]);
            diag += 2.0 * row.w_th;
        }
        (acc, diag)
    };

    let mut buf = vec![0.0; colors[0].len().max(colors[1].len())];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for color in &colors {
            let slice = &mut buf[..color.len()];
            color
                .par_iter()
                .zip(slice.par_iter_mut())
                .for_each(|(&cell, out)| {
                    let (acc, diag) = star(&vals, cell);
                    *out = acc / diag;
                });
            for (i, &cell) in color.iter().enumerate() {
                vals[cell] = buf[i];
            }
        }
        if sweeps % CHECK_EVERY == 0 || sweeps == MAX_SWEEPS {
            let sup = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let res = colors
                .iter()
                .map(|c| {
                    c.par_iter()
                        .map(|&cell| {
                            let (acc, diag) = star(&vals, cell);
                            (acc / diag - vals[cell]).abs()
                        })
                        .reduce(|| 0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if res <= 1e-12 * (1.0 + sup) {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::IllConditioned {
                    cond: res / (1e-12 * (1.0 + sup)),
                });
            }
        }
    }

    let mut boundary_values = Vec::with_capacity(boundary.len() * nx);
    for row in v {
        boundary_values.extend_from_slice(row);
    }
    Ok(PotentialField {
        dgrid: dgrid.clone(),
        sgrid: sgrid.clone(),
        values: vals,
        boundary_values,
    })
}
