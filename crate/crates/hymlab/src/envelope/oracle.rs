//! Rotation-invariant reference on the annulus. The fiber profiles are
//! convex in `t`; their convex conjugates on a shared slope grid are
//! combined affinely in the normalized ring coordinate and transformed
//! back. The slope grid contains every edge slope of both profiles, so the
//! double transform is exact at the nodes: matching endpoint data
//! reproduces itself and a constant offset interpolates linearly in the
//! ring coordinate.

use crate::envelope::PotentialField;
use crate::geometry::{psi_of_t, DomainGrid, DomainShape, SphereGrid};
use crate::{Error, Result};

const FILL_PER_NODE: usize = 64;

pub fn toric_geodesic_oracle(
    phi0: &[f64],
    phi1: &[f64],
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
) -> Result<PotentialField> {
    let r0 = match dgrid.shape {
        DomainShape::Annulus { r0 } => r0,
        _ => {
            return Err(Error::Mismatch(
                "the transport reference needs an annulus base".into(),
            ))
        }
    };
    let nx = sgrid.n_nodes();
    if phi0.len() != nx || phi1.len() != nx {
        return Err(Error::Mismatch(format!(
            "fiber data rows have {} and {} entries, grid has {nx}",
            phi0.len(),
            phi1.len()
        )));
    }
    for data in [phi0, phi1] {
        for xi in 0..nx {
            let ray = data[sgrid.idx(sgrid.it(xi), 0)];
            if (data[xi] - ray).abs() > 1e-11 * (1.0 + ray.abs()) {
                return Err(Error::Mismatch(
                    "fiber data is not rotation invariant".into(),
                ));
            }
        }
    }

    let n_t = sgrid.n_t;
    let dt = sgrid.dt();
    let ts: Vec<f64> = (0..n_t).map(|i| -sgrid.t_max + i as f64 * dt).collect();
    let profile = |data: &[f64]| -> Vec<f64> {
        (0..n_t)
            .map(|i| psi_of_t(ts[i]) + data[sgrid.idx(i, 0)])
            .collect()
    };
    let u0 = profile(phi0);
    let u1 = profile(phi1);
    for u in [&u0, &u1] {
        for i in 1..n_t - 1 {
            let dd = u[i + 1] - 2.0 * u[i] + u[i - 1];
            if dd < -1e-11 * (1.0 + u[i].abs()) {
                return Err(Error::NonKahler {
                    node: i,
                    value: dd / (dt * dt),
                });
            }
        }
    }

    let mut ps: Vec<f64> = Vec::with_capacity(2 * n_t + FILL_PER_NODE * n_t);
    for u in [&u0, &u1] {
        for i in 0..n_t - 1 {
            ps.push((u[i + 1] - u[i]) / dt);
        }
    }
    let pmin = ps.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if pmax > pmin {
        let n_fill = FILL_PER_NODE * n_t;
        for q in 0..=n_fill {
            ps.push(pmin + (pmax - pmin) * q as f64 / n_fill as f64);
        }
    }
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let conj = |u: &[f64]| -> Vec<f64> {
        ps.iter()
            .map(|&p| {
                (0..n_t)
                    .map(|i| p * ts[i] - u[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    };
    let c0 = conj(&u0);
    let c1 = conj(&u1);

    let f = dgrid.factor(0);
    let rho0 = r0.ln();
    let rows: Vec<Vec<f64>> = (0..f.n0)
        .map(|i0| {
            let tau = (f.a0_min + i0 as f64 * f.d0) / rho0;
            (0..n_t)
                .map(|i| {
                    let star = ps
                        .iter()
                        .zip(c0.iter().zip(&c1))
                        .map(|(&p, (&a, &b))| p * ts[i] - ((1.0 - tau) * a + tau * b))
                        .fold(f64::NEG_INFINITY, f64::max);
                    star - psi_of_t(ts[i])
                })
                .collect()
        })
        .collect();

    let mut values = Vec::with_capacity(dgrid.n_nodes() * nx);
    for p in 0..dgrid.n_nodes() {
        let (i0, _) = f.split(dgrid.local(p, 0));
        for xi in 0..nx {
            values.push(rows[i0][sgrid.it(xi)]);
        }
    }
    let mut boundary_values = Vec::new();
    for &b in &dgrid.boundary_nodes() {
        boundary_values.extend_from_slice(&values[b * nx..(b + 1) * nx]);
    }
    Ok(PotentialField {
        dgrid: dgrid.clone(),
        sgrid: sgrid.clone(),
        values,
        boundary_values,
    })
}

fn shifted_slope(amp: f64, shift: f64, t: f64) -> f64 {
    let sig = |v: f64| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    };
    (1.0 - amp) * sig(t) + amp * sig(t - shift)
}

fn shifted_value(amp: f64, shift: f64, t: f64) -> f64 {
    (1.0 - amp) * psi_of_t(t) + amp * psi_of_t(t - shift)
}

/// t with shifted_slope(t) = y, by bisection on the strictly increasing slope.
fn invert_slope(amp: f64, shift: f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (-90.0 - shift.abs(), 90.0 + shift.abs());
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if shifted_slope(amp, shift, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Transport interpolation for the shifted-softplus endpoint family,
/// evaluated by inverting the analytic slope maps instead of taking a
/// tangent-line maximum. The result is smooth to rounding, which the
/// curvature diagnostics need; the tangent-line construction above stays
/// piecewise affine in t at every resolution and its creases never refine
/// away. Endpoints are `amp·(psi(t−shift) − psi(t))` with amp in [0, 1).
pub fn toric_geodesic_exact(
    amp0: f64,
    shift0: f64,
    amp1: f64,
    shift1: f64,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
) -> Result<PotentialField> {
    if !matches!(dgrid.shape, DomainShape::Annulus { .. }) {
        return Err(Error::Mismatch(
            "the transport reference needs an annulus base".into(),
        ));
    }
    for (name, a) in [("first", amp0), ("second", amp1)] {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::InvalidConfig(format!(
                "{name} endpoint amplitude {a} outside [0, 1)"
            )));
        }
    }
    let r0 = match dgrid.shape {
        DomainShape::Annulus { r0 } => r0,
        _ => unreachable!(),
    };
    let f = dgrid.factor(0);
    let n_t = sgrid.n_t;
    let dt = sgrid.dt();
    let rho0 = r0.ln();
    let rows: Vec<Vec<f64>> = (0..f.n0)
        .map(|i0| {
            let tau = (f.a0_min + i0 as f64 * f.d0) / rho0;
            (0..n_t)
                .map(|i| {
                    let t = -sgrid.t_max + i as f64 * dt;
                    // slope fraction of the interpolated profile at t: the
                    // inverse slope maps combine affinely in tau
                    let (mut lo, mut hi) = (1e-15, 1.0 - 1e-15);
                    for _ in 0..64 {
                        let y = 0.5 * (lo + hi);
                        let tv = (1.0 - tau) * invert_slope(amp0, shift0, y)
                            + tau * invert_slope(amp1, shift1, y);
                        if tv < t {
                            lo = y;
                        } else {
                            hi = y;
                        }
                    }
                    let y = 0.5 * (lo + hi);
                    let t0 = invert_slope(amp0, shift0, y);
                    let t1 = invert_slope(amp1, shift1, y);
                    let conj = (1.0 - tau) * (t0 * y - shifted_value(amp0, shift0, t0))
                        + tau * (t1 * y - shifted_value(amp1, shift1, t1));
                    t * y - conj - psi_of_t(t)
                })
                .collect()
        })
        .collect();

    let nx = sgrid.n_nodes();
    let mut values = Vec::with_capacity(dgrid.n_nodes() * nx);
    for p in 0..dgrid.n_nodes() {
        let (i0, _) = f.split(dgrid.local(p, 0));
        for xi in 0..nx {
            values.push(rows[i0][sgrid.it(xi)]);
        }
    }
    let mut boundary_values = Vec::new();
    for &b in &dgrid.boundary_nodes() {
        boundary_values.extend_from_slice(&values[b * nx..(b + 1) * nx]);
    }
    Ok(PotentialField {
        dgrid: dgrid.clone(),
        sgrid: sgrid.clone(),
        values,
        boundary_values,
    })
}
