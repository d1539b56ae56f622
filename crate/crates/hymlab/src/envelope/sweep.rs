//! The cut iteration. A candidate value at a base node and fiber point is
//! the circle mean of `psi(f) + u(., f(.))` along a probe circle in the
//! working coordinate of one base factor, pulled down by `psi(x0)`; the
//! envelope operator replaces the current value by the smallest candidate.
//! Circles in the working frame are legitimate because subharmonicity
//! composes with the chart map. The fiber potential is interpolated from
//! its node samples with the same bilinear rule as the field, so composite
//! cancellations (for instance `u = -psi`) are exact.

use crate::envelope::{
    harmonic_majorant, probe_radius, HolomorphicGraphFamily, PotentialField,
};
use crate::geometry::{axis_locate, DomainGrid, FactorKind, SphereGrid};
use crate::linalg::C64;
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::TAU;

pub struct SweepReport {
    pub sweeps: usize,
    pub last_decrement: f64,
    pub decrement_history: Vec<f64>,
}

fn axis_pairs(i: usize, frac: f64, n: usize, periodic: bool) -> ([(usize, f64); 2], usize) {
    if frac <= 0.0 || n == 1 {
        ([(i, 1.0), (0, 0.0)], 1)
    } else {
        let ip = if periodic { (i + 1) % n } else { i + 1 };
        ([(i, 1.0 - frac), (ip, frac)], 2)
    }
}

struct ZSample {
    dz: C64,
    corners: [(usize, f64); 4],
    n: usize,
}

/// One probe circle: per-sample chart displacements with interpolation
/// corners, plus the corner weights premerged for the zero-slope cut.
struct ZProbe {
    samples: Vec<ZSample>,
    merged: Vec<(usize, f64)>,
    r_chart: f64,
}

fn build_probe(
    g: &DomainGrid,
    p: usize,
    j: usize,
    fam: &HolomorphicGraphFamily,
) -> Option<ZProbe> {
    let f = g.factor(j);
    let lj = g.local(p, j);
    let (i0, i1) = f.split(lj);
    let eps = probe_radius(f, i0, i1, fam.radius_cells)?;
    let w0 = f.w(lj);
    let z0 = f.z(lj);
    let s = fam.circle_samples;
    let mut locals: Vec<usize> = (0..g.m()).map(|jj| g.local(p, jj)).collect();
    let mut samples = Vec::with_capacity(s);
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for q in 0..s {
        let al = TAU * q as f64 / s as f64;
        let w = w0 + C64::new(eps * al.cos(), eps * al.sin());
        let (a0, f0) = f.locate0(w.re)?;
        let (a1, f1) = f.locate1(w.im)?;
        let z = match f.kind {
            FactorKind::LogPolar => w.exp(),
            FactorKind::Cartesian => w,
        };
        let (p0, n0) = axis_pairs(a0, f0, f.n0, false);
        let (p1, n1) = axis_pairs(a1, f1, f.n1, f.periodic1);
        let mut corners = [(0usize, 0.0f64); 4];
        let mut n = 0;
        for &(ia, wa) in &p0[..n0] {
            for &(ib, wb) in &p1[..n1] {
                locals[j] = f.local(ia, ib);
                let node = g.node_of_locals(&locals)?;
                corners[n] = (node, wa * wb);
                n += 1;
                match merged.iter_mut().find(|(m, _)| *m == node) {
                    Some((_, mw)) => *mw += wa * wb / s as f64,
                    None => merged.push((node, wa * wb / s as f64)),
                }
            }
        }
        samples.push(ZSample {
            dz: z - z0,
            corners,
            n,
        });
    }
    let r_chart = match f.kind {
        FactorKind::LogPolar => z0.norm() * eps,
        FactorKind::Cartesian => eps,
    };
    Some(ZProbe {
        samples,
        merged,
        r_chart,
    })
}

fn build_sites(g: &DomainGrid, fam: &HolomorphicGraphFamily) -> Vec<(usize, Vec<ZProbe>)> {
    g.interior_nodes()
        .iter()
        .filter_map(|&p| {
            let probes: Vec<ZProbe> =
                (0..g.m()).filter_map(|j| build_probe(g, p, j, fam)).collect();
            if probes.is_empty() {
                None
            } else {
                Some((p, probes))
            }
        })
        .collect()
}

struct XProbe {
    cells: [(usize, f64); 4],
    n: usize,
}

fn locate_x(sg: &SphereGrid, x: C64) -> Option<XProbe> {
    let t = x.norm_sqr().ln();
    if !t.is_finite() {
        return None;
    }
    let (it, ft) = axis_locate(-sg.t_max, sg.dt(), sg.n_t, t, false)?;
    let (ith, fth) = axis_locate(0.0, sg.dtheta(), sg.n_theta, x.arg(), true)?;
    let (tp, ntp) = axis_pairs(it, ft, sg.n_t, false);
    let (hp, nhp) = axis_pairs(ith, fth, sg.n_theta, true);
    let mut cells = [(0usize, 0.0f64); 4];
    let mut n = 0;
    for &(ia, wa) in &tp[..ntp] {
        for &(ib, wb) in &hp[..nhp] {
            cells[n] = (sg.idx(ia, ib), wa * wb);
            n += 1;
        }
    }
    Some(XProbe { cells, n })
}

struct CutCtx<'a> {
    sg: &'a SphereGrid,
    nx: usize,
    psi: &'a [f64],
    x0: &'a [C64],
    fam: &'a HolomorphicGraphFamily,
}

/// Smallest cut candidate at `(p, xi)` produced by one probe circle: the
/// zero slope reads the premerged corners at the pinned fiber node, nonzero
/// slopes displace the fiber point and interpolate both the field and the
/// fiber potential. Slopes whose circle leaves the fiber window are skipped.
fn best_cut(ctx: &CutCtx, vals: &[f64], probe: &ZProbe, xi: usize) -> f64 {
    let nx = ctx.nx;
    let mut best = probe
        .merged
        .iter()
        .map(|&(node, w)| w * vals[node * nx + xi])
        .sum::<f64>();
    if ctx.fam.slope_scales.is_empty() {
        return best;
    }
    let x0 = ctx.x0[xi];
    let psi0 = ctx.psi[xi];
    let s = probe.samples.len() as f64;
    for &sc in &ctx.fam.slope_scales {
        let mag = sc * x0.norm() / probe.r_chart;
        for q in 0..ctx.fam.directions {
            let a = C64::from_polar(mag, TAU * q as f64 / ctx.fam.directions as f64);
            let mut acc = 0.0;
            let mut ok = true;
            for smp in &probe.samples {
                let Some(xp) = locate_x(ctx.sg, x0 + a * smp.dz) else {
                    ok = false;
                    break;
                };
                let mut g = 0.0;
                for &(xc, wx) in &xp.cells[..xp.n] {
                    g += wx * ctx.psi[xc];
                }
                for &(node, wz) in &smp.corners[..smp.n] {
                    let mut cell = 0.0;
                    for &(xc, wx) in &xp.cells[..xp.n] {
                        cell += wx * vals[node * nx + xc];
                    }
                    g += wz * cell;
                }
                acc += g;
            }
            if ok {
                best = best.min(acc / s - psi0);
            }
        }
    }
    best
}

pub fn graph_sweep_envelope(
    v: &[Vec<f64>],
    family: &HolomorphicGraphFamily,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
    tol: f64,
    max_sweeps: usize,
) -> Result<PotentialField> {
    graph_sweep_envelope_with_report(v, family, dgrid, sgrid, tol, max_sweeps).map(|r| r.0)
}

pub fn graph_sweep_envelope_with_report(
    v: &[Vec<f64>],
    family: &HolomorphicGraphFamily,
    dgrid: &DomainGrid,
    sgrid: &SphereGrid,
    tol: f64,
    max_sweeps: usize,
) -> Result<(PotentialField, SweepReport)> {
    family.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("cut tolerance must be positive".into()));
    }
    if max_sweeps == 0 {
        return Err(Error::InvalidConfig("need at least one sweep".into()));
    }
    let mut field = harmonic_majorant(v, dgrid, sgrid)?;
    let nx = sgrid.n_nodes();
    let sites = build_sites(dgrid, family);
    if sites.is_empty() {
        return Err(Error::DomainShrink {
            needed: family.radius_cells.ceil() as usize,
            available: (0..dgrid.m())
                .map(|j| (dgrid.factor(j).n0 - 1) / 2)
                .min()
                .unwrap_or(0),
        });
    }
    let psi: Vec<f64> = (0..nx).map(|xi| sgrid.psi(xi)).collect();
    let x0: Vec<C64> = (0..nx).map(|xi| sgrid.x(xi)).collect();
    let ctx = CutCtx {
        sg: sgrid,
        nx,
        psi: &psi,
        x0: &x0,
        fam: family,
    };

    let mut colors: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (si, (p, _)) in sites.iter().enumerate() {
        let mut parity = 0usize;
        for j in 0..dgrid.m() {
            let (i0, i1) = dgrid.factor(j).split(dgrid.local(*p, j));
            parity += i0 + i1;
        }
        colors[parity % 2].push(si);
    }

    let vals = &mut field.values;
    let mut buf = vec![0.0; colors[0].len().max(colors[1].len()) * nx];
    let mut history = Vec::new();
    for sweep in 1..=max_sweeps {
        let mut dec = 0.0f64;
        for color in &colors {
            let snap = vals.clone();
            let pass = color
                .par_iter()
                .zip(buf.par_chunks_mut(nx))
                .map(|(&si, out)| {
                    let (p, probes) = &sites[si];
                    let mut d = 0.0f64;
                    for xi in 0..nx {
                        let cur = snap[p * nx + xi];
                        let mut best = cur;
                        for probe in probes {
                            best = best.min(best_cut(&ctx, &snap, probe, xi));
                        }
                        out[xi] = best;
                        d = d.max(cur - best);
                    }
                    d
                })
                .reduce(|| 0.0, f64::max);
            for (i, &si) in color.iter().enumerate() {
                let p = sites[si].0;
                vals[p * nx..(p + 1) * nx].copy_from_slice(&buf[i * nx..(i + 1) * nx]);
            }
            dec = dec.max(pass);
        }
        history.push(dec);
        if dec < tol {
            let report = SweepReport {
                sweeps: sweep,
                last_decrement: dec,
                decrement_history: history,
            };
            return Ok((field, report));
        }
    }
    let last = *history.last().unwrap();
    Err(Error::NonConvergence {
        sweeps: max_sweeps,
        residual: last,
        energy_monotone: true,
        residual_history: history,
    })
}

/// Worst probe margin of a field: the minimum over base nodes, factors,
/// fiber nodes and slopes of (circle mean minus center value) of
/// `psi(f) + u(., f(.))`. Nonnegative means every probed graph sees a
/// subharmonic restriction at the grid scale.
pub fn check_graph_subharmonicity(
    field: &PotentialField,
    family: &HolomorphicGraphFamily,
) -> Result<f64> {
    family.validate()?;
    field.check_shapes()?;
    let dgrid = &field.dgrid;
    let sgrid = &field.sgrid;
    let nx = sgrid.n_nodes();
    let sites = build_sites(dgrid, family);
    if sites.is_empty() {
        return Err(Error::DomainShrink {
            needed: family.radius_cells.ceil() as usize,
            available: (0..dgrid.m())
                .map(|j| (dgrid.factor(j).n0 - 1) / 2)
                .min()
                .unwrap_or(0),
        });
    }
    let psi: Vec<f64> = (0..nx).map(|xi| sgrid.psi(xi)).collect();
    let x0: Vec<C64> = (0..nx).map(|xi| sgrid.x(xi)).collect();
    let ctx = CutCtx {
        sg: sgrid,
        nx,
        psi: &psi,
        x0: &x0,
        fam: family,
    };
    let vals = &field.values;
    let worst = sites
        .par_iter()
        .map(|(p, probes)| {
            let mut m = f64::INFINITY;
            for xi in 0..nx {
                let cur = vals[p * nx + xi];
                for probe in probes {
                    m = m.min(best_cut(&ctx, vals, probe, xi) - cur);
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::toric_potential;

    fn rho_of(g: &DomainGrid, p: usize) -> f64 {
        g.factor(0).coord(g.local(p, 0)).0
    }

    fn rows_from(
        dg: &DomainGrid,
        nx: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Vec<Vec<f64>> {
        dg.boundary_nodes()
            .iter()
            .map(|&b| (0..nx).map(|xi| f(b, xi)).collect())
            .collect()
    }

    // Fiber data constant in the base is its own envelope: the zero-slope
    // cut reproduces it exactly (the field is flat in the base), and slope
    // cuts sit above it because the interpolated fiber profile is convex.
    #[test]
    fn constant_fiber_data_is_a_fixed_point_from_above() {
        let dg = DomainGrid::annulus(0.3, 33, 1).unwrap();
        let sg = SphereGrid::windowed(33, 1, 10.0).unwrap();
        let nx = sg.n_nodes();
        let vbar: Vec<f64> = (0..nx)
            .map(|xi| toric_potential(sg.t(xi), 0.35, 0.9))
            .collect();
        let v = rows_from(&dg, nx, |_, xi| vbar[xi]);
        let fam = HolomorphicGraphFamily::default();
        let (u, rep) =
            graph_sweep_envelope_with_report(&v, &fam, &dg, &sg, 1e-6, 20_000).unwrap();
        assert!(rep.sweeps < 20_000);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for p in 0..dg.n_nodes() {
            for xi in 0..nx {
                let d = u.at(p, xi) - vbar[xi];
                lo = lo.min(d);
                hi = hi.max(d.abs());
            }
        }
        assert!(lo > -1e-11, "envelope undercut constant data by {lo}");
        assert!(hi < 1e-3, "envelope is {hi} away from constant data");
    }

    // Fiber-independent 0/c ring data: the limit is linear in rho, which
    // the lattice interpolation reproduces exactly, so the iteration stops
    // right on it.
    #[test]
    fn ring_data_converges_to_the_log_profile() {
        let c = 1.3;
        let r0 = 0.3f64;
        let dg = DomainGrid::annulus(r0, 33, 1).unwrap();
        let sg = SphereGrid::windowed(33, 1, 10.0).unwrap();
        let nx = sg.n_nodes();
        let rho0 = r0.ln();
        let v = rows_from(&dg, nx, |b, _| c * rho_of(&dg, b) / rho0);
        let fam = HolomorphicGraphFamily::default();
        let (u, _) = graph_sweep_envelope_with_report(&v, &fam, &dg, &sg, 1e-6, 20_000).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for p in 0..dg.n_nodes() {
            let lim = c * rho_of(&dg, p) / rho0;
            for xi in 0..nx {
                let d = u.at(p, xi) - lim;
                lo = lo.min(d);
                hi = hi.max(d.abs());
            }
        }
        assert!(lo > -1e-11, "envelope fell below the harmonic profile by {lo}");
        assert!(hi < 1e-3, "distance to the harmonic profile {hi}");
    }

    #[test]
    fn data_order_and_negativity_pass_to_the_envelopes() {
        let dg = DomainGrid::annulus(0.4, 17, 1).unwrap();
        let sg = SphereGrid::windowed(17, 1, 6.0).unwrap();
        let nx = sg.n_nodes();
        let base = |xi: usize| -0.25 + 0.1 * (sg.t(xi) / 2.0).sin();
        let v1 = rows_from(&dg, nx, |_, xi| base(xi));
        let v2 = rows_from(&dg, nx, |b, xi| {
            base(xi) + 0.3 * (1.05 + (3.0 * rho_of(&dg, b) + 0.2).sin())
        });
        let fam = HolomorphicGraphFamily::default();
        let (u1, _) = graph_sweep_envelope_with_report(&v1, &fam, &dg, &sg, 1e-5, 20_000).unwrap();
        let (u2, _) = graph_sweep_envelope_with_report(&v2, &fam, &dg, &sg, 1e-5, 20_000).unwrap();
        let max1 = u1.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max1 < 0.0, "negative data produced a positive envelope: {max1}");
        let worst = u2
            .values
            .iter()
            .zip(&u1.values)
            .map(|(b, a)| b - a)
            .fold(f64::INFINITY, f64::min);
        assert!(worst > -1e-9, "envelope order broken by {worst}");
    }

    #[test]
    fn two_factor_base_stays_at_zero_data() {
        let dg = DomainGrid::bi_annulus(0.5, 7, 4).unwrap();
        let sg = SphereGrid::windowed(9, 1, 4.0).unwrap();
        let nx = sg.n_nodes();
        let v = rows_from(&dg, nx, |_, _| 0.0);
        let fam = HolomorphicGraphFamily::default();
        let (u, _) = graph_sweep_envelope_with_report(&v, &fam, &dg, &sg, 1e-4, 5_000).unwrap();
        let hi = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > -1e-11, "zero data dropped to {lo}");
        assert!(hi < 5e-3, "zero data left a residue of {hi}");
    }

    // Generic transport data: the cut iteration must land on the Legendre
    // interpolation, stay under its own starting majorant, keep the exact
    // boundary rows, and keep fiber slices convex in t at the grid scale.
    #[test]
    fn transport_data_cross_checks() {
        let dg = DomainGrid::annulus(0.3, 33, 1).unwrap();
        let sg = SphereGrid::windowed(33, 1, 10.0).unwrap();
        let nx = sg.n_nodes();
        let phi0: Vec<f64> = (0..nx).map(|xi| toric_potential(sg.t(xi), 0.4, 1.0)).collect();
        let phi1: Vec<f64> = (0..nx)
            .map(|xi| toric_potential(sg.t(xi), 0.3, -0.8))
            .collect();
        let oracle = crate::envelope::toric_geodesic_oracle(&phi0, &phi1, &dg, &sg).unwrap();
        let v: Vec<Vec<f64>> = dg
            .boundary_nodes()
            .iter()
            .map(|&b| oracle.values[b * nx..(b + 1) * nx].to_vec())
            .collect();

        let fam = HolomorphicGraphFamily::default();
        let (u, rep) =
            graph_sweep_envelope_with_report(&v, &fam, &dg, &sg, 1e-6, 30_000).unwrap();
        assert!(rep.sweeps < 30_000);

        let h = harmonic_majorant(&v, &dg, &sg).unwrap();
        let mut over = 0.0f64;
        let mut gap = 0.0f64;
        for i in 0..u.values.len() {
            over = over.max(u.values[i] - h.values[i]);
            gap = gap.max((u.values[i] - oracle.values[i]).abs());
        }
        assert!(over <= 1e-12, "envelope exceeded its majorant by {over}");
        assert!(gap < 2e-2, "distance to the Legendre reference {gap}");

        for (row, &b) in v.iter().zip(&dg.boundary_nodes()) {
            for xi in 0..nx {
                assert_eq!(u.at(b, xi), row[xi], "boundary row drifted");
            }
        }

        // discrete fiber convexity of psi + u along t on every base ring
        let dt = sg.dt();
        let mut fiber_margin = f64::INFINITY;
        for p in 0..dg.n_nodes() {
            for it in 1..sg.n_t - 1 {
                let g = |i: usize| sg.psi(i) + u.at(p, i);
                let dd = (g(it - 1) - 2.0 * g(it) + g(it + 1)) / (dt * dt);
                fiber_margin = fiber_margin.min(dd);
            }
        }
        assert!(fiber_margin > -5e-2, "fiber slice convexity margin {fiber_margin}");

        let radial = HolomorphicGraphFamily::radial_only();
        let (ur, _) =
            graph_sweep_envelope_with_report(&v, &radial, &dg, &sg, 1e-6, 30_000).unwrap();
        let mut below = f64::INFINITY;
        for i in 0..u.values.len() {
            below = below.min(ur.values[i] - u.values[i]);
        }
        assert!(below > -1e-5, "larger family raised the envelope by {below}");
    }

    // With mild data the radial cuts already saturate the envelope; the
    // sloped graphs start to bite once the endpoint potentials push mass a
    // few units along t in opposite directions. On such a pair the full
    // family must cut strictly below the radial one while staying above the
    // Legendre interpolation, which it can only approach from above.
    #[test]
    fn sloped_graphs_bind_on_strong_transport() {
        let dg = DomainGrid::annulus(0.3, 21, 1).unwrap();
        let sg = SphereGrid::windowed(21, 1, 10.0).unwrap();
        let nx = sg.n_nodes();
        let phi0: Vec<f64> = (0..nx).map(|xi| toric_potential(sg.t(xi), 0.9, 3.0)).collect();
        let phi1: Vec<f64> = (0..nx)
            .map(|xi| toric_potential(sg.t(xi), 0.9, -3.0))
            .collect();
        let oracle = crate::envelope::toric_geodesic_oracle(&phi0, &phi1, &dg, &sg).unwrap();
        let v: Vec<Vec<f64>> = dg
            .boundary_nodes()
            .iter()
            .map(|&b| oracle.values[b * nx..(b + 1) * nx].to_vec())
            .collect();

        let fam = HolomorphicGraphFamily::default();
        let (u, _) = graph_sweep_envelope_with_report(&v, &fam, &dg, &sg, 1e-6, 30_000).unwrap();
        let radial = HolomorphicGraphFamily::radial_only();
        let (ur, _) =
            graph_sweep_envelope_with_report(&v, &radial, &dg, &sg, 1e-6, 30_000).unwrap();

        let mut under = 0.0f64;
        let mut below = f64::INFINITY;
        let mut benefit = 0.0f64;
        for i in 0..u.values.len() {
            under = under.min(u.values[i] - oracle.values[i]);
            below = below.min(ur.values[i] - u.values[i]);
            benefit = benefit.max(ur.values[i] - u.values[i]);
        }
        assert!(under > -1e-9, "envelope dipped below the reference by {under}");
        assert!(below > -1e-5, "larger family raised the envelope by {below}");
        assert!(benefit > 1e-2, "slope probes changed nothing: {benefit}");
    }

    // Known margins: the composite of the fiber potential with itself
    // cancels exactly; a harmonic base field probes to zero up to the
    // second-order interpolation bias; a concave radial field reports the
    // mean-value defect of the probe circle.
    #[test]
    fn probe_margins_match_known_fields() {
        let fam = HolomorphicGraphFamily::default();

        let worst_at = |n: usize, f: &dyn Fn(&DomainGrid, &SphereGrid, usize, usize) -> f64| {
            let dg = DomainGrid::annulus(0.3, n, 1).unwrap();
            let sg = SphereGrid::windowed(17, 1, 6.0).unwrap();
            let field =
                PotentialField::from_fn(dg.clone(), sg.clone(), |p, xi| f(&dg, &sg, p, xi));
            check_graph_subharmonicity(&field, &fam).unwrap()
        };

        let cancel = worst_at(17, &|_, sg, _, xi| -sg.psi(xi));
        assert!(cancel.abs() < 1e-12, "composite cancellation margin {cancel}");

        let harm17 = worst_at(17, &|dg, _, p, _| dg.z(p)[0].re);
        let harm33 = worst_at(33, &|dg, _, p, _| dg.z(p)[0].re);
        assert!(harm17.abs() < 3e-3, "harmonic margin at 17 rings {harm17}");
        assert!(harm33.abs() < 1e-3, "harmonic margin at 33 rings {harm33}");

        let dg = DomainGrid::annulus(0.3, 17, 1).unwrap();
        let sg = SphereGrid::windowed(17, 1, 6.0).unwrap();
        let conc = {
            let field =
                PotentialField::from_fn(dg.clone(), sg.clone(), |p, _| -dg.z(p)[0].norm_sqr());
            check_graph_subharmonicity(&field, &fam).unwrap()
        };
        let mut expected = 0.0f64;
        for &p in &dg.interior_nodes() {
            let f = dg.factor(0);
            let (i0, i1) = f.split(dg.local(p, 0));
            if let Some(eps) = probe_radius(f, i0, i1, fam.radius_cells) {
                expected = expected.max(dg.z(p)[0].norm_sqr() * eps * eps);
            }
        }
        let ratio = -conc / expected;
        assert!(
            (0.6..1.6).contains(&ratio),
            "concave margin {conc} vs circle defect {expected}"
        );
    }

    #[test]
    fn unreachable_tolerance_reports_the_decrements() {
        let dg = DomainGrid::annulus(0.4, 17, 1).unwrap();
        let sg = SphereGrid::windowed(17, 1, 6.0).unwrap();
        let nx = sg.n_nodes();
        let v = rows_from(&dg, nx, |b, xi| {
            0.4 * (rho_of(&dg, b) * 2.0).sin() + 0.1 * (sg.t(xi) / 3.0).cos()
        });
        let fam = HolomorphicGraphFamily::default();
        match graph_sweep_envelope(&v, &fam, &dg, &sg, 1e-15, 3) {
            Err(Error::NonConvergence {
                sweeps,
                residual,
                residual_history,
                ..
            }) => {
                assert_eq!(sweeps, 3);
                assert_eq!(residual_history.len(), 3);
                assert!(residual > 0.0);
            }
            Err(e) => panic!("unexpected error {e:?}"),
            Ok(_) => panic!("expected a non-convergence report"),
        }
    }
}
