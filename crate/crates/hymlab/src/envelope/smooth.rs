//! Smooth replacements for pointwise maxima and rough potentials.
//!
//! `regularized_max` averages the componentwise maximum against a product of
//! compactly supported bump kernels, one width per argument. The result is a
//! smooth, convex, monotone, symmetric function that agrees with the plain
//! maximum as soon as the arguments are separated by the kernel widths.
//!
//! `mollify_field` convolves a potential with normalized radial bumps, one
//! pass per base factor and one over the fiber window, keeping values near
//! non-periodic edges untouched.

use crate::envelope::PotentialField;
use crate::{Error, Result};
use std::sync::OnceLock;

const CDF_INTERVALS: usize = 16_384;
const OUTER_INTERVALS: usize = 2_048;

fn bump_raw(s: f64) -> f64 {
    if s * s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Unnormalized cumulative of the bump on a uniform lattice over [-1, 1].
struct KernelTable {
    mass: f64,
    cdf: Vec<f64>,
}

static TABLE: OnceLock<KernelTable> = OnceLock::new();

fn table() -> &'static KernelTable {
    TABLE.get_or_init(|| {
        // a 5-point Gauss rule per cell keeps every partial sum accurate,
        // not only the ones at even indices
        const GX: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        const GW: [f64; 5] = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        let h = 2.0 / CDF_INTERVALS as f64;
        let mut cdf = Vec::with_capacity(CDF_INTERVALS + 1);
        let mut acc = 0.0;
        cdf.push(acc);
        for i in 0..CDF_INTERVALS {
            let mid = -1.0 + (i as f64 + 0.5) * h;
            let half = 0.5 * h;
            let mut cell = 0.0;
            for q in 0..5 {
                cell += GW[q] * bump_raw(mid + half * GX[q]);
            }
            acc += cell * half;
            cdf.push(acc);
        }
        KernelTable { mass: acc, cdf }
    })
}

/// Cumulative of the normalized bump, cubic Hermite between table nodes with
/// the exact density as slope.
fn bump_cdf(s: f64) -> f64 {
    let tab = table();
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let h = 2.0 / CDF_INTERVALS as f64;
    let cell = (((s + 1.0) / h) as usize).min(CDF_INTERVALS - 1);
    let s0 = -1.0 + cell as f64 * h;
    let x = (s - s0) / h;
    let (x2, x3) = (x * x, x * x * x);
    let v = tab.cdf[cell] * (2.0 * x3 - 3.0 * x2 + 1.0)
        + tab.cdf[cell + 1] * (-2.0 * x3 + 3.0 * x2)
        + h * (bump_raw(s0) * (x3 - 2.0 * x2 + x) + bump_raw(s0 + h) * (x3 - x2));
    v / tab.mass
}

pub fn regularized_max(widths: &[f64], t: &[f64]) -> Result<f64> {
    let p = t.len();
    if p == 0 {
        return Err(Error::InvalidConfig("regularized max of nothing".into()));
    }
    if widths.len() != p {
        return Err(Error::InvalidConfig(format!(
            "{} widths for {p} arguments",
            widths.len()
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("arguments must be finite".into()));
    }
    if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig(
            "kernel widths must be positive and finite".into(),
        ));
    }
    if p == 1 {
        // the kernel is even, so smoothing the identity changes nothing
        return Ok(t[0]);
    }
    let mass = table().mass;
    let lo = (0..p).map(|j| t[j] - widths[j]).fold(f64::INFINITY, f64::min);
    let hi = (0..p)
        .map(|j| t[j] + widths[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let h = (hi - lo) / OUTER_INTERVALS as f64;
    // order-statistics form: the integrand vanishes to all orders at both
    // hull ends, so the trapezoid sum converges faster than any power of h
    let mut sum = 0.0;
    for i in 0..=OUTER_INTERVALS {
        let y = if i == OUTER_INTERVALS {
            hi
        } else {
            lo + i as f64 * h
        };
        let mut g = 0.0;
        for j in 0..p {
            let mut term = bump_raw((y - t[j]) / widths[j]) / (widths[j] * mass);
            if term == 0.0 {
                continue;
            }
            for l in 0..p {
                if l != j {
                    term *= bump_cdf((y - t[l]) / widths[l]);
                }
            }
            g += term;
        }
        let w = if i == 0 || i == OUTER_INTERVALS { 0.5 } else { 1.0 };
        sum += w * y * g;
    }
    Ok(sum * h)
}

/// Integer offsets within a working-coordinate radius, bump-weighted and
/// normalized to unit mass. Collapsed axes contribute only the zero offset.
struct LatticeKernel {
    offs: Vec<(i64, i64, f64)>,
    half0: usize,
    half1: usize,
}

fn lattice_kernel(delta: f64, d0: f64, n0: usize, d1: f64, n1: usize) -> LatticeKernel {
    let reach = |d: f64, n: usize| -> i64 {
        if n <= 1 {
            0
        } else {
            ((delta / d).ceil() as i64 - 1).clamp(0, n as i64 - 1)
        }
    };
    let a0 = reach(d0, n0);
    let a1 = reach(d1, n1);
    let mut offs = Vec::new();
    let mut norm = 0.0;
    for a in -a0..=a0 {
        for b in -a1..=a1 {
            let r2 = (a as f64 * d0).powi(2) + (b as f64 * d1).powi(2);
            let s2 = r2 / (delta * delta);
            if s2 < 1.0 {
                let w = (-1.0 / (1.0 - s2)).exp();
                offs.push((a, b, w));
                norm += w;
            }
        }
    }
    for o in &mut offs {
        o.2 /= norm;
    }
    LatticeKernel {
        offs,
        half0: a0 as usize,
        half1: a1 as usize,
    }
}

pub fn mollify_field(u: &PotentialField, delta1: f64, delta2: f64) -> Result<PotentialField> {
    u.check_shapes()?;
    for (name, d) in [("base width", delta1), ("fiber width", delta2)] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{name} must be positive and finite"
            )));
        }
    }
    let dg = &u.dgrid;
    let sg = &u.sgrid;
    let nx = sg.n_nodes();
    let n_nodes = dg.n_nodes();
    let mut vals = u.values.clone();

    for j in 0..dg.m() {
        let f = dg.factor(j);
        let lk = lattice_kernel(delta1, f.d0, f.n0, f.d1, f.n1);
        if f.n0 > 1 && f.n0 <= 2 * lk.half0 {
            return Err(Error::DomainShrink {
                needed: lk.half0,
                available: (f.n0 - 1) / 2,
            });
        }
        if !f.periodic1 && f.n1 > 1 && f.n1 <= 2 * lk.half1 {
            return Err(Error::DomainShrink {
                needed: lk.half1,
                available: (f.n1 - 1) / 2,
            });
        }
        let src = vals.clone();
        let mut locals: Vec<usize> = Vec::new();
        let mut nodes: Vec<(usize, f64)> = Vec::with_capacity(lk.offs.len());
        for p in 0..n_nodes {
            locals.clear();
            locals.extend((0..dg.m()).map(|q| dg.local(p, q)));
            let (i0, i1) = f.split(locals[j]);
            nodes.clear();
            let mut admissible = true;
            for &(a, b, w) in &lk.offs {
                let j0 = i0 as i64 + a;
                if j0 < 0 || j0 >= f.n0 as i64 {
                    admissible = false;
                    break;
                }
                let j1 = if f.periodic1 {
                    (i1 as i64 + b).rem_euclid(f.n1 as i64)
                } else {
                    let raw = i1 as i64 + b;
                    if raw < 0 || raw >= f.n1 as i64 {
                        admissible = false;
                        break;
                    }
                    raw
                };
                locals[j] = f.local(j0 as usize, j1 as usize);
                match dg.node_of_locals(&locals) {
                    Some(q) => nodes.push((q, w)),
                    None => {
                        admissible = false;
                        break;
                    }
                }
            }
            if !admissible {
                continue;
            }
            for xi in 0..nx {
                let mut acc = 0.0;
                for &(q, w) in &nodes {
                    acc += w * src[q * nx + xi];
                }
                vals[p * nx + xi] = acc;
            }
        }
    }

    let lk = lattice_kernel(delta2, sg.dt(), sg.n_t, sg.dtheta(), sg.n_theta);
    if sg.n_t <= 2 * lk.half0 {
        return Err(Error::DomainShrink {
            needed: lk.half0,
            available: (sg.n_t - 1) / 2,
        });
    }
    let src = vals.clone();
    let nth = sg.n_theta as i64;
    for p in 0..n_nodes {
        let row = p * nx;
        for it in lk.half0..sg.n_t - lk.half0 {
            for ith in 0..sg.n_theta {
                let mut acc = 0.0;
                for &(a, b, w) in &lk.offs {
                    let jt = (it as i64 + a) as usize;
                    let jth = (ith as i64 + b).rem_euclid(nth) as usize;
                    acc += w * src[row + sg.idx(jt, jth)];
                }
                vals[row + sg.idx(it, ith)] = acc;
            }
        }
    }

    let mut boundary_values = Vec::new();
    for &b in &dg.boundary_nodes() {
        boundary_values.extend_from_slice(&vals[b * nx..(b + 1) * nx]);
    }
    Ok(PotentialField {
        dgrid: dg.clone(),
        sgrid: sg.clone(),
        values: vals,
        boundary_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{check_graph_subharmonicity, HolomorphicGraphFamily};
    use crate::geometry::{DomainGrid, SphereGrid};

    #[test]
    fn separated_and_single_inputs_reduce_to_the_plain_max() {
        assert_eq!(regularized_max(&[2.0], &[0.7]).unwrap(), 0.7);
        let m = regularized_max(&[0.5, 0.5], &[1.0, -1.5]).unwrap();
        assert!((m - 1.0).abs() < 1e-12, "separated max off by {}", m - 1.0);
        let m4 = regularized_max(&[0.3; 4], &[2.0, -1.0, 0.0, 1.0]).unwrap();
        assert!((m4 - 2.0).abs() < 1e-12, "separated 4-way max off by {}", m4 - 2.0);
    }

    #[test]
    fn translation_symmetry_and_bounds() {
        let t = [0.3, -0.2, 0.1];
        let w = [0.7, 1.1, 0.4];
        let m = regularized_max(&w, &t).unwrap();

        let shifted: Vec<f64> = t.iter().map(|v| v + 10.3).collect();
        let ms = regularized_max(&w, &shifted).unwrap();
        assert!((ms - m - 10.3).abs() < 5e-13);

        let tp = [t[1], t[2], t[0]];
        let wp = [w[1], w[2], w[0]];
        let mp = regularized_max(&wp, &tp).unwrap();
        assert!((mp - m).abs() < 1e-13);

        let top = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let hull = (0..3).map(|j| t[j] + w[j]).fold(f64::NEG_INFINITY, f64::max);
        assert!(m >= top - 1e-13 && m <= hull + 1e-13);
    }

    #[test]
    fn monotone_and_midpoint_convex() {
        let w = [0.8, 0.8];
        let base = regularized_max(&w, &[0.0, 0.0]).unwrap();
        let up = regularized_max(&w, &[0.05, 0.0]).unwrap();
        assert!(up > base + 1e-4, "raising one argument only gained {}", up - base);

        let a = [0.3, -0.2];
        let b = [-0.1, 0.4];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let lhs = regularized_max(&w, &mid).unwrap();
        let rhs = 0.5 * (regularized_max(&w, &a).unwrap() + regularized_max(&w, &b).unwrap());
        assert!(lhs <= rhs + 1e-12, "midpoint violates convexity by {}", lhs - rhs);
    }

    #[test]
    fn out_of_range_configs_are_rejected() {
        assert!(matches!(
            regularized_max(&[], &[]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            regularized_max(&[1.0], &[0.0, 0.0]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            regularized_max(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            regularized_max(&[1.0, -2.0], &[0.0, 0.0]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            regularized_max(&[1.0, 1.0], &[f64::NAN, 0.0]),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// Mean of the larger of two independent unit-bump draws, through the
    /// conditional-expectation split `E f(a)(a C(a) + D(a))` with `C` the
    /// lower cumulative and `D` the upper first-moment tail, all summed as
    /// Simpson partial sums on one shared lattice.
    fn pairwise_center_reference() -> f64 {
        let m = 16_384usize;
        let fine = 2 * m;
        let h = 2.0 / fine as f64;
        let s_of = |i: usize| -1.0 + i as f64 * h;
        let th: Vec<f64> = (0..=fine).map(|i| bump_raw(s_of(i))).collect();
        let mut c = vec![0.0; m + 1];
        for j in 0..m {
            c[j + 1] = c[j] + h / 3.0 * (th[2 * j] + 4.0 * th[2 * j + 1] + th[2 * j + 2]);
        }
        let z = c[m];
        let mut d = vec![0.0; m + 1];
        for j in (0..m).rev() {
            d[j] = d[j + 1]
                + h / 3.0
                    * (s_of(2 * j) * th[2 * j]
                        + 4.0 * s_of(2 * j + 1) * th[2 * j + 1]
                        + s_of(2 * j + 2) * th[2 * j + 2]);
        }
        let mut acc = 0.0;
        for j in 0..=m {
            let w = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * th[2 * j] / z * (s_of(2 * j) * c[j] / z + d[j] / z);
        }
        acc * 2.0 * h / 3.0
    }

    #[test]
    fn center_value_matches_an_independent_reduction() {
        let reference = pairwise_center_reference();
        assert!(reference > 0.1, "two-draw mean maximum should be positive");
        let m = regularized_max(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(
            (m - reference).abs() < 1e-10,
            "quadratures disagree: {m} vs {reference}"
        );
    }

    #[test]
    fn constants_pass_through_and_narrow_windows_are_rejected() {
        let dg = DomainGrid::annulus(0.5, 7, 1).unwrap();
        let sg = SphereGrid::windowed(9, 1, 4.0).unwrap();
        let u = PotentialField::from_fn(dg.clone(), sg.clone(), |_, _| 1.25);
        let d0 = dg.factor(0).d0;
        let out = mollify_field(&u, 1.4 * d0, 1.3 * sg.dt()).unwrap();
        for v in &out.values {
            assert!((v - 1.25).abs() < 1e-13);
        }
        assert!(matches!(
            mollify_field(&u, 10.0 * d0, 1.3 * sg.dt()),
            Err(Error::DomainShrink { .. })
        ));
        assert!(matches!(
            mollify_field(&u, -0.1, 1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn affine_fields_survive_in_flat_charts() {
        let dg = DomainGrid::disc(17).unwrap();
        let sg = SphereGrid::windowed(9, 1, 4.0).unwrap();
        let u = PotentialField::from_fn(dg.clone(), sg.clone(), |p, _| dg.z(p)[0].re);
        let f = dg.factor(0);
        let out = mollify_field(&u, 2.5 * f.d0, 1.1 * sg.dt()).unwrap();
        let c = f.n0 / 2;
        for i0 in c - 2..=c + 2 {
            for i1 in c - 2..=c + 2 {
                let p = dg.node_of_locals(&[f.local(i0, i1)]).unwrap();
                for xi in 0..sg.n_nodes() {
                    assert!(
                        (out.at(p, xi) - u.at(p, xi)).abs() < 1e-12,
                        "affine value moved at ({i0}, {i1})"
                    );
                }
            }
        }
    }

    #[test]
    fn smoothing_cannot_break_the_probe_margins() {
        let dg = DomainGrid::annulus(0.3, 33, 1).unwrap();
        let sg = SphereGrid::windowed(17, 1, 6.0).unwrap();
        let f = dg.factor(0);
        let bump01 = |s: f64| bump_raw(s) * std::f64::consts::E;
        let u = PotentialField::from_fn(dg.clone(), sg.clone(), |p, xi| {
            let rho = f.coord(dg.local(p, 0)).0;
            0.4 * bump01((rho + 0.602) / 0.32) * bump01(sg.t(xi) / 3.5)
        });
        let fam = HolomorphicGraphFamily::radial_only();
        let before = check_graph_subharmonicity(&u, &fam).unwrap();
        let sm = mollify_field(&u, 3.0 * f.d0, 1.6 * sg.dt()).unwrap();
        let moved = u
            .values
            .iter()
            .zip(&sm.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved > 1e-4, "smoothing did not move the field");
        let after = check_graph_subharmonicity(&sm, &fam).unwrap();
        assert!(
            after >= before - 1e-12,
            "margin dropped from {before} to {after}"
        );
    }
}
