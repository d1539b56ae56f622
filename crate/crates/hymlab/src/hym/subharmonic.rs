//! Sub-mean-value probe for log-norms of holomorphic sections.
//!
//! For a solved metric field the function log ||f(z)||_H should dominate its
//! own circle averages in every complex factor direction. The probe walks all
//! interior nodes with enough clearance, averages over small circles in the
//! working coordinate (where the annulus factors are conformally flat), and
//! returns the worst center-minus-average margin; nonnegative up to roundoff
//! means no violation detected.
//!
//! Off-lattice field values use log-linear interpolation of the eigenvalues
//! when the field is diagonal (exact for the separable closed-form solutions)
//! and entrywise bilinear interpolation otherwise.

use super::HermitianMetricField;
use crate::geometry::FactorKind;
use crate::linalg::{C64, CVec};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CIRCLE_SAMPLES: usize = 16;

/// Polynomial map from the base domain into coefficient space:
/// sum of (monomial multidegree, vector coefficient) terms.
#[derive(Clone, Debug)]
pub struct SectionSample {
    pub terms: Vec<(Vec<usize>, CVec)>,
}

impl SectionSample {
    pub fn eval(&self, zs: &[C64]) -> CVec {
        let dim = self.terms[0].1.len();
        let mut out = CVec::zeros(dim);
        for (degs, c) in &self.terms {
            let mut mono = C64::new(1.0, 0.0);
            for (j, &d) in degs.iter().enumerate() {
                mono *= zs[j].powu(d as u32);
            }
            out += c * mono;
        }
        out
    }
}

/// Seeded sections with uniform coefficients in the complex unit box, one
/// term per multidegree up to `max_degree` in each factor.
pub fn random_sections(
    dim: usize,
    m: usize,
    count: usize,
    max_degree: usize,
    seed: u64,
) -> Vec<SectionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degs = Vec::new();
    let per = max_degree + 1;
    for flat in 0..per.pow(m as u32) {
        let mut d = vec![0usize; m];
        let mut rem = flat;
        for slot in (0..m).rev() {
            d[slot] = rem % per;
            rem /= per;
        }
        degs.push(d);
    }
    (0..count)
        .map(|_| SectionSample {
            terms: degs
                .iter()
                .map(|d| {
                    let c = CVec::from_fn(dim, |_, _| {
                        C64::new(
                            rng.random::<f64>() * 2.0 - 1.0,
                            rng.random::<f64>() * 2.0 - 1.0,
                        )
                    });
                    (d.clone(), c)
                })
                .collect(),
        })
        .collect()
}

struct Probe {
    /// (corner node, bilinear weight) for each circle sample
    samples: Vec<[(usize, f64); 4]>,
    /// factor-j chart coordinate of each circle sample
    z_disp: Vec<C64>,
}

/// Worst margin (circle average of log ||f||_H minus the center value) over
/// all sections, probe directions, and interior centers with clearance
/// `probe_radius` in the working coordinate.
pub fn check_subharmonic_norm(
    field: &HermitianMetricField,
    sections: &[SectionSample],
    probe_radius: f64,
) -> Result<f64> {
    if sections.is_empty() {
        return Err(Error::InvalidConfig("no sections to probe".into()));
    }
    if !(probe_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "probe radius must be positive, got {probe_radius}"
        )));
    }
    let grid = &field.grid;
    let diag_mode = field.is_diagonal();
    let dim = field.dim();
    for s in sections {
        for (degs, c) in &s.terms {
            if degs.len() != grid.m() || c.len() != dim {
                return Err(Error::Mismatch(
                    "section terms do not match the grid/field shape".into(),
                ));
            }
        }
    }

    let logq = |nodes: &[(usize, f64); 4], v: &CVec| -> f64 {
        let q = if diag_mode {
            (0..dim)
                .map(|c| {
                    let u: f64 = nodes
                        .iter()
                        .map(|&(n, w)| w * field.values[n][(c, c)].re.ln())
                        .sum();
                    v[c].norm_sqr() * u.exp()
                })
                .sum::<f64>()
        } else {
            let mut q = 0.0;
            for &(n, w) in nodes {
                if w == 0.0 {
                    continue;
                }
                let h = &field.values[n];
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..dim {
                    for c in 0..dim {
                        acc += v[r].conj() * h[(r, c)] * v[c];
                    }
                }
                q += w * acc.re;
            }
            q
        };
        q.max(1e-300).ln()
    };

    let mut worst = f64::INFINITY;
    let mut centers_used = 0usize;
    for j in 0..grid.m() {
        let f = grid.factor(j);
        for p in grid.interior_nodes() {
            let (a0, a1) = f.coord(grid.local(p, j));
            let a0_max = f.a0_min + (f.n0 - 1) as f64 * f.d0;
            if a0 - probe_radius < f.a0_min - 1e-12
                || a0 + probe_radius > a0_max + 1e-12
            {
                continue;
            }
            if !f.periodic1 {
                let a1_max = f.a1_min + (f.n1 - 1) as f64 * f.d1;
                if a1 - probe_radius < f.a1_min - 1e-12
                    || a1 + probe_radius > a1_max + 1e-12
                {
                    continue;
                }
            }
            let probe = match build_probe(field, j, p, a0, a1, probe_radius) {
                Some(pr) => pr,
                None => continue,
            };
            centers_used += 1;
            let zs_center = grid.z(p);
            let center_nodes = [(p, 1.0), (p, 0.0), (p, 0.0), (p, 0.0)];
            for sec in sections {
                let v_center = sec.eval(&zs_center);
                let center = logq(&center_nodes, &v_center);
                let mut mean = 0.0;
                for (nodes, zd) in probe.samples.iter().zip(&probe.z_disp) {
                    let mut zs = zs_center.clone();
                    zs[j] = *zd;
                    let v = sec.eval(&zs);
                    mean += logq(nodes, &v);
                }
                mean /= CIRCLE_SAMPLES as f64;
                worst = worst.min(mean - center);
            }
        }
    }
    if centers_used == 0 {
        let f = grid.factor(0);
        return Err(Error::DomainShrink {
            needed: (probe_radius / f.d0).ceil() as usize,
            available: (f.n0 - 1) / 2,
        });
    }
    Ok(worst)
}

fn build_probe(
    field: &HermitianMetricField,
    j: usize,
    p: usize,
    a0: f64,
    a1: f64,
    radius: f64,
) -> Option<Probe> {
    let grid = &field.grid;
    let f = grid.factor(j);
    let mut samples = Vec::with_capacity(CIRCLE_SAMPLES);
    let mut z_disp = Vec::with_capacity(CIRCLE_SAMPLES);
    for s in 0..CIRCLE_SAMPLES {
        let ang = std::f64::consts::TAU * s as f64 / CIRCLE_SAMPLES as f64;
        let aa = a0 + radius * ang.cos();
        let bb = a1 + radius * ang.sin();
        let (i0, s0) = f.locate0(aa)?;
        let (i1, s1) = f.locate1(bb)?;
        let mut corners = [(0usize, 0.0f64); 4];
        for (slot, (d0, d1)) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)]
            .into_iter()
            .enumerate()
        {
            let l0 = i0 + d0;
            let l1 = if f.periodic1 { (i1 + d1) % f.n1 } else { i1 + d1 };
            let w = (if d0 == 0 { 1.0 - s0 } else { s0 })
                * (if d1 == 0 { 1.0 - s1 } else { s1 });
            let mut locals: Vec<usize> =
                (0..grid.m()).map(|jj| grid.local(p, jj)).collect();
            locals[j] = f.local(l0.min(f.n0 - 1), l1);
            let node = grid.node_of_locals(&locals)?;
            corners[slot] = (node, w);
        }
        samples.push(corners);
        z_disp.push(match f.kind {
            FactorKind::LogPolar => C64::new(aa, bb).exp(),
            FactorKind::Cartesian => C64::new(aa, bb),
        });
    }
    Some(Probe { samples, z_disp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainGrid;
    use crate::hym::{solve_hym, BoundaryMetrics, HermitianMetricField};
    use crate::linalg::CMat;
    use crate::quantization::BasisTag;

    fn dmat(v: &[f64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            v.len(),
            v.iter().map(|&a| C64::new(a, 0.0)),
        ))
    }

    #[test]
    fn flat_metric_has_nonnegative_margins() {
        let grid = DomainGrid::annulus(0.05, 64, 1).unwrap();
        let dr = grid.factor(0).d0;
        let field =
            HermitianMetricField::constant(2, grid, CMat::identity(3, 3), BasisTag::Dual);
        let sections = random_sections(3, 1, 50, 2, 7);
        let worst = check_subharmonic_norm(&field, &sections, 2.0 * dr).unwrap();
        assert!(worst >= -1e-9, "worst margin {worst}");
    }

    #[test]
    fn solved_diagonal_field_has_nonnegative_margins() {
        let grid = DomainGrid::annulus(0.05, 64, 1).unwrap();
        let dr = grid.factor(0).d0;
        let mats: Vec<CMat> = grid
            .boundary_nodes()
            .iter()
            .map(|&p| {
                let (i0, _) = grid.factor(0).split(grid.local(p, 0));
                if i0 == 0 {
                    dmat(&[1.7, 0.5, 1.1])
                } else {
                    dmat(&[0.8, 1.2, 1.0])
                }
            })
            .collect();
        let b = BoundaryMetrics::new(2, &grid, mats).unwrap();
        let field = solve_hym(&b, &grid, 1e-10, 2000).unwrap();
        let sections = random_sections(3, 1, 60, 2, 11);
        let worst = check_subharmonic_norm(&field, &sections, 2.0 * dr).unwrap();
        assert!(worst >= -1e-9, "worst margin {worst}");
    }

    #[test]
    fn concave_radial_profile_is_flagged() {
        let grid = DomainGrid::annulus(0.05, 64, 1).unwrap();
        let dr = grid.factor(0).d0;
        let mut field =
            HermitianMetricField::constant(0, grid, CMat::identity(1, 1), BasisTag::Dual);
        for p in 0..field.grid.n_nodes() {
            let rho = field.grid.factor(0).coord(field.grid.local(p, 0)).0;
            field.values[p] = dmat(&[(-rho * rho).exp()]);
        }
        let sections = vec![SectionSample {
            terms: vec![(vec![0], CVec::from_vec(vec![C64::new(1.0, 0.0)]))],
        }];
        let r = 2.0 * dr;
        let worst = check_subharmonic_norm(&field, &sections, r).unwrap();
        // circle mean minus center of -rho^2 is about -r^2/2, minus the
        // interpolation bias of the concave profile
        assert!(worst < -3e-3 && worst > -7e-3, "worst margin {worst}");
    }

    #[test]
    fn product_domain_probe_runs_both_factors() {
        let grid = DomainGrid::bi_annulus(0.3, 5, 4).unwrap();
        let field =
            HermitianMetricField::constant(1, grid, CMat::identity(2, 2), BasisTag::Dual);
        let sections = random_sections(2, 2, 10, 1, 3);
        let worst = check_subharmonic_norm(&field, &sections, 0.25).unwrap();
        assert!(worst >= -1e-9, "worst margin {worst}");
    }

    #[test]
    fn oversized_probe_radius_is_rejected() {
        let grid = DomainGrid::annulus(0.5, 5, 1).unwrap();
        let field =
            HermitianMetricField::constant(0, grid, CMat::identity(1, 1), BasisTag::Dual);
        let sections = random_sections(1, 1, 3, 1, 1);
        assert!(matches!(
            check_subharmonic_norm(&field, &sections, 0.5),
            Err(Error::DomainShrink { .. })
        ));
    }
}
