//! Inner products on the degree-k monomial sections and the induced
//! potentials back on the sphere.
//!
//! For a weight potential phi on top of the reference psi, the Gram matrix of
//! e_j = x^j is assembled so that a section with column coefficient vector c
//! has squared norm c* G c. The dual-side quadratic form is then the
//! conjugate inverse matrix, and the induced potential at a point x is the
//! largest value of |s(x)|^2 e^{-k psi} over sections of unit norm, taken
//! through log(k-th root). Everything is evaluated in log coordinates with
//! per-degree damping so k up to 32 stays inside f64 range.

use crate::geometry::SphereGrid;
use crate::linalg::{herm_part, C64, CMat, CVec, HermEigen};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisTag {
    /// Inner product on sections; c* G c is a squared section norm.
    Primal,
    /// Inner product on the dual space of coefficient functionals.
    Dual,
}

/// Positive Hermitian (k+1) x (k+1) matrix with the side of the pairing it
/// lives on.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub k: usize,
    pub mat: CMat,
    pub tag: BasisTag,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.k + 1
    }
}

const COND_LIMIT: f64 = 1e14;

/// Gram matrix of the monomial basis under the weight e^{-k(psi + phi)}
/// against the unit-mass area form. `phi` is sampled on `grid`'s nodes.
///
/// On a single-ray (rotation-invariant) grid the weight is taken as a
/// function of |x| alone and the result is diagonal by symmetry; angular
/// moments are not computable there and are not formed.
pub fn hilbert_map(k: usize, phi: &[f64], grid: &SphereGrid) -> Result<GramMatrix> {
    grid.supports_level(k)?;
    if phi.len() != grid.n_nodes() {
        return Err(Error::Mismatch(format!(
            "weight sampled on {} nodes, grid has {}",
            phi.len(),
            grid.n_nodes()
        )));
    }
    check_kahler(phi, grid)?;
    let n = grid.n_nodes();
    let mut u = CMat::zeros(n, k + 1);
    for i in 0..n {
        let t = grid.t(i);
        let th = grid.theta(i);
        // row scale sqrt(w e^{-k(psi+phi)}) folded into the exponent
        let base = 0.5 * (grid.weight(i).ln() - k as f64 * (grid.psi(i) + phi[i]));
        for j in 0..=k {
            let m = (base + 0.5 * j as f64 * t).exp();
            let a = j as f64 * th;
            u[(i, j)] = C64::new(m * a.cos(), m * a.sin());
        }
    }
    let g = herm_part(&(u.adjoint() * &u));
    let g = if grid.invariant() {
        CMat::from_diagonal(&g.diagonal())
    } else {
        g
    };
    Ok(GramMatrix {
        k,
        mat: g,
        tag: BasisTag::Primal,
    })
}

/// Discrete positivity of the twisted form: (psi + phi)_{w wbar} > 0 in the
/// holomorphic frame w = t/2 + i theta, up to a roundoff margin. The frame
/// choice keeps the reference term of size e^{-|t|} rather than e^{-2|t|},
/// so centered-difference noise on phi cannot mask a genuine violation.
fn check_kahler(phi: &[f64], grid: &SphereGrid) -> Result<()> {
    let sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * (1.0 + sup);
    let dt = grid.dt();
    let dth = grid.dtheta();
    let nth = grid.n_theta;
    for it in 1..grid.n_t - 1 {
        for ith in 0..nth {
            let p = grid.idx(it, ith);
            let t = grid.t(p);
            let f_tt =
                (phi[grid.idx(it + 1, ith)] - 2.0 * phi[p] + phi[grid.idx(it - 1, ith)])
                    / (dt * dt);
            let f_aa = if nth == 1 {
                0.0
            } else {
                let up = grid.idx(it, (ith + 1) % nth);
                let dn = grid.idx(it, (ith + nth - 1) % nth);
                (phi[up] - 2.0 * phi[p] + phi[dn]) / (dth * dth)
            };
            let c = (t / 2.0).exp() + (-t / 2.0).exp();
            let value = 1.0 / (c * c) + f_tt + 0.25 * f_aa;
            if value < -tol {
                return Err(Error::NonKahler { node: p, value });
            }
        }
    }
    Ok(())
}

/// Inner product induced on the dual space: the conjugate inverse matrix,
/// with the side tag flipped. Applying it twice returns the input.
pub fn dual_gram(g: &GramMatrix) -> Result<GramMatrix> {
    let eig = HermEigen::new(&g.mat);
    if !(eig.min() > 0.0) || eig.max() / eig.min() > COND_LIMIT {
        return Err(Error::IllConditioned {
            cond: if eig.min() > 0.0 {
                eig.max() / eig.min()
            } else {
                f64::INFINITY
            },
        });
    }
    let inv = eig.apply(|l| 1.0 / l);
    Ok(GramMatrix {
        k: g.k,
        mat: inv.conjugate(),
        tag: match g.tag {
            BasisTag::Primal => BasisTag::Dual,
            BasisTag::Dual => BasisTag::Primal,
        },
    })
}

/// Prepared evaluator for the induced potential of a metric. Holds the
/// dual-side quadratic form, so a dual-tagged input is used as-is and a
/// primal one is inverted once up front.
pub struct FsForm {
    k: usize,
    d: CMat,
}

pub fn fs_form(g: &GramMatrix) -> Result<FsForm> {
    let d = match g.tag {
        BasisTag::Primal => dual_gram(g)?.mat,
        BasisTag::Dual => {
            let eig = HermEigen::new(&g.mat);
            if !(eig.min() > 0.0) || eig.max() / eig.min() > COND_LIMIT {
                return Err(Error::IllConditioned {
                    cond: if eig.min() > 0.0 {
                        eig.max() / eig.min()
                    } else {
                        f64::INFINITY
                    },
                });
            }
            g.mat.clone()
        }
    };
    Ok(FsForm { k: g.k, d })
}

impl FsForm {
    /// Potential value at a chart point. The monomial vector is damped by
    /// e^{-k max(0,t)/2}, which keeps its largest entry at modulus one for
    /// any |x|, and the removed factor recombines with -psi into the bounded
    /// tail -log(1 + e^{-|t|}).
    pub fn eval(&self, x: C64) -> f64 {
        let t = x.norm_sqr().ln().clamp(-1e4, 1e4);
        let th = x.arg();
        let k = self.k as f64;
        let damp = 0.5 * k * t.max(0.0);
        let mut v = CVec::zeros(self.k + 1);
        for j in 0..=self.k {
            let m = (0.5 * j as f64 * t - damp).exp();
            let a = j as f64 * th;
            v[j] = C64::new(m * a.cos(), m * a.sin());
        }
        let q = v.dotc(&(&self.d * &v)).re;
        q.ln() / k - (-t.abs()).exp().ln_1p()
    }
}

/// One-shot induced potential at a point.
pub fn fubini_study(g: &GramMatrix, x: C64) -> Result<f64> {
    Ok(fs_form(g)?.eval(x))
}

/// Induced potential sampled on every node of a sphere grid.
pub fn fs_values(g: &GramMatrix, grid: &SphereGrid) -> Result<Vec<f64>> {
    let form = fs_form(g)?;
    Ok((0..grid.n_nodes()).map(|i| form.eval(grid.x(i))).collect())
}

/// Sup-norm gap between a weight potential and the potential induced by its
/// own Gram matrix; shrinks like log k / k for smooth weights.
pub fn tcz_gap(k: usize, phi: &[f64], grid: &SphereGrid) -> Result<f64> {
    let g = hilbert_map(k, phi, grid)?;
    let form = fs_form(&g)?;
    let mut worst = 0.0f64;
    for i in 0..grid.n_nodes() {
        worst = worst.max((form.eval(grid.x(i)) - phi[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sphere_grid, psi_of_t};
    use crate::linalg::offdiag_max;

    fn beta_diag(j: usize, k: usize) -> f64 {
        fn fact(n: usize) -> u128 {
            (1..=n as u128).product::<u128>().max(1)
        }
        (fact(j) * fact(k - j)) as f64 / fact(k + 1) as f64
    }

    /// Interpolates between the reference potential and its pullback under
    /// x -> x e^{-c/2}; positivity of the twisted form is exact for amp in [0,1].
    fn toric_phi(grid: &SphereGrid, amp: f64, c: f64) -> Vec<f64> {
        (0..grid.n_nodes())
            .map(|i| {
                let t = grid.t(i);
                amp * (psi_of_t(t - c) - psi_of_t(t))
            })
            .collect()
    }

    #[test]
    fn gram_diagonals_match_beta_values() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        let g1 = hilbert_map(1, &z, &grid).unwrap();
        assert!((g1.mat[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((g1.mat[(1, 1)].re - 0.5).abs() < 1e-12);
        let g2 = hilbert_map(2, &z, &grid).unwrap();
        for (j, want) in [(0, 1.0 / 3.0), (1, 1.0 / 6.0), (2, 1.0 / 3.0)] {
            assert!((g2.mat[(j, j)].re - want).abs() < 1e-12);
        }
        for k in [4usize, 8, 16, 32] {
            let g = hilbert_map(k, &z, &grid).unwrap();
            for j in 0..=k {
                let want = beta_diag(j, k);
                assert!(
                    (g.mat[(j, j)].re - want).abs() < 1e-10 * (1.0 + 1.0 / want),
                    "k={k} j={j}"
                );
            }
        }
    }

    #[test]
    fn full_grid_gram_is_diagonal_for_invariant_weight() {
        let grid = build_sphere_grid(256, 8).unwrap();
        let phi = toric_phi(&grid, 0.6, 1.3);
        let g = hilbert_map(3, &phi, &grid).unwrap();
        let scale = g.mat[(0, 0)].norm();
        assert!(offdiag_max(&g.mat) < 1e-12 * scale);
    }

    #[test]
    fn constant_weight_scales_gram() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        let c = 0.7;
        let shifted = vec![c; grid.n_nodes()];
        let g0 = hilbert_map(2, &z, &grid).unwrap();
        let gc = hilbert_map(2, &shifted, &grid).unwrap();
        for j in 0..3 {
            let want = (-2.0 * c).exp() * g0.mat[(j, j)].re;
            assert!((gc.mat[(j, j)].re - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn dual_is_entrywise_reciprocal_on_diagonals_and_involutive() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        let g = hilbert_map(1, &z, &grid).unwrap();
        let d = dual_gram(&g).unwrap();
        assert_eq!(d.tag, BasisTag::Dual);
        assert!((d.mat[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((d.mat[(1, 1)].re - 2.0).abs() < 1e-12);

        // dense positive matrix: Gram of a weight with an angular component
        let gf = build_sphere_grid(256, 8).unwrap();
        let phi: Vec<f64> = (0..gf.n_nodes())
            .map(|i| {
                let t = gf.t(i);
                let c = (t / 2.0).exp() + (-t / 2.0).exp();
                0.05 * (4.0 / (c * c)) * gf.theta(i).cos()
            })
            .collect();
        let g = hilbert_map(3, &phi, &gf).unwrap();
        assert!(offdiag_max(&g.mat) > 1e-6, "weight must be genuinely angular");
        let dd = dual_gram(&dual_gram(&g).unwrap()).unwrap();
        assert_eq!(dd.tag, BasisTag::Primal);
        let defect = (&dd.mat - &g.mat).norm() / g.mat.norm();
        assert!(defect < 1e-12, "double dual defect {defect:e}");

        let scaled = GramMatrix {
            k: g.k,
            mat: &g.mat * C64::new(3.0, 0.0),
            tag: BasisTag::Primal,
        };
        let ds = dual_gram(&scaled).unwrap();
        let d1 = dual_gram(&g).unwrap();
        let hom = (&ds.mat * C64::new(3.0, 0.0) - &d1.mat).norm() / d1.mat.norm();
        assert!(hom < 1e-12);
    }

    #[test]
    fn induced_potential_of_reference_is_flat() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        for k in [1usize, 2, 4, 8, 16, 32] {
            let g = hilbert_map(k, &z, &grid).unwrap();
            let form = fs_form(&g).unwrap();
            let want = ((k + 1) as f64).ln() / k as f64;
            for i in 0..grid.n_nodes() {
                let got = form.eval(grid.x(i));
                assert!((got - want).abs() < 1e-12, "k={k} node {i}: {got} vs {want}");
            }
            assert!((form.eval(C64::new(0.0, 0.0)) - want).abs() < 1e-12);
            assert!((form.eval(C64::new(0.0, 3.0e6)) - want).abs() < 1e-11);
        }
    }

    #[test]
    fn induced_potential_homogeneity_and_order_reversal() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        let g = hilbert_map(4, &z, &grid).unwrap();
        let c = 5.0f64;
        let scaled = GramMatrix {
            k: 4,
            mat: &g.mat * C64::new(c, 0.0),
            tag: BasisTag::Primal,
        };
        let f0 = fs_form(&g).unwrap();
        let fc = fs_form(&scaled).unwrap();
        for x in [C64::new(0.3, -1.2), C64::new(0.0, 0.0), C64::new(40.0, 7.0)] {
            assert!((fc.eval(x) - (f0.eval(x) - c.ln() / 4.0)).abs() < 1e-12);
        }

        // adding a rank-one piece grows the metric and lowers the potential
        let mut v = CVec::zeros(5);
        for j in 0..5 {
            v[j] = C64::new(0.3 + j as f64 * 0.1, 0.2 - j as f64 * 0.05);
        }
        let bigger = GramMatrix {
            k: 4,
            mat: &g.mat + &v * v.adjoint() * C64::new(0.5, 0.0),
            tag: BasisTag::Primal,
        };
        let fb = fs_form(&bigger).unwrap();
        for i in (0..grid.n_nodes()).step_by(7) {
            let x = grid.x(i);
            assert!(fb.eval(x) <= f0.eval(x) + 1e-12);
        }
    }

    #[test]
    fn gram_is_monotone_in_the_weight() {
        let grid = build_sphere_grid(256, 8).unwrap();
        let phi1: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let t = grid.t(i);
                let c = (t / 2.0).exp() + (-t / 2.0).exp();
                0.04 * (4.0 / (c * c)) * grid.theta(i).cos()
            })
            .collect();
        let phi2: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let t = grid.t(i);
                let c = (t / 2.0).exp() + (-t / 2.0).exp();
                phi1[i] + 0.05 * (4.0 / (c * c)) * (1.0 + grid.theta(i).sin())
            })
            .collect();
        let g1 = hilbert_map(3, &phi1, &grid).unwrap();
        let g2 = hilbert_map(3, &phi2, &grid).unwrap();
        let eig = HermEigen::new(&(&g1.mat - &g2.mat));
        assert!(
            eig.min() > -1e-12 * g1.mat.norm(),
            "larger weight must give smaller Gram, min eig {:e}",
            eig.min()
        );
    }

    #[test]
    fn gap_for_flat_weights_is_log_kp1_over_k() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        let c = vec![0.45; grid.n_nodes()];
        for k in [1usize, 2, 3, 5, 8] {
            let want = ((k + 1) as f64).ln() / k as f64;
            assert!((tcz_gap(k, &z, &grid).unwrap() - want).abs() < 1e-12);
            assert!((tcz_gap(k, &c, &grid).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_shrinks_like_log_k_over_k() {
        // amplitude * shift stays small: the weight tilts the Gram diagonals
        // by roughly e^{0.64 k amp c} and the k=32 dual must stay inside the
        // conditioning guard
        let grid = build_sphere_grid(256, 1).unwrap();
        let phi = toric_phi(&grid, 0.4, 1.0);
        let gaps: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&k| tcz_gap(k, &phi, &grid).unwrap())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps {gaps:?}");
        for (i, (ka, kb)) in [(8f64, 16f64), (16f64, 32f64)].into_iter().enumerate() {
            let got = gaps[i + 1] / gaps[i];
            let model = (kb.ln() / kb) / (ka.ln() / ka);
            assert!(
                got < model * 3.0 && got > model / 3.0,
                "ratio {got} vs model {model}"
            );
        }
    }

    #[test]
    fn rejects_weights_that_break_positivity() {
        let grid = build_sphere_grid(256, 1).unwrap();
        let phi: Vec<f64> = (0..grid.n_nodes()).map(|i| -2.0 * grid.psi(i)).collect();
        match hilbert_map(1, &phi, &grid) {
            Err(Error::NonKahler { value, .. }) => assert!(value < 0.0),
            other => panic!("expected positivity rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degrees_beyond_grid_capacity() {
        let grid = build_sphere_grid(256, 16).unwrap();
        let z = vec![0.0; grid.n_nodes()];
        assert!(matches!(
            hilbert_map(8, &z, &grid),
            Err(Error::Capacity { .. })
        ));
    }
}
