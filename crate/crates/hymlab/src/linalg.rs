//! Dense Hermitian helpers on top of nalgebra: eigen-calculus for matrix
//! functions (sqrt, log, exp) and the geodesic distance on the positive cone.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest absolute entry of `a - a^*`; zero for an exactly Hermitian matrix.
pub fn herm_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let d = (a[(r, c)] - a[(c, r)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// (a + a^*)/2.
pub fn herm_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix with real eigenvalues.
pub struct HermEigen {
    pub vals: Vec<f64>,
    pub vecs: CMat,
}

impl HermEigen {
    pub fn new(a: &CMat) -> Self {
        let se = a.clone().symmetric_eigen();
        HermEigen {
            vals: se.eigenvalues.iter().copied().collect(),
            vecs: se.eigenvectors,
        }
    }

    /// U f(Λ) U^*.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = DVector::from_iterator(self.vals.len(), self.vals.iter().map(|&l| C64::new(f(l), 0.0)));
        &self.vecs * CMat::from_diagonal(&d) * self.vecs.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn herm_sqrt(a: &CMat) -> CMat {
    HermEigen::new(a).apply(f64::sqrt)
}

pub fn herm_inv_sqrt(a: &CMat) -> CMat {
    HermEigen::new(a).apply(|l| 1.0 / l.sqrt())
}

pub fn herm_log(a: &CMat) -> CMat {
    HermEigen::new(a).apply(f64::ln)
}

pub fn herm_exp(a: &CMat) -> CMat {
    HermEigen::new(a).apply(f64::exp)
}

/// Operator norm (spectral radius) of a Hermitian matrix.
pub fn herm_op_norm(a: &CMat) -> f64 {
    HermEigen::new(a).vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
}

/// Squared distance in the symmetric space of positive Hermitian matrices:
/// `|| log(A^{-1/2} B A^{-1/2}) ||_F^2`.
pub fn geodesic_dist_sq(a: &CMat, b: &CMat) -> f64 {
    let ais = herm_inv_sqrt(a);
    let m = &ais * b * &ais;
    let lg = herm_log(&herm_part(&m));
    lg.iter().map(|c| c.norm_sqr()).sum()
}

/// Real quadratic form `v^* A^{-1} v` through a Cholesky factorization.
/// Returns the conditioning-safe value together with `A = L L^*`'s factor reuse.
pub struct CholeskyForm {
    chol: nalgebra::Cholesky<C64, nalgebra::Dyn>,
}

impl CholeskyForm {
    pub fn new(a: &CMat) -> Option<Self> {
        a.clone().cholesky().map(|chol| CholeskyForm { chol })
    }

    pub fn inv_quadratic(&self, v: &CVec) -> f64 {
        // v^* A^{-1} v = || L^{-1} v ||^2
        let mut y = v.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn solve(&self, v: &CVec) -> CVec {
        self.chol.solve(v)
    }
}

/// Ratio of extreme eigenvalues of a positive Hermitian matrix.
pub fn herm_cond(a: &CMat) -> f64 {
    let e = HermEigen::new(a);
    let lo = e.min();
    let hi = e.max();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Largest absolute off-diagonal entry.
pub fn offdiag_max(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                worst = worst.max(a[(r, c)].norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_hpd(n: usize) -> CMat {
        // A = B^* B + I with a fixed, reproducible B
        let mut b = CMat::zeros(n, n);
        let mut s = 1u64;
        for r in 0..n {
            for c in 0..n {
                // xorshift64
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                let re = (s % 1000) as f64 / 1000.0 - 0.5;
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                let im = (s % 1000) as f64 / 1000.0 - 0.5;
                b[(r, c)] = C64::new(re, im);
            }
        }
        b.adjoint() * &b + CMat::identity(n, n)
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample_hpd(6);
        let s = herm_sqrt(&a);
        assert_relative_eq!((&s * &s - &a).norm(), 0.0, epsilon = 1e-12 * a.norm());
        assert!(herm_defect(&s) < 1e-13);
    }

    #[test]
    fn log_exp_roundtrip() {
        let a = sample_hpd(5);
        let back = herm_exp(&herm_log(&a));
        assert_relative_eq!((&back - &a).norm(), 0.0, epsilon = 1e-12 * a.norm());
    }

    #[test]
    fn geodesic_distance_symmetric_and_log_exact() {
        let a = sample_hpd(4);
        let b = sample_hpd(4) * C64::new(1.7, 0.0);
        let dab = geodesic_dist_sq(&a, &b);
        let dba = geodesic_dist_sq(&b, &a);
        assert_relative_eq!(dab, dba, max_relative = 1e-10);
        // commuting case: distance^2 = sum (log lambda_i - log mu_i)^2
        let d1 = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(4.0, 0.0),
        ]));
        let d2 = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(2.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        let expect = (1.0f64.ln() - 2.0f64.ln()).powi(2) + (4.0f64.ln() - 1.0f64.ln()).powi(2);
        assert_relative_eq!(geodesic_dist_sq(&d1, &d2), expect, max_relative = 1e-12);
    }

    #[test]
    fn cholesky_quadratic_form_matches_direct() {
        let a = sample_hpd(5);
        let v = CVec::from_fn(5, |i, _| C64::new(1.0 + i as f64, 0.5 - i as f64));
        let f = CholeskyForm::new(&a).unwrap();
        let direct = (v.adjoint() * a.clone().try_inverse().unwrap() * &v)[(0, 0)].re;
        assert_relative_eq!(f.inv_quadratic(&v), direct, max_relative = 1e-10);
    }

    #[test]
    fn op_norm_is_spectral_radius() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-3.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        assert_relative_eq!(herm_op_norm(&d), 3.0, max_relative = 1e-14);
    }
}
