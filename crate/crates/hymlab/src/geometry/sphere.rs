//! The sphere factor: a grid on the Riemann sphere minus its two poles,
//! uniform in `t = log|x|^2` and in the argument of `x`.
//!
//! The chart carries the potential `psi(x) = log(1 + |x|^2)` whose area form,
//! normalized to total mass 1, has density `e^t (1+e^t)^{-2} dt dtheta / 2pi`
//! in these coordinates. A trapezoid rule on the uniform `t` window converges
//! exponentially for the rational integrands produced by polynomial sections,
//! so one grid serves both quadrature and centered differencing. The excluded
//! poles carry no quadrature mass.

use crate::linalg::{C64, CVec};
use crate::{Error, Result};

/// Product sampling of the sphere chart: `n_t` uniform nodes of
/// `t = log|x|^2` on `[-t_max, t_max]` times `n_theta` uniform arguments.
/// `n_theta = 1` is the rotation-invariant mode: fields are sampled on a
/// single ray and all angular derivatives vanish identically.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub n_t: usize,
    pub n_theta: usize,
    pub t_max: f64,
    dt: f64,
    dtheta: f64,
    weights_t: Vec<f64>,
}

/// `psi(x) = log(1 + |x|^2)` evaluated stably from `t = log|x|^2`.
pub fn psi_of_t(t: f64) -> f64 {
    if t <= 0.0 {
        t.exp().ln_1p()
    } else {
        t + (-t).exp().ln_1p()
    }
}

/// Chart-frame metric density `psi_{x xbar} = (1 + |x|^2)^{-2}` from `t`.
pub fn metric_density_of_t(t: f64) -> f64 {
    // (1+e^t)^{-2} = e^{-t} / (e^{t/2} + e^{-t/2})^2, stable at both ends
    let c = (t / 2.0).exp() + (-t / 2.0).exp();
    (-t).exp() / (c * c)
}

/// `psi(x) = log(1 + |x|^2)` at a chart point.
pub fn reference_potential(x: C64) -> f64 {
    x.norm_sqr().ln_1p()
}

/// Invariant model potential `amp * (psi(t - shift) - psi(t))`: a bounded
/// profile that transports mass along `t`. For `0 <= amp <= 1` the combined
/// profile `psi + phi` is a convex combination of convex profiles, so the
/// potential keeps a nonnegative fiber form.
pub fn toric_potential(t: f64, amp: f64, shift: f64) -> f64 {
    amp * (psi_of_t(t - shift) - psi_of_t(t))
}

/// `psi_{x xbar}(x) = (1 + |x|^2)^{-2}` at a chart point.
pub fn reference_metric_density(x: C64) -> f64 {
    let d = 1.0 + x.norm_sqr();
    1.0 / (d * d)
}

/// Coefficients of a section `sum c_j e_j` of the k-th power basis evaluated
/// pointwise: `(1, x, x^2, ..., x^k)`.
pub fn section_vector(k: usize, x: C64) -> CVec {
    let mut v = CVec::zeros(k + 1);
    let mut p = C64::new(1.0, 0.0);
    for j in 0..=k {
        v[j] = p;
        p *= x;
    }
    v
}

/// Build the standard grid with window `t_max = 32`.
pub fn build_sphere_grid(n_t: usize, n_theta: usize) -> Result<SphereGrid> {
    SphereGrid::windowed(n_t, n_theta, 32.0)
}

impl SphereGrid {
    /// Grid with an explicit `t` window; narrow windows are useful for
    /// differential diagnostics but refuse quadrature-level work.
    pub fn windowed(n_t: usize, n_theta: usize, t_max: f64) -> Result<SphereGrid> {
        if n_t < 8 {
            return Err(Error::InvalidConfig(format!(
                "sphere grid needs at least 8 radial nodes, got {n_t}"
            )));
        }
        if n_theta == 0 {
            return Err(Error::InvalidConfig("sphere grid needs n_theta >= 1".into()));
        }
        if !(t_max > 0.0 && t_max <= 40.0) {
            return Err(Error::InvalidConfig(format!(
                "t window must lie in (0, 40], got {t_max}"
            )));
        }
        let dt = 2.0 * t_max / (n_t - 1) as f64;
        let dtheta = std::f64::consts::TAU / n_theta as f64;
        let mut weights_t = Vec::with_capacity(n_t);
        for i in 0..n_t {
            let t = -t_max + i as f64 * dt;
            let end = i == 0 || i == n_t - 1;
            let trap = if end { 0.5 } else { 1.0 };
            // area density e^t (1+e^t)^{-2} = (e^{t/2} + e^{-t/2})^{-2}
            let c = (t / 2.0).exp() + (-t / 2.0).exp();
            weights_t.push(trap * dt / (c * c));
        }
        Ok(SphereGrid {
            n_t,
            n_theta,
            t_max,
            dt,
            dtheta,
            weights_t,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_t * self.n_theta
    }

    pub fn invariant(&self) -> bool {
        self.n_theta == 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn idx(&self, it: usize, ith: usize) -> usize {
        it * self.n_theta + ith
    }

    pub fn it(&self, idx: usize) -> usize {
        idx / self.n_theta
    }

    pub fn ith(&self, idx: usize) -> usize {
        idx % self.n_theta
    }

    pub fn t(&self, idx: usize) -> f64 {
        -self.t_max + self.it(idx) as f64 * self.dt
    }

    pub fn theta(&self, idx: usize) -> f64 {
        self.ith(idx) as f64 * self.dtheta
    }

    pub fn x(&self, idx: usize) -> C64 {
        let r = (self.t(idx) / 2.0).exp();
        let th = self.theta(idx);
        C64::new(r * th.cos(), r * th.sin())
    }

    /// Quadrature weight against the unit-mass area form.
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights_t[self.it(idx)] / self.n_theta as f64
    }

    pub fn psi(&self, idx: usize) -> f64 {
        psi_of_t(self.t(idx))
    }

    /// Chart-frame `psi_{x xbar}` at a node.
    pub fn metric_density(&self, idx: usize) -> f64 {
        metric_density_of_t(self.t(idx))
    }

    /// Degree cap for exact moment quadrature: angular sums of `e^{i m theta}`
    /// vanish for `0 < |m| < n_theta`; the radial window must cover the tails
    /// (t_max >= 28) and resolve the sharpest moment peak, whose width shrinks
    /// like 1/sqrt(degree), so the step must stay below 0.30 to keep trapezoid
    /// aliasing under 1e-10 through degree 64.
    pub fn max_degree(&self) -> usize {
        let radial_ok = self.t_max >= 28.0 && self.dt <= 0.30;
        if !radial_ok {
            return 0;
        }
        let overflow_cap = (2560.0 / self.t_max).floor() as usize; // keeps level * t_max / 2 < 640
        let angular = if self.n_theta == 1 {
            usize::MAX
        } else {
            self.n_theta - 1
        };
        angular.min(overflow_cap).min(64)
    }

    /// Error unless degree-2k observables are integrated exactly here.
    /// Rotation-invariant grids integrate invariant observables of any
    /// moment degree, so only the radial constraints apply there.
    pub fn supports_level(&self, k: usize) -> Result<()> {
        if 2 * k <= self.max_degree() {
            Ok(())
        } else {
            Err(Error::Capacity {
                needed_degree: 2 * k,
                max_degree: self.max_degree(),
            })
        }
    }
}
