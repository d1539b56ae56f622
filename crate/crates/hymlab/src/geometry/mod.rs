//! Sampling grids: the sphere factor (quadrature + differentiation) and the
//! base domain in C^m (annulus, disc, product of annuli).

mod domain;
mod sphere;

pub use domain::{DomainGrid, DomainShape, FactorGrid, FactorKind, NO_NODE};
pub use sphere::{
    build_sphere_grid, metric_density_of_t, psi_of_t, reference_metric_density,
    reference_potential, section_vector, toric_potential, SphereGrid,
};

/// Bilinear interpolation weights on a uniform axis. Returns the lower index
/// and the fractional offset, or `None` outside the covered range.
pub(crate) fn axis_locate(x0: f64, dx: f64, n: usize, x: f64, periodic: bool) -> Option<(usize, f64)> {
    if n == 1 {
        // collapsed (symmetry-reduced) axis: everything maps to the single sample
        return Some((0, 0.0));
    }
    let s = (x - x0) / dx;
    if periodic {
        let len = n as f64;
        let mut s = s % len;
        if s < 0.0 {
            s += len;
        }
        let i = s.floor() as usize % n;
        Some((i, s - s.floor()))
    } else {
        if s < -1e-12 || s > (n - 1) as f64 + 1e-12 {
            return None;
        }
        let sc = s.clamp(0.0, (n - 1) as f64);
        let i = (sc.floor() as usize).min(n - 2);
        Some((i, sc - i as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::axis_locate;

    #[test]
    fn locate_periodic_wraps() {
        let (i, f) = axis_locate(0.0, 0.25, 8, -0.125, true).unwrap();
        assert_eq!(i, 7);
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn locate_bounded_rejects_outside() {
        assert!(axis_locate(0.0, 0.1, 5, 0.45, false).is_none());
        let (i, f) = axis_locate(0.0, 0.1, 5, 0.25, false).unwrap();
        assert_eq!(i, 2);
        assert!((f - 0.5).abs() < 1e-12);
    }
}
