//! Upper envelopes of potentials on the product of the base domain and the
//! sphere. The target object is the largest function below given boundary
//! data whose restriction to every affine holomorphic graph through the
//! fibers is subharmonic; it is computed by iterated circle-mean cuts
//! starting from a harmonic upper bound, and cross-checked in the
//! rotation-invariant annulus case against a fiberwise Legendre transform.

mod majorant;
mod oracle;
mod smooth;
mod store;
mod sweep;

pub use majorant::harmonic_majorant;
pub use oracle::{toric_geodesic_exact, toric_geodesic_oracle};
pub use smooth::{mollify_field, regularized_max};
pub use store::{load_potential_field, save_potential_field};
pub use sweep::{
    check_graph_subharmonicity, graph_sweep_envelope, graph_sweep_envelope_with_report,
    SweepReport,
};

use crate::geometry::{DomainGrid, FactorGrid, SphereGrid};
use crate::{Error, Result};

/// Scalar potential sampled on the product of a base grid and a sphere grid,
/// stored base-node major: `values[p * sgrid.n_nodes() + xi]`. The rows of
/// `boundary_values` follow `dgrid.boundary_nodes()` order and record the
/// data the field is anchored to; after an envelope run the trace of
/// `values` on the boundary equals them.
pub struct PotentialField {
    pub dgrid: DomainGrid,
    pub sgrid: SphereGrid,
    pub values: Vec<f64>,
    pub boundary_values: Vec<f64>,
}

impl PotentialField {
    pub fn from_fn(
        dgrid: DomainGrid,
        sgrid: SphereGrid,
        f: impl Fn(usize, usize) -> f64,
    ) -> PotentialField {
        let nx = sgrid.n_nodes();
        let mut values = Vec::with_capacity(dgrid.n_nodes() * nx);
        for p in 0..dgrid.n_nodes() {
            for xi in 0..nx {
                values.push(f(p, xi));
            }
        }
        let mut boundary_values = Vec::new();
        for &b in &dgrid.boundary_nodes() {
            boundary_values.extend_from_slice(&values[b * nx..(b + 1) * nx]);
        }
        PotentialField {
            dgrid,
            sgrid,
            values,
            boundary_values,
        }
    }

    pub fn nx(&self) -> usize {
        self.sgrid.n_nodes()
    }

    pub fn at(&self, p: usize, xi: usize) -> f64 {
        self.values[p * self.nx() + xi]
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let nx = self.nx();
        if self.values.len() != self.dgrid.n_nodes() * nx {
            return Err(Error::Mismatch(format!(
                "potential field has {} values for {} product nodes",
                self.values.len(),
                self.dgrid.n_nodes() * nx
            )));
        }
        let nb = self.dgrid.boundary_nodes().len();
        if self.boundary_values.len() != nb * nx {
            return Err(Error::Mismatch(format!(
                "potential field has {} boundary values for {} boundary rows",
                self.boundary_values.len(),
                nb
            )));
        }
        if !self.values.iter().chain(&self.boundary_values).all(|v| v.is_finite()) {
            return Err(Error::Mismatch("potential field has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Probe family for graph subharmonicity. At each admissible base node and
/// each fiber node `x0`, a circle of radius `radius_cells` lattice cells in
/// the working coordinate of each base factor is swept by the graphs
/// `f(z) = x0 + a (z - z0)`. The slope `a = 0` is always included; nonzero
/// slopes take `directions` equispaced arguments with magnitudes
/// `scale * |x0| / r_chart`, so a probe displaces the fiber point by roughly
/// `scale * |x0|`. Near the boundary the radius is capped by the available
/// clearance, so every interior node is probed.
///
/// Scales close to 1 are deliberately absent from the default ladder: there
/// the zero of the graph rides the probe circle itself, and the finite
/// circle sampling cannot resolve the logarithmic dip of the fiber
/// potential along it, which turns into spurious downward cuts. Away from
/// 1 the sampling error decays like `scale^samples` (zero outside the
/// circle) or is dominated by the mean-value surplus `2 ln scale` (zero
/// inside), and measured envelopes change by under 1e-5 when intermediate
/// scales are added back with finer sampling.
#[derive(Clone, Debug)]
pub struct HolomorphicGraphFamily {
    pub radius_cells: f64,
    pub slope_scales: Vec<f64>,
    pub directions: usize,
    pub circle_samples: usize,
}

impl Default for HolomorphicGraphFamily {
    fn default() -> Self {
        HolomorphicGraphFamily {
            radius_cells: 2.0,
            slope_scales: vec![0.125, 0.25, 0.5, 2.0, 4.0, 8.0],
            directions: 8,
            circle_samples: 16,
        }
    }
}

impl HolomorphicGraphFamily {
    /// Only the zero slope: probes plain subharmonicity in the base.
    pub fn radial_only() -> Self {
        HolomorphicGraphFamily {
            slope_scales: Vec::new(),
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.radius_cells > 0.0) {
            return Err(Error::InvalidConfig("probe radius must be positive".into()));
        }
        if self.circle_samples < 4 {
            return Err(Error::InvalidConfig(
                "graph probes need at least 4 circle samples".into(),
            ));
        }
        if self.slope_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(
                "slope scales must be positive and finite".into(),
            ));
        }
        if !self.slope_scales.is_empty() && self.directions == 0 {
            return Err(Error::InvalidConfig(
                "nonzero slopes need at least one direction".into(),
            ));
        }
        Ok(())
    }
}

/// Working-frame probe radius available at lattice point `(i0, i1)` of one
/// factor: the requested number of cells, capped so the circle stays on the
/// lattice in every non-periodic direction. `None` when no circle fits.
pub(crate) fn probe_radius(f: &FactorGrid, i0: usize, i1: usize, cells: f64) -> Option<f64> {
    let c0 = i0.min(f.n0 - 1 - i0) as f64;
    if c0 < 1.0 {
        return None;
    }
    let mut r = (cells * f.d0).min(c0 * f.d0);
    if !f.periodic1 && f.n1 > 1 {
        let c1 = i1.min(f.n1 - 1 - i1) as f64;
        if c1 < 1.0 {
            return None;
        }
        r = r.min(c1 * f.d1);
    }
    Some(r)
}
