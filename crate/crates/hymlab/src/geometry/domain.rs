//! Base-domain grids with boundary tagging and complete centered-difference
//! stencils at every interior node.
//!
//! Each complex factor is a uniform 2-axis lattice in a working coordinate w:
//! the annulus {r0 <= |z| <= 1} uses w = log z = rho + i. theta, which turns
//! it into a flat rectangle with one periodic side, and the disc keeps the
//! chart coordinate w = z on a masked square lattice. Derivatives taken on
//! the lattice convert to the chart frame through d/dz = (dw/dz) d/dw, so a
//! factor carries its frame factor alongside the spacings. The two-factor
//! domain is a product of annuli; its boundary is the full topological one
//! (either factor radius extremal), which is what a Dirichlet problem for an
//! elliptic system in all four real variables needs.

use super::axis_locate;
use crate::linalg::C64;
use crate::{Error, Result};

/// Neighbor slot for a direction that leaves the node set.
pub const NO_NODE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainShape {
    Annulus { r0: f64 },
    Disc,
    Biannulus { r0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// w = log z on an annulus; axis 0 is rho = log|z|, axis 1 is theta.
    LogPolar,
    /// w = z on the square enclosing the disc; axes are Re z, Im z.
    Cartesian,
}

/// One complex factor of the base domain: a uniform lattice in its working
/// coordinate. `n1 == 1` collapses the second axis for rotation-invariant
/// runs; periodic wrap then maps a node to itself.
#[derive(Clone, Debug)]
pub struct FactorGrid {
    pub kind: FactorKind,
    pub n0: usize,
    pub a0_min: f64,
    pub d0: f64,
    pub n1: usize,
    pub a1_min: f64,
    pub d1: f64,
    pub periodic1: bool,
}

impl FactorGrid {
    fn log_polar(r0: f64, n_rho: usize, n_theta: usize) -> FactorGrid {
        let rho_min = r0.ln();
        FactorGrid {
            kind: FactorKind::LogPolar,
            n0: n_rho,
            a0_min: rho_min,
            d0: -rho_min / (n_rho - 1) as f64,
            n1: n_theta,
            a1_min: 0.0,
            d1: std::f64::consts::TAU / n_theta as f64,
            periodic1: true,
        }
    }

    fn cartesian(n_side: usize) -> FactorGrid {
        let h = 2.0 / (n_side - 1) as f64;
        FactorGrid {
            kind: FactorKind::Cartesian,
            n0: n_side,
            a0_min: -1.0,
            d0: h,
            n1: n_side,
            a1_min: -1.0,
            d1: h,
            periodic1: false,
        }
    }

    pub fn lattice_len(&self) -> usize {
        self.n0 * self.n1
    }

    pub fn local(&self, i0: usize, i1: usize) -> usize {
        i0 * self.n1 + i1
    }

    pub fn split(&self, local: usize) -> (usize, usize) {
        (local / self.n1, local % self.n1)
    }

    /// Working coordinates (axis 0, axis 1) of a lattice point.
    pub fn coord(&self, local: usize) -> (f64, f64) {
        let (i0, i1) = self.split(local);
        (
            self.a0_min + i0 as f64 * self.d0,
            self.a1_min + i1 as f64 * self.d1,
        )
    }

    pub fn w(&self, local: usize) -> C64 {
        let (a, b) = self.coord(local);
        C64::new(a, b)
    }

    /// Chart coordinate of the lattice point.
    pub fn z(&self, local: usize) -> C64 {
        match self.kind {
            FactorKind::LogPolar => self.w(local).exp(),
            FactorKind::Cartesian => self.w(local),
        }
    }

    /// dw/dz at the node: multiplies a w-frame holomorphic derivative to give
    /// the chart-frame one.
    pub fn holo_frame(&self, local: usize) -> C64 {
        match self.kind {
            FactorKind::LogPolar => (-self.w(local)).exp(),
            FactorKind::Cartesian => C64::new(1.0, 0.0),
        }
    }

    /// |dw/dz|^2: converts w-frame mixed second differences u_{w wbar} to the
    /// chart-frame u_{z zbar}.
    pub fn chart_factor(&self, local: usize) -> f64 {
        match self.kind {
            FactorKind::LogPolar => (-2.0 * self.coord(local).0).exp(),
            FactorKind::Cartesian => 1.0,
        }
    }

    /// Interpolation cell on axis 0 for a working-coordinate value.
    pub fn locate0(&self, a: f64) -> Option<(usize, f64)> {
        axis_locate(self.a0_min, self.d0, self.n0, a, false)
    }

    /// Interpolation cell on axis 1.
    pub fn locate1(&self, b: f64) -> Option<(usize, f64)> {
        axis_locate(self.a1_min, self.d1, self.n1, b, self.periodic1)
    }

    /// Lebesgue area weight carried by the lattice point, in the chart frame.
    fn area_weight(&self, local: usize) -> f64 {
        match self.kind {
            FactorKind::LogPolar => {
                let (i0, _) = self.split(local);
                let rho = self.a0_min + i0 as f64 * self.d0;
                let trap = if i0 == 0 || i0 == self.n0 - 1 { 0.5 } else { 1.0 };
                trap * (2.0 * rho).exp() * self.d0 * self.d1
            }
            FactorKind::Cartesian => self.d0 * self.d1,
        }
    }
}

/// Product grid over the base domain. Nodes carry chart coordinates, a
/// boundary tag, and per-direction neighbor ids (`NO_NODE` where a direction
/// exits the node set; only boundary nodes have such directions).
///
/// Direction indexing: `4*j + a` for factor `j`, with `a` = 0/1 the minus and
/// plus sides of axis 0 and `a` = 2/3 those of axis 1.
#[derive(Clone, Debug)]
pub struct DomainGrid {
    pub shape: DomainShape,
    factors: Vec<FactorGrid>,
    locals: Vec<[u32; 2]>,
    lattice_map: Vec<usize>,
    neighbors: Vec<[usize; 8]>,
    boundary: Vec<bool>,
}

impl DomainGrid {
    pub fn annulus(r0: f64, n_rho: usize, n_theta: usize) -> Result<DomainGrid> {
        check_annular(r0, n_rho, n_theta)?;
        Ok(build_product(
            DomainShape::Annulus { r0 },
            vec![FactorGrid::log_polar(r0, n_rho, n_theta)],
        ))
    }

    pub fn bi_annulus(r0: f64, n_rho: usize, n_theta: usize) -> Result<DomainGrid> {
        check_annular(r0, n_rho, n_theta)?;
        let f = FactorGrid::log_polar(r0, n_rho, n_theta);
        Ok(build_product(
            DomainShape::Biannulus { r0 },
            vec![f.clone(), f],
        ))
    }

    pub fn disc(n_side: usize) -> Result<DomainGrid> {
        if n_side < 9 {
            return Err(Error::InvalidConfig(format!(
                "disc grid needs at least 9 points per side, got {n_side}"
            )));
        }
        Ok(build_disc(n_side))
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.locals.len()
    }

    pub fn factor(&self, j: usize) -> &FactorGrid {
        &self.factors[j]
    }

    pub fn local(&self, node: usize, j: usize) -> usize {
        self.locals[node][j] as usize
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&p| !self.boundary[p]).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&p| self.boundary[p]).collect()
    }

    /// Neighbor in direction `4*j + a`, or `NO_NODE`.
    pub fn neighbor(&self, node: usize, j: usize, a: usize) -> usize {
        self.neighbors[node][4 * j + a]
    }

    /// The four stencil neighbors of factor `j`: [axis0-, axis0+, axis1-, axis1+].
    pub fn stencil(&self, node: usize, j: usize) -> [usize; 4] {
        let n = &self.neighbors[node];
        [n[4 * j], n[4 * j + 1], n[4 * j + 2], n[4 * j + 3]]
    }

    /// Chart coordinates of the node, one entry per factor.
    pub fn z(&self, node: usize) -> Vec<C64> {
        (0..self.m())
            .map(|j| self.factors[j].z(self.local(node, j)))
            .collect()
    }

    /// Where boundary data is evaluated: the node itself for annular factors
    /// (their extremal rings lie exactly on the boundary circles), the radial
    /// projection onto the unit circle for the disc's staircase ring.
    pub fn boundary_anchor(&self, node: usize) -> Vec<C64> {
        let mut zs = self.z(node);
        if let DomainShape::Disc = self.shape {
            let r = zs[0].norm();
            if self.boundary[node] && r > 0.0 {
                zs[0] /= r;
            }
        }
        zs
    }

    /// Product Lebesgue weight of the node in chart coordinates.
    pub fn vol_weight(&self, node: usize) -> f64 {
        (0..self.m())
            .map(|j| self.factors[j].area_weight(self.local(node, j)))
            .product()
    }

    /// u_{z_j zbar_j} scale: multiplies w-frame second differences of factor j.
    pub fn chart_factor(&self, node: usize, j: usize) -> f64 {
        self.factors[j].chart_factor(self.local(node, j))
    }

    /// dw_j/dz_j at the node.
    pub fn holo_frame(&self, node: usize, j: usize) -> C64 {
        self.factors[j].holo_frame(self.local(node, j))
    }

    /// Node id for given factor-local lattice indices, if all lie in the node
    /// set. Used by interpolation to resolve cell corners.
    pub fn node_of_locals(&self, locals: &[usize]) -> Option<usize> {
        debug_assert_eq!(locals.len(), self.m());
        let mut lat = 0usize;
        for (j, &l) in locals.iter().enumerate() {
            lat = lat * self.factors[j].lattice_len() + l;
        }
        let p = self.lattice_map[lat];
        if p == NO_NODE {
            None
        } else {
            Some(p)
        }
    }
}

fn check_annular(r0: f64, n_rho: usize, n_theta: usize) -> Result<()> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "inner radius must lie in (0,1), got {r0}"
        )));
    }
    if n_rho < 3 {
        return Err(Error::InvalidConfig(format!(
            "annulus needs at least 3 radial rings, got {n_rho}"
        )));
    }
    if n_theta == 0 {
        return Err(Error::InvalidConfig("annulus needs n_theta >= 1".into()));
    }
    Ok(())
}

fn build_product(shape: DomainShape, factors: Vec<FactorGrid>) -> DomainGrid {
    let m = factors.len();
    let total: usize = factors.iter().map(|f| f.lattice_len()).product();
    let mut locals = Vec::with_capacity(total);
    let mut boundary = Vec::with_capacity(total);
    for lat in 0..total {
        let mut rem = lat;
        let mut loc = [0u32; 2];
        let mut on_boundary = false;
        for j in (0..m).rev() {
            let len = factors[j].lattice_len();
            let l = rem % len;
            rem /= len;
            loc[j] = l as u32;
            let (i0, _) = factors[j].split(l);
            if i0 == 0 || i0 == factors[j].n0 - 1 {
                on_boundary = true;
            }
        }
        locals.push(loc);
        boundary.push(on_boundary);
    }
    let lattice_map: Vec<usize> = (0..total).collect();
    let neighbors = product_neighbors(&factors, &locals, &lattice_map);
    DomainGrid {
        shape,
        factors,
        locals,
        lattice_map,
        neighbors,
        boundary,
    }
}

fn build_disc(n_side: usize) -> DomainGrid {
    let f = FactorGrid::cartesian(n_side);
    let total = f.lattice_len();
    let inside = |l: usize| f.z(l).norm_sqr() <= 1.0 + 1e-9;
    let mut lattice_map = vec![NO_NODE; total];
    let mut locals = Vec::new();
    for l in 0..total {
        if inside(l) {
            lattice_map[l] = locals.len();
            locals.push([l as u32, 0]);
        }
    }
    let factors = vec![f];
    let neighbors = product_neighbors(&factors, &locals, &lattice_map);
    let boundary = (0..locals.len())
        .map(|p| neighbors[p][..4].iter().any(|&q| q == NO_NODE))
        .collect();
    DomainGrid {
        shape: DomainShape::Disc,
        factors,
        locals,
        lattice_map,
        neighbors,
        boundary,
    }
}

fn product_neighbors(
    factors: &[FactorGrid],
    locals: &[[u32; 2]],
    lattice_map: &[usize],
) -> Vec<[usize; 8]> {
    let m = factors.len();
    let flatten = |loc: &[usize]| -> usize {
        let mut lat = 0usize;
        for (j, &l) in loc.iter().enumerate().take(m) {
            lat = lat * factors[j].lattice_len() + l;
        }
        lat
    };
    locals
        .iter()
        .map(|loc| {
            let mut out = [NO_NODE; 8];
            for j in 0..m {
                let f = &factors[j];
                let (i0, i1) = f.split(loc[j] as usize);
                for (a, (s0, s1)) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                    .into_iter()
                    .enumerate()
                {
                    let n0 = i0 as i64 + s0;
                    if n0 < 0 || n0 >= f.n0 as i64 {
                        continue;
                    }
                    let n1 = if f.periodic1 {
                        (i1 as i64 + s1).rem_euclid(f.n1 as i64)
                    } else {
                        let v = i1 as i64 + s1;
                        if v < 0 || v >= f.n1 as i64 {
                            continue;
                        }
                        v
                    };
                    let mut shifted: Vec<usize> =
                        (0..m).map(|jj| loc[jj] as usize).collect();
                    shifted[j] = f.local(n0 as usize, n1 as usize);
                    out[4 * j + a] = lattice_map[flatten(&shifted)];
                }
            }
            out
        })
        .collect()
}
