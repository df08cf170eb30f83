use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point, SliderShape};

/// Sentinel for a missing neighbour (Dirichlet boundary or removed node).
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Link {
    pub node: u32,
    /// Conductance of the shared edge; the matrix entry is `-weight`.
    pub weight: f64,
}

impl Link {
    const EMPTY: Link = Link {
        node: NONE,
        weight: 0.0,
    };
}

/// Edge-midpoint heights and nodal slopes of a shape on a grid.
///
/// Everything that does not depend on the clearance is computed once; the
/// operator for a given `beta` only needs the cubes `(h0 + beta)^3`.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: Grid,
    /// `(nx + 1) * ny` vertical edges; edge `(i, j)` joins columns `i - 1` and `i`.
    h_xedge: Vec<f64>,
    /// `nx * (ny + 1)` horizontal edges; edge `(i, j)` joins rows `j - 1` and `j`.
    h_yedge: Vec<f64>,
    slope: Vec<f64>,
}

impl Stencil {
    pub fn new(grid: &Grid, shape: &SliderShape) -> Result<Self> {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut h_xedge = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                let p = [grid.x1(i as isize) - 0.5 * grid.dx, grid.x2(j as isize)];
                h_xedge.push(shape.height(p)?);
            }
        }
        let mut h_yedge = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            for i in 0..nx {
                let p = [grid.x1(i as isize), grid.x2(j as isize) - 0.5 * grid.dy];
                h_yedge.push(shape.height(p)?);
            }
        }
        let slope = grid
            .nodes()
            .map(|p| shape.slope_x1(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            h_xedge,
            h_yedge,
            slope,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Nodal `d h0 / d x1`.
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn assemble(&self, beta: f64, gamma: f64) -> Result<DiscreteSystem> {
        if !(beta > 0.0) {
            return Err(Error::NonPositiveClearance(beta));
        }
        if !gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite"));
        }
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let n = nx * ny;
        let rx = g.dy / g.dx;
        let ry = g.dx / g.dy;
        let cube = |h: f64| (h + beta).powi(3);

        let mut diag = vec![0.0; n];
        let mut links = vec![[Link::EMPTY; 4]; n];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let west = cube(self.h_xedge[j * (nx + 1) + i]) * rx;
                let east = cube(self.h_xedge[j * (nx + 1) + i + 1]) * rx;
                let south = cube(self.h_yedge[j * nx + i]) * ry;
                let north = cube(self.h_yedge[(j + 1) * nx + i]) * ry;
                diag[k] = west + east + south + north;
                let l = &mut links[k];
                if i > 0 {
                    l[0] = Link {
                        node: (k - 1) as u32,
                        weight: west,
                    };
                }
                if i + 1 < nx {
                    l[1] = Link {
                        node: (k + 1) as u32,
                        weight: east,
                    };
                }
                if j > 0 {
                    l[2] = Link {
                        node: (k - nx) as u32,
                        weight: south,
                    };
                }
                if j + 1 < ny {
                    l[3] = Link {
                        node: (k + nx) as u32,
                        weight: north,
                    };
                }
            }
        }
        let area = g.cell_area();
        let wedge: Vec<f64> = self.slope.iter().map(|s| -s * area).collect();
        let load = wedge.iter().map(|w| w - gamma * area).collect();
        Ok(DiscreteSystem {
            diag,
            links,
            load,
            wedge,
            nodes: (0..n).collect(),
            cell_area: area,
            beta,
            gamma,
        })
    }
}

/// Five-point discretization of `-div((h0 + beta)^3 grad q)` with zero
/// boundary values, together with the load `b_i = -(d h0/d x1 + gamma) dx dy`.
///
/// The operator is a symmetric M-matrix. Unknowns are a subset of grid
/// nodes: the full interior after assembly, or a sub-region after
/// [`DiscreteSystem::restrict`].
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    diag: Vec<f64>,
    links: Vec<[Link; 4]>,
    load: Vec<f64>,
    wedge: Vec<f64>,
    nodes: Vec<usize>,
    cell_area: f64,
    beta: f64,
    gamma: f64,
}

pub fn assemble_system(
    grid: &Grid,
    shape: &SliderShape,
    beta: f64,
    gamma: f64,
) -> Result<DiscreteSystem> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveClearance(beta));
    }
    Stencil::new(grid, shape)?.assemble(beta, gamma)
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Right-hand side `b`.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Wedge part of the load, `-d h0/d x1 * dx dy`.
    pub fn wedge_load(&self) -> &[f64] {
        &self.wedge
    }

    /// Load of the unit source, `dx dy` at every node.
    pub fn unit_load(&self) -> Vec<f64> {
        vec![self.cell_area; self.len()]
    }

    /// Grid index of each unknown.
    pub fn grid_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Off-diagonal entries `(column, value)` of row `i`, values `<= 0`.
    pub fn off_diagonal(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.links[i]
            .iter()
            .filter(|l| l.node != NONE)
            .map(|l| (l.node as usize, -l.weight))
    }

    pub(crate) fn links(&self) -> &[[Link; 4]] {
        &self.links
    }

    /// `A p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(p, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.diag[i] * p[i];
            for l in &self.links[i] {
                if l.node != NONE {
                    s -= l.weight * p[l.node as usize];
                }
            }
            *o = s;
        }
    }

    /// `A p - b`.
    pub fn residual(&self, p: &[f64]) -> Vec<f64> {
        let mut r = self.apply(p);
        for (r, b) in r.iter_mut().zip(&self.load) {
            *r -= b;
        }
        r
    }

    /// Same operator with a different load vector.
    pub fn with_load(&self, load: Vec<f64>) -> Result<Self> {
        if load.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: load.len(),
            });
        }
        Ok(Self {
            load,
            ..self.clone()
        })
    }

    /// Principal sub-system on the unknowns for which `keep` holds.
    ///
    /// Dropped nodes act as zero Dirichlet data for the kept ones, which is
    /// the discrete form of a problem posed on a sub-domain `U` with
    /// `q = 0` on its boundary.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut map = vec![NONE; self.len()];
        let mut kept = Vec::new();
        for (i, slot) in map.iter_mut().enumerate() {
            if keep(i) {
                *slot = kept.len() as u32;
                kept.push(i);
            }
        }
        let links = kept
            .iter()
            .map(|&i| {
                let mut row = [Link::EMPTY; 4];
                for (slot, l) in row.iter_mut().zip(&self.links[i]) {
                    if l.node != NONE && map[l.node as usize] != NONE {
                        *slot = Link {
                            node: map[l.node as usize],
                            weight: l.weight,
                        };
                    }
                }
                row
            })
            .collect();
        Self {
            diag: kept.iter().map(|&i| self.diag[i]).collect(),
            links,
            load: kept.iter().map(|&i| self.load[i]).collect(),
            wedge: kept.iter().map(|&i| self.wedge[i]).collect(),
            nodes: kept.iter().map(|&i| self.nodes[i]).collect(),
            cell_area: self.cell_area,
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    /// Writes `x1,x2,p,residual,active` for every unknown.
    pub fn write_debug_csv<W: Write>(&self, grid: &Grid, p: &[f64], mut out: W) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: p.len(),
            });
        }
        let r = self.residual(p);
        writeln!(out, "x1,x2,p,residual,active")?;
        for (i, &k) in self.nodes.iter().enumerate() {
            let x: Point = grid.node(k);
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{}",
                x[0],
                x[1],
                p[i],
                r[i],
                p[i] == 0.0
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainRect};

    fn grid(n: usize) -> Grid {
        build_grid(DomainRect::centered_square(1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn flat_is_scaled_laplacian() {
        let g = grid(3);
        let s = assemble_system(&g, &SliderShape::Flat, 1.0, -1.0).unwrap();
        for i in 0..9 {
            assert_eq!(s.diag()[i], 4.0);
            assert_eq!(s.load()[i], 0.25);
            for (_, v) in s.off_diagonal(i) {
                assert_eq!(v, -1.0);
            }
        }
        assert_eq!(s.off_diagonal(4).count(), 4);
        assert_eq!(s.off_diagonal(0).count(), 2);

        let s2 = assemble_system(&g, &SliderShape::Flat, 2.0, -1.0).unwrap();
        assert_eq!(s2.diag()[4], 32.0);
    }

    #[test]
    fn m_matrix_and_symmetry() {
        let g = grid(9);
        for shape in [
            SliderShape::line(2.0).unwrap(),
            SliderShape::point(1.5).unwrap(),
        ] {
            let s = assemble_system(&g, &shape, 0.05, 0.3).unwrap();
            for i in 0..s.len() {
                assert!(s.diag()[i] > 0.0);
                let mut off = 0.0;
                for (j, v) in s.off_diagonal(i) {
                    assert!(v < 0.0);
                    off += -v;
                    let back: Vec<_> = s.off_diagonal(j).filter(|&(c, _)| c == i).collect();
                    assert_eq!(back, vec![(i, v)]);
                }
                assert!(s.diag()[i] >= off);
            }
        }
    }

    #[test]
    fn load_signs() {
        let g = grid(15);
        for shape in [
            SliderShape::line(2.0).unwrap(),
            SliderShape::point(2.0).unwrap(),
            SliderShape::Flat,
        ] {
            let v1 = crate::geometry::compute_v1(&shape, &g);
            let s = assemble_system(&g, &shape, 1.0, v1).unwrap();
            assert!(s.load().iter().all(|&b| b <= 0.0));
        }
        // node at x1 = -0.5 on a 7x7 grid of [-1,1]^2 (dx = 0.25)
        let g = grid(7);
        let s = assemble_system(&g, &SliderShape::line(2.0).unwrap(), 0.1, 0.0).unwrap();
        let k = g.index(1, 3);
        assert_eq!(g.node(k), [-0.5, 0.0]);
        assert!((s.load()[k] - g.cell_area()).abs() < 1e-15);
    }

    #[test]
    fn rejects_contact() {
        let g = grid(3);
        assert!(matches!(
            assemble_system(&g, &SliderShape::Flat, 0.0, 0.0),
            Err(Error::NonPositiveClearance(_))
        ));
        assert!(assemble_system(&g, &SliderShape::Flat, -1.0, 0.0).is_err());
    }

    #[test]
    fn restriction_keeps_principal_block() {
        let g = grid(5);
        let s = assemble_system(&g, &SliderShape::line(2.0).unwrap(), 0.3, -0.2).unwrap();
        let keep = |k: usize| {
            let (i, j) = g.ij(k);
            (1..4).contains(&i) && (2..5).contains(&j)
        };
        let r = s.restrict(keep);
        assert_eq!(r.len(), 9);
        // full operator applied to a vector supported on the block equals the
        // restricted operator on the block
        let mut p = vec![0.0; s.len()];
        let mut sub = Vec::new();
        for (n, &k) in r.grid_nodes().iter().enumerate() {
            p[k] = 1.0 + n as f64;
            sub.push(1.0 + n as f64);
        }
        let full = s.apply(&p);
        let part = r.apply(&sub);
        for (n, &k) in r.grid_nodes().iter().enumerate() {
            assert!((full[k] - part[n]).abs() < 1e-14);
        }
    }

    #[test]
    fn debug_dump() {
        let g = grid(3);
        let s = assemble_system(&g, &SliderShape::Flat, 1.0, -1.0).unwrap();
        let mut buf = Vec::new();
        s.write_debug_csv(&g, &[0.0; 9], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("x1,x2,p,residual,active\n-0.5,-0.5,0.0,-0.25,true"));
    }
}
