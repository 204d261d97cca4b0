//! Piecewise-linear finite elements on a uniform 1D mesh with homogeneous
//! Dirichlet boundary conditions.
//!
//! Only interior nodes carry degrees of freedom. With the `Y` inner product
//! taken as the H¹ seminorm, the Gram matrix `X` coincides with the unit
//! stiffness matrix, so the coercivity constant of `a(v, w; μ) = μ (v', w')`
//! is exactly `μ`.

use crate::error::{Error, Result};
use crate::linalg::SymTridiag;

/// Uniform mesh of `[a, b]` with `n_el` elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    a: f64,
    b: f64,
    n_el: usize,
    h: f64,
}

pub fn build_mesh(a: f64, b: f64, n_el: usize) -> Result<Mesh1D> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::invalid(format!(
            "mesh interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    if n_el < 2 {
        return Err(Error::invalid(format!(
            "mesh needs at least 2 elements for an interior node, got {n_el}"
        )));
    }
    Ok(Mesh1D {
        a,
        b,
        n_el,
        h: (b - a) / n_el as f64,
    })
}

impl Mesh1D {
    pub fn left(&self) -> f64 {
        self.a
    }

    pub fn right(&self) -> f64 {
        self.b
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_dof(&self) -> usize {
        self.n_el - 1
    }

    /// Coordinate of interior dof `i` (0-based), i.e. mesh node `i + 1`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.h
    }

    /// Nodal interpolant of `f` restricted to interior nodes.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_dof()).map(|i| f(self.node(i))).collect()
    }
}

/// Mass matrix `(φ_i, φ_j)`: diagonal `2h/3`, off-diagonal `h/6`.
pub fn assemble_mass(mesh: &Mesh1D) -> SymTridiag {
    let h = mesh.h();
    let n = mesh.n_dof();
    SymTridiag::new(vec![2.0 * h / 3.0; n], vec![h / 6.0; n - 1]).expect("n_dof >= 1")
}

/// Unit stiffness matrix `(φ_i', φ_j')`: diagonal `2/h`, off-diagonal `-1/h`.
pub fn assemble_stiffness(mesh: &Mesh1D) -> SymTridiag {
    let h = mesh.h();
    let n = mesh.n_dof();
    SymTridiag::new(vec![2.0 / h; n], vec![-1.0 / h; n - 1]).expect("n_dof >= 1")
}

// 3-point Gauss-Legendre on [-1, 1]
const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Load vector `(f, φ_j)` by 3-point Gauss quadrature on every element.
pub fn assemble_load(f: impl Fn(f64) -> f64, mesh: &Mesh1D) -> Vec<f64> {
    let n = mesh.n_dof();
    let h = mesh.h();
    let mut load = vec![0.0; n];
    for e in 0..mesh.n_el() {
        let x0 = mesh.left() + e as f64 * h;
        for (xi, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            // reference coordinate s in [0, 1]
            let s = 0.5 * (xi + 1.0);
            let fx = f(x0 + s * h) * w * 0.5 * h;
            // element e spans mesh nodes e and e+1; interior dof i is node i+1
            if e >= 1 {
                load[e - 1] += fx * (1.0 - s);
            }
            if e < n {
                load[e] += fx * s;
            }
        }
    }
    load
}

/// Assembled spatial operators.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub mass: SymTridiag,
    pub stiffness: SymTridiag,
    /// Gram matrix of the `Y` inner product (H¹ seminorm, equal to `stiffness`).
    pub inner: SymTridiag,
}

impl FemMatrices {
    pub fn new(mesh: &Mesh1D) -> Self {
        let stiffness = assemble_stiffness(mesh);
        Self {
            mass: assemble_mass(mesh),
            inner: stiffness.clone(),
            stiffness,
        }
    }

    pub fn n_dof(&self) -> usize {
        self.mass.dim()
    }
}
