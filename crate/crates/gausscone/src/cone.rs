//! Pointed full-dimensional simplicial cones, their exact duals, and the
//! spherical patches Omega_C = S^{n-1} ∩ int C and Omega_{C°} = S^{n-1} ∩ int C°.
//!
//! Only simplicial cones (exactly n linearly independent generators) are
//! supported: the dual is then a single linear solve, and the facet normals of
//! C coincide with the generators of C°, so the dual map is an exact swap.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Strict interior margin for the open patches Omega_C, Omega_{C°}.
///
/// A point x counts as interior only if every facet inequality clears
/// `INTERIOR_MARGIN * ||x||`; this keeps all downstream pairings |<u,v>|
/// bounded away from zero before they reach a logarithm.
pub const INTERIOR_MARGIN: f64 = 1e-10;

/// Closure-membership tolerance for cl Omega_C / cl Omega_{C°} tests.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Condition-number guard for generator matrices.
pub const CONDITION_LIMIT: f64 = 1e12;

const UNIT_NORM_TOL: f64 = 1e-12;

/// A unit vector of S^{n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    coords: DVector<f64>,
}

impl Direction {
    /// Wraps a vector that is already unit length (within 1e-12).
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::domain(format!(
                "Direction::new: vector norm {norm} is not 1 within {UNIT_NORM_TOL:.0e}"
            )));
        }
        Ok(Direction { coords })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::domain(
                "Direction::normalized: vector is zero or non-finite",
            ));
        }
        Ok(Direction {
            coords: coords / norm,
        })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::normalized(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.coords.dot(&other.coords)
    }

    pub fn dot_vec(&self, other: &DVector<f64>) -> f64 {
        self.coords.dot(other)
    }

    /// The point at distance `r` along this direction.
    pub fn scale(&self, r: f64) -> DVector<f64> {
        &self.coords * r
    }
}

/// A pointed, full-dimensional simplicial cone together with its exact dual.
///
/// For a simplicial cone the outward facet normals are exactly the generators
/// of the dual cone (index k pairs facet k with generator k: `<dual[k], gen[i]>`
/// is negative iff i == k, zero otherwise), so a single list backs both views.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    dim: usize,
    generators: Vec<Direction>,
    duals: Vec<Direction>,
}

impl Cone {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// V-representation of C: the n extreme ray directions.
    pub fn generators(&self) -> &[Direction] {
        &self.generators
    }

    /// Outward facet normals of C, oriented so that `<h, y> <= 0` on C.
    pub fn facet_normals(&self) -> &[Direction] {
        &self.duals
    }

    /// V-representation of the dual cone C°.
    pub fn dual_generators(&self) -> &[Direction] {
        &self.duals
    }

    /// The dual cone C° = {x : <x,y> <= 0 for all y in C}.
    ///
    /// Exact involution: `c.dual().dual() == c` bit for bit.
    pub fn dual(&self) -> Cone {
        Cone {
            dim: self.dim,
            generators: self.duals.clone(),
            duals: self.generators.clone(),
        }
    }

    /// Strict interior test for int C with relative margin [`INTERIOR_MARGIN`].
    pub fn interior_contains(&self, x: &DVector<f64>) -> bool {
        let norm = x.norm();
        if !norm.is_finite() || norm == 0.0 {
            return false;
        }
        let bound = -INTERIOR_MARGIN * norm;
        self.duals.iter().all(|h| h.dot_vec(x) < bound)
    }

    /// Closure test for cl C with relative tolerance [`CLOSURE_TOL`].
    pub fn closure_contains(&self, x: &DVector<f64>) -> bool {
        let norm = x.norm();
        if !norm.is_finite() {
            return false;
        }
        let bound = CLOSURE_TOL * norm.max(1.0);
        self.duals.iter().all(|h| h.dot_vec(x) <= bound)
    }

    /// Strict interior test for int C° without materializing the dual cone
    /// (the facet normals of C° are exactly the generators of C).
    pub fn dual_interior_contains(&self, x: &DVector<f64>) -> bool {
        let norm = x.norm();
        if !norm.is_finite() || norm == 0.0 {
            return false;
        }
        let bound = -INTERIOR_MARGIN * norm;
        self.generators.iter().all(|g| g.dot_vec(x) < bound)
    }

    /// Closure test for cl C°.
    pub fn dual_closure_contains(&self, x: &DVector<f64>) -> bool {
        let norm = x.norm();
        if !norm.is_finite() {
            return false;
        }
        let bound = CLOSURE_TOL * norm.max(1.0);
        self.generators.iter().all(|g| g.dot_vec(x) <= bound)
    }

    /// Deterministic sample of `count` directions in Omega_C.
    ///
    /// Draws positive coefficient vectors against the generators and
    /// normalizes; every returned direction passes [`Cone::interior_contains`].
    pub fn sample_interior_directions(&self, count: usize, seed: u64) -> Vec<Direction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_interior_with(count, &mut rng)
    }

    pub(crate) fn sample_interior_with<R: RngExt>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Vec<Direction> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut attempts = 0;
            loop {
                let mut y = DVector::zeros(self.dim);
                for g in &self.generators {
                    let a: f64 = rng.random_range(0.05..1.0);
                    y.axpy(a, g.coords(), 1.0);
                }
                if self.interior_contains(&y) {
                    out.push(Direction::normalized(y).expect("positive combination is nonzero"));
                    break;
                }
                attempts += 1;
                assert!(
                    attempts < 10_000,
                    "cone too degenerate to sample interior directions"
                );
            }
        }
        out
    }
}

/// Builds a simplicial cone from `n` unit generators in R^n.
///
/// The dual generators (= facet normals) are the normalized rows of -G^{-1},
/// where G has the generators as columns: row k of G^{-1} pairs to delta_{ki}
/// against generator i, which gives both the outward orientation and the
/// extreme rays of C° at once.
pub fn build_simplicial_cone(generators: Vec<Direction>) -> Result<Cone> {
    let n = generators.len();
    if n < 2 {
        return Err(Error::domain("cone dimension must be at least 2"));
    }
    for (i, g) in generators.iter().enumerate() {
        if g.dim() != n {
            return Err(Error::domain(format!(
                "generator {i} has length {} but the cone needs {n} generators of length {n}",
                g.dim()
            )));
        }
    }
    let g_mat = DMatrix::from_columns(
        &generators
            .iter()
            .map(|d| d.coords().clone())
            .collect::<Vec<_>>(),
    );

    let svd = g_mat.clone().svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::SingularGenerators {
            cond,
            limit: CONDITION_LIMIT,
        });
    }

    let inv = g_mat.lu().try_inverse().ok_or(Error::SingularGenerators {
        cond,
        limit: CONDITION_LIMIT,
    })?;

    let mut duals = Vec::with_capacity(n);
    for k in 0..n {
        let row = -inv.row(k).transpose();
        duals.push(Direction::normalized(row)?);
    }

    Ok(Cone {
        dim: n,
        generators,
        duals,
    })
}

/// Builds the cone from raw (not necessarily unit) generator vectors.
pub fn build_simplicial_cone_from_rows(rows: &[Vec<f64>]) -> Result<Cone> {
    let generators = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Direction::from_slice(r)
                .map_err(|_| Error::domain(format!("generator {i} is zero or non-finite")))
        })
        .collect::<Result<Vec<_>>>()?;
    build_simplicial_cone(generators)
}

/// Random well-conditioned simplicial cone, for instance generation and tests.
pub fn random_simplicial_cone<R: RngExt>(n: usize, rng: &mut R) -> Cone {
    loop {
        let mut gens = Vec::with_capacity(n);
        for _ in 0..n {
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            match Direction::normalized(v) {
                Ok(d) => gens.push(d),
                Err(_) => break,
            }
        }
        if gens.len() < n {
            continue;
        }
        match build_simplicial_cone(gens) {
            Ok(cone) => {
                // keep test cones comfortably non-degenerate
                let g = DMatrix::from_columns(
                    &cone
                        .generators()
                        .iter()
                        .map(|d| d.coords().clone())
                        .collect::<Vec<_>>(),
                );
                let svd = g.svd(false, false);
                if svd.singular_values.max() / svd.singular_values.min() < 50.0 {
                    return cone;
                }
            }
            Err(_) => continue,
        }
    }
}

/// First-orthant cone in R^n; the workhorse fixture.
pub fn orthant(n: usize) -> Cone {
    let gens = (0..n)
        .map(|i| {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            Direction::new(v).unwrap()
        })
        .collect();
    build_simplicial_cone(gens).expect("orthant is well conditioned")
}
