//! The two exact polyhedral representations of C-pseudo-cones and the copolar
//! involution between them.
//!
//! An H-rep pseudo-cone is a Wulff shape: C cut by halfspaces `<y,u_j> <= -f_j`
//! with normals u_j in Omega_{C°} and offsets f_j > 0. A V-rep pseudo-cone is a
//! convexification: conv{rho_i v_i} + C with directions v_i in Omega_C and
//! radii rho_i > 0. The copolar K* = {x : <x,y> <= -1 on K} swaps the two
//! representations with reciprocal values and dual recession cone, and is an
//! exact involution.
//!
//! Closed forms used throughout:
//!   support of a V-rep:  hbar(u) = min_i |<u,v_i>| rho_i
//!   radial of an H-rep:  1/rho(v) = min_j |<v,u_j>| / f_j
//! The remaining two evaluations (radial of a V-rep, support of an H-rep) are
//! small linear programs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cone::{Cone, Direction};
use crate::error::{Error, Result};
use crate::lp::{self, LpStatus};

/// Inner products with magnitude below this floor indicate a direction pair
/// that the open-patch theory rules out; evaluators refuse them instead of
/// returning an overflowing ratio or logarithm.
pub const TRANSVERSALITY_FLOOR: f64 = 1e-12;

/// C ∩ ⋂_j {y : <y, u_j> <= -f_j}, the Wulff shape of (C, {u_j}, f).
#[derive(Debug, Clone, PartialEq)]
pub struct HRepPseudoCone {
    cone: Arc<Cone>,
    normals: Vec<Direction>,
    offsets: Vec<f64>,
}

/// conv{rho_i v_i} + C, the convexification of (C, {v_i}, rho).
#[derive(Debug, Clone, PartialEq)]
pub struct VRepPseudoCone {
    cone: Arc<Cone>,
    directions: Vec<Direction>,
    radii: Vec<f64>,
}

/// Either representation, for I/O and audits that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoCone {
    V(VRepPseudoCone),
    H(HRepPseudoCone),
}

/// Builds the Wulff shape `[f]`. Normals must lie strictly inside Omega_{C°},
/// offsets must be positive and finite; the set is then automatically nonempty.
pub fn wulff_shape(
    cone: Arc<Cone>,
    normals: Vec<Direction>,
    offsets: Vec<f64>,
) -> Result<HRepPseudoCone> {
    if normals.is_empty() || normals.len() != offsets.len() {
        return Err(Error::domain(
            "wulff_shape: need equally many normals and offsets, at least one",
        ));
    }
    for (j, u) in normals.iter().enumerate() {
        if !cone.dual_interior_contains(u.coords()) {
            return Err(Error::domain(format!(
                "wulff_shape: normals[{j}] is not strictly interior to Omega_{{C°}}"
            )));
        }
    }
    for (j, &f) in offsets.iter().enumerate() {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::NonPositiveOffset { index: j, value: f });
        }
    }
    Ok(HRepPseudoCone {
        cone,
        normals,
        offsets,
    })
}

/// Builds the convexification `<f>`. Directions must lie strictly inside
/// Omega_C, radii must be positive and finite.
pub fn convexification(
    cone: Arc<Cone>,
    directions: Vec<Direction>,
    radii: Vec<f64>,
) -> Result<VRepPseudoCone> {
    if directions.is_empty() || directions.len() != radii.len() {
        return Err(Error::domain(
            "convexification: need equally many directions and radii, at least one",
        ));
    }
    for (i, v) in directions.iter().enumerate() {
        if !cone.interior_contains(v.coords()) {
            return Err(Error::domain(format!(
                "convexification: directions[{i}] is not strictly interior to Omega_C"
            )));
        }
    }
    for (i, &r) in radii.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::NonPositiveRadius { index: i, value: r });
        }
    }
    Ok(VRepPseudoCone {
        cone,
        directions,
        radii,
    })
}

impl VRepPseudoCone {
    pub fn cone(&self) -> &Arc<Cone> {
        &self.cone
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a convexification always contains its prescribed points
    }

    /// The prescribed points rho_i v_i.
    pub fn vertex_points(&self) -> Vec<DVector<f64>> {
        self.directions
            .iter()
            .zip(&self.radii)
            .map(|(v, &r)| v.scale(r))
            .collect()
    }

    /// Support value hbar_K(u) = min_i |<u, v_i>| rho_i for u in cl Omega_{C°}.
    pub fn support_value(&self, u: &Direction) -> Result<f64> {
        if !self.cone.dual_closure_contains(u.coords()) {
            return Err(Error::domain(
                "support_value: direction is outside cl Omega_{C°}",
            ));
        }
        let mut best = f64::INFINITY;
        for (i, v) in self.directions.iter().enumerate() {
            let ip = u.dot(v).abs();
            if ip < TRANSVERSALITY_FLOOR {
                return Err(Error::NonTransversalPair {
                    context: format!("support_value: u against directions[{i}]"),
                    value: ip,
                });
            }
            best = best.min(ip * self.radii[i]);
        }
        Ok(best)
    }

    /// Radial value rho_K(v) for v strictly inside Omega_C: the least r with
    /// r v in conv{p_i} + C, solved as a linear program.
    ///
    /// The returned r is verified internally by both LP certificates: the
    /// primal witness reconstructs r v (so r v is in K), and the dual witness
    /// bounds every feasible radius from below (so any shrunk multiple of v
    /// leaves K).
    pub fn radial_value(&self, v: &Direction) -> Result<f64> {
        self.radial_lp(v).map(|(r, _, _)| r)
    }

    /// Radial value together with one supporting outer normal at the radial
    /// point (the forward radial Gauss map alpha_K), read off the LP dual.
    /// The flag is true when the optimal basis is degenerate, i.e. the normal
    /// may be non-unique (v sits on a kink).
    pub fn radial_with_normal(&self, v: &Direction) -> Result<(f64, Direction, bool)> {
        let (r, dual, degenerate) = self.radial_lp(v)?;
        let n = self.cone.dim();
        let mut y = DVector::zeros(n);
        for i in 0..n {
            y[i] = -dual[i];
        }
        let normal = Direction::normalized(y).map_err(|_| Error::LpFailure {
            reason: "radial LP returned a zero dual vector".into(),
        })?;
        Ok((r, normal, degenerate))
    }

    fn radial_lp(&self, v: &Direction) -> Result<(f64, DVector<f64>, bool)> {
        if !self.cone.interior_contains(v.coords()) {
            return Err(Error::domain(
                "radial_value: direction is not strictly interior to Omega_C",
            ));
        }
        let n = self.cone.dim();
        let m = self.len();
        let points = self.vertex_points();
        let gens = self.cone.generators();

        // variables: r, alpha_1..m, beta_1..n
        // rows: r v - sum alpha_i p_i - sum beta_k g_k = 0  (n rows), sum alpha = 1
        let cols = 1 + m + n;
        let mut a = DMatrix::zeros(n + 1, cols);
        for row in 0..n {
            a[(row, 0)] = v.coords()[row];
            for (i, p) in points.iter().enumerate() {
                a[(row, 1 + i)] = -p[row];
            }
            for (k, g) in gens.iter().enumerate() {
                a[(row, 1 + m + k)] = -g.coords()[row];
            }
        }
        for i in 0..m {
            a[(n, 1 + i)] = 1.0;
        }
        let mut b = DVector::zeros(n + 1);
        b[n] = 1.0;
        let mut c = DVector::zeros(cols);
        c[0] = 1.0;

        let out = lp::solve_standard_form(&a, &b, &c)?;
        if out.status != LpStatus::Optimal {
            return Err(Error::LpFailure {
                reason: format!("radial LP status {:?}", out.status),
            });
        }
        let sol = out.solution.expect("optimal LP carries a solution");
        let r = sol.objective;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::LpFailure {
                reason: format!("radial LP returned non-positive radius {r}"),
            });
        }

        // Primal witness: the basis must actually reconstruct r v, which
        // certifies r v in K, i.e. rho <= r.
        let scale = points.iter().map(|p| p.amax()).fold(r, f64::max);
        let recon = (&a * &sol.x - &b).amax();
        if recon > 1e-7 * scale.max(1.0) {
            return Err(Error::LpFailure {
                reason: format!("radial LP witness residual {recon:.3e}"),
            });
        }
        // Dual certificate: y with <v,y> <= 1, <p_i,y> >= y_s, <g_k,y> >= 0
        // proves r' >= y_s for every feasible r', so y_s ~ r pins the boundary
        // (every shrunk multiple of v leaves the set). This stays sharp even
        // for rays grazing the recession cone, where a membership re-solve
        // would drown the shrink in its feasibility tolerance.
        let y = sol.dual.rows(0, n).into_owned();
        let ys = sol.dual[n];
        let dtol = 1e-7 * scale.max(1.0);
        let mut dual_ok = v.dot_vec(&y) <= 1.0 + 1e-9 && ys >= r - dtol;
        if dual_ok {
            for p in &points {
                if p.dot(&y) < ys - dtol {
                    dual_ok = false;
                    break;
                }
            }
        }
        if dual_ok {
            for g in gens {
                if g.dot_vec(&y) < -1e-9 {
                    dual_ok = false;
                    break;
                }
            }
        }
        if !dual_ok {
            return Err(Error::LpFailure {
                reason: "radial LP optimality certificate failed".into(),
            });
        }
        Ok((r, sol.dual, sol.degenerate))
    }

    /// Membership test x in conv{p_i} + C via LP feasibility.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        let n = self.cone.dim();
        let m = self.len();
        let points = self.vertex_points();
        let gens = self.cone.generators();
        let cols = m + n;
        let mut a = DMatrix::zeros(n + 1, cols);
        for row in 0..n {
            for (i, p) in points.iter().enumerate() {
                a[(row, i)] = p[row];
            }
            for (k, g) in gens.iter().enumerate() {
                a[(row, m + k)] = g.coords()[row];
            }
        }
        for i in 0..m {
            a[(n, i)] = 1.0;
        }
        let mut b = DVector::zeros(n + 1);
        for row in 0..n {
            b[row] = x[row];
        }
        b[n] = 1.0;
        let c = DVector::zeros(cols);
        let out = lp::solve_standard_form(&a, &b, &c)?;
        Ok(out.status == LpStatus::Optimal)
    }

    /// The copolar K* = [1/rho on the same directions], a C°-pseudo-cone.
    pub fn copolar(&self) -> HRepPseudoCone {
        HRepPseudoCone {
            cone: Arc::new(self.cone.dual()),
            normals: self.directions.clone(),
            offsets: self.radii.iter().map(|r| 1.0 / r).collect(),
        }
    }

    /// Structural internality check: all prescribed vertices strictly inside
    /// int C (construction enforces this; kept as a queryable predicate).
    pub fn is_internal(&self) -> bool {
        self.directions
            .iter()
            .all(|v| self.cone.interior_contains(v.coords()))
    }

    /// Dilation by a > 0.
    pub fn scaled(&self, a: f64) -> Result<VRepPseudoCone> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::NonPositiveRadius { index: 0, value: a });
        }
        Ok(VRepPseudoCone {
            cone: self.cone.clone(),
            directions: self.directions.clone(),
            radii: self.radii.iter().map(|r| r * a).collect(),
        })
    }

    /// Euclidean distance from the origin to the set, for the unit-distance
    /// output gauge. Minimizes |P alpha + G beta|^2 by projected gradient over
    /// the vertex simplex, with the recession part solved exactly per step by
    /// active-set enumeration (the cone has at most 4 generators).
    pub fn distance_to_origin(&self) -> f64 {
        let points = self.vertex_points();
        let gens: Vec<&DVector<f64>> = self.cone.generators().iter().map(|g| g.coords()).collect();
        let m = points.len();

        let eval = |alpha: &[f64]| -> (f64, DVector<f64>) {
            let mut base = DVector::zeros(self.cone.dim());
            for (a, p) in alpha.iter().zip(&points) {
                base.axpy(*a, p, 1.0);
            }
            let q = base.clone() + nnls_cone_offset(&gens, &base);
            (q.norm_squared(), q)
        };

        let mut alpha = vec![1.0 / m as f64; m];
        let (mut f, mut q) = eval(&alpha);
        let mut step = 1.0f64;
        for _ in 0..800 {
            // Danskin: the inner minimizer is optimal, so only P^T q remains
            let grad: Vec<f64> = points.iter().map(|p| 2.0 * q.dot(p)).collect();
            step = (step * 4.0).min(16.0);
            let mut improved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let trial = project_simplex(&trial);
                let (ft, qt) = eval(&trial);
                if ft < f - 1e-18 {
                    alpha = trial;
                    f = ft;
                    q = qt;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        f.sqrt()
    }

    /// Dilate so the distance from the origin becomes exactly 1.
    pub fn scaled_to_unit_distance(&self) -> Result<VRepPseudoCone> {
        let d = self.distance_to_origin();
        self.scaled(1.0 / d)
    }

    /// Drops prescribed vertices that already lie in the convexification of
    /// the others (redundant vertices are otherwise retained by design).
    pub fn reduced(&self) -> Result<VRepPseudoCone> {
        if self.len() == 1 {
            return Ok(self.clone());
        }
        let mut keep_dirs = Vec::new();
        let mut keep_radii = Vec::new();
        let points = self.vertex_points();
        for i in 0..self.len() {
            let mut dirs = Vec::new();
            let mut radii = Vec::new();
            for j in 0..self.len() {
                if j != i {
                    dirs.push(self.directions[j].clone());
                    radii.push(self.radii[j]);
                }
            }
            let rest = VRepPseudoCone {
                cone: self.cone.clone(),
                directions: dirs,
                radii,
            };
            if !rest.contains(&points[i])? {
                keep_dirs.push(self.directions[i].clone());
                keep_radii.push(self.radii[i]);
            }
        }
        if keep_dirs.is_empty() {
            // mutually redundant duplicates; keep the first
            keep_dirs.push(self.directions[0].clone());
            keep_radii.push(self.radii[0]);
        }
        Ok(VRepPseudoCone {
            cone: self.cone.clone(),
            directions: keep_dirs,
            radii: keep_radii,
        })
    }
}

impl HRepPseudoCone {
    pub fn cone(&self) -> &Arc<Cone> {
        &self.cone
    }

    pub fn normals(&self) -> &[Direction] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        false // deep translates along any generator ray satisfy all constraints
    }

    /// Radial value rho_K(v) = max_j f_j / |<v, u_j>| for v in Omega_C.
    pub fn radial_value(&self, v: &Direction) -> Result<f64> {
        self.radial_with_active(v).map(|(r, _, _)| r)
    }

    /// Radial value plus the index of the binding constraint and a uniqueness
    /// flag (false when a second constraint is active within 1e-9 relative).
    pub fn radial_with_active(&self, v: &Direction) -> Result<(f64, usize, bool)> {
        if !self.cone.interior_contains(v.coords()) {
            return Err(Error::domain(
                "radial_value: direction is not strictly interior to Omega_C",
            ));
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_j = 0;
        let mut second = f64::NEG_INFINITY;
        for (j, u) in self.normals.iter().enumerate() {
            let ip = v.dot(u).abs();
            if ip < TRANSVERSALITY_FLOOR {
                return Err(Error::NonTransversalPair {
                    context: format!("radial_value: v against normals[{j}]"),
                    value: ip,
                });
            }
            let r = self.offsets[j] / ip;
            if r > best {
                second = best;
                best = r;
                best_j = j;
            } else if r > second {
                second = r;
            }
        }
        let unique = second < best * (1.0 - 1e-9);
        Ok((best, best_j, unique))
    }

    /// Support value hbar_K(u) = 1 / rho_{K*}(u) for u strictly interior to
    /// Omega_{C°}; the copolar radial is a linear program.
    pub fn support_value(&self, u: &Direction) -> Result<f64> {
        if !self.cone.dual_interior_contains(u.coords()) {
            return Err(Error::domain(
                "support_value: direction is not strictly interior to Omega_{C°}",
            ));
        }
        let r = self.copolar().radial_value(u)?;
        Ok(1.0 / r)
    }

    /// Halfspace membership with the default relative tolerance.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.contains_with_tol(x, 1e-9 * (x.norm() + 1.0))
    }

    /// Halfspace membership at an explicit absolute tolerance (0 for exact).
    pub fn contains_with_tol(&self, x: &DVector<f64>, tol: f64) -> bool {
        let cone_ok = self
            .cone
            .facet_normals()
            .iter()
            .all(|h| h.dot_vec(x) <= tol);
        cone_ok
            && self
                .normals
                .iter()
                .zip(&self.offsets)
                .all(|(u, &f)| u.dot_vec(x) <= -f + tol)
    }

    /// The copolar K* = <1/f on the same normals>, a C°-pseudo-cone.
    pub fn copolar(&self) -> VRepPseudoCone {
        VRepPseudoCone {
            cone: Arc::new(self.cone.dual()),
            directions: self.normals.clone(),
            radii: self.offsets.iter().map(|f| 1.0 / f).collect(),
        }
    }

    /// Dilation by a > 0.
    pub fn scaled(&self, a: f64) -> Result<HRepPseudoCone> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::NonPositiveOffset { index: 0, value: a });
        }
        Ok(HRepPseudoCone {
            cone: self.cone.clone(),
            normals: self.normals.clone(),
            offsets: self.offsets.iter().map(|f| f * a).collect(),
        })
    }

    /// Facet reduction by conjugation: a facet of K is redundant exactly when
    /// the matching vertex of K* is.
    pub fn reduced(&self) -> Result<HRepPseudoCone> {
        Ok(self.copolar().reduced()?.copolar())
    }
}

impl PseudoCone {
    pub fn cone(&self) -> &Arc<Cone> {
        match self {
            PseudoCone::V(k) => k.cone(),
            PseudoCone::H(k) => k.cone(),
        }
    }

    pub fn copolar(&self) -> PseudoCone {
        match self {
            PseudoCone::V(k) => PseudoCone::H(k.copolar()),
            PseudoCone::H(k) => PseudoCone::V(k.copolar()),
        }
    }
}

/// The cone offset G beta, beta >= 0, bringing `base + G beta` closest to the
/// origin. Exact active-set enumeration: with at most 4 generators the optimal
/// support is one of 16 subsets, each a tiny normal-equation solve.
fn nnls_cone_offset(gens: &[&DVector<f64>], base: &DVector<f64>) -> DVector<f64> {
    let n = gens.len();
    let dim = base.len();
    let mut best = DVector::zeros(dim);
    let mut best_val = base.norm_squared();
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = cols.len();
        let mut gt_g = DMatrix::zeros(k, k);
        let mut gt_b = DVector::zeros(k);
        for (r, &i) in cols.iter().enumerate() {
            gt_b[r] = -gens[i].dot(base);
            for (c, &j) in cols.iter().enumerate() {
                gt_g[(r, c)] = gens[i].dot(gens[j]);
            }
        }
        let Some(beta) = gt_g.lu().solve(&gt_b) else {
            continue;
        };
        if beta.iter().any(|&b| b < -1e-12) {
            continue;
        }
        let mut offset = DVector::zeros(dim);
        for (r, &i) in cols.iter().enumerate() {
            offset.axpy(beta[r], gens[i], 1.0);
        }
        let val = (base + &offset).norm_squared();
        if val < best_val {
            best_val = val;
            best = offset;
        }
    }
    best
}

/// Euclidean projection onto the probability simplex (sort-based rule:
/// theta from the largest k with sorted[k] > (prefix_sum - 1)/k).
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = sorted[0] - 1.0;
    for (i, &s) in sorted.iter().enumerate() {
        acc += s;
        let cand = (acc - 1.0) / (i + 1) as f64;
        if s > cand {
            theta = cand;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
