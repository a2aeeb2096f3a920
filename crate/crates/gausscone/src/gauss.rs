//! The radial Gauss machinery for atomic measures: the reverse radial Gauss
//! map as an argmax over prescribed vertices, the pushforward measure
//! lambda(K,·), and the integral identity that couples the two.
//!
//! Atomic measures violate the continuum hypothesis that lets the multi-point
//! normal set be ignored, so ties are first-class here: every atom whose
//! argmax is non-unique at [`TIE_EPS`] is reported, the assignment falls back
//! to the lowest maximizing index, and callers that need exactness split tied
//! mass fractionally (see the solver's certification).

use std::sync::Arc;

use crate::cone::{Cone, Direction};
use crate::error::{Error, Result};
use crate::pseudocone::{TRANSVERSALITY_FLOOR, VRepPseudoCone};

/// Relative tie tolerance: two vertices are considered tied for an atom when
/// their inner products differ by at most `TIE_EPS * |best|`.
pub const TIE_EPS: f64 = 1e-9;

/// Which spherical patch a measure lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureDomain {
    /// Omega_C = S^{n-1} ∩ int C (the mu side).
    OmegaC,
    /// Omega_{C°} = S^{n-1} ∩ int C° (the lambda side).
    OmegaCDual,
}

/// A finite positive atomic measure on one of the two spherical patches.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSphericalMeasure {
    domain: MeasureDomain,
    cone: Arc<Cone>,
    dirs: Vec<Direction>,
    weights: Vec<f64>,
    total: f64,
}

impl AtomicSphericalMeasure {
    pub fn new(
        cone: Arc<Cone>,
        domain: MeasureDomain,
        dirs: Vec<Direction>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if dirs.is_empty() || dirs.len() != weights.len() {
            return Err(Error::domain(
                "measure needs equally many directions and weights, at least one",
            ));
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                let _ = i;
                return Err(Error::MassZero);
            }
        }
        for (i, d) in dirs.iter().enumerate() {
            let ok = match domain {
                MeasureDomain::OmegaC => cone.interior_contains(d.coords()),
                MeasureDomain::OmegaCDual => cone.dual_interior_contains(d.coords()),
            };
            if !ok {
                let patch = match domain {
                    MeasureDomain::OmegaC => "Omega_C",
                    MeasureDomain::OmegaCDual => "Omega_{C°}",
                };
                return Err(Error::domain(format!(
                    "atom {i} is not strictly interior to {patch}"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::MassZero);
        }
        Ok(AtomicSphericalMeasure {
            domain,
            cone,
            dirs,
            weights,
            total,
        })
    }

    pub fn domain(&self) -> MeasureDomain {
        self.domain
    }

    pub fn cone(&self) -> &Arc<Cone> {
        &self.cone
    }

    pub fn dirs(&self) -> &[Direction] {
        &self.dirs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Same atoms with every weight multiplied by a > 0.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::MassZero);
        }
        AtomicSphericalMeasure::new(
            self.cone.clone(),
            self.domain,
            self.dirs.clone(),
            self.weights.iter().map(|w| w * a).collect(),
        )
    }
}

/// The pushforward of an atomic lambda under the reverse radial Gauss map of K.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardReport {
    /// Per-vertex-direction mass: entry i is lambda(K, {v_i}).
    pub masses: Vec<f64>,
    /// Per-atom chosen vertex index (lowest maximizer on ties).
    pub assignment: Vec<usize>,
    /// Indices of atoms whose argmax was non-unique at [`TIE_EPS`].
    pub ties: Vec<usize>,
}

/// The reverse radial Gauss map at u: the prescribed vertex attaining the
/// support of K in direction u, i.e. argmax_i <u, rho_i v_i>.
///
/// Returns the lowest maximizing index and a flag that is true when the two
/// best values agree within `TIE_EPS * |best|`.
pub fn reverse_radial_gauss(k: &VRepPseudoCone, u: &Direction) -> Result<(usize, bool)> {
    let set = argmax_set(k, u)?;
    Ok((set[0], set.len() > 1))
}

/// All vertex indices within the tie tolerance of the maximum, ascending.
pub fn argmax_set(k: &VRepPseudoCone, u: &Direction) -> Result<Vec<usize>> {
    if !k.cone().dual_interior_contains(u.coords()) {
        return Err(Error::domain(
            "reverse_radial_gauss: direction is not strictly interior to Omega_{C°}",
        ));
    }
    let vals = vertex_scores(k, u)?;
    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = best - TIE_EPS * best.abs();
    Ok((0..vals.len()).filter(|&i| vals[i] >= cut).collect())
}

fn vertex_scores(k: &VRepPseudoCone, u: &Direction) -> Result<Vec<f64>> {
    let mut vals = Vec::with_capacity(k.len());
    for (i, v) in k.directions().iter().enumerate() {
        let ip = u.dot(v);
        if ip.abs() < TRANSVERSALITY_FLOOR {
            return Err(Error::NonTransversalPair {
                context: format!("reverse_radial_gauss: u against directions[{i}]"),
                value: ip.abs(),
            });
        }
        vals.push(ip * k.radii()[i]);
    }
    Ok(vals)
}

/// Classifies every atom of lambda by its argmax vertex and accumulates the
/// pushforward masses. Mass is conserved exactly up to summation order.
pub fn pushforward(
    k: &VRepPseudoCone,
    lambda: &AtomicSphericalMeasure,
) -> Result<PushforwardReport> {
    if lambda.domain() != MeasureDomain::OmegaCDual {
        return Err(Error::domain("pushforward: lambda must live on Omega_{C°}"));
    }
    if lambda.cone().as_ref() != k.cone().as_ref() {
        return Err(Error::ConeMismatch);
    }
    let mut masses = vec![0.0; k.len()];
    let mut assignment = Vec::with_capacity(lambda.len());
    let mut ties = Vec::new();
    for (j, u) in lambda.dirs().iter().enumerate() {
        let set = argmax_set(k, u)?;
        let i = set[0];
        if set.len() > 1 {
            ties.push(j);
        }
        masses[i] += lambda.weights()[j];
        assignment.push(i);
    }
    Ok(PushforwardReport {
        masses,
        assignment,
        ties,
    })
}

/// Left side of the integral identity: ∫ g(alpha*_K(u)) dlambda(u), evaluated
/// atom by atom through the reverse map.
pub fn integrate<G: Fn(&Direction) -> f64>(
    g: G,
    k: &VRepPseudoCone,
    lambda: &AtomicSphericalMeasure,
) -> Result<f64> {
    let mut acc = 0.0;
    for (j, u) in lambda.dirs().iter().enumerate() {
        let (i, _) = reverse_radial_gauss(k, u)?;
        acc += lambda.weights()[j] * g(&k.directions()[i]);
    }
    Ok(acc)
}

/// Right side of the identity: ∫ g dlambda(K,·) over the vertex directions.
/// Agrees with [`integrate`] to roundoff since both traverse one assignment.
pub fn integrate_pushforward<G: Fn(&Direction) -> f64>(
    g: G,
    k: &VRepPseudoCone,
    report: &PushforwardReport,
) -> f64 {
    report
        .masses
        .iter()
        .zip(k.directions())
        .map(|(&m, v)| m * g(v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::orthant;
    use crate::pseudocone::convexification;

    const IS2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn dir(coords: &[f64]) -> Direction {
        Direction::from_slice(coords).unwrap()
    }

    fn two_vertex_k() -> VRepPseudoCone {
        let c = Arc::new(orthant(2));
        convexification(
            c,
            vec![dir(&[2.0, 1.0]), dir(&[1.0, 2.0])],
            vec![5f64.sqrt(), 5f64.sqrt()],
        )
        .unwrap()
    }

    fn lambda_on(c: &Arc<Cone>, atoms: &[(&[f64], f64)]) -> AtomicSphericalMeasure {
        AtomicSphericalMeasure::new(
            c.clone(),
            MeasureDomain::OmegaCDual,
            atoms.iter().map(|(d, _)| dir(d)).collect(),
            atoms.iter().map(|(_, w)| *w).collect(),
        )
        .unwrap()
    }

    #[test]
    fn argmax_picks_nearest_vertex() {
        let k = two_vertex_k();
        // values <u, p>: -2.0 at (2,1) vs -2.2 at (1,2)
        let (i, tie) = reverse_radial_gauss(&k, &dir(&[-0.6, -0.8])).unwrap();
        assert_eq!(i, 0);
        assert!(!tie);
        // brute force over vertices
        let u = dir(&[-0.6, -0.8]);
        let brute = k
            .vertex_points()
            .iter()
            .enumerate()
            .max_by(|a, b| u.dot_vec(a.1).partial_cmp(&u.dot_vec(b.1)).unwrap())
            .unwrap()
            .0;
        assert_eq!(i, brute);
    }

    #[test]
    fn diagonal_is_tied_by_symmetry() {
        let k = two_vertex_k();
        let (i, tie) = reverse_radial_gauss(&k, &dir(&[-IS2, -IS2])).unwrap();
        assert_eq!(i, 0, "lowest index on tie");
        assert!(tie);
    }

    #[test]
    fn single_vertex_takes_everything() {
        let c = Arc::new(orthant(2));
        let k = convexification(c.clone(), vec![dir(&[IS2, IS2])], vec![1.0]).unwrap();
        let lam = lambda_on(&c, &[(&[-0.6, -0.8], 0.3), (&[-0.9, -0.3], 0.7)]);
        let rep = pushforward(&k, &lam).unwrap();
        assert_eq!(rep.masses, vec![1.0]);
        assert_eq!(rep.assignment, vec![0, 0]);
        assert!(rep.ties.is_empty());
    }

    #[test]
    fn pushforward_fixture_half_half() {
        let k = two_vertex_k();
        let lam = lambda_on(k.cone(), &[(&[-0.6, -0.8], 0.5), (&[-0.8, -0.6], 0.5)]);
        let rep = pushforward(&k, &lam).unwrap();
        assert_eq!(rep.assignment, vec![0, 1]);
        assert!((rep.masses[0] - 0.5).abs() < 1e-15);
        assert!((rep.masses[1] - 0.5).abs() < 1e-15);
        assert!(rep.ties.is_empty());
    }

    #[test]
    fn diagonal_atom_reported_tied() {
        let k = two_vertex_k();
        let lam = lambda_on(
            k.cone(),
            &[
                (&[-0.6, -0.8], 0.4),
                (&[-IS2, -IS2], 0.2),
                (&[-0.8, -0.6], 0.4),
            ],
        );
        let rep = pushforward(&k, &lam).unwrap();
        assert_eq!(rep.ties, vec![1]);
        // tie mass went to the lowest index
        assert!((rep.masses[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mass_conservation_and_dilation_invariance() {
        let k = two_vertex_k();
        let lam = lambda_on(
            k.cone(),
            &[
                (&[-0.55, -0.835], 0.37),
                (&[-0.91, -0.41], 0.45),
                (&[-0.7, -0.71], 0.18),
            ],
        );
        let rep = pushforward(&k, &lam).unwrap();
        let s: f64 = rep.masses.iter().sum();
        assert!((s - lam.total_mass()).abs() <= 1e-12 * lam.total_mass());

        let rep3 = pushforward(&k.scaled(3.0).unwrap(), &lam).unwrap();
        assert_eq!(rep.assignment, rep3.assignment);
        assert_eq!(rep.masses, rep3.masses);
    }

    #[test]
    fn integral_identity_both_ways() {
        let k = two_vertex_k();
        let lam = lambda_on(k.cone(), &[(&[-0.6, -0.8], 0.5), (&[-0.8, -0.6], 0.5)]);
        let rep = pushforward(&k, &lam).unwrap();

        // g == 1 gives total mass on both sides
        let left = integrate(|_| 1.0, &k, &lam).unwrap();
        let right = integrate_pushforward(|_| 1.0, &k, &rep);
        assert!((left - lam.total_mass()).abs() < 1e-15);
        assert!((left - right).abs() < 1e-12);

        // indicator of the second vertex direction
        let v1 = k.directions()[1].clone();
        let ind = move |v: &Direction| if v == &v1 { 1.0 } else { 0.0 };
        let left = integrate(&ind, &k, &lam).unwrap();
        let right = integrate_pushforward(&ind, &k, &rep);
        assert!((left - 0.5).abs() < 1e-15);
        assert!((right - 0.5).abs() < 1e-15);

        // first coordinate as g
        let g = |v: &Direction| v.coords()[0];
        let left = integrate(g, &k, &lam).unwrap();
        let right = integrate_pushforward(g, &k, &rep);
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn pushforward_is_eventually_constant_along_converging_radii() {
        // a sequence of radii converging to a tie-free limit produces the
        // limit masses exactly from some index on
        let k = two_vertex_k();
        let lam = lambda_on(k.cone(), &[(&[-0.6, -0.8], 0.5), (&[-0.8, -0.6], 0.5)]);
        let limit = pushforward(&k, &lam).unwrap();
        assert!(limit.ties.is_empty());
        for t in [1e-2, 1e-4, 1e-6, 1e-8] {
            let kt = convexification(
                k.cone().clone(),
                k.directions().to_vec(),
                vec![k.radii()[0] * (1.0 + t), k.radii()[1] * (1.0 - t)],
            )
            .unwrap();
            let rep = pushforward(&kt, &lam).unwrap();
            if t <= 1e-4 {
                assert_eq!(rep.masses, limit.masses, "masses settled by t = {t}");
                assert_eq!(rep.assignment, limit.assignment);
            }
        }
    }

    #[test]
    fn wrong_domain_and_cone_rejected() {
        let k = two_vertex_k();
        let mu_side = AtomicSphericalMeasure::new(
            k.cone().clone(),
            MeasureDomain::OmegaC,
            vec![dir(&[IS2, IS2])],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(
            pushforward(&k, &mu_side),
            Err(Error::DomainViolation { .. })
        ));

        let other = Arc::new(
            crate::cone::build_simplicial_cone_from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]])
                .unwrap(),
        );
        let lam = AtomicSphericalMeasure::new(
            other,
            MeasureDomain::OmegaCDual,
            vec![dir(&[-IS2, -IS2])],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(pushforward(&k, &lam), Err(Error::ConeMismatch)));
    }

    #[test]
    fn atoms_outside_patch_rejected() {
        let c = Arc::new(orthant(2));
        let r = AtomicSphericalMeasure::new(
            c.clone(),
            MeasureDomain::OmegaC,
            vec![dir(&[1.0, 0.0])],
            vec![1.0],
        );
        assert!(matches!(r, Err(Error::DomainViolation { .. })));
        let r = AtomicSphericalMeasure::new(
            c,
            MeasureDomain::OmegaC,
            vec![dir(&[IS2, IS2])],
            vec![0.0],
        );
        assert!(matches!(r, Err(Error::MassZero)));
    }
}
