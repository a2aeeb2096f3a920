//! Browser demo: solve planar Gauss image instances interactively and look at
//! the solution geometry, its copolar dual, and the two Gauss-map probes.
//!
//! Three entry points, all stateless and JSON-in/JSON-out so the page stays a
//! plain static file:
//!
//! - [`demo_solve`]: generate a balanced planar instance from a seed, solve
//!   it, and return the full scene (cone, atoms, masses, boundary polylines).
//! - [`demo_probe_support`]: the reverse radial Gauss map at an interactive
//!   dual direction u, with the supporting line for drawing.
//! - [`demo_probe_radial`]: the radial function at an interactive direction v
//!   in the primal patch, with the boundary hit point.

use nalgebra::DVector;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use gausscone::cone::Direction;
use gausscone::gauss;
use gausscone::io;
use gausscone::solver::{self, GaussImageProblem, SolverConfig};

#[derive(Serialize)]
struct LambdaAtomView {
    dir: [f64; 2],
    weight: f64,
    assigned: usize,
    tie: bool,
}

#[derive(Serialize)]
struct MuAtomView {
    dir: [f64; 2],
    weight: f64,
    radius: f64,
    target: f64,
    achieved: f64,
    residual: f64,
}

#[derive(Serialize)]
struct Scene {
    cone: [[f64; 2]; 2],
    dual_cone: [[f64; 2]; 2],
    lambda: Vec<LambdaAtomView>,
    mu: Vec<MuAtomView>,
    boundary: Vec<[f64; 2]>,
    dual_boundary: Vec<[f64; 2]>,
    log_radii: Vec<f64>,
    phi: f64,
    residual_linf: f64,
    iterations: usize,
    certified: bool,
    ties: Vec<usize>,
}

#[derive(Serialize)]
struct SupportProbe {
    u: [f64; 2],
    support: f64,
    assigned: usize,
    tie: bool,
    /// Foot of the supporting line: the point -hbar * u on the line
    /// { x : <u, x> = -hbar }.
    foot: [f64; 2],
}

#[derive(Serialize)]
struct RadialProbe {
    v: [f64; 2],
    radial: f64,
    hit: [f64; 2],
}

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

fn pair(v: &DVector<f64>) -> [f64; 2] {
    [v[0], v[1]]
}

fn build_problem(m_lambda: usize, m_mu: usize, seed: u64) -> Result<GaussImageProblem, String> {
    let m_lambda = m_lambda.clamp(1, 60);
    let m_mu = m_mu.clamp(1, 60);
    let dto = io::generate_instance(2, m_lambda, m_mu, seed, true);
    io::instance_to_problem(&dto)
        .map(|loaded| loaded.problem)
        .map_err(|e| e.to_string())
}

/// Interior direction at fraction t of the angular span of a planar cone.
fn direction_at(cone: &gausscone::Cone, t: f64) -> Direction {
    let g0 = cone.generators()[0].coords();
    let g1 = cone.generators()[1].coords();
    let a0 = g0[1].atan2(g0[0]);
    let mut a1 = g1[1].atan2(g1[0]);
    while a1 - a0 > std::f64::consts::PI {
        a1 -= 2.0 * std::f64::consts::PI;
    }
    while a1 - a0 < -std::f64::consts::PI {
        a1 += 2.0 * std::f64::consts::PI;
    }
    let t = t.clamp(1e-3, 1.0 - 1e-3);
    let ang = a0 + (a1 - a0) * t;
    Direction::from_slice(&[ang.cos(), ang.sin()]).expect("unit direction")
}

/// Generate a balanced planar instance, solve it, and return the drawing
/// scene as JSON.
#[wasm_bindgen]
pub fn demo_solve(m_lambda: usize, m_mu: usize, seed: u64) -> String {
    let p = match build_problem(m_lambda, m_mu, seed) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let result = match solver::solve(&p, &SolverConfig::default()) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let k = match p.pseudo_cone(&result.log_radii) {
        Ok(k) => k,
        Err(e) => return err_json(e),
    };
    let report = match solver::verify(&k, &p, f64::INFINITY) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let pf = match gauss::pushforward(&k, p.lambda()) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let boundary = match io::boundary_polyline(&k, 240) {
        Ok(b) => b,
        Err(e) => return err_json(e),
    };
    let dual_boundary = match io::boundary_polyline_h(&k.copolar(), 240) {
        Ok(b) => b,
        Err(e) => return err_json(e),
    };

    let cone = p.cone();
    let lt = p.lambda().total_mass();
    let scene = Scene {
        cone: [
            pair(cone.generators()[0].coords()),
            pair(cone.generators()[1].coords()),
        ],
        dual_cone: [
            pair(cone.dual_generators()[0].coords()),
            pair(cone.dual_generators()[1].coords()),
        ],
        lambda: p
            .lambda()
            .dirs()
            .iter()
            .zip(p.lambda().weights())
            .enumerate()
            .map(|(j, (d, &w))| LambdaAtomView {
                dir: pair(d.coords()),
                weight: w,
                assigned: pf.assignment[j],
                tie: pf.ties.contains(&j),
            })
            .collect(),
        mu: (0..p.m_mu())
            .map(|i| MuAtomView {
                dir: pair(p.mu().dirs()[i].coords()),
                weight: p.mu().weights()[i],
                radius: result.log_radii[i].exp(),
                target: report.targets[i],
                achieved: report.masses[i],
                residual: report.per_vertex[i] * lt,
            })
            .collect(),
        boundary: boundary.iter().map(pair).collect(),
        dual_boundary: dual_boundary.iter().map(pair).collect(),
        log_radii: result.log_radii.iter().cloned().collect(),
        phi: result.phi,
        residual_linf: result.residual_linf,
        iterations: result.iterations,
        certified: result.certified,
        ties: result.ties.clone(),
    };
    serde_json::to_string(&scene).unwrap_or_else(err_json)
}

/// Reverse radial Gauss map at the dual direction sitting at fraction
/// `angle_frac` of the Omega_{C°} arc, against the solved pseudo-cone.
#[wasm_bindgen]
pub fn demo_probe_support(
    m_lambda: usize,
    m_mu: usize,
    seed: u64,
    log_radii: Vec<f64>,
    angle_frac: f64,
) -> String {
    let p = match build_problem(m_lambda, m_mu, seed) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let x = DVector::from_column_slice(&log_radii);
    let k = match p.pseudo_cone(&x) {
        Ok(k) => k,
        Err(e) => return err_json(e),
    };
    let u = direction_at(&p.cone().dual(), angle_frac);
    let (assigned, tie) = match gauss::reverse_radial_gauss(&k, &u) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let support = match k.support_value(&u) {
        Ok(h) => h,
        Err(e) => return err_json(e),
    };
    let probe = SupportProbe {
        u: pair(u.coords()),
        support,
        assigned,
        tie,
        foot: pair(&u.scale(-support)),
    };
    serde_json::to_string(&probe).unwrap_or_else(err_json)
}

/// Radial function at the primal direction sitting at fraction `angle_frac`
/// of the Omega_C arc, against the solved pseudo-cone.
#[wasm_bindgen]
pub fn demo_probe_radial(
    m_lambda: usize,
    m_mu: usize,
    seed: u64,
    log_radii: Vec<f64>,
    angle_frac: f64,
) -> String {
    let p = match build_problem(m_lambda, m_mu, seed) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let x = DVector::from_column_slice(&log_radii);
    let k = match p.pseudo_cone(&x) {
        Ok(k) => k,
        Err(e) => return err_json(e),
    };
    let v = direction_at(p.cone(), angle_frac);
    let radial = match k.radial_value(&v) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let probe = RadialProbe {
        v: pair(v.coords()),
        radial,
        hit: pair(&v.scale(radial)),
    };
    serde_json::to_string(&probe).unwrap_or_else(err_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_is_well_formed() {
        let text = demo_solve(5, 4, 42);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_none(), "{text}");
        assert_eq!(v["mu"].as_array().unwrap().len(), 4);
        assert_eq!(v["lambda"].as_array().unwrap().len(), 5);
        assert!(v["boundary"].as_array().unwrap().len() > 100);
        assert!(v["residual_linf"].as_f64().unwrap() <= 1e-6);

        let log_radii: Vec<f64> = v["log_radii"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let probe = demo_probe_support(5, 4, 42, log_radii.clone(), 0.5);
        let pv: serde_json::Value = serde_json::from_str(&probe).unwrap();
        assert!(pv.get("error").is_none(), "{probe}");
        assert!(pv["support"].as_f64().unwrap() > 0.0);

        let probe = demo_probe_radial(5, 4, 42, log_radii, 0.25);
        let pv: serde_json::Value = serde_json::from_str(&probe).unwrap();
        assert!(pv.get("error").is_none(), "{probe}");
        assert!(pv["radial"].as_f64().unwrap() > 0.0);
    }
}
