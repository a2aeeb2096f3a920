//! Instance and result serialization, plus deterministic random instance
//! generation. Everything is JSON with full-precision floats so that fixtures
//! diff cleanly and round-trip exactly; semantic validation reports the JSON
//! pointer of the offending field.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{Cone, Direction, build_simplicial_cone_from_rows, random_simplicial_cone};
use crate::error::{Error, Result};
use crate::gauss::{AtomicSphericalMeasure, MeasureDomain, PushforwardReport};
use crate::pseudocone::{HRepPseudoCone, PseudoCone, VRepPseudoCone, convexification, wulff_shape};
use crate::solver::{GaussImageProblem, SolveResult, SolverConfig, StepRule, verify};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeDto {
    pub n: usize,
    /// Generators row-major; normalized on load.
    pub generators: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureDto {
    /// "omega_c" for the mu side, "omega_c_dual" for the lambda side.
    pub domain: String,
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverDto {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDto {
    pub cone: ConeDto,
    pub lambda: MeasureDto,
    pub mu: MeasureDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoConeDto {
    /// "V" for a convexification, "H" for a Wulff shape.
    pub rep: String,
    pub cone: ConeDto,
    pub dirs: Vec<Vec<f64>>,
    /// Radii for V-reps, offsets for H-reps.
    pub vals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDto {
    pub log_radii: Vec<f64>,
    pub phi: f64,
    pub residual_linf: f64,
    pub iterations: usize,
    pub certified: bool,
    pub balance_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushforwardDto {
    pub masses: Vec<f64>,
    pub ties: Vec<usize>,
    pub assignment: Vec<usize>,
}

/// Output gauge of the CLI: the solver itself always works mean-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    #[default]
    MeanZero,
    /// Rescale the pseudo-cone to distance 1 from the origin.
    UnitDistance,
}

#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub problem: GaussImageProblem,
    pub config: SolverConfig,
    pub gauge: Gauge,
}

pub fn cone_from_dto(dto: &ConeDto) -> Result<Arc<Cone>> {
    if dto.generators.len() != dto.n {
        return Err(Error::parse(
            "/cone/generators",
            format!(
                "expected {} generators, got {}",
                dto.n,
                dto.generators.len()
            ),
        ));
    }
    for (i, g) in dto.generators.iter().enumerate() {
        if g.len() != dto.n {
            return Err(Error::parse(
                format!("/cone/generators/{i}"),
                format!("expected length {}, got {}", dto.n, g.len()),
            ));
        }
    }
    Ok(Arc::new(build_simplicial_cone_from_rows(&dto.generators)?))
}

pub fn cone_to_dto(cone: &Cone) -> ConeDto {
    ConeDto {
        n: cone.dim(),
        generators: cone
            .generators()
            .iter()
            .map(|d| d.coords().iter().cloned().collect())
            .collect(),
    }
}

fn measure_from_dto(
    dto: &MeasureDto,
    cone: &Arc<Cone>,
    pointer: &str,
) -> Result<AtomicSphericalMeasure> {
    let domain = match dto.domain.as_str() {
        "omega_c" => MeasureDomain::OmegaC,
        "omega_c_dual" => MeasureDomain::OmegaCDual,
        other => {
            return Err(Error::parse(
                format!("{pointer}/domain"),
                format!("unknown domain {other:?}, expected omega_c or omega_c_dual"),
            ));
        }
    };
    if dto.dirs.len() != dto.weights.len() {
        return Err(Error::parse(
            format!("{pointer}/weights"),
            format!(
                "got {} weights for {} directions",
                dto.weights.len(),
                dto.dirs.len()
            ),
        ));
    }
    let mut dirs = Vec::with_capacity(dto.dirs.len());
    for (i, raw) in dto.dirs.iter().enumerate() {
        let d = Direction::from_slice(raw)
            .map_err(|e| Error::parse(format!("{pointer}/dirs/{i}"), e.to_string()))?;
        dirs.push(d);
    }
    AtomicSphericalMeasure::new(cone.clone(), domain, dirs, dto.weights.clone()).map_err(
        |e| match e {
            Error::DomainViolation { context } => Error::DomainViolation {
                context: format!("{pointer}: {context}"),
            },
            other => other,
        },
    )
}

fn measure_to_dto(m: &AtomicSphericalMeasure) -> MeasureDto {
    MeasureDto {
        domain: match m.domain() {
            MeasureDomain::OmegaC => "omega_c".into(),
            MeasureDomain::OmegaCDual => "omega_c_dual".into(),
        },
        dirs: m
            .dirs()
            .iter()
            .map(|d| d.coords().iter().cloned().collect())
            .collect(),
        weights: m.weights().to_vec(),
    }
}

/// Materializes a parsed instance: all domain and transversality checks run
/// here, before any solving.
pub fn instance_to_problem(dto: &InstanceDto) -> Result<LoadedInstance> {
    let cone = cone_from_dto(&dto.cone)?;
    let lambda = measure_from_dto(&dto.lambda, &cone, "/lambda")?;
    let mu = measure_from_dto(&dto.mu, &cone, "/mu")?;
    if lambda.domain() != MeasureDomain::OmegaCDual {
        return Err(Error::parse(
            "/lambda/domain",
            "lambda must be omega_c_dual",
        ));
    }
    if mu.domain() != MeasureDomain::OmegaC {
        return Err(Error::parse("/mu/domain", "mu must be omega_c"));
    }
    let problem = GaussImageProblem::new(cone, lambda, mu)?;

    let mut config = SolverConfig::default();
    let mut gauge = Gauge::MeanZero;
    if let Some(s) = &dto.solver {
        if let Some(t) = s.tol {
            config.tol = t;
        }
        if let Some(mi) = s.max_iter {
            config.max_iter = mi;
        }
        config.seed = s.seed;
        if let Some(tau) = s.tau {
            config.tau = if tau > 0.0 { Some(tau) } else { None };
        }
        if let Some(g) = &s.gauge {
            gauge = parse_gauge(g)?;
        }
        config.step = StepRule::PolyakAdaptive;
    }
    Ok(LoadedInstance {
        problem,
        config,
        gauge,
    })
}

pub fn parse_gauge(s: &str) -> Result<Gauge> {
    match s {
        "mean-zero" => Ok(Gauge::MeanZero),
        "unit-distance" => Ok(Gauge::UnitDistance),
        other => Err(Error::parse(
            "/solver/gauge",
            format!("unknown gauge {other:?}, expected mean-zero or unit-distance"),
        )),
    }
}

pub fn instance_from_problem(p: &GaussImageProblem) -> InstanceDto {
    InstanceDto {
        cone: cone_to_dto(p.cone()),
        lambda: measure_to_dto(p.lambda()),
        mu: measure_to_dto(p.mu()),
        solver: None,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("{what}:{}:{}", e.line(), e.column()), e.to_string()))
}

/// Loads and fully validates an instance file.
pub fn load_instance(path: &Path) -> Result<LoadedInstance> {
    let text = read_to_string(path)?;
    let dto: InstanceDto = parse_json(&text, "instance")?;
    instance_to_problem(&dto)
}

pub fn load_instance_dto(path: &Path) -> Result<InstanceDto> {
    parse_json(&read_to_string(path)?, "instance")
}

pub fn load_pseudocone(path: &Path) -> Result<PseudoCone> {
    let dto: PseudoConeDto = parse_json(&read_to_string(path)?, "pseudocone")?;
    pseudocone_from_dto(&dto)
}

pub fn load_result(path: &Path) -> Result<ResultDto> {
    parse_json(&read_to_string(path)?, "result")
}

pub fn pseudocone_from_dto(dto: &PseudoConeDto) -> Result<PseudoCone> {
    let cone = cone_from_dto(&dto.cone)?;
    let mut dirs = Vec::with_capacity(dto.dirs.len());
    for (i, raw) in dto.dirs.iter().enumerate() {
        dirs.push(
            Direction::from_slice(raw)
                .map_err(|e| Error::parse(format!("/dirs/{i}"), e.to_string()))?,
        );
    }
    match dto.rep.as_str() {
        "V" => Ok(PseudoCone::V(convexification(
            cone,
            dirs,
            dto.vals.clone(),
        )?)),
        "H" => Ok(PseudoCone::H(wulff_shape(cone, dirs, dto.vals.clone())?)),
        other => Err(Error::parse(
            "/rep",
            format!("unknown rep {other:?}, expected V or H"),
        )),
    }
}

pub fn pseudocone_to_dto(k: &PseudoCone) -> PseudoConeDto {
    let (rep, cone, dirs, vals): (&str, &Cone, &[Direction], &[f64]) = match k {
        PseudoCone::V(v) => ("V", v.cone(), v.directions(), v.radii()),
        PseudoCone::H(h) => ("H", h.cone(), h.normals(), h.offsets()),
    };
    PseudoConeDto {
        rep: rep.into(),
        cone: cone_to_dto(cone),
        dirs: dirs
            .iter()
            .map(|d| d.coords().iter().cloned().collect())
            .collect(),
        vals: vals.to_vec(),
    }
}

pub fn result_to_dto(r: &SolveResult) -> ResultDto {
    ResultDto {
        log_radii: r.log_radii.iter().cloned().collect(),
        phi: r.phi,
        residual_linf: r.residual_linf,
        iterations: r.iterations,
        certified: r.certified,
        balance_ratio: r.balance_ratio,
    }
}

pub fn pushforward_to_dto(r: &PushforwardReport) -> PushforwardDto {
    PushforwardDto {
        masses: r.masses.clone(),
        ties: r.ties.clone(),
        assignment: r.assignment.clone(),
    }
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    s.push('\n');
    s
}

/// Deterministic random instance: a well-conditioned cone, strictly interior
/// atoms on both patches, positive weights; `balanced` rescales both measures
/// to total mass 1.
pub fn generate_instance(
    n: usize,
    m_lambda: usize,
    m_mu: usize,
    seed: u64,
    balanced: bool,
) -> InstanceDto {
    assert!(n >= 2, "dimension must be at least 2");
    assert!(m_lambda >= 1 && m_mu >= 1, "atom counts must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cone = random_simplicial_cone(n, &mut rng);
    let lambda_dirs = cone.dual().sample_interior_with(m_lambda, &mut rng);
    let mu_dirs = cone.sample_interior_with(m_mu, &mut rng);
    let mut lambda_w: Vec<f64> = (0..m_lambda).map(|_| rng.random_range(0.2..1.0)).collect();
    let mut mu_w: Vec<f64> = (0..m_mu).map(|_| rng.random_range(0.2..1.0)).collect();
    if balanced {
        let lt: f64 = lambda_w.iter().sum();
        let mt: f64 = mu_w.iter().sum();
        for w in &mut lambda_w {
            *w /= lt;
        }
        for w in &mut mu_w {
            *w /= mt;
        }
    }
    InstanceDto {
        cone: cone_to_dto(&cone),
        lambda: MeasureDto {
            domain: "omega_c_dual".into(),
            dirs: lambda_dirs
                .iter()
                .map(|d| d.coords().iter().cloned().collect())
                .collect(),
            weights: lambda_w,
        },
        mu: MeasureDto {
            domain: "omega_c".into(),
            dirs: mu_dirs
                .iter()
                .map(|d| d.coords().iter().cloned().collect())
                .collect(),
            weights: mu_w,
        },
        solver: None,
    }
}

/// Convenience used by tests and audits: generate and materialize in one step.
pub fn random_problem(
    n: usize,
    m_lambda: usize,
    m_mu: usize,
    seed: u64,
    balanced: bool,
) -> GaussImageProblem {
    instance_to_problem(&generate_instance(n, m_lambda, m_mu, seed, balanced))
        .expect("generated instances are valid")
        .problem
}

/// Writes the per-vertex solution table as CSV, and for n = 2 a boundary
/// polyline of the solved pseudo-cone next to it (`<stem>.boundary.csv`).
pub fn emit_plot_data(result: &SolveResult, p: &GaussImageProblem, path: &Path) -> Result<()> {
    let k = p.pseudo_cone(&result.log_radii)?;
    let report = verify(&k, p, f64::INFINITY)?;
    let n = p.cone().dim();

    let mut csv = String::new();
    let dir_cols: Vec<String> = (0..n).map(|i| format!("v_{i}")).collect();
    csv.push_str(&dir_cols.join(","));
    csv.push_str(",radius,target_mass,achieved_mass,residual\n");
    let lt = p.lambda().total_mass();
    for i in 0..p.m_mu() {
        let d = &p.mu().dirs()[i];
        let coords: Vec<String> = d.coords().iter().map(|c| format!("{c:.17e}")).collect();
        csv.push_str(&coords.join(","));
        csv.push_str(&format!(
            ",{:.17e},{:.17e},{:.17e},{:.17e}\n",
            result.log_radii[i].exp(),
            report.targets[i],
            report.masses[i],
            report.per_vertex[i] * lt,
        ));
    }
    write_string(path, &csv)?;

    if n == 2 {
        let boundary = boundary_polyline(&k, 400)?;
        let mut bcsv = String::from("x,y\n");
        for pt in &boundary {
            bcsv.push_str(&format!("{:.17e},{:.17e}\n", pt[0], pt[1]));
        }
        let bpath = path.with_extension("boundary.csv");
        write_string(&bpath, &bcsv)?;
    }
    Ok(())
}

/// Dense boundary sampling of a planar V-rep pseudo-cone: radial evaluation
/// on an angular sweep strictly inside Omega_C.
pub fn boundary_polyline(k: &VRepPseudoCone, samples: usize) -> Result<Vec<DVector<f64>>> {
    let r_cap = 25.0 * k.radii().iter().cloned().fold(0.0, f64::max);
    sweep_2d(k.cone(), samples, r_cap, |v| k.radial_value(v))
}

/// Same sweep for a planar Wulff shape, through the closed-form radial.
pub fn boundary_polyline_h(k: &HRepPseudoCone, samples: usize) -> Result<Vec<DVector<f64>>> {
    let r_min = k.offsets().iter().cloned().fold(f64::INFINITY, f64::min);
    sweep_2d(k.cone(), samples, 25.0 * r_min.max(1e-6), |v| {
        k.radial_value(v)
    })
}

fn sweep_2d(
    cone: &Cone,
    samples: usize,
    r_cap: f64,
    radial: impl Fn(&Direction) -> Result<f64>,
) -> Result<Vec<DVector<f64>>> {
    assert_eq!(cone.dim(), 2, "boundary polyline is a planar feature");
    assert!(samples >= 2);
    let g0 = &cone.generators()[0];
    let g1 = &cone.generators()[1];
    let a0 = g0.coords()[1].atan2(g0.coords()[0]);
    let mut a1 = g1.coords()[1].atan2(g1.coords()[0]);
    // sweep the shorter angular interval from g0 to g1
    while a1 - a0 > std::f64::consts::PI {
        a1 -= 2.0 * std::f64::consts::PI;
    }
    while a1 - a0 < -std::f64::consts::PI {
        a1 += 2.0 * std::f64::consts::PI;
    }
    let mut pts = Vec::with_capacity(samples);
    let margin = 1e-4;
    for s in 0..samples {
        let t = margin + (1.0 - 2.0 * margin) * s as f64 / (samples - 1) as f64;
        let ang = a0 + (a1 - a0) * t;
        let v = Direction::from_slice(&[ang.cos(), ang.sin()])?;
        if !cone.interior_contains(v.coords()) {
            continue;
        }
        let r = radial(&v)?;
        if r <= r_cap {
            pts.push(v.scale(r));
        }
    }
    Ok(pts)
}

/// Copolar of either representation, for the `dual` CLI verb.
pub fn dual_of(k: &PseudoCone) -> PseudoCone {
    k.copolar()
}

pub fn hrep_from(k: &PseudoCone) -> Option<&HRepPseudoCone> {
    match k {
        PseudoCone::H(h) => Some(h),
        PseudoCone::V(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instance_loads_and_balances() {
        let dto = generate_instance(2, 3, 3, 1, true);
        let loaded = instance_to_problem(&dto).unwrap();
        assert!((loaded.problem.balance_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = to_json(&generate_instance(3, 5, 4, 9, true));
        let b = to_json(&generate_instance(3, 5, 4, 9, true));
        assert_eq!(a, b);
    }

    #[test]
    fn unbalanced_ratio_reported() {
        let mut dto = generate_instance(2, 2, 2, 5, true);
        for w in &mut dto.lambda.weights {
            *w *= 2.0;
        }
        let loaded = instance_to_problem(&dto).unwrap();
        assert!((loaded.problem.balance_ratio() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_atom_rejected_with_pointer() {
        let mut dto = generate_instance(2, 2, 2, 5, true);
        dto.mu.dirs[0] = vec![1.0, 0.0];
        let err = instance_to_problem(&dto).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { .. }));
        let msg = err.to_string();
        assert!(msg.contains("/mu"), "error should name the block: {msg}");
        assert!(msg.contains("atom 0"), "error should name the atom: {msg}");
    }

    #[test]
    fn json_round_trip_is_identical() {
        let dto = generate_instance(3, 4, 3, 123, false);
        let text = to_json(&dto);
        let back: InstanceDto = serde_json::from_str(&text).unwrap();
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn plot_data_books_the_scaled_targets() {
        // unbalanced instance: achieved masses sum to |lambda|, targets to
        // (L/M) * mu, and the boundary polyline points lie on the set
        let mut dto = generate_instance(2, 5, 3, 77, true);
        for w in &mut dto.lambda.weights {
            *w *= 2.0;
        }
        let p = instance_to_problem(&dto).unwrap().problem;
        let r = crate::solver::solve(&p, &crate::solver::SolverConfig::default()).unwrap();

        let dir = std::env::temp_dir().join("gausscone_plot_test.csv");
        emit_plot_data(&r, &p, &dir).unwrap();
        let text = std::fs::read_to_string(&dir).unwrap();
        let mut achieved_sum = 0.0;
        let mut target_sum = 0.0;
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            target_sum += cols[3];
            achieved_sum += cols[4];
        }
        let lt = p.lambda().total_mass();
        assert!((achieved_sum - lt).abs() <= 1e-9 * lt);
        let expected_targets: f64 = p.target_masses().iter().sum();
        assert!((target_sum - expected_targets).abs() <= 1e-9 * expected_targets);

        let bpath = dir.with_extension("boundary.csv");
        let btext = std::fs::read_to_string(&bpath).unwrap();
        let k = p.pseudo_cone(&r.log_radii).unwrap();
        for line in btext.lines().skip(1).step_by(40) {
            let xy: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            let pt = DVector::from_column_slice(&xy);
            // boundary points are members up to evaluation tolerance
            assert!(k.contains(&(&pt * (1.0 + 1e-7))).unwrap());
        }
        let _ = std::fs::remove_file(dir);
        let _ = std::fs::remove_file(bpath);
    }

    #[test]
    fn pseudocone_dto_round_trip() {
        let dto = PseudoConeDto {
            rep: "V".into(),
            cone: ConeDto {
                n: 2,
                generators: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            dirs: vec![vec![
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
            ]],
            vals: vec![std::f64::consts::SQRT_2],
        };
        let k = pseudocone_from_dto(&dto).unwrap();
        let back = pseudocone_to_dto(&k);
        assert_eq!(to_json(&dto), to_json(&back));
        // dual swaps rep
        let d = pseudocone_to_dto(&dual_of(&k));
        assert_eq!(d.rep, "H");
        assert!((d.vals[0] - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-15);
    }
}
