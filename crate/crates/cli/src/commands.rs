use std::path::Path;

use nalgebra::DMatrix;
use peps_core::classical::{
    diagonal_correlation, factorized_boundary_check, geometric_injectivity, hexagonal_critical_beta,
    square_critical_beta, square_dimension_arguments, PhiFactors,
};
use peps_core::gap::{gap_threshold_scan, operator_ordering, scan_csv, sign_changes};
use peps_core::injectivity::union_preserves_injectivity_test;
use peps_core::lattice::{hexagon_cell, GraphDocument};
use peps_core::parent::{assemble_regions, intersection_identity_check, kernel_intersection_dim};
use peps_core::peps::PepsDocument;
use peps_core::{
    assemble, build_classical_peps, check_injective, find_injective_tiling, generate_lattice, lowest_eigenpairs,
    metropolis_generator, verify_uniqueness, ClassicalModel, Covering, HamiltonianC64, LatticeGraph,
    LatticeKind, LatticeSpec, Peps, PepsC64, Region, TilingOutcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Model, RunConfig};
use crate::{Command, Failure};

type Outcome = Result<(String, Value), Failure>;

pub fn run(command: Command, cfg: &RunConfig) -> Outcome {
    match command {
        Command::Lattice => lattice(cfg),
        Command::IsingPeps => ising_peps(cfg),
        Command::Inject => inject(cfg),
        Command::Tile => tile(cfg),
        Command::Parent => parent(cfg),
        Command::Ed => ed(cfg),
        Command::Verify => verify(cfg),
        Command::ClassicalChecks => classical_checks(cfg),
        Command::GapScan => gap_scan(cfg),
        Command::Qmatrix => qmatrix(cfg),
        Command::TiConvert => ti_convert(cfg),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

fn write_json<T: Serialize>(path: &Path, x: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(x)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn build_graph(cfg: &RunConfig, bond_dim: usize) -> Result<LatticeGraph, Failure> {
    let spec = LatticeSpec::new(cfg.lattice, &cfg.dims).bond_dim(bond_dim);
    Ok(generate_lattice(&spec)?)
}

fn ising_model(cfg: &RunConfig) -> Result<ClassicalModel, Failure> {
    Ok(ClassicalModel::ising(&build_graph(cfg, 2)?, cfg.beta)?)
}

/// Blocks of `rows × cols` sites of a square torus, from vertex positions.
fn torus_blocks(g: &LatticeGraph, shape: &[usize]) -> Result<Vec<Vec<usize>>, Failure> {
    let positions = g
        .positions()
        .ok_or_else(|| Failure::input("regrouping needs a generated square lattice"))?;
    let (rows, cols) = positions
        .iter()
        .fold((0, 0), |(r, c), p| (r.max(p[0] as usize + 1), c.max(p[1] as usize + 1)));
    let (br, bc) = (shape[0], shape[1]);
    if rows % br != 0 || cols % bc != 0 {
        return Err(Failure::input(format!("blocks {br}×{bc} do not divide the {rows}×{cols} lattice")));
    }
    let per_row = cols / bc;
    let mut blocks = vec![Vec::new(); (rows / br) * per_row];
    for (v, p) in positions.iter().enumerate() {
        let (r, c) = (p[0] as usize, p[1] as usize);
        blocks[(r / br) * per_row + c / bc].push(v);
    }
    Ok(blocks)
}

/// The PEPS a command acts on: an input document, or a generated model,
/// optionally regrouped.
fn load_peps(cfg: &RunConfig) -> Result<PepsC64, Failure> {
    let p = match (&cfg.input, cfg.model) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<PepsDocument>(&text)?.to_peps()?
        }
        (None, Model::Ising) => build_classical_peps(&ising_model(cfg)?, &cfg.settings())?.peps,
        (None, Model::Random) => {
            let g = build_graph(cfg, cfg.bond_dim)?;
            Peps::random(g, cfg.phys_dim, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?
        }
    };
    match &cfg.blocks {
        Some(shape) => {
            let blocks = torus_blocks(p.graph(), shape)?;
            Ok(p.regroup(&blocks, &cfg.settings())?)
        }
        None => Ok(p),
    }
}

fn injective_covering(p: &PepsC64, cfg: &RunConfig) -> Result<Covering, Failure> {
    match find_injective_tiling(p, cfg.max_region, &cfg.settings())? {
        TilingOutcome::Found(t) => Ok(t.covering),
        TilingOutcome::Failed { region, .. } => Err(Failure::input(format!(
            "no injective tiling with regions of at most {} sites (stuck at {region:?})",
            cfg.max_region
        ))),
    }
}

type Parent = (PepsC64, Covering, HamiltonianC64);

fn parent_hamiltonian(cfg: &RunConfig) -> Result<Parent, Failure> {
    let p = load_peps(cfg)?;
    let cov = injective_covering(&p, cfg)?;
    let h = assemble(&p, &cov, &cfg.settings())?;
    Ok((p, cov, h))
}

fn lattice(cfg: &RunConfig) -> Outcome {
    let g = build_graph(cfg, cfg.bond_dim)?;
    let parallel = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, e)| g.edges()[..*i].iter().any(|f| (f.a, f.b) == (e.a, e.b)))
        .count();
    write_json(&cfg.out.join("lattice-graph.json"), &GraphDocument::from(g.clone()))?;
    let result = json!({
        "vertices": g.num_vertices(),
        "edges": g.edges().len(),
        "parallel_edges": parallel,
        "open_legs": g.total_open_legs(),
        "bond_dim": g.bond_dim(),
        "file": "lattice-graph.json",
    });
    let summary = format!(
        "{} {:?}: {} vertices, {} edges, {} open legs",
        cfg.lattice,
        cfg.dims,
        g.num_vertices(),
        g.edges().len(),
        g.total_open_legs()
    );
    Ok((summary, result))
}

fn ising_peps(cfg: &RunConfig) -> Outcome {
    let m = ising_model(cfg)?;
    let s = cfg.settings();
    let cp = build_classical_peps::<f64>(&m, &s)?;
    let factors = PhiFactors::<f64>::new(&m, &s)?;
    write_json(&cfg.out.join("peps-document.json"), &PepsDocument::from_peps(&cp.peps))?;
    let result = json!({
        "beta": cfg.beta,
        "sites": cp.peps.num_sites(),
        "bond_dim": cp.peps.bond_dim(),
        "factor_error": factors.reconstruction_error(&m),
        "degenerate_edges": factors.degenerate_edges,
        "file": "peps-document.json",
    });
    Ok((format!("Ising PEPS on {} sites at β = {}", cp.peps.num_sites(), cfg.beta), result))
}

/// Region of `inject`: the `--region` list, or the first hexagon cell.
fn chosen_region(cfg: &RunConfig, g: &LatticeGraph) -> Result<Region, Failure> {
    if let Some(members) = &cfg.region {
        return Ok(g.region(members.iter().copied())?);
    }
    if matches!(cfg.lattice, LatticeKind::HexagonalOpen | LatticeKind::HexagonalTorus) && cfg.blocks.is_none() {
        if let Some(cell) = hexagon_cell(g, 0, 0) {
            return Ok(g.region(cell)?);
        }
    }
    Err(Failure::input("no region given (use --region)"))
}

fn inject(cfg: &RunConfig) -> Outcome {
    let p = load_peps(cfg)?;
    let r = chosen_region(cfg, p.graph())?;
    let rep = check_injective(&p, &r, &cfg.settings())?;
    let mut result = to_value(&rep);
    let classical = cfg.input.is_none() && cfg.blocks.is_none() && cfg.model == Model::Ising && cfg.beta > 0.0;
    if classical {
        let rule = geometric_injectivity(p.graph(), &r)?;
        result["geometric_rule"] = json!(rule);
        if rule != rep.injective {
            return Err(Failure::invariant("rank verdict disagrees with the geometric rule", result));
        }
    }
    let verdict = if rep.injective { "injective" } else { "not injective" };
    Ok((format!("region {:?}: rank {} of {}, {verdict}", rep.region, rep.rank, rep.virtual_dim), result))
}

fn tile(cfg: &RunConfig) -> Outcome {
    let p = load_peps(cfg)?;
    let s = cfg.settings();
    let outcome = find_injective_tiling(&p, cfg.max_region, &s)?;
    let mut result = to_value(&outcome);
    match &outcome {
        TilingOutcome::Found(t) => {
            for &(a, b) in t.super_edges() {
                if !union_preserves_injectivity_test(&p, &t.regions()[a], &t.regions()[b], &s)? {
                    result["union_failure"] = json!([a, b]);
                    return Err(Failure::invariant("union of injective regions is not injective", result));
                }
            }
            result["unions_checked"] = json!(t.super_edges().len());
            Ok((format!("injective tiling with {} regions", t.regions().len()), result))
        }
        TilingOutcome::Failed { region, .. } => Ok((format!("no injective tiling; stuck at {region:?}"), result)),
    }
}

fn parent(cfg: &RunConfig) -> Outcome {
    let (p, cov, h) = parent_hamiltonian(cfg)?;
    write_json(&cfg.out.join("parent-terms.json"), &h.export())?;
    let mut result = json!({
        "covering": to_value(&cov),
        "terms": h.terms().len(),
        "file": "parent-terms.json",
    });
    if let Ok(phi) = p.state_vector(&cfg.settings()) {
        let e = h.term_energies(&phi);
        let worst = e.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        result["max_term_energy"] = json!(worst);
        if worst > 1e-8 {
            return Err(Failure::invariant("the PEPS is not annihilated by its parent terms", result));
        }
    }
    Ok((format!("{} parent terms", h.terms().len()), result))
}

fn ed(cfg: &RunConfig) -> Outcome {
    let (_, _, h) = parent_hamiltonian(cfg)?;
    let pairs = lowest_eigenpairs(&h, cfg.levels, &cfg.eigen)?;
    let values: Vec<f64> = pairs.values.clone();
    let result = json!({
        "eigenvalues": values,
        "dense": pairs.dense,
        "max_residual": pairs.max_residual,
    });
    let shown: Vec<String> = values.iter().map(|x| format!("{x:.3e}")).collect();
    Ok((format!("lowest eigenvalues [{}]", shown.join(", ")), result))
}

fn verify(cfg: &RunConfig) -> Outcome {
    let (p, cov, h) = parent_hamiltonian(cfg)?;
    let s = cfg.settings();
    let rep = verify_uniqueness(&p, &h, cfg.levels.max(2), &s, &cfg.eigen)?;
    let identity = intersection_identity_check(&p, &cov, &s)?;
    let kernel = kernel_intersection_dim(&h, &s)?;
    let result = json!({
        "uniqueness": to_value(&rep),
        "intersection": to_value(&identity),
        "kernel_intersection_dim": kernel,
    });
    if !rep.unique || !identity.holds || kernel != 1 {
        return Err(Failure::invariant("injective PEPS without a unique ground state", result));
    }
    Ok((
        format!("unique ground state: degeneracy {}, gap {:.3e}, overlap {:.12}", rep.degeneracy, rep.lambda1, rep.overlap),
        result,
    ))
}

/// Brute-force `⟨x_i x_j⟩` of the Ising model on `g`.
fn gibbs_correlation(m: &ClassicalModel, i: usize, j: usize) -> f64 {
    let n = m.graph.num_vertices();
    let (mut num, mut z) = (0.0, 0.0);
    let mut config = vec![0; n];
    let e0 = m.energy(&config);
    for x in 0..1usize << n {
        for (k, c) in config.iter_mut().enumerate() {
            *c = (x >> (n - 1 - k)) & 1;
        }
        let w = (-m.beta * (m.energy(&config) - e0)).exp();
        num += w * m.value(config[i]) * m.value(config[j]);
        z += w;
    }
    num / z
}

fn classical_checks(cfg: &RunConfig) -> Outcome {
    let m = ising_model(cfg)?;
    let s = cfg.settings();
    let g = m.graph.clone();
    let cp = build_classical_peps::<f64>(&m, &s)?;
    let n = g.num_vertices();
    let mut result = json!({
        "beta": cfg.beta,
        "hexagonal_critical_beta": hexagonal_critical_beta(),
        "square_critical_beta": square_critical_beta(),
        "factor_error": cp.factors.reconstruction_error(&m),
    });
    let mut violations = Vec::new();

    if n > 20 {
        return Err(peps_core::Error::CapExceeded {
            what: "region enumeration".into(),
            required: n as u128,
            cap: 20,
        }
        .into());
    }
    let (mut checked, mut mismatches) = (0usize, Vec::new());
    if cfg.beta > 0.0 {
        for mask in 1u32..1 << n {
            if mask.count_ones() as usize > cfg.max_region {
                continue;
            }
            let r = g.region((0..n).filter(|v| mask >> v & 1 == 1))?;
            if !g.is_connected(&r)? {
                continue;
            }
            checked += 1;
            if geometric_injectivity(&g, &r)? != check_injective(&cp.peps, &r, &s)?.injective {
                mismatches.push(r.members().to_vec());
            }
        }
    }
    result["geometric_rule"] = json!({ "regions": checked, "mismatches": mismatches });
    if !mismatches.is_empty() {
        violations.push("geometric rule");
    }

    if g.total_open_legs() == 0 && (1u128 << n) <= s.state_cap {
        let psi = cp.peps.state_vector(&s)?;
        let values = [m.value(0), m.value(1)];
        let mut worst = 0.0f64;
        let corr: Vec<f64> = (1..n)
            .map(|j| {
                let c = diagonal_correlation(&psi, 2, n, 0, j, &values);
                worst = worst.max((c - gibbs_correlation(&m, 0, j)).abs());
                c
            })
            .collect();
        result["correlations_from_site_0"] = json!(corr);
        result["correlation_error"] = json!(worst);
        if worst > 1e-10 {
            violations.push("correlations");
        }
    }

    if matches!(cfg.lattice, LatticeKind::HexagonalOpen | LatticeKind::HexagonalTorus) {
        if let Some(cell) = hexagon_cell(&g, 0, 0) {
            let rep = factorized_boundary_check(&m, &cp, &g.region(cell)?, &s)?;
            if rep.max_error > 1e-10 {
                violations.push("boundary factorization");
            }
            result["hexagon_cell"] = to_value(&rep);
        }
    }
    if matches!(cfg.lattice, LatticeKind::SquareOpen | LatticeKind::SquareTorus) && cfg.beta > 0.0 {
        let rep = square_dimension_arguments::<f64>(cfg.beta, &s)?;
        if rep.cross_projector_distance > 1e-8 {
            violations.push("cross projector");
        }
        result["square_patch"] = to_value(&rep);
    }

    if !violations.is_empty() {
        return Err(Failure::invariant(format!("failed checks: {violations:?}"), result));
    }
    Ok((format!("classical checks passed ({checked} regions against the geometric rule)"), result))
}

fn gap_scan(cfg: &RunConfig) -> Outcome {
    let pts = gap_threshold_scan(&cfg.betas, cfg.weights.as_deref(), &cfg.settings())?;
    std::fs::write(cfg.out.join("gap-scan.csv"), scan_csv(&pts))?;
    let changes = sign_changes(&pts);
    let result = json!({
        "points": to_value(&pts),
        "sign_changes": changes,
        "file": "gap-scan.csv",
    });
    let summary = match changes.as_slice() {
        [] => "no sign change on the grid".to_string(),
        [(lo, hi)] => format!("margin changes sign between β = {lo} and β = {hi}"),
        many => format!("{} sign changes: {many:?}", many.len()),
    };
    Ok((summary, result))
}

/// Parent Hamiltonian of the Ising PEPS from closed neighborhoods.
fn neighborhood_parent(m: &ClassicalModel, cfg: &RunConfig) -> Result<DMatrix<f64>, Failure> {
    let s = cfg.settings();
    let p = build_classical_peps::<f64>(m, &s)?.peps;
    let g = &m.graph;
    let regions = g
        .vertices()
        .map(|v| {
            let mut members = g.neighbors(v);
            members.push(v);
            g.region(members)
        })
        .collect::<peps_core::Result<Vec<_>>>()?;
    Ok(assemble_regions(&p, &regions, &s)?.dense(peps_core::gap::GENERATOR_CAP)?)
}

fn qmatrix(cfg: &RunConfig) -> Outcome {
    let m = ising_model(cfg)?;
    let q = metropolis_generator(&m)?;
    let props = q.properties();
    let ordering = operator_ordering(&q.hamiltonian(), &neighborhood_parent(&m, cfg)?, 1e-10)?;
    let result = json!({
        "properties": to_value(&props),
        "ordering": to_value(&ordering),
    });
    if props.axiom_violation > 1e-12 || props.symmetric_stationarity > 1e-10 || !ordering.ordered {
        return Err(Failure::invariant("generator properties violated", result));
    }
    Ok((
        format!("H_Q gap {:.4}, H_Q ≤ {:.4} · H_parent", props.gap, ordering.c_min.unwrap_or(f64::NAN)),
        result,
    ))
}

fn ti_convert(cfg: &RunConfig) -> Outcome {
    let p = load_peps(cfg)?;
    let s = cfg.settings();
    let ti = p.site_independent_form(true, &s)?;
    write_json(&cfg.out.join("ti-peps.json"), &PepsDocument::from_shared(&ti))?;
    let a = p.state_vector(&s)?;
    let b = ti.peps.state_vector(&s)?;
    let diff = (a.normalize() - b.normalize()).norm();
    let result = json!({
        "bond_dim": ti.peps.bond_dim(),
        "state_difference": diff,
        "file": "ti-peps.json",
    });
    if diff > 1e-10 {
        return Err(Failure::invariant("site-independent form changes the state", result));
    }
    Ok((format!("site-independent form with bond dimension {}, difference {diff:.2e}", ti.peps.bond_dim()), result))
}
