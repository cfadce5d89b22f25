use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use branchsys::branching::{lemma_check, validate as validate_system};
use branchsys::operators::{
    adjointness_defect, default_uv_pairs, projection_defects, quadrature_refinement, random_test_functions,
    verify_ck_relations,
};
use branchsys::perron::{
    invariant_density, pf_apply, pf_defining_residual, pf_matrix_representation, pf_monte_carlo, test_intervals,
    truncation_study,
};
use branchsys::{BranchingSystem, GridFunction, PerronError, SystemDescription};

use crate::config::RunConfig;
use crate::CliError;

type Outcome = Result<bool, CliError>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write_artifact(cfg: &RunConfig, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_error(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(name);
    fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

/// Writes `header + body` to the output directory and echoes it.
fn write_report(cfg: &RunConfig, name: &str, body: &str) -> Result<(), CliError> {
    let text = format!("{}{}\n", cfg.header(), body.trim_end());
    write_artifact(cfg, name, &text)?;
    print!("{text}");
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn perron_failure(e: PerronError) -> CliError {
    match e {
        PerronError::Operator(_)
        | PerronError::Grid(_)
        | PerronError::NegativeInput { .. }
        | PerronError::TooManyBranches { .. }
        | PerronError::NotNormalized(_)
        | PerronError::NoIndices
        | PerronError::BlockTooLarge { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Check(e.to_string()),
    }
}

fn read_grid(cfg: &RunConfig, sys: &BranchingSystem, path: &Path) -> Result<GridFunction, CliError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let g = GridFunction::read_csv(file, sys.ambient().clone())
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if g.cells() != cfg.grid.cells {
        return Err(CliError::Usage(format!(
            "{}: grid mismatch: {} cells, configured {}",
            path.display(),
            g.cells(),
            cfg.grid.cells
        )));
    }
    Ok(g)
}

fn residual_lines(out: &mut String, sys: &BranchingSystem, phi: &GridFunction, n: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    out.push_str("interval,residual\n");
    for a in test_intervals(sys.ambient(), 8) {
        let r = pf_defining_residual(sys, phi, &a, n).map_err(perron_failure)?;
        worst = worst.max(r);
        let _ = writeln!(out, "\"{a}\",{r:e}");
    }
    Ok(worst)
}

pub fn validate(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let pairs = default_uv_pairs(sys.matrix(), sys.n_branches());
    let report = validate_system(sys, cfg.validate.grid_points, &pairs);
    let lemma = lemma_check(sys, cfg.validate.cover_required);
    write_report(
        cfg,
        "validation_report.txt",
        &format!("{report}\n\nrange criteria\n{lemma}"),
    )?;
    Ok(report.passed())
}

pub fn relations(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let k = cfg.relations.test_functions;
    let cells = cfg.grid.cells;
    let fns = random_test_functions(sys.ambient(), cells, k, cfg.seed, -1.0, 1.0);
    let pairs = default_uv_pairs(sys.matrix(), sys.n_branches());
    let report =
        verify_ck_relations(sys, &fns, &pairs, cfg.tolerances.relations).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut body = format!(
        "system: {} ({} branches, {} cells)\n{report}\n",
        sys.name(),
        sys.n_branches(),
        cells
    );
    let refine = quadrature_refinement(sys);
    let others = random_test_functions(sys.ambient(), cells, 2 * k, cfg.seed.wrapping_add(1), -1.0, 1.0);
    let mut adjoint: f64 = 0.0;
    let mut projections: f64 = 0.0;
    for i in 1..=sys.n_branches() {
        for pair in others.chunks(2) {
            let d =
                adjointness_defect(sys, i, &pair[0], &pair[1], refine).map_err(|e| CliError::Usage(e.to_string()))?;
            adjoint = adjoint.max(d);
        }
    }
    for phi in &fns {
        for (q, p) in projection_defects(sys, phi).map_err(|e| CliError::Usage(e.to_string()))? {
            projections = projections.max(q).max(p);
        }
    }
    let adjoint_ok = adjoint <= cfg.tolerances.adjoint;
    let proj_ok = projections <= cfg.tolerances.relations;
    let _ = writeln!(
        body,
        "adjointness: {} max defect {adjoint:.3e} (refinement {refine})",
        verdict(adjoint_ok)
    );
    let _ = writeln!(
        body,
        "multiplication identities: {} max defect {projections:.3e}",
        verdict(proj_ok)
    );
    let passed = report.passed() && adjoint_ok && proj_ok;
    let _ = write!(body, "summary: {}", verdict(passed));
    write_report(cfg, "relations_report.txt", &body)?;
    Ok(passed)
}

pub fn pf(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let Some(input) = &cfg.pf.input else {
        return Err(CliError::Usage("pf needs an input CSV (--input or pf.input)".into()));
    };
    let phi = read_grid(cfg, sys, input)?;
    let n = cfg.pf.n.unwrap_or(sys.n_branches());
    let out = pf_apply(sys, &phi, n).map_err(perron_failure)?;
    write_artifact(cfg, "pf_output.csv", &out.to_csv_string())?;

    let mut body = format!("system: {}, branches summed: {n}\n", sys.name());
    let _ = writeln!(body, "mass in: {:e}, mass out: {:e}", phi.l1_norm(), out.l1_norm());
    let _ = writeln!(body, "# defining property");
    let worst = residual_lines(&mut body, sys, &phi, n)?;
    let defining_ok = worst <= cfg.tolerances.defining;
    let _ = writeln!(
        body,
        "defining property within {:e}: {}",
        cfg.tolerances.defining,
        verdict(defining_ok)
    );
    let mut passed = defining_ok;
    if cfg.pf.samples > 0 {
        let bins = cfg.pf.bins.unwrap_or(cfg.grid.cells.min(256));
        if !cfg.grid.cells.is_multiple_of(bins) {
            return Err(CliError::Usage(format!(
                "pf.bins ({bins}) must divide grid.cells ({})",
                cfg.grid.cells
            )));
        }
        let est = pf_monte_carlo(sys, &phi, cfg.pf.samples, cfg.seed, bins).map_err(perron_failure)?;
        write_artifact(cfg, "monte_carlo.csv", &est.estimate.to_csv_string())?;
        let coarse = out.coarsen(bins).map_err(|e| CliError::Usage(e.to_string()))?;
        let gap = coarse
            .l1_distance(&est.estimate)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let ok = gap <= cfg.tolerances.monte_carlo;
        let _ = writeln!(
            body,
            "monte carlo ({} samples, {bins} bins): {} l1 gap {gap:.4e}",
            cfg.pf.samples,
            verdict(ok)
        );
        passed &= ok;
    }
    let _ = write!(body, "summary: {}", verdict(passed));
    write_report(cfg, "pf_report.txt", &body)?;
    Ok(passed)
}

pub fn matrix_rep(cfg: &RunConfig, sys: &BranchingSystem, block: Option<usize>) -> Outcome {
    let block = block.unwrap_or(sys.n_branches());
    let rep = match pf_matrix_representation(sys, block) {
        Ok(rep) => rep,
        Err(e @ PerronError::BlockTooLarge { .. }) => return Err(CliError::Usage(e.to_string())),
        Err(e) => {
            write_report(
                cfg,
                "matrix_report.txt",
                &format!("system: {}\nsummary: fail\n{e}", sys.name()),
            )?;
            return Ok(false);
        }
    };
    let csv = rep.to_csv();
    write_artifact(cfg, "matrix.csv", &format!("{csv}\n"))?;
    let mut body = format!("system: {}, block {block}x{block}\n", sys.name());
    for row in &rep.entries {
        let _ = writeln!(
            body,
            "{}",
            row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("  ")
        );
    }
    match rep.verified_cells {
        Some(c) => {
            let _ = writeln!(
                body,
                "columns checked against the operator on {c} cells, max gap {:.3e}",
                rep.max_gap
            );
        }
        None => body.push_str("no aligned grid small enough to check the columns\n"),
    }
    body.push_str("summary: pass");
    write_report(cfg, "matrix_report.txt", &body)?;
    Ok(true)
}

pub fn invariant(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let rho0 = match &cfg.invariant.input {
        Some(p) => read_grid(cfg, sys, p)?,
        None => {
            let l = sys.ambient_f64();
            GridFunction::from_fn(sys.ambient().clone(), cfg.grid.cells, |_| 1.0 / l)
                .map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    let mut body = format!("system: {}\n", sys.name());
    let (density, converged, errors) =
        match invariant_density(sys, &rho0, cfg.invariant.max_iters, cfg.invariant.tol_l1) {
            Ok(r) => {
                let _ = writeln!(body, "converged after {} iterations", r.iterations);
                (r.density, true, r.errors)
            }
            Err(PerronError::NotConverged { last, errors }) => {
                let _ = writeln!(body, "no convergence within {} iterations", cfg.invariant.max_iters);
                (*last, false, errors)
            }
            Err(e) => return Err(perron_failure(e)),
        };
    write_artifact(cfg, "invariant_density.csv", &density.to_csv_string())?;
    let tail = errors.len().saturating_sub(5);
    for (k, e) in errors.iter().enumerate().skip(tail) {
        let _ = writeln!(body, "step {}: l1 change {e:.3e}", k + 1);
    }
    body.push_str("# defining property of the last iterate\n");
    let worst = residual_lines(&mut body, sys, &density, sys.n_branches())?;
    let defining_ok = worst <= cfg.tolerances.defining;
    let _ = writeln!(
        body,
        "defining property within {:e}: {}",
        cfg.tolerances.defining,
        verdict(defining_ok)
    );
    let passed = converged && defining_ok;
    let _ = write!(body, "summary: {}", verdict(passed));
    write_report(cfg, "invariant_report.txt", &body)?;
    Ok(passed)
}

pub fn truncation(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let phi = match &cfg.truncation.input {
        Some(p) => read_grid(cfg, sys, p)?,
        None => GridFunction::indicator(&sys.range_union(sys.n_branches()), cfg.grid.cells)
            .map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let report = match truncation_study(sys, &phi, &cfg.truncation.ns) {
        Ok(r) => r,
        Err(e @ PerronError::SupportViolation { .. }) => {
            write_report(cfg, "truncation_report.txt", &format!("summary: fail\n{e}"))?;
            return Ok(false);
        }
        Err(e) => return Err(perron_failure(e)),
    };
    let passed = report.passed(cfg.tolerances.defining);
    let body = format!("{}summary: {}", report.render(cfg.tolerances.defining), verdict(passed));
    write_report(cfg, "truncation_report.txt", &body)?;
    Ok(passed)
}

pub fn export_system(cfg: &RunConfig, sys: &BranchingSystem) -> Outcome {
    let desc = SystemDescription::describe(sys).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = desc.to_toml_string().map_err(|e| CliError::Usage(e.to_string()))?;
    write_report(cfg, "system.toml", &text)?;
    Ok(true)
}
