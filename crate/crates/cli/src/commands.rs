use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chebyshev_core::bounds::{self, mc_tail, Inequality, PreparedBound, Statistic, StatisticKind};
use chebyshev_core::covop::{cauchy_estimate, CovarianceOperator};
use chebyshev_core::hilbert::{
    isometry_pushforward_moment, riesz, verify_st_equals_sh, Reduction, EQUIVALENCE_TOLERANCE,
};
use chebyshev_core::measure::{Family, Quantization, Role, Sampler};
use chebyshev_core::report::{self, fmt17};
use chebyshev_core::space::{Exponent, PNormSpace};
use chebyshev_core::{BoundReport, DiscreteMeasure, Error};
use serde_json::json;

use crate::{EpsilonArgs, FamilyName, Format, McArgs, OutputArgs, QuantizeArgs, ReduceArgs, SamplerArgs, VerifyArgs};

const DEFAULT_REDUCE_GRID: &str = "1e-3:1e3:20,log";

fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DiscreteMeasure::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn epsilons(args: &EpsilonArgs, default: Option<&str>) -> Result<Vec<f64>> {
    let grid = match (&args.epsilon, &args.grid, default) {
        (Some(e), _, _) => vec![*e],
        (None, Some(spec), _) => bounds::parse_grid(spec)?,
        (None, None, Some(spec)) => bounds::parse_grid(spec)?,
        (None, None, None) => bail!("one of --epsilon or --grid is required"),
    };
    bounds::validate_grid(&grid)?;
    Ok(grid)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn emit_reports(mut reports: Vec<BoundReport>, output: &OutputArgs) -> Result<bool> {
    report::sort_reports(&mut reports);
    let text = match output.format {
        Format::Csv => report::to_csv(&reports),
        Format::Json => report::to_json(&reports),
    };
    write_output(output.out.as_deref(), &text)?;
    let violations: Vec<&BoundReport> = reports.iter().filter(|r| !r.holds).collect();
    if !violations.is_empty() {
        eprintln!("violated:");
        eprint!(
            "{}",
            report::to_csv(&violations.into_iter().copied().collect::<Vec<_>>())
        );
    }
    Ok(reports.iter().all(|r| r.holds))
}

fn selected_inequalities(name: &str) -> Result<(Vec<Inequality>, bool)> {
    Ok(match name {
        "all" => (Inequality::ALL.to_vec(), true),
        "rao" => (vec![Inequality::RaoForward, Inequality::RaoInverse], false),
        other => (vec![other.parse()?], false),
    })
}

pub fn verify(args: &VerifyArgs, require_grid: bool) -> Result<bool> {
    if require_grid && args.epsilon.grid.is_none() {
        bail!("sweep needs --grid");
    }
    let mu = read_measure(&args.input)?;
    let dual = args.dual.as_deref().map(read_measure).transpose()?;
    let grid = epsilons(&args.epsilon, None)?;
    let (inequalities, all) = selected_inequalities(&args.inequality)?;

    let mut reports = Vec::new();
    for inequality in inequalities {
        let prepared = match PreparedBound::new(inequality, &mu, dual.as_ref()) {
            Ok(p) => p,
            Err(Error::NotPositiveDefinite { smallest, threshold }) => {
                eprintln!(
                    "{inequality}: skipped: not positive definite (smallest eigenvalue {smallest:e} ≤ {threshold:e})"
                );
                continue;
            }
            Err(Error::IllConditioned { residual }) => {
                eprintln!("{inequality}: skipped: inverse residual {residual:e} too large");
                continue;
            }
            Err(e @ (Error::Applicability(_) | Error::Shape { .. } | Error::NotCentered { .. })) if all => {
                eprintln!("{inequality}: skipped: {e}");
                continue;
            }
            Err(e) => return Err(anyhow!("{inequality}: {e}")),
        };
        for &eps in &grid {
            reports.push(prepared.evaluate(eps)?);
        }
    }
    emit_reports(reports, &args.output)
}

fn build_sampler(args: &SamplerArgs) -> Result<Sampler> {
    let p: Exponent = args.p.parse().map_err(|e| anyhow!("--p: {e}"))?;
    if args.family == FamilyName::SymmetricAtoms && args.sampler.is_none() {
        let path = args
            .atoms_from
            .as_deref()
            .ok_or_else(|| anyhow!("--family symmetric-atoms needs --atoms-from"))?;
        let source = read_measure(path)?;
        let atoms = source.atoms().iter().map(|a| a.iter().copied().collect()).collect();
        return Ok(Sampler::new(
            source.space(),
            Family::SymmetricAtoms { atoms },
            args.seed,
        )?);
    }
    let space = PNormSpace::new(args.dim, p)?;
    if let Some(path) = &args.sampler {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let family: Family = serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        return Ok(Sampler::new(space, family, args.seed)?);
    }
    Ok(match args.family {
        FamilyName::Gaussian => Sampler::isotropic_gaussian(space, args.scale, args.seed)?,
        FamilyName::UniformBall => Sampler::new(space, Family::UniformBall { radius: args.radius }, args.seed)?,
        FamilyName::SymmetricAtoms => unreachable!("handled above"),
    })
}

fn report_path(args: &QuantizeArgs) -> Option<PathBuf> {
    args.report.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.clone().into_os_string();
            name.push(".report.json");
            PathBuf::from(name)
        })
    })
}

pub fn quantize(args: &QuantizeArgs) -> Result<bool> {
    if !(args.resolution.is_finite() && args.resolution > 0.0) {
        bail!("--resolution must be positive, got {}", args.resolution);
    }
    if args.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let sampler = build_sampler(&args.sampler)?;
    let space = sampler.space();
    let q = Quantization::draw(&sampler, args.samples, args.resolution)?;
    let halved = q.refine(args.resolution / 2.0)?;
    let measure = q.merged_measure();

    let factor_two = q
        .raw()
        .iter()
        .zip(q.quantized())
        .all(|(x, xq)| space.norm(xq.as_slice()) <= 2.0 * space.norm(x.as_slice()));
    let functional = vec![1.0; space.dim()];
    let cauchy = cauchy_estimate(&q.coupled_measure(), &halved.coupled_measure(), &functional)?;
    let level = |q: &Quantization| {
        json!({
            "resolution": q.resolution(),
            "error_bound": q.error_bound(),
            "max_error": q.max_error(),
            "error_within_bound": q.max_error() <= q.error_bound(),
            "shrink": q.shrinks(),
        })
    };
    let pass = q.max_error() <= q.error_bound()
        && halved.max_error() <= halved.error_bound()
        && q.shrinks()
        && halved.shrinks()
        && factor_two
        && cauchy.holds;
    let sidecar = json!({
        "samples": args.samples,
        "seed": sampler.seed(),
        "dim": space.dim(),
        "p": space.p(),
        "atoms": measure.len(),
        "quantization": level(&q),
        "halved": level(&halved),
        "factor_two": factor_two,
        "cauchy": {
            "functional": functional,
            "lhs": cauchy.lhs,
            "rhs": cauchy.rhs,
            "holds": cauchy.holds,
        },
        "holds": pass,
    });
    let mut sidecar_text = serde_json::to_string_pretty(&sidecar)?;
    sidecar_text.push('\n');

    let mut measure_text = measure.to_json();
    measure_text.push('\n');
    write_output(args.out.as_deref(), &measure_text)?;
    match report_path(args) {
        Some(path) => fs::write(&path, sidecar_text).with_context(|| format!("writing {}", path.display()))?,
        None => eprint!("{sidecar_text}"),
    }
    Ok(pass)
}

pub fn mc(args: &McArgs) -> Result<bool> {
    if args.draws < 100 {
        bail!("--draws must be at least 100, got {}", args.draws);
    }
    let sampler = build_sampler(&args.sampler)?;
    let kind: StatisticKind = args.statistic.parse()?;
    let grid = epsilons(&args.epsilon, None)?;
    let operator = || -> Result<CovarianceOperator> {
        let mu = match &args.operator {
            Some(path) => read_measure(path)?,
            None => {
                let draws = sampler.draws(args.draws);
                let n = draws.len();
                DiscreteMeasure::new(sampler.space(), Role::Primal, draws, vec![1.0 / n as f64; n])?
            }
        };
        Ok(CovarianceOperator::build(&mu)?)
    };
    let statistic = match kind {
        StatisticKind::Norm => Statistic::Norm,
        StatisticKind::QuadS => Statistic::QuadS(operator()?),
        StatisticKind::MahalanobisS => Statistic::MahalanobisS(operator()?.invert()?),
    };
    let reports = grid
        .iter()
        .map(|&eps| mc_tail(&sampler, &statistic, eps, args.draws, sampler.seed()))
        .collect::<chebyshev_core::Result<Vec<_>>>()?;
    emit_reports(reports, &args.output)
}

pub fn reduce(args: &ReduceArgs) -> Result<bool> {
    let mu = read_measure(&args.input)?;
    if !mu.space().p().is_two() {
        bail!(
            "the Hilbert reduction applies only to p = 2 measures (the Riesz map needs an inner-product norm); input has p = {}",
            mu.space().p()
        );
    }
    let grid = epsilons(&args.epsilon, Some(DEFAULT_REDUCE_GRID))?;
    let t = riesz(mu.space(), None)?;
    let deviation = verify_st_equals_sh(&mu, &t)?;
    let transport = isometry_pushforward_moment(&mu, &t)?;

    let centered = mu.center();
    if centered != mu {
        eprintln!("note: bound equivalence evaluated on the centered measure");
    }
    let equivalences = match Reduction::new(&centered) {
        Ok(r) => grid
            .iter()
            .map(|&e| r.at(e))
            .collect::<chebyshev_core::Result<Vec<_>>>()?,
        Err(Error::NotPositiveDefinite { smallest, threshold }) => {
            eprintln!(
                "bound equivalence: skipped: not positive definite (smallest eigenvalue {smallest:e} ≤ {threshold:e})"
            );
            Vec::new()
        }
        Err(e) => return Err(e.into()),
    };
    let pass = deviation.quadratic <= EQUIVALENCE_TOLERANCE
        && deviation.entrywise <= EQUIVALENCE_TOLERANCE
        && transport.equal
        && equivalences.iter().all(|e| e.holds());

    let text = match args.output.format {
        Format::Json => {
            let rows: Vec<_> = equivalences
                .iter()
                .map(|e| {
                    json!({
                        "epsilon": e.epsilon,
                        "forward_rhs_deviation": e.forward_rhs_deviation,
                        "inverse_rhs_deviation": e.inverse_rhs_deviation,
                        "boundary_sensitive": e.boundary_sensitive,
                        "lhs_agree": e.lhs_agree,
                        "holds": e.holds(),
                        "reports": [e.banach_forward, e.rao_forward, e.banach_inverse, e.rao_inverse],
                    })
                })
                .collect();
            let doc = json!({
                "st_equals_sh": deviation,
                "moment_transport": transport,
                "equivalence": rows,
                "holds": pass,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut out = String::from("check,epsilon,lhs,rhs,deviation,holds\n");
            let st = deviation.quadratic.max(deviation.entrywise);
            out += &format!("st_equals_sh,,,,{},{}\n", fmt17(st), st <= EQUIVALENCE_TOLERANCE);
            let td = (transport.lhs - transport.rhs).abs();
            out += &format!(
                "moment_transport,,{},{},{},{}\n",
                fmt17(transport.lhs),
                fmt17(transport.rhs),
                fmt17(td),
                transport.equal
            );
            for e in &equivalences {
                out += &format!(
                    "forward_rhs,{},{},{},{},{}\n",
                    fmt17(e.epsilon),
                    fmt17(e.banach_forward.rhs),
                    fmt17(e.rao_forward.rhs),
                    fmt17(e.forward_rhs_deviation),
                    e.forward_rhs_deviation <= EQUIVALENCE_TOLERANCE
                );
                out += &format!(
                    "inverse_rhs,{},{},{},{},{}\n",
                    fmt17(e.epsilon),
                    fmt17(e.banach_inverse.rhs),
                    fmt17(e.rao_inverse.rhs),
                    fmt17(e.inverse_rhs_deviation),
                    e.inverse_rhs_deviation <= EQUIVALENCE_TOLERANCE
                );
            }
            out
        }
    };
    write_output(args.output.out.as_deref(), &text)?;
    Ok(pass)
}
