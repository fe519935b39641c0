//! One function per command. Cells are produced in a fixed order and cell
//! `i` draws from seeds derived from `(seed, i)`, so numerics do not depend
//! on the thread count.

use std::time::Instant;

use nck_core::extrapolation::{steps_diagnostic, CqOptions, StepBudgets};
use nck_core::holder::{integrate_line, harmonic_reproduce, scan_profile, InstanceFamily, QuadratureConfig};
use nck_core::maurey::{d_value, maurey_fit, LinearMapIntoLp};
use nck_core::mazur::{holder_exponent_estimate, kosaki_remark_check, mazur_exponent_bound, normalize, squares_lipschitz_check};
use nck_core::random_systems::{mixed_norm_exact_rademacher, OrthonormalSystem};
use nck_core::sampling::{derive_seed, random_density, random_element, random_selfadjoint_contraction, random_unit_vector, random_unitary, stream};
use nck_core::triple_norm::{column_value, row_value, triple_norm_upper_with, Certification, TripleNormOptions};
use nck_core::{chi, CMat, TraceSpace};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, Family};
use crate::error::{Context, LabError};
use crate::real::Real;
use crate::report::{Cell, MatrixRecord, Report};

/// Runs `command` on a worker pool of `config.threads` threads (all cores
/// when unset).
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Report, LabError> {
    config.validate(command)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = config.threads {
        builder = builder.num_threads(threads);
    }
    let pool = builder.build().map_err(|e| LabError::Threads(e.to_string()))?;
    pool.install(|| {
        let mut report = Report::new(command, config);
        match command {
            Command::KhintchineScan => khintchine_scan(config, &mut report)?,
            Command::HolderScan => holder_scan(config, &mut report)?,
            Command::TripleNorm => triple_norm(config, &mut report)?,
            Command::ExtrapolationDiag => extrapolation_diag(config, &mut report)?,
            Command::MaureyFit => maurey(config, &mut report)?,
            Command::MazurScan => mazur_scan(config, &mut report)?,
            Command::KernelsSelftest => kernels_selftest(config, &mut report)?,
        }
        Ok(report)
    })
}

fn elapsed_ms(start: Instant) -> Real {
    Real(start.elapsed().as_secs_f64() * 1e3)
}

fn tuple(space: &TraceSpace, n: usize, seed: u64, instance: u64) -> Vec<CMat> {
    let mut rng = stream(seed, instance);
    (0..n).map(|_| random_element(space, &mut rng)).collect()
}

fn tuple_witness(x: &[CMat]) -> Vec<MatrixRecord> {
    x.iter().enumerate().map(|(k, m)| MatrixRecord::new(format!("x{k}"), m)).collect()
}

/// Index of the largest value; the first one on ties.
fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (i, v)| if *v > values[best] { i } else { best })
}

fn khintchine_scan(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.khintchine_scan;
    let tol = config.tolerance.get();
    let mut index = 0u64;
    for q in &c.q {
        let q = q.get();
        for &dim in &c.dims {
            for &n in &c.n_terms {
                let start = Instant::now();
                let seed = derive_seed(config.seed, index);
                let id = format!("khintchine-{index}");
                let space = TraceSpace::normalized(dim);
                let rows: Vec<(f64, f64)> = (0..c.instances)
                    .into_par_iter()
                    .map(|i| {
                        let x = tuple(&space, n, seed, i);
                        let s = mixed_norm_exact_rademacher(&space, &x, q)?.value;
                        let options = TripleNormOptions { restarts: c.restarts, seed: derive_seed(seed, i), ..TripleNormOptions::default() };
                        let v = triple_norm_upper_with(&space, &x, q, &options)?.value;
                        Ok((s, v))
                    })
                    .collect::<nck_core::Result<_>>()
                    .context(|| format!("{id}: q = {q}, dim = {dim}, n = {n}"))?;
                let ratios: Vec<f64> = rows.iter().map(|(s, v)| if *s > 0.0 { v / s } else { 0.0 }).collect();
                let easy: Vec<f64> = rows.iter().map(|(s, v)| if *v > 0.0 { s / (chi(q) * v) } else { 0.0 }).collect();
                for (i, (s, v)) in rows.iter().enumerate() {
                    if *s > chi(q) * v + tol {
                        report.violation(&id, format!("instance {i}: ||S||_q = {s} exceeds chi_q V = {}", chi(q) * v), true);
                    }
                }
                let worst = argmax(&ratios);
                let mut cell = Cell::new(id, seed)
                    .extra("easy_bound_max", easy[argmax(&easy)])
                    .extra("instances", c.instances as f64);
                cell.q = Some(Real(q));
                cell.dim = dim;
                cell.n_terms = n;
                cell.constant = Real(ratios[worst]);
                cell.witness = tuple_witness(&tuple(&space, n, seed, worst as u64));
                cell.runtime_ms = elapsed_ms(start);
                report.cells.push(cell);
                index += 1;
            }
        }
    }
    Ok(())
}

fn holder_scan(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.holder_scan;
    let family = match c.family {
        Family::General => InstanceFamily::General,
        Family::Commutative => InstanceFamily::Commutative,
    };
    let mut index = 0u64;
    for (i, profile) in config.holder_profiles()?.iter().enumerate() {
        let seed = derive_seed(config.seed, i as u64);
        let mut maxima = Vec::new();
        let first = report.cells.len();
        for &dim in &c.dims {
            let start = Instant::now();
            let id = format!("holder-{index}");
            let scan = scan_profile(profile, &[dim], c.instances, seed, c.exponent, family)
                .context(|| format!("{id}: p = {}, s = {}, theta = {}", profile.p(), profile.s(), profile.theta()))?;
            let (_, constant) = &scan.per_dim[0];
            maxima.push(constant.constant);
            let mut cell = Cell::new(id, constant.seed).extra("degenerate", scan.degenerate as f64);
            cell.p = Some(Real(profile.p()));
            cell.q = Some(Real(profile.q()));
            cell.s = Some(Real(profile.s()));
            cell.theta = Some(Real(profile.theta()));
            cell.r = Some(Real(profile.r()));
            cell.dim = dim;
            cell.n_terms = 1;
            cell.constant = Real(constant.constant);
            cell.witness = constant.witness.iter().map(MatrixRecord::from_named).collect();
            cell.runtime_ms = elapsed_ms(start);
            report.cells.push(cell);
            index += 1;
        }
        let hi = maxima.iter().copied().fold(0.0, f64::max);
        let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
        let growth = hi / lo;
        for cell in &mut report.cells[first..] {
            cell.extra.insert("growth".into(), Real(growth));
        }
        if growth > 2.0 {
            let id = report.cells[first].id.clone();
            report.violation(&id, format!("constant grows by {growth} across dimensions {:?}", c.dims), false);
        }
    }
    Ok(())
}

fn triple_norm(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.triple_norm;
    let mut index = 0u64;
    for q in &c.q {
        let q = q.get();
        for &dim in &c.dims {
            for &n in &c.n_terms {
                let start = Instant::now();
                let seed = derive_seed(config.seed, index);
                let id = format!("triple-{index}");
                let space = TraceSpace::standard(dim);
                let mut ratios = Vec::new();
                let mut values = Vec::new();
                let mut hilbert_gap = 0.0_f64;
                let mut exact = 0;
                for i in 0..c.instances {
                    let x = tuple(&space, n, seed, i);
                    let options = TripleNormOptions {
                        restarts: c.restarts,
                        seed: derive_seed(seed, i),
                        certify_convex: true,
                        ..TripleNormOptions::default()
                    };
                    let result = triple_norm_upper_with(&space, &x, q, &options).context(|| format!("{id}: instance {i}"))?;
                    let endpoint = column_value(&space, &x, q).min(row_value(&space, &x, q));
                    ratios.push(if endpoint > 0.0 { result.value / endpoint } else { 0.0 });
                    values.push(result.value);
                    exact += usize::from(result.certified == Certification::Exact);
                    if q == 2.0 {
                        let l2 = x.iter().map(|m| space.tau_abs_pow(m, 2.0)).sum::<f64>().sqrt();
                        hilbert_gap = hilbert_gap.max((result.value - l2).abs() / l2.max(f64::MIN_POSITIVE));
                    }
                }
                if hilbert_gap > 1e-6 {
                    report.violation(&id, format!("q = 2 value misses the l2 sum by {hilbert_gap:e} relative"), true);
                }
                let worst = argmax(&values);
                let mut cell = Cell::new(id, seed)
                    .extra("max_ratio_to_best_endpoint", ratios[argmax(&ratios)])
                    .extra("certified_exact", exact as f64)
                    .extra("hilbert_gap", hilbert_gap);
                cell.q = Some(Real(q));
                cell.dim = dim;
                cell.n_terms = n;
                cell.constant = Real(values[worst]);
                cell.witness = tuple_witness(&tuple(&space, n, seed, worst as u64));
                cell.runtime_ms = elapsed_ms(start);
                report.cells.push(cell);
                index += 1;
            }
        }
    }
    Ok(())
}

fn extrapolation_diag(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.extrapolation_diag;
    let mut index = 0u64;
    for p in &c.p {
        for q in &c.q {
            let (p, q) = (p.get(), q.get());
            for &dim in &c.dims {
                for &n in &c.n_terms {
                    let start = Instant::now();
                    let seed = derive_seed(config.seed, index);
                    let id = format!("extrapolation-{index}");
                    let space = TraceSpace::standard(dim);
                    let system = OrthonormalSystem::new(c.system, c.model_dim, n).context(|| format!("{id}: system"))?;
                    let budgets = StepBudgets {
                        cq: CqOptions { restarts: c.restarts, samples: c.samples, max_iterations: c.max_iterations, ..CqOptions::default() },
                        triple_restarts: c.restarts,
                        r: None,
                    };
                    let mut steps = Vec::new();
                    for i in 0..c.instances {
                        let x = tuple(&space, n, seed, i);
                        let s = steps_diagnostic(&space, &x, p, q, &system, &budgets, derive_seed(seed, i))
                            .context(|| format!("{id}: instance {i}"))?;
                        steps.push(s);
                    }
                    let pick = |f: fn(&nck_core::extrapolation::StepsReport) -> f64| steps.iter().map(f).fold(0.0, f64::max);
                    let modified: Vec<f64> = steps.iter().map(|s| s.modified_step3).collect();
                    let worst = argmax(&modified);
                    let mut cell = Cell::new(id, seed)
                        .extra("step1_max", pick(|s| s.step1))
                        .extra("step2_max", pick(|s| s.step2))
                        .extra("step3_max", pick(|s| s.step3))
                        .extra("theta_prime", steps[0].theta_prime);
                    cell.p = Some(Real(p));
                    cell.q = Some(Real(q));
                    cell.theta = Some(Real(steps[0].theta));
                    cell.r = Some(Real(steps[0].r));
                    cell.dim = dim;
                    cell.n_terms = n;
                    cell.constant = Real(modified[worst]);
                    cell.witness = tuple_witness(&tuple(&space, n, seed, worst as u64));
                    cell.runtime_ms = elapsed_ms(start);
                    report.cells.push(cell);
                    index += 1;
                }
            }
        }
    }
    Ok(())
}

fn maurey(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.maurey_fit;
    let mut index = 0u64;
    for p in &c.p {
        let p = p.get();
        for &dim in &c.dims {
            for &m in &c.m {
                let start = Instant::now();
                let seed = derive_seed(config.seed, index);
                let id = format!("maurey-{index}");
                let space = TraceSpace::standard(dim);
                let mut constants = Vec::new();
                let mut audit = 0.0_f64;
                let mut witnesses = Vec::new();
                for i in 0..c.instances {
                    let instance_seed = derive_seed(seed, i);
                    let images = tuple(&space, m, seed, i);
                    let (u, _) = LinearMapIntoLp::new(&space, images, p).context(|| format!("{id}: instance {i}"))?.normalized(200, instance_seed);
                    let fit = maurey_fit(&u, c.pool_size, c.iterations, instance_seed);
                    let bound = fit.c_certified.powi(2);
                    let sampled = (0..c.audit_samples)
                        .into_par_iter()
                        .map(|k| {
                            let x: Vec<Complex64> = random_unit_vector(&mut stream(derive_seed(instance_seed, 1), k), m);
                            let t = u.apply(&x);
                            fit.measure.atoms().iter().map(|(f, w)| w * d_value(&space, f, u.alpha(), &t).powi(2)).sum::<f64>()
                        })
                        .reduce(|| 0.0, f64::max);
                    if sampled > bound + 1e-8 {
                        report.violation(&id, format!("instance {i}: sampled form {sampled} exceeds certificate {bound}"), true);
                    }
                    audit = audit.max(if bound > 0.0 { sampled / bound } else { 0.0 });
                    constants.push(fit.c_certified);
                    let heaviest = fit.measure.atoms().iter().fold(&fit.measure.atoms()[0], |a, b| if b.1 > a.1 { b } else { a });
                    witnesses.push((heaviest.0.matrix().clone(), fit.measure.atoms().len()));
                }
                let worst = argmax(&constants);
                let mut cell = Cell::new(id, seed).extra("audit_max_ratio", audit).extra("atoms", witnesses[worst].1 as f64);
                cell.p = Some(Real(p));
                cell.dim = dim;
                cell.n_terms = m;
                cell.constant = Real(constants[worst]);
                cell.witness = vec![MatrixRecord::new("f", &witnesses[worst].0)];
                cell.runtime_ms = elapsed_ms(start);
                report.cells.push(cell);
                index += 1;
            }
        }
    }
    Ok(())
}

fn mazur_scan(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.mazur_scan;
    let tol = config.tolerance.get();
    let mut index = 0u64;
    for [p, q] in &c.pairs {
        let (p, q) = (p.get(), q.get());
        let start = Instant::now();
        let seed = derive_seed(config.seed, index);
        let id = format!("mazur-exponent-{index}");
        let estimate = holder_exponent_estimate(p, q, c.dim, c.pair_count, c.closeness_scale.get(), seed)
            .context(|| format!("{id}: p = {p}, q = {q}"))?;
        let expected = if p >= 1.0 && q >= 1.0 { (p / q).min(1.0) } else { mazur_exponent_bound(p, q) };
        if estimate.exponent < expected - 0.05 {
            report.violation(&id, format!("exponent {} below {expected} - 0.05", estimate.exponent), false);
        }
        let mut cell = Cell::new(id, seed)
            .extra("holder_constant", estimate.constant)
            .extra("r2", estimate.regression_r2)
            .extra("expected_exponent", expected);
        cell.p = Some(Real(p));
        cell.q = Some(Real(q));
        cell.dim = c.dim;
        cell.n_terms = estimate.pair_count;
        cell.constant = Real(estimate.exponent);
        cell.runtime_ms = elapsed_ms(start);
        report.cells.push(cell);
        index += 1;
    }
    let space = TraceSpace::normalized(c.dim);
    for p in &c.squares_p {
        let p = p.get();
        let start = Instant::now();
        let seed = derive_seed(config.seed, index);
        let id = format!("mazur-squares-{index}");
        let checks = (0..c.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i);
                let g = normalize(&space, &random_element(&space, &mut rng), p)?;
                let h = normalize(&space, &random_element(&space, &mut rng), p)?;
                squares_lipschitz_check(&space, &g, &h, p)
            })
            .collect::<nck_core::Result<Vec<_>>>()
            .context(|| format!("{id}: p = {p}"))?;
        push_check_cell(report, id, seed, p, c.dim, c.instances, &checks, tol, start);
        index += 1;
    }
    for p in &c.kosaki_p {
        let p = p.get();
        let start = Instant::now();
        let seed = derive_seed(config.seed, index);
        let id = format!("mazur-kosaki-{index}");
        let checks = (0..c.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i);
                let f = random_density(&space, &mut rng);
                let x = if i % 2 == 0 { random_unitary(&space, &mut rng) } else { random_selfadjoint_contraction(&space, &mut rng) };
                kosaki_remark_check(&space, &x, &f, p)
            })
            .collect::<nck_core::Result<Vec<_>>>()
            .context(|| format!("{id}: p = {p}"))?;
        push_check_cell(report, id, seed, p, c.dim, c.instances, &checks, tol, start);
        index += 1;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn push_check_cell(
    report: &mut Report,
    id: String,
    seed: u64,
    p: f64,
    dim: usize,
    instances: u64,
    checks: &[nck_core::mazur::InequalityCheck],
    tol: f64,
    start: Instant,
) {
    let failures = checks.iter().filter(|k| k.lhs > k.rhs + tol).count();
    if failures > 0 {
        report.violation(&id, format!("{failures} of {instances} instances violate the inequality"), true);
    }
    let ratios: Vec<f64> = checks.iter().map(|k| if k.rhs > 0.0 { k.lhs / k.rhs } else { 0.0 }).collect();
    let mut cell = Cell::new(id, seed).extra("failures", failures as f64);
    cell.p = Some(Real(p));
    cell.dim = dim;
    cell.n_terms = instances as usize;
    cell.constant = Real(ratios[argmax(&ratios)]);
    cell.runtime_ms = elapsed_ms(start);
    report.cells.push(cell);
}

fn kernels_selftest(config: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let c = &config.kernels_selftest;
    let quadrature = QuadratureConfig::default();
    let mut index = 0u64;
    for k in [0u8, 1] {
        for omega in &c.omega {
            let omega = omega.get();
            let start = Instant::now();
            let id = format!("kernel-mass-{index}");
            let mass = integrate_line(k, omega, &quadrature, |_| Complex64::new(1.0, 0.0)).context(|| format!("{id}: k = {k}, omega = {omega}"))?.re;
            let error = (mass - 1.0).abs();
            if error > 1e-8 {
                report.violation(&id, format!("Q^{k}_{omega} has mass {mass}"), true);
            }
            let mut cell = Cell::new(id, config.seed).extra("k", k as f64).extra("error", error);
            cell.theta = Some(Real(omega));
            cell.constant = Real(mass);
            cell.runtime_ms = elapsed_ms(start);
            report.cells.push(cell);
            index += 1;
        }
    }
    for a in &c.a {
        let a = a.get();
        for theta in &c.theta {
            let theta = theta.get();
            let start = Instant::now();
            let id = format!("kernel-reproduce-{index}");
            let value = harmonic_reproduce(|z| (z * a).exp(), theta, &quadrature).context(|| format!("{id}: a = {a}, theta = {theta}"))?;
            let error = (value - Complex64::new((a * theta).exp(), 0.0)).norm();
            if error > 1e-6 {
                report.violation(&id, format!("exp({a} z) reproduced at {theta} with error {error:e}"), true);
            }
            let mut cell = Cell::new(id, config.seed).extra("a", a);
            cell.theta = Some(Real(theta));
            cell.constant = Real(error);
            cell.runtime_ms = elapsed_ms(start);
            report.cells.push(cell);
            index += 1;
        }
    }
    Ok(())
}
