//! Acceptance suite: one line per criterion, nonzero exit when any fails.
//!
//! Run with `cargo test -p nck-lab --test acceptance`; append `-- 3 11` to
//! run only the listed criteria.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nck_core::extrapolation::{regularize_density, regularized_quotient_ratio, substitution_chain, JordanMap};
use nck_core::holder::strip::{three_lines_check, AnalyticFamily, PowerTerm, QuadratureConfig};
use nck_core::holder::{
    commutator_norm, h_t_residual, lifted_scaling, random_instance, selfadjoint_reduction, ExponentProfile,
};
use nck_core::linalg::{c, frobenius, hermitian_eigen, max_abs_diff, unit, CMat};
use nck_core::maurey::{d_value, maurey_fit, LinearMapIntoLp};
use nck_core::mazur::{mazur_exponent_bound, mazur_map, normalize};
use nck_core::random_systems::{mixed_norm_exact_rademacher, mixed_norm_mc, OrthonormalSystem, SystemKind};
use nck_core::sampling::{random_density, random_density_spread, random_element, random_unit_vector, stream};
use nck_core::{Density, TraceSpace};
use nck_lab::{run, Command, ExperimentConfig, Report};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, Path::new("acceptance")).expect("acceptance configuration")
}

fn report(command: Command, text: &str) -> Report {
    run(command, &config(text)).unwrap_or_else(|e| panic!("{}: {e}", command.name()))
}

/// Standard, normalized or two-block weighted trace on `M_dim`.
fn space_for(dim: usize, kind: u64) -> TraceSpace {
    match kind % 3 {
        0 => TraceSpace::standard(dim),
        1 => TraceSpace::normalized(dim),
        _ if dim > 1 => TraceSpace::new((0..dim).map(|i| if i < dim / 2 { 0.5 } else { 2.0 }).collect()).unwrap(),
        _ => TraceSpace::new(vec![3.0]).unwrap(),
    }
}

fn tuple(space: &TraceSpace, n: usize, seed: u64, tag: u64) -> Vec<CMat> {
    let mut rng = stream(seed, tag);
    (0..n).map(|_| random_element(space, &mut rng)).collect()
}

fn quasi_norm_axioms() -> Outcome {
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for p in [0.25, 0.5, 0.75, 1.0, 2.0] {
        for i in 0..1000u64 {
            let space = space_for(1 + (i % 6) as usize, i / 6);
            let xy = tuple(&space, 2, 100, i);
            let (x, y) = (&xy[0], &xy[1]);
            let gap = if p <= 1.0 {
                space.tau_abs_pow(&(x + y), p) - space.tau_abs_pow(x, p) - space.tau_abs_pow(y, p)
            } else {
                space.quasi_norm(&(x + y), p) - space.quasi_norm(x, p) - space.quasi_norm(y, p)
            };
            let holder_pp = space.quasi_norm(&(x * y), p / 2.0) - space.quasi_norm(x, p) * space.quasi_norm(y, p);
            let holder_inf = space.quasi_norm(&(x * y), p) - space.quasi_norm(x, p) * space.quasi_norm(y, f64::INFINITY);
            for g in [gap, holder_pp, holder_inf] {
                worst = worst.max(g);
                if g > 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations, largest excess {worst:.2e}"))
}

fn rademacher_exactness() -> Outcome {
    let mut misses = 0;
    let mut worst = 0.0_f64;
    for i in 0..100u64 {
        let dim = 1 + (i % 6) as usize;
        let n = 1 + (i % 8) as usize;
        let q = [0.5, 1.0, 2.0][(i % 3) as usize];
        let space = TraceSpace::standard(dim);
        let x = tuple(&space, n, 200, i);
        let exact = mixed_norm_exact_rademacher(&space, &x, q).unwrap().value;
        let system = OrthonormalSystem::scalar(SystemKind::Rademacher, n).unwrap();
        let mc = mixed_norm_mc(&space, &system, &x, q, 4000, i).unwrap();
        let slack = 3.0 * mc.std_error + 1e-12 * exact;
        worst = worst.max((mc.value - exact).abs() / slack.max(f64::MIN_POSITIVE));
        if (mc.value - exact).abs() > slack {
            misses += 1;
        }
    }
    outcome(misses == 0, format!("{misses} of 100 outside 3 sigma, largest deviation {worst:.2} of the allowance"))
}

const KHINTCHINE_SCAN: &str = "
tolerance = 1e-8
[khintchine-scan]
q = [0.25, 0.5, 1.0, 2.0]
dims = [2, 4, 8]
n-terms = [3]
instances = 500
restarts = 2
";

fn easy_bound(scan: &Report) -> Outcome {
    let fatal = scan.violations.iter().filter(|v| v.fatal).count();
    let worst = scan.cells.iter().map(|c| c.extra["easy_bound_max"].get()).fold(0.0, f64::max);
    outcome(fatal == 0, format!("{fatal} violations over {} cells, max ||S||_q / (chi_q V) = {worst:.4}", scan.cells.len()))
}

fn khintchine_upper(scan: &Report) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for q in [0.25, 0.5, 1.0] {
        let cells: Vec<_> = scan.cells.iter().filter(|c| c.q.map(|v| v.get()) == Some(q)).collect();
        let betas: Vec<f64> = cells.iter().map(|c| c.constant.get()).collect();
        let hi = betas.iter().copied().fold(0.0, f64::max);
        let lo = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let witnessed = cells.iter().all(|c| c.witness.len() == 3);
        pass &= hi.is_finite() && hi <= 2.0 * lo && witnessed;
        parts.push(format!("q={q}: beta {}", betas.iter().map(|b| format!("{b:.3}")).collect::<Vec<_>>().join("/")));
    }
    outcome(pass, format!("{} over dims 2/4/8", parts.join(", ")))
}

fn hilbert_triple_norm() -> Outcome {
    let scan = report(
        Command::TripleNorm,
        "
[triple-norm]
q = [2.0]
dims = [2, 3, 4]
n-terms = [2, 3]
instances = 17
restarts = 2
",
    );
    let gap = scan.cells.iter().map(|c| c.extra["hilbert_gap"].get()).fold(0.0, f64::max);
    let count: u64 = scan.cells.len() as u64 * 17;
    outcome(!scan.fatal && gap <= 1e-6, format!("{count} instances, largest relative gap {gap:.2e}"))
}

fn holder_scan() -> Outcome {
    let scan = report(
        Command::HolderScan,
        "
[holder-scan]
p = [0.5]
s = [2.0, \"inf\"]
theta = [0.25, 0.5, 0.75]
r-factor = 0.9
dims = [2, 16]
instances = 1000
",
    );
    let mut pass = scan.cells.iter().all(|c| c.constant.get().is_finite());
    let mut worst_growth = 0.0_f64;
    for pair in scan.cells.chunks(2) {
        let (d2, d16) = (pair[0].constant.get(), pair[1].constant.get());
        pass &= d16 <= 2.0 * d2;
        worst_growth = worst_growth.max(d16 / d2);
    }
    let scalar = report(
        Command::HolderScan,
        "
[holder-scan]
p = [0.5]
s = [2.0, \"inf\"]
theta = [0.25, 0.5, 0.75]
dims = [1]
instances = 200
exponent = \"classical\"
family = \"commutative\"
",
    );
    let mut scalar_excess = f64::NEG_INFINITY;
    for cell in &scalar.cells {
        let theta = cell.theta.unwrap().get();
        scalar_excess = scalar_excess.max(cell.constant.get() - 2f64.powf(theta));
    }
    pass &= scalar_excess <= 1e-6;
    outcome(
        pass,
        format!("max dim16/dim2 ratio {worst_growth:.3}; 1x1 commutative max C - 2^theta = {scalar_excess:.2e}"),
    )
}

fn kernels() -> Outcome {
    let scan = report(Command::KernelsSelftest, "");
    let mass = scan
        .cells
        .iter()
        .filter(|c| c.id.starts_with("kernel-mass"))
        .map(|c| (c.constant.get() - 1.0).abs())
        .fold(0.0, f64::max);
    let reproduction = scan
        .cells
        .iter()
        .filter(|c| c.id.starts_with("kernel-reproduce"))
        .map(|c| c.constant.get())
        .fold(0.0, f64::max);
    outcome(
        !scan.fatal && mass <= 1e-8 && reproduction <= 1e-6,
        format!("mass error {mass:.2e}, reproduction error {reproduction:.2e}"),
    )
}

/// Alternates polynomial families with `A f^{a + bz} B + C` families.
fn analytic_family(space: &TraceSpace, seed: u64, i: u64) -> AnalyticFamily {
    let mut rng = stream(seed, i);
    let m: Vec<CMat> = (0..3).map(|_| random_element(space, &mut rng)).collect();
    if i % 2 == 0 {
        AnalyticFamily::polynomial(m)
    } else {
        let f = random_density_spread(space, &mut rng, 4.0);
        let offset = rng.random_range(-1.0..1.0);
        let slope = rng.random_range(-2.0..2.0);
        let term = PowerTerm { left: m[0].clone(), offset, slope, right: m[1].clone() };
        AnalyticFamily::new(f.matrix(), vec![term], vec![m[2].clone()]).unwrap()
    }
}

fn three_lines() -> Outcome {
    // |G|^{p0} has cusps where a singular value of G nearly vanishes on the line.
    let quadrature = QuadratureConfig { max_refinements: 8, ..QuadratureConfig::default() };
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for (k, (p0, p1)) in [0.25, 0.5, 1.0].into_iter().flat_map(|a| [(a, 2.0), (a, f64::INFINITY)]).enumerate() {
        for i in 0..100u64 {
            let space = TraceSpace::standard(1 + (i % 3) as usize);
            let family = analytic_family(&space, 300 + k as u64, i);
            let theta = 0.1 + 0.8 * ((i * 37 % 100) as f64 / 100.0);
            let check = three_lines_check(&space, &family, p0, p1, theta, &quadrature).unwrap();
            worst = worst.max(check.lhs / check.rhs);
            if !check.holds {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("{failures} of 600 fail, largest lhs/rhs {worst:.4}"))
}

fn identities() -> Outcome {
    let mut pass = true;
    let mut residual = 0.0_f64;
    for i in 0..100u64 {
        let space = TraceSpace::standard(1 + (i % 4) as usize);
        let inst = random_instance(&space, &mut stream(400, i));
        let gamma = 1.1 + (i % 5) as f64 * 0.4;
        let alpha = 0.3 + (i % 7) as f64 * 0.25;
        let t = -3.0 + (i % 13) as f64 * 0.5;
        residual = residual.max(h_t_residual(&inst, gamma, alpha, t).unwrap());
    }
    pass &= residual < 1e-9;

    let mut scaling = 0.0_f64;
    for i in 0..30u64 {
        let space = TraceSpace::standard(2 + (i % 3) as usize);
        let inst = random_instance(&space, &mut stream(401, i));
        let s = [2.0, 4.0, f64::INFINITY][(i % 3) as usize];
        let theta = [0.25, 0.5, 0.75][(i / 3 % 3) as usize];
        let profile = ExponentProfile::new(0.5, s, theta, 0.45, 2.0).unwrap();
        let (doubled, lifted) = selfadjoint_reduction(&space, &inst).unwrap();
        let beta = profile.alpha() * (1.0 - profile.theta());
        // 2^{1/q - alpha(1 - theta)} on the left side, 2^{1/p - alpha} on the p-term
        for (b, r) in [(beta, profile.q()), (profile.alpha(), profile.p())] {
            let base = commutator_norm(&space, &inst, b, r).unwrap();
            let up = commutator_norm(&doubled, &lifted, b, r).unwrap();
            let expected = 2f64.powf(1.0 / r - b);
            scaling = scaling.max((up / base - expected).abs() / expected);
            scaling = scaling.max((lifted_scaling(b, r) - expected).abs());
        }
    }
    pass &= scaling < 1e-9;

    let mut jordan = 0.0_f64;
    let mut chain = 0.0_f64;
    for i in 0..100u64 {
        let space = TraceSpace::standard(1 + (i % 5) as usize);
        let mut rng = stream(402, i);
        let f = random_density(&space, &mut rng);
        let y = random_element(&space, &mut rng);
        let alpha = 0.2 + (i % 9) as f64 * 0.3;
        let map = JordanMap::new(&f, alpha).unwrap();
        jordan = jordan.max(max_abs_diff(&map.invert(&map.apply(&y)).unwrap(), &y) / frobenius(&y).max(1.0));
        let theta = 0.1 + (i % 8) as f64 * 0.1;
        let links = substitution_chain(&f, alpha, theta, &y).unwrap();
        chain = chain.max(max_abs_diff(&links.z, &links.z_from_t) / frobenius(&links.z).max(1.0));
    }
    pass &= jordan < 1e-9 && chain < 1e-9;
    outcome(
        pass,
        format!("identity {residual:.2e}, scaling {scaling:.2e}, jordan {jordan:.2e}, T<->Z {chain:.2e}"),
    )
}

fn regularization() -> Outcome {
    let mut violations = 0;
    let (mut trace, mut quotient) = (0.0_f64, 0.0_f64);
    for i in 0..500u64 {
        let space = TraceSpace::standard(1 + (i % 5) as usize);
        let mut rng = stream(500, i);
        let f = random_density_spread(&space, &mut rng, 8.0);
        let f0 = random_density(&space, &mut rng);
        let y = random_element(&space, &mut rng);
        let alpha = rng.random_range(0.5..3.0);
        let g = regularize_density(&f, &f0, alpha).unwrap();
        let tau = space.trace(&g).re;
        let ratio = regularized_quotient_ratio(&space, &f, &g, alpha, &y).unwrap();
        trace = trace.max(tau);
        quotient = quotient.max(ratio);
        if tau > 2.0 + 1e-9 || ratio > 2.0 + 1e-9 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations, max tau(g) {trace:.6}, max quotient {quotient:.6}"))
}

/// `max_x sum_j w_j ||J(f_j^a)^{-1} u(x)||_2^2` over unit `x`, from the Gram
/// matrices of the images.
fn top_eigenvalue(u: &LinearMapIntoLp, atoms: &[(Density, f64)]) -> f64 {
    let space = u.space();
    let m = u.domain_dim();
    let mut form = CMat::zeros(m, m);
    for (f, w) in atoms {
        let map = JordanMap::new(f, u.alpha()).unwrap();
        let ys: Vec<CMat> = u.images().iter().map(|t| map.invert(t).unwrap()).collect();
        for k in 0..m {
            for l in 0..m {
                form[(k, l)] += space.trace(&(ys[k].adjoint() * &ys[l])) * *w;
            }
        }
    }
    hermitian_eigen(&form).0.into_iter().fold(0.0, f64::max)
}

fn diagonal_oracle(cs: &[f64], alpha: f64, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 1..steps {
        for j in 1..steps - i {
            let k = steps - i - j;
            let phi = [i, j, k].map(|v| v as f64 / steps as f64);
            let worst = cs.iter().zip(phi).map(|(c, f)| c * c * f.powf(-2.0 * alpha)).fold(0.0_f64, f64::max);
            best = best.min(worst);
        }
    }
    best.sqrt()
}

fn maurey() -> Outcome {
    let mut unsound = 0;
    let mut eigen_gap = 0.0_f64;
    for i in 0..20u64 {
        let dim = 2 + (i % 4) as usize;
        let m = 1 + (i % 4) as usize;
        let p = [0.5, 0.75][(i % 2) as usize];
        let space = TraceSpace::standard(dim);
        let images = tuple(&space, m, 600, i);
        let (u, _) = LinearMapIntoLp::new(&space, images, p).unwrap().normalized(200, i);
        let fit = maurey_fit(&u, 10, 30, i);
        let exact = top_eigenvalue(&u, fit.measure.atoms()).sqrt();
        eigen_gap = eigen_gap.max((exact - fit.c_certified).abs() / exact);
        let bound = fit.c_certified.powi(2) * (1.0 + 1e-9) + 1e-12;
        let sampled = (0..1000)
            .map(|s| {
                let t = u.apply(&random_unit_vector(&mut stream(601, i * 1000 + s), m));
                fit.measure.atoms().iter().map(|(f, w)| w * d_value(&space, f, u.alpha(), &t).powi(2)).sum::<f64>()
            })
            .fold(0.0, f64::max);
        if sampled > bound || (exact - fit.c_certified).abs() > 1e-9 * exact {
            unsound += 1;
        }
    }
    let mut worst = 0.0_f64;
    let space = TraceSpace::standard(3);
    for i in 0..6u64 {
        let p = [0.5, 0.75][(i % 2) as usize];
        let mut rng = stream(602, i);
        let cs: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let images = cs.iter().enumerate().map(|(k, &ck)| unit(3, k, k) * c(ck)).collect();
        let u = LinearMapIntoLp::new(&space, images, p).unwrap();
        let oracle = diagonal_oracle(&cs, u.alpha(), 300);
        let fit = maurey_fit(&u, 16, 40, i);
        worst = worst.max((fit.c_certified / oracle - 1.0).abs());
    }
    outcome(
        unsound == 0 && eigen_gap <= 1e-9 && worst <= 0.05,
        format!("{unsound} unsound of 20, eigenvalue gap {eigen_gap:.2e}, diagonal maps within {:.2}% of the grid", 100.0 * worst),
    )
}

fn mazur() -> Outcome {
    let pairs = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0), (0.5, 1.0)];
    let mut sphere = 0.0_f64;
    for (k, &(p, q)) in pairs.iter().enumerate() {
        for i in 0..100u64 {
            let space = space_for(1 + (i % 5) as usize, i);
            let x = normalize(&space, &random_element(&space, &mut stream(700 + k as u64, i)), p).unwrap();
            sphere = sphere.max((space.quasi_norm(&mazur_map(&x, p, q).unwrap(), q) - 1.0).abs());
        }
    }
    let scan = report(Command::MazurScan, "[mazur-scan]\ninstances = 500\n");
    let mut exponents_ok = true;
    let mut parts = Vec::new();
    for cell in scan.cells.iter().filter(|c| c.id.starts_with("mazur-exponent")) {
        let (p, q) = (cell.p.unwrap().get(), cell.q.unwrap().get());
        let expected = if p >= 1.0 { (p / q).min(1.0) } else { mazur_exponent_bound(p, q) };
        exponents_ok &= cell.constant.get() >= expected - 0.05;
        parts.push(format!("({p},{q}) {:.3}>={:.3}", cell.constant.get(), expected - 0.05));
    }
    let inequalities_ok = !scan.fatal;
    outcome(
        sphere <= 1e-10 && exponents_ok && inequalities_ok,
        format!("sphere error {sphere:.2e}; exponents {}; squares and Kosaki scans {}", parts.join(" "), if inequalities_ok { "hold" } else { "fail" }),
    )
}

const DETERMINISM: [(Command, &str); 7] = [
    (Command::KhintchineScan, "[khintchine-scan]\ndims = [2]\ninstances = 6\nrestarts = 1\n"),
    (Command::HolderScan, "[holder-scan]\ninstances = 40\n"),
    (Command::TripleNorm, "[triple-norm]\ninstances = 3\nrestarts = 1\n"),
    (Command::ExtrapolationDiag, "[extrapolation-diag]\ninstances = 1\nsamples = 100\nmax-iterations = 4\n"),
    (Command::MaureyFit, "[maurey-fit]\ninstances = 1\nm = [2]\naudit-samples = 50\n"),
    (Command::MazurScan, "[mazur-scan]\ninstances = 30\npairs = [[1.0, 2.0], [0.5, 1.0]]\n"),
    (Command::KernelsSelftest, ""),
];

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for (command, text) in DETERMINISM {
        let mut cfg = config(text);
        let runs: Vec<Report> = [1, 3, 1]
            .into_iter()
            .map(|threads| {
                cfg.threads = Some(threads);
                run(command, &cfg).unwrap().numerics()
            })
            .collect();
        if runs[0] != runs[1] || runs[0] != runs[2] {
            differing.push(command.name());
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() { "7 commands identical across 1 and 3 threads and re-runs".to_string() } else { format!("differ: {}", differing.join(", ")) },
    )
}

/// Criteria to run: the numeric arguments, or all of them.
fn selection() -> Vec<usize> {
    let chosen: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|n| (1..=13).contains(n)).collect();
    if chosen.is_empty() {
        (1..=13).collect()
    } else {
        chosen
    }
}

fn main() -> ExitCode {
    let names = [
        "quasi-norm axioms",
        "Rademacher exactness",
        "easy Khintchine bound",
        "Khintchine upper constant",
        "triple norm at q = 2",
        "commutator Holder scan",
        "strip kernels",
        "three lines",
        "algebraic identities",
        "density regularization",
        "Maurey factorization",
        "Mazur maps",
        "determinism",
    ];
    let chosen = selection();
    let mut khintchine: Option<Report> = None;
    let mut failed = 0;
    for &id in &chosen {
        let start = Instant::now();
        let mut scan = || khintchine.get_or_insert_with(|| report(Command::KhintchineScan, KHINTCHINE_SCAN)).clone();
        let result = match id {
            1 => quasi_norm_axioms(),
            2 => rademacher_exactness(),
            3 => easy_bound(&scan()),
            4 => khintchine_upper(&scan()),
            5 => hilbert_triple_norm(),
            6 => holder_scan(),
            7 => kernels(),
            8 => three_lines(),
            9 => identities(),
            10 => regularization(),
            11 => maurey(),
            12 => mazur(),
            _ => determinism(),
        };
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] AC-{id:<2} {}: {} ({:.1}s)", names[id - 1], result.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!result.pass);
    }
    println!("{} of {} criteria pass", chosen.len() - failed, chosen.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
