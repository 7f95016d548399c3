use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;

use cubic_sos::baselines::{als_sphere_lower_bound, brute_force_decoupled, BRUTE_FORCE_CAP};
use cubic_sos::compressed_sdp::{certify_binary_search, simple_sqrtn_certificate, CompressedOptions, SearchParams};
use cubic_sos::config::Tolerances;
use cubic_sos::error::{Error, Result};
use cubic_sos::rng::SeedTree;
use cubic_sos::roundings::{default_trials, round_cubic_deg6k, round_cubic_sphere, round_high_degree, RoundingOutcome};
use cubic_sos::sdp_solver::{assemble_sos_sdp, BasisPattern, Objective, Relaxation, RelaxationSpec, SolverParams, SosSolution};
use cubic_sos::tensor_poly::{parse_tensor_file, write_tensor, Domain, Tensor};
use cubic_sos::threesat::{parse_dimacs, planted_formula, random_formula, solve_3sat, SatParams};

const CSV_HEADER: &str = "instance-id,n,k,domain,SOS,OPT-or-bound,rounded,ratio,seconds,seed";

#[derive(Parser, Debug)]
#[command(name = "cubic-sos", version, about = "Sum-of-squares relaxations and roundings for cubic polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random tensor or 3SAT instance.
    Gen(GenArgs),
    /// Solve the canonical relaxation and print the SOS value.
    Solve(SolveArgs),
    /// Solve and round.
    Round(RoundArgs),
    /// Emit an upper-bound certificate.
    Certify(CertifyArgs),
    /// Run the satisfiable Max-3SAT pipeline.
    #[command(name = "3sat")]
    Sat(SatArgs),
    /// Sweep `n` and `k` over random Gaussian tensors and write CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Cube,
    Sphere,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Cube => Domain::Hypercube,
            DomainArg::Sphere => Domain::Sphere,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Gaussian,
    Planted,
    Cnf,
    RandomCnf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CertMethod {
    Search,
    Sqrtn,
}

#[derive(Args, Debug, Clone)]
struct TolArgs {
    #[arg(long = "tol-psd")]
    psd: Option<f64>,
    #[arg(long = "tol-consistency")]
    consistency: Option<f64>,
    #[arg(long = "tol-normalization")]
    normalization: Option<f64>,
    #[arg(long = "tol-extraction")]
    extraction: Option<f64>,
    /// Solver primal and gap tolerance.
    #[arg(long = "tol-solver")]
    solver: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.psd {
            t.psd = v;
        }
        if let Some(v) = self.consistency {
            t.consistency = v;
        }
        if let Some(v) = self.normalization {
            t.normalization = v;
        }
        if let Some(v) = self.extraction {
            t.extraction = v;
        }
        t
    }

    fn solver(&self, base: SolverParams) -> SolverParams {
        let mut p = base;
        if let Some(v) = self.solver {
            p.eps_primal = v;
            p.eps_gap = v;
        }
        if let Some(v) = self.max_iter {
            p.max_iter = v;
        }
        p
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    /// Tensor order.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Clause count for CNF instances.
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, value_enum, default_value = "cube")]
    domain: DomainArg,
    /// Gaussian noise added to planted tensors.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "cube")]
    domain: DomainArg,
    /// Moment basis pattern: compact, split or full.
    #[arg(long, default_value = "compact")]
    pattern: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "dump-moments")]
    dump_moments: Option<PathBuf>,
    #[arg(long = "dump-sdp")]
    dump_sdp: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args, Debug)]
struct RoundArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    seed: u64,
    /// Rounding trials; defaults to the level-dependent count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "cube")]
    domain: DomainArg,
    #[arg(long, value_enum, default_value = "search")]
    method: CertMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args, Debug)]
struct SatArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Outer repetitions; defaults to `20 n`.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, value_enum, default_value = "cube")]
    domain: DomainArg,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    /// Report zero in the seconds column so that output is byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_tensor(path: &Path) -> Result<Tensor> {
    Ok(parse_tensor_file(&read(path)?)?.decoupled())
}

fn random_signs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn gen(a: &GenArgs) -> Result<String> {
    let seed = SeedTree::new(a.seed);
    match a.kind {
        GenKind::Gaussian => Ok(write_tensor(&Tensor::gaussian(a.d, a.n, &mut seed.rng()))),
        GenKind::Planted => {
            let mut rng = seed.rng();
            let x = match Domain::from(a.domain) {
                Domain::Hypercube => random_signs(&mut rng, a.n),
                Domain::Sphere => {
                    let g: Vec<f64> = (0..a.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    g.iter().map(|v| v / norm).collect()
                }
            };
            let mut t = Tensor::rank_one(&vec![x; a.d])?;
            if a.noise > 0.0 {
                let noise = Tensor::gaussian(a.d, a.n, &mut seed.child("noise").rng());
                for (idx, c) in noise.entries() {
                    t.add(idx, a.noise * c)?;
                }
            }
            Ok(write_tensor(&t))
        }
        GenKind::Cnf => Ok(planted_formula(a.n, a.m, seed)?.0.to_dimacs()),
        GenKind::RandomCnf => Ok(random_formula(a.n, a.m, seed)?.to_dimacs()),
    }
}

fn relax(t: &Tensor, a: &SolveArgs) -> Result<(Relaxation, SosSolution)> {
    let mut spec = RelaxationSpec::new(2 * t.order() * a.k.max(1), a.domain.into());
    spec.pattern = BasisPattern::parse(&a.pattern)?;
    let relax = assemble_sos_sdp(Objective::Decoupled(t), &spec, &[], None)?;
    if let Some(p) = &a.dump_sdp {
        emit(&Some(p.clone()), &relax.compiled.problem.to_text())?;
    }
    let params = a.tol.solver(SolverParams::default());
    let sol = relax.solve(&params, &a.tol.tolerances(), t.l1_norm().max(1e-12), None)?;
    if let Some(p) = &a.dump_moments {
        emit(&Some(p.clone()), &sol.extraction.mu.to_text())?;
    }
    Ok((relax, sol))
}

fn csv_row(id: usize, n: usize, k: usize, domain: Domain, sos: f64, opt: f64, rounded: f64, secs: f64, seed: u64) -> String {
    let ratio = if sos != 0.0 { rounded / sos } else { 0.0 };
    format!("{id},{n},{k},{},{sos:e},{opt:e},{rounded:e},{ratio:e},{secs:.3},{seed}\n", domain.name())
}

fn solve_cmd(a: &SolveArgs) -> Result<String> {
    let t = read_tensor(&a.input)?;
    let (relax, sol) = relax(&t, a)?;
    let domain: Domain = a.domain.into();
    if a.format == Format::Csv {
        return Ok(format!("{CSV_HEADER}\n{}", csv_row(0, t.dim(), a.k, domain, sol.sos, f64::NAN, f64::NAN, 0.0, 0)));
    }
    let r = &sol.result;
    let mut s = String::new();
    let _ = writeln!(s, "sos: {:e}", sol.sos);
    let _ = writeln!(s, "dual_bound: {:e}", r.dual_bound);
    let _ = writeln!(s, "status: {}", r.status.name());
    let _ = writeln!(s, "iterations: {}", r.iterations);
    let _ = writeln!(s, "primal_residual: {:e}", r.primal_residual);
    let _ = writeln!(s, "psd_residual: {:e}", r.psd_residual);
    let _ = writeln!(s, "mixing: {:e}", sol.extraction.mixing);
    let _ = writeln!(s, "basis_size: {}", relax.basis_size);
    let _ = writeln!(s, "degree: {}", relax.spec.degree);
    let _ = writeln!(s, "domain: {}", domain.name());
    Ok(s)
}

fn run_rounding(t: &Tensor, a: &SolveArgs, trials: Option<usize>, seed: SeedTree) -> Result<(SosSolution, RoundingOutcome)> {
    let (_, sol) = relax(t, a)?;
    let tol = a.tol.tolerances();
    let trials = trials.unwrap_or_else(|| default_trials(t.dim(), a.k));
    let mu = &sol.extraction.mu;
    let out = match (t.order(), Domain::from(a.domain)) {
        (3, Domain::Hypercube) => round_cubic_deg6k(t, mu, a.k, trials, seed, &tol)?,
        (3, Domain::Sphere) => round_cubic_sphere(t, mu, a.k, trials, seed, &tol)?,
        (d, Domain::Hypercube) if d > 3 => round_high_degree(t, mu, trials, seed, &tol)?,
        (d, _) => return Err(Error::UnsupportedDegree(d)),
    };
    Ok((sol, out))
}

fn round_cmd(a: &RoundArgs) -> Result<String> {
    let t = read_tensor(&a.solve.input)?;
    let (sol, out) = run_rounding(&t, &a.solve, a.trials, SeedTree::new(a.seed))?;
    let domain: Domain = a.solve.domain.into();
    if a.solve.format == Format::Csv {
        let row = csv_row(0, t.dim(), a.solve.k, domain, sol.sos, f64::NAN, out.value, 0.0, a.seed);
        return Ok(format!("{CSV_HEADER}\n{row}"));
    }
    let mut s = String::new();
    let _ = writeln!(s, "sos: {:e}", sol.sos);
    let _ = writeln!(s, "rounded: {:e}", out.value);
    let _ = writeln!(s, "ratio: {:e}", out.ratio());
    let _ = writeln!(s, "trials: {}", out.trials);
    let _ = writeln!(s, "best_trial: {}", out.best_trial);
    let _ = writeln!(s, "pz_hit_rate: {:e}", out.pz_hit_rate());
    let _ = writeln!(s, "degenerate_trials: {}", out.degenerate_trials());
    let _ = writeln!(s, "fix_guarantee: {}", out.fix_guarantee_holds(1e-6));
    for (i, g) in out.groups.iter().enumerate() {
        let row: Vec<String> = g.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "assignment_{i}: {}", row.join(" "));
    }
    Ok(s)
}

fn certify_cmd(a: &CertifyArgs) -> Result<String> {
    let t = read_tensor(&a.input)?;
    let tol = a.tol.tolerances();
    let cert = match a.method {
        CertMethod::Search => {
            let defaults = SearchParams::default();
            let params = SearchParams {
                solver: a.tol.solver(defaults.solver.clone()),
                options: CompressedOptions::default(),
                seed: a.seed,
                ..defaults
            };
            certify_binary_search(&t, a.k, a.domain.into(), &params, &tol)?
        }
        CertMethod::Sqrtn => {
            if a.domain != DomainArg::Cube {
                return Err(Error::InvalidInput("the sqrt(n) certificate is defined on the cube".into()));
            }
            simple_sqrtn_certificate(&t, &a.tol.solver(SolverParams::default()), SeedTree::new(a.seed), &tol)?
        }
    };
    Ok(cert.to_text())
}

fn sat_cmd(a: &SatArgs) -> Result<String> {
    let f = parse_dimacs(&read(&a.input)?)?;
    let params = SatParams { c: a.c, outer: a.trials, ..SatParams::default() };
    Ok(solve_3sat(&f, &params, SeedTree::new(a.seed))?.to_text())
}

fn bench_cmd(a: &BenchArgs) -> Result<String> {
    let domain: Domain = a.domain.into();
    let root = SeedTree::new(a.seed);
    let mut s = format!("{CSV_HEADER}\n");
    let mut id = 0;
    for &n in &a.n {
        for &k in &a.k {
            for i in 0..a.instances {
                let seed = root.child(&format!("n{n}k{k}")).index(i as u64);
                let start = Instant::now();
                let t = Tensor::gaussian(3, n, &mut seed.child("tensor").rng());
                let opt = match domain {
                    Domain::Hypercube if n <= BRUTE_FORCE_CAP => brute_force_decoupled(&t)?.value,
                    _ => als_sphere_lower_bound(&t, 32, seed.child("als"))?.value,
                };
                let args = SolveArgs {
                    input: PathBuf::new(),
                    k,
                    domain: a.domain,
                    pattern: "compact".into(),
                    format: Format::Csv,
                    out: None,
                    dump_moments: None,
                    dump_sdp: None,
                    tol: a.tol.clone(),
                };
                let (sol, out) = run_rounding(&t, &args, a.trials, seed.child("round"))?;
                let secs = if a.no_timing { 0.0 } else { start.elapsed().as_secs_f64() };
                s.push_str(&csv_row(id, n, k, domain, sol.sos, opt, out.value, secs, seed.seed()));
                id += 1;
            }
        }
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => emit(&a.out, &gen(a)?),
        Command::Solve(a) => emit(&a.out, &solve_cmd(a)?),
        Command::Round(a) => emit(&a.solve.out, &round_cmd(a)?),
        Command::Certify(a) => emit(&a.out, &certify_cmd(a)?),
        Command::Sat(a) => emit(&a.out, &sat_cmd(a)?),
        Command::Bench(a) => emit(&a.out, &bench_cmd(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
