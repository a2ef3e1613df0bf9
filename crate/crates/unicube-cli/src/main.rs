//! `unicube`: command-line front end for the unicube library.
//!
//! Every subcommand is a thin wrapper over one library operation. Runs are
//! reproducible: randomized commands take `--seed`, sampling is keyed by
//! (seed, trial), and stdout is byte-identical for identical arguments at
//! any `--threads` setting. The default output is a human-readable table;
//! `--json` switches stdout to a run record with the command line, the
//! seed, sha256 digests of every input file, and a flat result payload.
//! `--out` writes that record (plus wall time, which is why it stays off
//! stdout) to a file -- except for `gen`, whose artifact is the generated
//! truth table itself.
//!
//! Exit codes: 0 success, 2 input error, 3 resource-budget error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use unicube::boolfn::BooleanFunction;
use unicube::decoder::{decode_quadratic, DecodeConfig};
use unicube::error::{Error, Result};
use unicube::fourier::wht;
use unicube::genavg::{
    generalized_average_estimate, generalized_average_exact, reduce_to_uk, BinaryMatrix,
};
use unicube::gowers::{gowers_norm_estimate, gowers_norm_exact};
use unicube::hom::{
    best_homomorphism, blr_agreement, blr_agreement_estimate, homomorphism_count, map_agreement,
    shift_correction, FiniteAbelianPGroup, GroupMap,
};
use unicube::quad::QuadraticPolynomial;
use unicube::rm2::{dichotomy, rm2_exact_distance};
use unicube::rng::{gen_below, stream_rng};
use unicube::testers::{
    akklr_test, blr_exact_acceptance, blr_test, exact_acceptance_hypergraph,
    exact_acceptance_quadraticity, hypergraph_linearity_test, hypergraph_quadraticity_test,
    linearity_theoretical_bound, quadraticity_theoretical_bound, Hypergraph, TestReport,
};

const TT_FORMAT: &str = "Truth-table file: line 1 `n=<k>`, line 2 a string of 2^k characters \
                         from {0,1}; character i is 1 when f = -1 at point i (x_1 is the least \
                         significant bit of i).";
const MATRIX_FORMAT: &str = "Matrix file: one 0/1 string per row, leftmost character is column \
                             1; blank lines are skipped.";
const HG_FORMAT: &str = "Hypergraph file: line 1 `t=<vertices>`, then one edge per line as \
                         space-separated 1-based vertex indices.";
const GROUP_FORMAT: &str = "Group spec: `p^k1 x p^k2 x ...` with a single prime p (a bare `p` \
                            reads as `p^1`), e.g. `2^2 x 2^1` for Z_4 x Z_2.";
const MAP_FORMAT: &str = "Map file: one codomain tuple per line (comma-separated coordinates, \
                          first coordinate least significant), line x+1 holding the value at \
                          domain element x; exactly |G| lines.";
const POLY_FORMAT: &str = "Polynomial file: line 1 `n=<k>`, line 2 the k(k-1)/2 quadratic bits \
                           in row-major pair order, line 3 the k linear bits (x_1 first), line \
                           4 the constant bit.";

#[derive(Parser)]
#[command(
    name = "unicube",
    version,
    about = "Boolean-function analysis over the hypercube: uniformity norms, property tests, \
             quadratic decoding, and homomorphism testing",
    after_help = "Exit codes: 0 success, 2 input error, 3 resource-budget error."
)]
struct Cli {
    /// Cap internal parallelism at N threads (results never depend on N).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Emit the run record as JSON on stdout instead of the human table.
    #[arg(long, global = true)]
    json: bool,
    /// Write the run record (with wall time) to this file; for `gen`,
    /// write the generated truth table here instead.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Walsh-Hadamard coefficients sorted by |coefficient| descending.
    #[command(after_help = TT_FORMAT)]
    Spectrum {
        /// Input function (truth-table file).
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Show only the K largest-magnitude coefficients.
        #[arg(long, value_name = "K")]
        top: Option<usize>,
    },
    /// Gowers uniformity norm ||f||_(U_d), exact or Monte-Carlo.
    #[command(group = ArgGroup::new("mode").required(true).args(["exact", "estimate"]))]
    #[command(after_help = TT_FORMAT)]
    Gowers {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Norm order d >= 1.
        #[arg(long)]
        d: usize,
        /// Evaluate the norm exactly (refused over the operation budget).
        #[arg(long)]
        exact: bool,
        /// Sample the norm from random derivative products.
        #[arg(long)]
        estimate: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generalized average E_A(f) for a 0/1 matrix A.
    #[command(group = ArgGroup::new("mode").required(true).args(["exact", "estimate"]))]
    #[command(after_help = format!("{TT_FORMAT}\n{MATRIX_FORMAT}"))]
    Average {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        #[arg(long, value_name = "FILE")]
        matrix: PathBuf,
        /// Enumerate all assignments (refused over the budget).
        #[arg(long)]
        exact: bool,
        /// Sample random assignments instead.
        #[arg(long)]
        estimate: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reduce a matrix to an A_k form, producing a replayable certificate
    /// for the bound |E_A(f)| <= ||f||_(U_k).
    #[command(after_help = MATRIX_FORMAT)]
    Reduce {
        #[arg(long, value_name = "FILE")]
        matrix: PathBuf,
        /// Skip re-verifying every step of the certificate.
        #[arg(long)]
        skip_verify: bool,
        /// Write the full certificate (every intermediate matrix) as JSON.
        #[arg(long, value_name = "PATH")]
        cert_out: Option<PathBuf>,
    },
    /// Property tests with seeded Monte-Carlo reports.
    #[command(subcommand)]
    Test(TestCommand),
    /// Distance to the nearest quadratic sign function.
    #[command(subcommand)]
    Rm2(Rm2Command),
    /// Recover a quadratic close to f from its derivative spectra.
    #[command(after_help = TT_FORMAT)]
    Decode {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Weight cutoff for the fitting support (default: half the mean
        /// weight of the choice function).
        #[arg(long)]
        threshold: Option<f64>,
        /// Restarts of the spanning-subset fit.
        #[arg(long, default_value_t = 50)]
        restarts: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score linear fits over the best shift instead of pinning it to 0.
        #[arg(long)]
        shift_search: bool,
        /// Up to this dimension the decoder searches all shapes exhaustively.
        #[arg(long, default_value_t = 6, value_name = "N")]
        exhaustive_max_n: usize,
        /// Write the recovered polynomial to this file.
        #[arg(long, value_name = "PATH")]
        poly_out: Option<PathBuf>,
    },
    /// Homomorphism testing over finite abelian p-groups.
    #[command(subcommand)]
    Hom(HomCommand),
    /// Generate functions in the truth-table format (to --out or stdout).
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Subcommand)]
enum TestCommand {
    /// Three-query linearity test: f(x) f(y) f(x+y) = 1.
    #[command(group = ArgGroup::new("mode").args(["exact", "trials"]))]
    #[command(after_help = TT_FORMAT)]
    Blr {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Four-query affine variant, insensitive to a sign flip of f.
        #[arg(long)]
        affine: bool,
        /// Compute the exact acceptance probability instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Linearity test over the complete graph on t vertices.
    #[command(group = ArgGroup::new("mode").args(["exact", "trials"]))]
    #[command(after_help = TT_FORMAT)]
    Graph {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Vertex count of the complete graph.
        #[arg(long)]
        t: usize,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attach the soundness bound 1/2^|E| + ||f||_(U_2) to the report.
        #[arg(long)]
        with_bound: bool,
    },
    /// Linearity test over an explicit hypergraph (pair edges).
    #[command(group = ArgGroup::new("mode").args(["exact", "trials"]))]
    #[command(after_help = format!("{TT_FORMAT}\n{HG_FORMAT}"))]
    HypergraphLin {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        #[arg(long, value_name = "FILE")]
        hg: PathBuf,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        with_bound: bool,
    },
    /// Quadraticity test over a 3-uniform hypergraph.
    #[command(group = ArgGroup::new("mode").args(["exact", "trials"]))]
    #[command(after_help = format!("{TT_FORMAT}\n{HG_FORMAT}"))]
    HypergraphQuad {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        #[arg(long, value_name = "FILE")]
        hg: PathBuf,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        with_bound: bool,
    },
    /// Order-k derivative-product test; accepts with probability exactly
    /// (1 + ||f||_(U_k)^(2^k)) / 2.
    #[command(after_help = TT_FORMAT)]
    Akklr {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Derivative order k >= 1.
        #[arg(long)]
        k: usize,
        /// Also evaluate the exact acceptance from the norm identity.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Rm2Command {
    /// Exhaustive nearest-quadratic search (small n only).
    #[command(after_help = format!("{TT_FORMAT}\n{POLY_FORMAT}"))]
    Distance {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Write the nearest polynomial to this file.
        #[arg(long, value_name = "PATH")]
        poly_out: Option<PathBuf>,
    },
    /// Sampled NEAR/FAR dichotomy on the distance to quadratics.
    #[command(after_help = TT_FORMAT)]
    Dicho {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Decision threshold on the sampled mean.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Probability the sampled mean lands within delta/2 of the truth.
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum HomCommand {
    /// BLR agreement Pr(phi(x) + phi(y) = phi(x+y)), exact or sampled.
    #[command(group = ArgGroup::new("mode").required(true).args(["exact", "estimate"]))]
    #[command(after_help = format!("{GROUP_FORMAT}\n{MAP_FORMAT}"))]
    Agree {
        /// Domain group spec.
        #[arg(long, value_name = "SPEC")]
        group: String,
        /// Codomain group spec (must be elementary: every exponent 1).
        #[arg(long, value_name = "SPEC")]
        codomain: String,
        /// The map phi as a value file.
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        /// Enumerate all ordered pairs (refused over the budget).
        #[arg(long)]
        exact: bool,
        /// Sample random pairs instead.
        #[arg(long)]
        estimate: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The homomorphism agreeing with phi most often (exhaustive search).
    #[command(after_help = format!("{GROUP_FORMAT}\n{MAP_FORMAT}"))]
    Best {
        #[arg(long, value_name = "SPEC")]
        group: String,
        #[arg(long, value_name = "SPEC")]
        codomain: String,
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        /// Write the winning homomorphism as a map file.
        #[arg(long, value_name = "PATH")]
        map_out: Option<PathBuf>,
    },
    /// Correct a homomorphism psi toward phi given a shift witness h with
    /// phi = psi + h on part of the domain.
    #[command(after_help = format!("{GROUP_FORMAT}\n{MAP_FORMAT}"))]
    Correct {
        #[arg(long, value_name = "SPEC")]
        group: String,
        #[arg(long, value_name = "SPEC")]
        codomain: String,
        /// The observed map phi.
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        /// The homomorphism psi to correct.
        #[arg(long = "hom", value_name = "FILE")]
        base: PathBuf,
        /// The shift h as a codomain tuple, e.g. `0,1`.
        #[arg(long, value_name = "TUPLE")]
        shift: String,
        /// Write the corrected homomorphism as a map file.
        #[arg(long, value_name = "PATH")]
        map_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// The character (-1)^(<alpha,x> + b) (b = 1 with --negate).
    Linear {
        #[arg(long)]
        n: usize,
        /// Coefficient vector (bit i selects x_(i+1)).
        #[arg(long, default_value_t = 0)]
        alpha: u32,
        /// Flip the sign everywhere (affine rather than linear).
        #[arg(long)]
        negate: bool,
    },
    /// The inner-product function (-1)^(x1 x2 + x3 x4 + ...), even n.
    Bent {
        #[arg(long)]
        n: usize,
    },
    /// The sign function of a quadratic polynomial.
    #[command(group = ArgGroup::new("source").required(true).args(["expr", "poly", "random"]))]
    #[command(after_help = POLY_FORMAT)]
    Quadratic {
        #[arg(long)]
        n: usize,
        /// Polynomial expression such as `x1*x2+x3+1`.
        #[arg(long, value_name = "EXPR")]
        expr: Option<String>,
        /// Polynomial file.
        #[arg(long, value_name = "FILE")]
        poly: Option<PathBuf>,
        /// Draw the coefficients uniformly at random.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A uniformly random function.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// An existing function with each value flipped at the given rate.
    #[command(after_help = TT_FORMAT)]
    Noisy {
        #[arg(long = "fn", value_name = "FILE")]
        function: PathBuf,
        /// Flip probability per point, in [0, 1].
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// The machine-readable run record. `wall_time` is filled only in the
/// `--out` file so stdout stays byte-identical across repeated runs.
#[derive(Serialize)]
struct RunRecord {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    result: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

/// What a subcommand hands back to the shared output plumbing.
struct Outcome {
    result: BTreeMap<String, Value>,
    /// Pre-formatted human output; key-value lines are printed otherwise.
    human: Option<String>,
    seed: Option<u64>,
}

/// Tracks input files and their digests as they are read.
#[derive(Default)]
struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            write!(hex, "{b:02x}").expect("writing to a String cannot fail");
        }
        self.digests.insert(path.display().to_string(), hex);
        String::from_utf8(bytes)
            .map_err(|_| Error::input(format!("{}: file is not UTF-8", path.display())))
    }

    fn read_function(&mut self, path: &Path) -> Result<BooleanFunction> {
        BooleanFunction::parse_truth_table(&self.read(path)?)
    }

    fn read_matrix(&mut self, path: &Path) -> Result<BinaryMatrix> {
        BinaryMatrix::parse(&self.read(path)?)
    }

    fn read_hypergraph(&mut self, path: &Path) -> Result<Hypergraph> {
        Hypergraph::parse(&self.read(path)?)
    }

    fn read_map(
        &mut self,
        path: &Path,
        domain: &FiniteAbelianPGroup,
        codomain: &FiniteAbelianPGroup,
    ) -> Result<GroupMap> {
        GroupMap::parse(domain.clone(), codomain.clone(), &self.read(path)?)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn num(v: f64) -> Value {
    Value::from(v)
}

fn int(v: u64) -> Value {
    Value::from(v)
}

fn opt_num(v: Option<f64>) -> Value {
    v.map(Value::from).unwrap_or(Value::Null)
}

fn report_entries(map: &mut BTreeMap<String, Value>, r: &TestReport) {
    map.insert("trials".into(), int(r.trials));
    map.insert("accepts".into(), int(r.accepts));
    map.insert("acceptance".into(), num(r.acceptance));
    map.insert("stderr".into(), opt_num(r.stderr));
    map.insert("seed".into(), int(r.seed));
    if let Some(b) = r.theoretical_bound {
        map.insert("theoretical_bound".into(), num(b));
    }
    map.insert("queries_per_trial".into(), int(r.queries_per_trial));
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Null => "none".to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Results are thread-count independent by construction; the cap
        // only limits resource use.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("input error: cannot configure {threads} threads: {e}");
            std::process::exit(2);
        }
    }
    let start = Instant::now();
    let mut inputs = Inputs::default();
    match run(&cli, &mut inputs) {
        Ok(outcome) => emit(&cli, inputs, outcome, start.elapsed().as_secs_f64()),
        Err(e) => {
            eprintln!("{e}");
            let code = match e {
                Error::Input(_) => 2,
                Error::Budget { .. } => 3,
            };
            std::process::exit(code);
        }
    }
}

/// The invocation with `--threads` stripped: the cap changes resource use,
/// never results, so records from any thread count compare equal.
fn command_string() -> String {
    let mut parts = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        if arg == "--threads" {
            args.next();
            continue;
        }
        if arg.starts_with("--threads=") {
            continue;
        }
        parts.push(arg);
    }
    parts.join(" ")
}

fn emit(cli: &Cli, inputs: Inputs, outcome: Outcome, wall_time: f64) {
    let record = RunRecord {
        command: command_string(),
        seed: outcome.seed,
        inputs: inputs.digests,
        result: outcome.result,
        wall_time: None,
    };
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&record).expect("record serialization cannot fail")
        );
    } else if let Some(text) = &outcome.human {
        print!("{text}");
    } else {
        for (k, v) in &record.result {
            println!("{k} = {}", render_value(v));
        }
    }
    // `gen` already wrote its artifact to --out; every other command
    // stores the timed record there.
    if !matches!(cli.command, Command::Gen(_)) {
        if let Some(path) = &cli.out {
            let timed = RunRecord {
                wall_time: Some(wall_time),
                ..record
            };
            let text = serde_json::to_string_pretty(&timed)
                .expect("record serialization cannot fail");
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("input error: {}: {e}", path.display());
                std::process::exit(2);
            }
        }
    }
}

fn run(cli: &Cli, inputs: &mut Inputs) -> Result<Outcome> {
    match &cli.command {
        Command::Spectrum { function, top } => cmd_spectrum(inputs, function, *top),
        Command::Gowers {
            function,
            d,
            exact,
            trials,
            seed,
            ..
        } => cmd_gowers(inputs, function, *d, *exact, *trials, *seed),
        Command::Average {
            function,
            matrix,
            exact,
            trials,
            seed,
            ..
        } => cmd_average(inputs, function, matrix, *exact, *trials, *seed),
        Command::Reduce {
            matrix,
            skip_verify,
            cert_out,
        } => cmd_reduce(inputs, matrix, *skip_verify, cert_out.as_deref()),
        Command::Test(test) => run_test(inputs, test),
        Command::Rm2(rm2) => run_rm2(inputs, rm2),
        Command::Decode {
            function,
            threshold,
            restarts,
            seed,
            shift_search,
            exhaustive_max_n,
            poly_out,
        } => cmd_decode(
            inputs,
            function,
            &DecodeConfig {
                threshold: *threshold,
                restarts: *restarts,
                seed: *seed,
                shift_search: *shift_search,
                exhaustive_max_n: *exhaustive_max_n,
            },
            poly_out.as_deref(),
        ),
        Command::Hom(hom) => run_hom(inputs, hom),
        Command::Gen(gen) => run_gen(inputs, gen, cli),
    }
}

fn cmd_spectrum(inputs: &mut Inputs, function: &Path, top: Option<usize>) -> Result<Outcome> {
    let f = inputs.read_function(function)?;
    let spectrum = wht(&f);
    let mut entries: Vec<(u32, f64)> = spectrum
        .coeffs()
        .iter()
        .enumerate()
        .map(|(alpha, &c)| (alpha as u32, c))
        .collect();
    entries.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .expect("coefficients are finite")
            .then(a.0.cmp(&b.0))
    });
    let shown = top.unwrap_or(entries.len()).min(entries.len());
    let n = f.n();
    let mut human = format!("{:>10}  {:>width$}  coefficient\n", "alpha", "bits", width = n.max(4));
    let mut result = BTreeMap::new();
    result.insert("n".into(), int(n as u64));
    result.insert("shown".into(), int(shown as u64));
    result.insert("parseval_sum".into(), num(spectrum.parseval_sum()));
    for (rank, &(alpha, coeff)) in entries.iter().take(shown).enumerate() {
        let _ = writeln!(
            human,
            "{alpha:>10}  {alpha:0width$b}  {coeff}",
            width = n.max(4)
        );
        result.insert(format!("r{rank:08}_alpha"), int(alpha as u64));
        result.insert(format!("r{rank:08}_coeff"), num(coeff));
    }
    Ok(Outcome {
        result,
        human: Some(human),
        seed: None,
    })
}

fn cmd_gowers(
    inputs: &mut Inputs,
    function: &Path,
    d: usize,
    exact: bool,
    trials: u64,
    seed: u64,
) -> Result<Outcome> {
    let f = inputs.read_function(function)?;
    let mut result = BTreeMap::new();
    result.insert("d".into(), int(d as u64));
    result.insert("n".into(), int(f.n() as u64));
    if exact {
        result.insert("mode".into(), Value::from("exact"));
        result.insert("value".into(), num(gowers_norm_exact(&f, d)?));
        Ok(Outcome {
            result,
            human: None,
            seed: None,
        })
    } else {
        let est = gowers_norm_estimate(&f, d, trials, seed)?;
        result.insert("mode".into(), Value::from("estimate"));
        result.insert("value".into(), num(est.value));
        result.insert("raw_mean".into(), num(est.raw_mean));
        result.insert("stderr".into(), opt_num(est.stderr));
        result.insert("trials".into(), int(est.trials));
        result.insert("seed".into(), int(est.seed));
        Ok(Outcome {
            result,
            human: None,
            seed: Some(seed),
        })
    }
}

fn cmd_average(
    inputs: &mut Inputs,
    function: &Path,
    matrix: &Path,
    exact: bool,
    trials: u64,
    seed: u64,
) -> Result<Outcome> {
    let f = inputs.read_function(function)?;
    let a = inputs.read_matrix(matrix)?;
    let mut result = BTreeMap::new();
    result.insert("rows".into(), int(a.rows() as u64));
    result.insert("cols".into(), int(a.cols() as u64));
    result.insert("n".into(), int(f.n() as u64));
    if exact {
        result.insert("mode".into(), Value::from("exact"));
        result.insert("value".into(), num(generalized_average_exact(&a, &f)?));
        Ok(Outcome {
            result,
            human: None,
            seed: None,
        })
    } else {
        let est = generalized_average_estimate(&a, &f, trials, seed)?;
        result.insert("mode".into(), Value::from("estimate"));
        result.insert("value".into(), num(est.estimate));
        result.insert("stderr".into(), opt_num(est.stderr));
        result.insert("trials".into(), int(est.trials));
        result.insert("seed".into(), int(est.seed));
        Ok(Outcome {
            result,
            human: None,
            seed: Some(seed),
        })
    }
}

fn cmd_reduce(
    inputs: &mut Inputs,
    matrix: &Path,
    skip_verify: bool,
    cert_out: Option<&Path>,
) -> Result<Outcome> {
    let a = inputs.read_matrix(matrix)?;
    let cert = reduce_to_uk(&a)?;
    if !skip_verify {
        cert.verify(1e-9)?;
    }
    if let Some(path) = cert_out {
        let text = serde_json::to_string_pretty(&cert)
            .map_err(|e| Error::input(format!("certificate serialization failed: {e}")))?;
        write_file(path, &(text + "\n"))?;
    }
    let mut result = BTreeMap::new();
    result.insert("input_rows".into(), int(a.rows() as u64));
    result.insert("input_cols".into(), int(a.cols() as u64));
    result.insert("steps".into(), int(cert.steps.len() as u64));
    result.insert("terminal_k".into(), int(cert.terminal_k as u64));
    result.insert("exponent".into(), int(cert.exponent));
    result.insert("verified".into(), Value::from(!skip_verify));
    let mut human = cert.to_report_string();
    human.push_str(&format!("verified: {}\n", !skip_verify));
    Ok(Outcome {
        result,
        human: Some(human),
        seed: None,
    })
}

fn run_test(inputs: &mut Inputs, test: &TestCommand) -> Result<Outcome> {
    match test {
        TestCommand::Blr {
            function,
            affine,
            exact,
            trials,
            seed,
        } => {
            let f = inputs.read_function(function)?;
            let mut result = BTreeMap::new();
            result.insert("affine".into(), Value::from(*affine));
            if *exact {
                result.insert("mode".into(), Value::from("exact"));
                result.insert("acceptance".into(), num(blr_exact_acceptance(&f, *affine)));
                Ok(Outcome {
                    result,
                    human: None,
                    seed: None,
                })
            } else {
                let report = blr_test(&f, *trials, *seed, *affine)?;
                result.insert("mode".into(), Value::from("monte-carlo"));
                report_entries(&mut result, &report);
                Ok(Outcome {
                    result,
                    human: None,
                    seed: Some(*seed),
                })
            }
        }
        TestCommand::Graph {
            function,
            t,
            exact,
            trials,
            seed,
            with_bound,
        } => {
            let h = Hypergraph::complete_graph(*t)?;
            hypergraph_outcome(inputs, function, &h, false, *exact, *trials, *seed, *with_bound)
        }
        TestCommand::HypergraphLin {
            function,
            hg,
            exact,
            trials,
            seed,
            with_bound,
        } => {
            let h = inputs.read_hypergraph(hg)?;
            hypergraph_outcome(inputs, function, &h, false, *exact, *trials, *seed, *with_bound)
        }
        TestCommand::HypergraphQuad {
            function,
            hg,
            exact,
            trials,
            seed,
            with_bound,
        } => {
            let h = inputs.read_hypergraph(hg)?;
            hypergraph_outcome(inputs, function, &h, true, *exact, *trials, *seed, *with_bound)
        }
        TestCommand::Akklr {
            function,
            k,
            exact,
            trials,
            seed,
        } => {
            let f = inputs.read_function(function)?;
            let report = akklr_test(&f, *k, *trials, *seed)?;
            let mut result = BTreeMap::new();
            result.insert("k".into(), int(*k as u64));
            report_entries(&mut result, &report);
            if *exact {
                let norm = gowers_norm_exact(&f, *k)?;
                let acceptance = (1.0 + norm.powi(1 << *k)) / 2.0;
                result.insert("exact_acceptance".into(), num(acceptance));
            }
            Ok(Outcome {
                result,
                human: None,
                seed: Some(*seed),
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn hypergraph_outcome(
    inputs: &mut Inputs,
    function: &Path,
    h: &Hypergraph,
    quadraticity: bool,
    exact: bool,
    trials: u64,
    seed: u64,
    with_bound: bool,
) -> Result<Outcome> {
    let f = inputs.read_function(function)?;
    let mut result = BTreeMap::new();
    result.insert("t".into(), int(h.t() as u64));
    result.insert("edges".into(), int(h.edge_count() as u64));
    let bound = if with_bound {
        Some(if quadraticity {
            quadraticity_theoretical_bound(&f, h)?
        } else {
            linearity_theoretical_bound(&f, h)?
        })
    } else {
        None
    };
    if exact {
        let acceptance = if quadraticity {
            exact_acceptance_quadraticity(&f, h)?
        } else {
            exact_acceptance_hypergraph(&f, h)?
        };
        result.insert("mode".into(), Value::from("exact"));
        result.insert("acceptance".into(), num(acceptance));
        if let Some(b) = bound {
            result.insert("theoretical_bound".into(), num(b));
        }
        Ok(Outcome {
            result,
            human: None,
            seed: None,
        })
    } else {
        let mut report = if quadraticity {
            hypergraph_quadraticity_test(&f, h, trials, seed)?
        } else {
            hypergraph_linearity_test(&f, h, trials, seed)?
        };
        if let Some(b) = bound {
            report = report.with_theoretical_bound(b);
        }
        result.insert("mode".into(), Value::from("monte-carlo"));
        report_entries(&mut result, &report);
        Ok(Outcome {
            result,
            human: None,
            seed: Some(seed),
        })
    }
}

fn run_rm2(inputs: &mut Inputs, rm2: &Rm2Command) -> Result<Outcome> {
    match rm2 {
        Rm2Command::Distance { function, poly_out } => {
            let f = inputs.read_function(function)?;
            let (distance, poly) = rm2_exact_distance(&f)?;
            if let Some(path) = poly_out {
                write_file(path, &poly.to_file_string())?;
            }
            let mut result = BTreeMap::new();
            result.insert("n".into(), int(f.n() as u64));
            result.insert("distance".into(), num(distance));
            result.insert("correlation".into(), num(1.0 - 2.0 * distance));
            result.insert("polynomial".into(), Value::from(poly.to_expression()));
            Ok(Outcome {
                result,
                human: None,
                seed: None,
            })
        }
        Rm2Command::Dicho {
            function,
            delta,
            confidence,
            seed,
        } => {
            let f = inputs.read_function(function)?;
            let verdict = dichotomy(&f, *delta, *confidence, *seed)?;
            let mut result = BTreeMap::new();
            result.insert(
                "branch".into(),
                Value::from(match verdict.branch {
                    unicube::rm2::DichotomyBranch::Far => "FAR",
                    unicube::rm2::DichotomyBranch::Near => "NEAR",
                }),
            );
            result.insert("nu".into(), num(verdict.nu));
            result.insert("delta".into(), num(verdict.delta));
            result.insert("trials".into(), int(verdict.trials));
            result.insert("seed".into(), int(verdict.seed));
            if let Some(b) = verdict.far_bound {
                result.insert("far_bound".into(), num(b));
            }
            if let Some(s) = verdict.near_statement {
                result.insert("near_statement".into(), Value::from(s));
            }
            Ok(Outcome {
                result,
                human: None,
                seed: Some(*seed),
            })
        }
    }
}

fn cmd_decode(
    inputs: &mut Inputs,
    function: &Path,
    config: &DecodeConfig,
    poly_out: Option<&Path>,
) -> Result<Outcome> {
    let f = inputs.read_function(function)?;
    let (poly, correlation) = decode_quadratic(&f, config)?;
    if let Some(path) = poly_out {
        write_file(path, &poly.to_file_string())?;
    }
    let mut result = BTreeMap::new();
    result.insert("n".into(), int(f.n() as u64));
    result.insert("correlation".into(), num(correlation));
    result.insert("distance".into(), num((1.0 - correlation) / 2.0));
    result.insert("polynomial".into(), Value::from(poly.to_expression()));
    result.insert(
        "route".into(),
        Value::from(if f.n() <= config.exhaustive_max_n {
            "exhaustive"
        } else {
            "pipeline"
        }),
    );
    Ok(Outcome {
        result,
        human: None,
        seed: Some(config.seed),
    })
}

fn parse_groups(group: &str, codomain: &str) -> Result<(FiniteAbelianPGroup, FiniteAbelianPGroup)> {
    Ok((
        FiniteAbelianPGroup::parse(group)?,
        FiniteAbelianPGroup::parse(codomain)?,
    ))
}

fn run_hom(inputs: &mut Inputs, hom: &HomCommand) -> Result<Outcome> {
    match hom {
        HomCommand::Agree {
            group,
            codomain,
            map,
            exact,
            trials,
            seed,
            ..
        } => {
            let (g, h) = parse_groups(group, codomain)?;
            let phi = inputs.read_map(map, &g, &h)?;
            let mut result = BTreeMap::new();
            result.insert("group".into(), Value::from(g.to_spec_string()));
            result.insert("codomain".into(), Value::from(h.to_spec_string()));
            result.insert("order".into(), int(g.order() as u64));
            result.insert("is_homomorphism".into(), Value::from(phi.is_homomorphism()));
            if *exact {
                result.insert("mode".into(), Value::from("exact"));
                result.insert("agreement".into(), num(blr_agreement(&phi)?));
                Ok(Outcome {
                    result,
                    human: None,
                    seed: None,
                })
            } else {
                let report = blr_agreement_estimate(&phi, *trials, *seed)?;
                result.insert("mode".into(), Value::from("monte-carlo"));
                result.insert("agreement".into(), num(report.acceptance));
                report_entries(&mut result, &report);
                Ok(Outcome {
                    result,
                    human: None,
                    seed: Some(*seed),
                })
            }
        }
        HomCommand::Best {
            group,
            codomain,
            map,
            map_out,
        } => {
            let (g, h) = parse_groups(group, codomain)?;
            let phi = inputs.read_map(map, &g, &h)?;
            let (psi, agreement) = best_homomorphism(&phi)?;
            if let Some(path) = map_out {
                write_file(path, &psi.to_file_string())?;
            }
            let mut result = BTreeMap::new();
            result.insert("group".into(), Value::from(g.to_spec_string()));
            result.insert("codomain".into(), Value::from(h.to_spec_string()));
            result.insert(
                "homomorphisms".into(),
                int(homomorphism_count(&g, &h) as u64),
            );
            result.insert("agreement".into(), num(agreement));
            for i in 0..g.factor_count() {
                result.insert(
                    format!("image_{}", i + 1),
                    Value::from(h.tuple_string(psi.value(g.generator(i)))),
                );
            }
            Ok(Outcome {
                result,
                human: None,
                seed: None,
            })
        }
        HomCommand::Correct {
            group,
            codomain,
            map,
            base,
            shift,
            map_out,
        } => {
            let (g, h) = parse_groups(group, codomain)?;
            let phi = inputs.read_map(map, &g, &h)?;
            let psi = inputs.read_map(base, &g, &h)?;
            let shift_index = h.parse_tuple(shift)?;
            let corrected = shift_correction(&phi, &psi, shift_index)?;
            if let Some(path) = map_out {
                write_file(path, &corrected.to_file_string())?;
            }
            let mut result = BTreeMap::new();
            result.insert("group".into(), Value::from(g.to_spec_string()));
            result.insert("codomain".into(), Value::from(h.to_spec_string()));
            result.insert("shift".into(), Value::from(h.tuple_string(shift_index)));
            result.insert("agreement_before".into(), num(map_agreement(&psi, &phi)?));
            result.insert(
                "agreement_after".into(),
                num(map_agreement(&corrected, &phi)?),
            );
            result.insert("changed".into(), Value::from(corrected != psi));
            result.insert(
                "is_homomorphism".into(),
                Value::from(corrected.is_homomorphism()),
            );
            Ok(Outcome {
                result,
                human: None,
                seed: None,
            })
        }
    }
}

fn run_gen(inputs: &mut Inputs, gen: &GenCommand, cli: &Cli) -> Result<Outcome> {
    let (f, seed) = match gen {
        GenCommand::Linear { n, alpha, negate } => {
            (BooleanFunction::linear_fn(*n, *alpha, *negate)?, None)
        }
        GenCommand::Bent { n } => (BooleanFunction::inner_product_bent(*n)?, None),
        GenCommand::Quadratic {
            n,
            expr,
            poly,
            random,
            seed,
        } => {
            let q = if let Some(expr) = expr {
                QuadraticPolynomial::parse_expression(*n, expr)?
            } else if let Some(path) = poly {
                let q = QuadraticPolynomial::parse(&inputs.read(path)?)?;
                if q.n() != *n {
                    return Err(Error::input(format!(
                        "polynomial file has n={}, requested n={n}",
                        q.n()
                    )));
                }
                q
            } else {
                debug_assert!(*random, "clap enforces exactly one source");
                random_quadratic(*n, *seed)?
            };
            (q.to_function(), random.then_some(*seed))
        }
        GenCommand::Random { n, seed } => (BooleanFunction::random_fn(*n, *seed)?, Some(*seed)),
        GenCommand::Noisy {
            function,
            rate,
            seed,
        } => (
            inputs.read_function(function)?.noisy(*rate, *seed)?,
            Some(*seed),
        ),
    };
    let table = f.to_truth_table_string();
    if cli.json && cli.out.is_none() {
        return Err(Error::input(
            "gen with --json needs --out: the record replaces the table on stdout",
        ));
    }
    let human = match &cli.out {
        Some(path) => {
            write_file(path, &table)?;
            format!("wrote n={} truth table to {}\n", f.n(), path.display())
        }
        None => table.clone(),
    };
    let mut result = BTreeMap::new();
    result.insert("n".into(), int(f.n() as u64));
    result.insert("points".into(), int(f.len() as u64));
    result.insert(
        "minus_ones".into(),
        int((0..f.len() as u32).filter(|&x| f.sign_bit(x)).count() as u64),
    );
    if let Some(path) = &cli.out {
        result.insert("out".into(), Value::from(path.display().to_string()));
    }
    Ok(Outcome {
        result,
        human: Some(human),
        seed,
    })
}

/// Uniform quadratic polynomial: pair bits row-major, then linear bits
/// x_1..x_n, then the constant, each drawn from one stream keyed by the
/// seed.
fn random_quadratic(n: usize, seed: u64) -> Result<QuadraticPolynomial> {
    let mut rng = stream_rng(seed, 0);
    let mut quad = unicube::f2::BitMatrix::zero(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            quad.set(i, j, gen_below(&mut rng, 2) == 1);
        }
    }
    let mut lin = 0u32;
    for i in 0..n {
        if gen_below(&mut rng, 2) == 1 {
            lin |= 1 << i;
        }
    }
    let const_bit = gen_below(&mut rng, 2) == 1;
    QuadraticPolynomial::new(n, quad, lin, const_bit)
}
