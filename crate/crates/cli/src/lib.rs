//! Command-line front end for the `morphosym` library.
//!
//! Exit codes: 0 success or verified, 1 verification failure, 2 usage
//! error, 3 data error. Human-readable tables go to the output stream;
//! machine-readable artifacts are written only to `--out` paths.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use morphosym::augment::{parse_schema, DatasetSchema};
use morphosym::dha::{export_dha, subspace_energies, subspace_energies_unchecked, TrajectoryTable, VerifiedDecomposition};
use morphosym::emlp::{compare_sample_efficiency, Activation, ComparisonConfig, Optimizer, TrainConfig};
use morphosym::symm::{identify, verify_equivariance_suite, GroupAction, SymmetrySpec};
use morphosym::{real_character_table, Error, FiniteGroup, Msg, Robot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNVERIFIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Environment variable capping internal parallelism (0 = automatic).
pub const THREADS_VAR: &str = "MORPHOSYM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "morphosym", version, about = "Morphological symmetry analysis for floating-base robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Sampling {
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Random states per group element.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find the symmetry group of a robot and optionally write its spec.
    Identify {
        robot: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Check a symmetry spec against a robot.
    Verify {
        robot: PathBuf,
        spec: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Expand a dataset along group orbits.
    Augment {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Verify the spec on this robot first and resolve missing joint
        /// actions from it.
        #[arg(long)]
        robot: Option<PathBuf>,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Per-isotypic-subspace kinetic energy of a joint-space trajectory.
    Dha {
        robot: PathBuf,
        spec: PathBuf,
        trajectory: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report energies even where the mass matrix couples subspaces.
        #[arg(long)]
        allow_coupling: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Compare equivariant and unconstrained MLPs on momentum regression.
    EmlpDemo {
        robot: PathBuf,
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100, 200])]
        train_sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 500)]
        test_size: usize,
        #[arg(long, default_value_t = 32)]
        hidden_copies: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, value_parser = ["sgd", "adam"], default_value = "sgd")]
        optimizer: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Group utilities.
    Groups {
        #[command(subcommand)]
        command: GroupsCommand,
    },
}

#[derive(Subcommand, Debug)]
enum GroupsCommand {
    /// Print the Cayley table and real character table of a group.
    Show { name: String },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Unverified(String),
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    configure_threads();
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Unverified(msg)) => {
            let _ = writeln!(err, "{msg}");
            EXIT_UNVERIFIED
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

fn configure_threads() {
    let n = std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Identify { robot, out: path, sampling } => cmd_identify(&robot, path.as_deref(), &sampling, out),
        Command::Verify { robot, spec, sampling } => cmd_verify(&robot, &spec, &sampling, out),
        Command::Augment {
            schema,
            spec,
            robot,
            input,
            out: path,
            sampling,
        } => cmd_augment(&schema, &spec, robot.as_deref(), &input, &path, &sampling, out),
        Command::Dha {
            robot,
            spec,
            trajectory,
            out: path,
            allow_coupling,
            sampling,
        } => cmd_dha(&robot, &spec, &trajectory, path.as_deref(), allow_coupling, &sampling, out),
        Command::EmlpDemo {
            robot,
            spec,
            train_sizes,
            seeds,
            test_size,
            hidden_copies,
            depth,
            epochs,
            batch_size,
            lr,
            optimizer,
            out: path,
            sampling,
        } => {
            let config = ComparisonConfig {
                train_sizes,
                seeds,
                test_size,
                hidden_copies,
                depth,
                activation: Activation::Tanh,
                train: TrainConfig {
                    epochs,
                    batch_size,
                    learning_rate: lr,
                    optimizer: if optimizer == "adam" { Optimizer::Adam } else { Optimizer::Sgd },
                    seed: 0,
                },
                ..ComparisonConfig::default()
            };
            cmd_emlp_demo(&robot, &spec, &config, path.as_deref(), &sampling, out)
        }
        Command::Groups {
            command: GroupsCommand::Show { name },
        } => cmd_groups_show(&name, out),
    }
}

fn check_sampling(s: &Sampling) -> Outcome {
    if !(s.tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    if s.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    Ok(())
}

fn load_robot(path: &Path) -> anyhow::Result<Robot> {
    Robot::load(path).with_context(|| format!("loading robot {}", path.display()))
}

fn load_spec(path: &Path) -> anyhow::Result<SymmetrySpec> {
    SymmetrySpec::load(path).with_context(|| format!("loading symmetry spec {}", path.display()))
}

/// Verifies `spec` on `robot`, printing the residual table.
fn verified(robot: &Robot, spec: &SymmetrySpec, s: &Sampling, out: &mut dyn Write) -> std::result::Result<Msg, Failure> {
    let msg = Msg::verify(robot, spec, s.samples, s.tol, s.seed)?;
    print_evidence(&msg, out)?;
    if !msg.is_verified() {
        return Err(Failure::Unverified(format!(
            "symmetry group {} is not a symmetry of {} at tol {:e}",
            msg.group().name(),
            robot.name,
            s.tol
        )));
    }
    Ok(msg)
}

fn print_evidence(msg: &Msg, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "group {} (order {})", msg.group().name(), msg.group().order())?;
    writeln!(out, "{:<16} {:>14} {:>14}", "element", "kinematic", "energy")?;
    for e in msg.evidence() {
        writeln!(out, "{:<16} {:>14.3e} {:>14.3e}", e.element, e.kinematic, e.energy)?;
    }
    Ok(())
}

fn cmd_identify(robot: &Path, path: Option<&Path>, s: &Sampling, out: &mut dyn Write) -> Outcome {
    check_sampling(s)?;
    let model = load_robot(robot)?;
    let msg = identify(&model, s.samples, s.tol, s.seed)?;
    writeln!(out, "robot {}", model.name)?;
    if msg.degenerate_inertia() {
        writeln!(out, "base inertia has repeated principal moments")?;
    }
    print_evidence(&msg, out)?;
    if let Some(p) = path {
        msg.spec().save(p).with_context(|| format!("writing {}", p.display()))?;
        writeln!(out, "spec written to {}", p.display())?;
    }
    Ok(())
}

fn cmd_verify(robot: &Path, spec: &Path, s: &Sampling, out: &mut dyn Write) -> Outcome {
    check_sampling(s)?;
    let model = load_robot(robot)?;
    let spec = load_spec(spec)?;
    let msg = verified(&model, &spec, s, out)?;
    let report = verify_equivariance_suite(&model, &msg, s.samples, s.tol, s.seed)?;
    writeln!(out, "mass-matrix equivariance residual {:.3e}", report.max_mass_residual())?;
    writeln!(out, "isotypic off-block at fixed configurations {:.3e}", report.max_fixed_off_block())?;
    writeln!(out, "isotypic off-block at random configurations {:.3e}", report.max_off_block())?;
    if !report.passed {
        return Err(Failure::Unverified("mass-matrix equivariance check failed".into()));
    }
    writeln!(out, "verified")?;
    Ok(())
}

fn cmd_augment(
    schema: &Path,
    spec: &Path,
    robot: Option<&Path>,
    input: &Path,
    path: &Path,
    s: &Sampling,
    out: &mut dyn Write,
) -> Outcome {
    check_sampling(s)?;
    let spec = load_spec(spec)?;
    let text = std::fs::read_to_string(schema).with_context(|| format!("reading {}", schema.display()))?;
    let decls = parse_schema(&text)?;
    let schema: DatasetSchema<f64> = match robot {
        Some(r) => {
            let model = load_robot(r)?;
            DatasetSchema::new(&decls, &verified(&model, &spec, s, out)?)?
        }
        None => DatasetSchema::from_action(&decls, GroupAction::from_spec(&spec)?)?,
    };
    let data = schema.read_dataset(input)?;
    let orbit = schema.orbit_dataset(&data)?;
    schema.write_dataset(path, &orbit)?;
    writeln!(
        out,
        "{} records x {} elements -> {} records written to {}",
        data.len(),
        schema.group().order(),
        orbit.len(),
        path.display()
    )?;
    Ok(())
}

fn cmd_dha(
    robot: &Path,
    spec: &Path,
    trajectory: &Path,
    path: Option<&Path>,
    allow_coupling: bool,
    s: &Sampling,
    out: &mut dyn Write,
) -> Outcome {
    check_sampling(s)?;
    let model = load_robot(robot)?;
    let spec = load_spec(spec)?;
    let msg = verified(&model, &spec, s, out)?;
    let dec = VerifiedDecomposition::from_msg(&msg)?;
    let traj = TrajectoryTable::read_csv(trajectory)?;
    let res = if allow_coupling {
        subspace_energies_unchecked(&model, &dec, &traj)?
    } else {
        match subspace_energies(&model, &dec, &traj) {
            Err(e @ Error::EquivarianceViolation { .. }) => return Err(Failure::Unverified(e.to_string())),
            other => other?,
        }
    };
    writeln!(out, "{:<10} {:<12} {:>5} {:>12}", "subspace", "irrep", "dim", "energy share")?;
    for (k, (sub, frac)) in res.subspaces().iter().zip(res.energy_fractions()).enumerate() {
        writeln!(out, "{:<10} {:<12} {:>5} {:>12.6}", k, sub.irrep_label, sub.dim, frac)?;
    }
    let gap = res.energy_sum_gap().into_iter().fold(0.0, f64::max);
    let off = res.off_block.iter().copied().fold(0.0, f64::max);
    writeln!(out, "max energy-sum gap {gap:.3e}, max off-block {off:.3e}")?;
    if let Some(p) = path {
        export_dha(&res, p)?;
        writeln!(out, "energies written to {}", p.display())?;
    }
    Ok(())
}

fn cmd_emlp_demo(
    robot: &Path,
    spec: &Path,
    config: &ComparisonConfig,
    path: Option<&Path>,
    s: &Sampling,
    out: &mut dyn Write,
) -> Outcome {
    check_sampling(s)?;
    if config.train_sizes.is_empty() || config.train_sizes.contains(&0) || config.seeds == 0 {
        return Err(Failure::Usage("train sizes and seed count must be positive".into()));
    }
    let model = load_robot(robot)?;
    let spec = load_spec(spec)?;
    let msg = verified(&model, &spec, s, out)?;
    let rows = compare_sample_efficiency(&model, &msg, config)?;
    writeln!(out, "{:>8} {:>16} {:>16}", "n_train", "equivariant", "unconstrained")?;
    for &n in &config.train_sizes {
        let sel: Vec<_> = rows.iter().filter(|r| r.train_size == n).collect();
        let k = sel.len() as f64;
        let eq = sel.iter().map(|r| r.equivariant_test_mse).sum::<f64>() / k;
        let un = sel.iter().map(|r| r.unconstrained_test_mse).sum::<f64>() / k;
        writeln!(out, "{n:>8} {eq:>16.6e} {un:>16.6e}")?;
    }
    if let Some(p) = path {
        let mut w = std::fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
        writeln!(
            w,
            "train_size,seed,equivariant_params,unconstrained_params,equivariant_test_mse,unconstrained_test_mse"
        )?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.train_size,
                r.seed,
                r.equivariant_params,
                r.unconstrained_params,
                r.equivariant_test_mse,
                r.unconstrained_test_mse
            )?;
        }
        writeln!(out, "metrics written to {}", p.display())?;
    }
    Ok(())
}

fn cmd_groups_show(name: &str, out: &mut dyn Write) -> Outcome {
    let group = FiniteGroup::parse(name).map_err(|e| Failure::Usage(e.to_string()))?;
    let names = group.element_names();
    let w = names.iter().map(|n| n.len()).max().unwrap_or(1).max(4);
    writeln!(out, "{} (order {})", group.name(), group.order())?;
    write!(out, "{:>w$} |", "")?;
    for n in names {
        write!(out, " {n:>w$}")?;
    }
    writeln!(out)?;
    writeln!(out, "{}", "-".repeat((w + 1) * (names.len() + 1) + 1))?;
    for (i, row) in group.cayley_table().iter().enumerate() {
        write!(out, "{:>w$} |", names[i])?;
        for &j in row {
            write!(out, " {:>w$}", names[j])?;
        }
        writeln!(out)?;
    }
    let table = real_character_table(&group)?;
    writeln!(out)?;
    writeln!(out, "real irreducible characters")?;
    write!(out, "{:<10} {:>3} {:>5} |", "irrep", "dim", "schur")?;
    for n in names {
        write!(out, " {n:>w$}")?;
    }
    writeln!(out)?;
    for irrep in &table.irreps {
        write!(out, "{:<10} {:>3} {:>5} |", irrep.label, irrep.dim, irrep.schur)?;
        for c in &irrep.character {
            write!(out, " {:>w$}", format_char(*c))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn format_char(c: f64) -> String {
    if (c - c.round()).abs() < 1e-12 {
        format!("{}", c.round() as i64)
    } else {
        format!("{c:.3}")
    }
}
