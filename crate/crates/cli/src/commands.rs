use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use povm_coherence::coherence::{axiom_suite, cf_block, cf_direct, cf_embedded, naimark_gap, per_element_values, AxiomConfig};
use povm_coherence::convexroof::{
    commutation_criterion, convex_roof_minimize, reproduce_counterexample, y_matrix, PureStateEnsemble, RoofConfig,
};
use povm_coherence::metrology::{qcrb_bound, simulate_estimation, uncertainty_budget};
use povm_coherence::naimark::probability_check;
use povm_coherence::numerics::{eigh, CMatrix, Hermitian, Tolerances};
use povm_coherence::qfi::{qfi, qfi_via_z};
use povm_coherence::states::{incoherence_residual, DensityMatrix, Measurement, ProjectiveMeasurement};
use serde_json::{json, Value};

use crate::io::{matrix_to_array, parse_observable, parse_povm, parse_state};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "povm-coherence", version, about = "Coherence of quantum states relative to general measurements")]
struct Cli {
    #[command(flatten)]
    tolerances: ToleranceArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ToleranceArgs {
    /// Hermiticity tolerance (max |M - M†| entry).
    #[arg(long, global = true)]
    tol_herm: Option<f64>,
    /// Smallest eigenvalue accepted as nonnegative, negated.
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    /// Tolerance on reconstruction residuals such as Σ E_j = I.
    #[arg(long, global = true)]
    tol_recon: Option<f64>,
    /// Tolerance on orthonormality and unitarity residuals.
    #[arg(long, global = true)]
    tol_ortho: Option<f64>,
    /// Eigenvalues below this fraction of the largest count as zero.
    #[arg(long, global = true)]
    tol_zero_eig: Option<f64>,
    /// Relative tolerance of the commutation criterion.
    #[arg(long, global = true)]
    tol_commute: Option<f64>,
}

impl ToleranceArgs {
    fn resolve(&self) -> Result<Tolerances, CliError> {
        let mut t = Tolerances::default();
        let fields = [
            (self.tol_herm, &mut t.herm),
            (self.tol_psd, &mut t.psd),
            (self.tol_recon, &mut t.recon),
            (self.tol_ortho, &mut t.ortho),
            (self.tol_zero_eig, &mut t.zero_eig),
            (self.tol_commute, &mut t.commute),
        ];
        for (given, slot) in fields {
            if let Some(v) = given {
                *slot = v;
            }
        }
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Direct,
    Naimark,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check input files and report their residuals.
    Validate {
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        povm: Option<PathBuf>,
        #[arg(long)]
        observable: Option<PathBuf>,
    },
    /// Quantum Fisher information of a state for an observable.
    Qfi {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        observable: PathBuf,
    },
    /// Coherence of a state relative to a POVM.
    Coherence {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        povm: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
    },
    /// Block coherence relative to a projective measurement.
    BlockCoherence {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        povm: PathBuf,
    },
    /// Convex-roof extension by multi-start optimization over ensembles.
    ConvexRoof {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        povm: PathBuf,
        /// Ensemble size, between dim and dim².
        #[arg(long)]
        dprime: Option<usize>,
        #[arg(long, default_value_t = 16)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stall tolerance of the local optimizer.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
    },
    /// Commutation test deciding whether the convex roof equals the measure.
    Criterion {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        povm: PathBuf,
    },
    /// Three-level example whose convex roof exceeds the measure.
    Counterexample {
        #[arg(long, default_value_t = 16)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cramér–Rao bounds, and optionally a Monte-Carlo estimation run.
    Metrology {
        #[arg(long)]
        state: PathBuf,
        /// Measurement whose elements generate the parameters; with
        /// --simulate it is also the measurement being sampled.
        #[arg(long)]
        povm: PathBuf,
        /// Generator of the phase shift.
        #[arg(long)]
        observable: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        repetitions: u64,
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta: f64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Randomized checks of the resource-theory properties.
    Suite {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub enum Reply {
    Json(Value),
    /// Ran to completion but the result is a failed check.
    Failed(Value, String),
    Text(String),
}

pub fn dispatch<I, T>(argv: I) -> Result<Reply, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Reply::Text(e.to_string())),
                _ => Err(CliError::Usage(e.to_string().trim_end().to_string())),
            }
        }
    };
    let tol = cli.tolerances.resolve()?;
    execute(cli.command, &tol)
}

fn matrix_json(m: &CMatrix) -> Value {
    json!(matrix_to_array(m))
}

fn ensemble_json(e: &PureStateEnsemble) -> Value {
    let vectors: Vec<Vec<[f64; 2]>> = (0..e.len())
        .map(|k| e.member(k).iter().map(|z| [z.re, z.im]).collect())
        .collect();
    json!({ "weights": e.weights, "vectors": vectors })
}

fn state_summary(rho: &DensityMatrix, tol: &Tolerances) -> Value {
    let s = rho.spectrum();
    let thresh = tol.zero_eig * s.max_value();
    json!({
        "dim": rho.dim(),
        "trace": rho.hermitian().trace_re(),
        "eigenvalues": s.values,
        "rank": s.values.iter().filter(|&&l| l > thresh).count(),
    })
}

fn measurement_summary(m: &Measurement) -> Value {
    let p = m.povm();
    json!({
        "kind": m.kind(),
        "dim": p.dim(),
        "outcomes": p.len(),
        "completeness_residual": p.completeness_residual(),
        "projectivity_residual": p.projectivity_residual(),
    })
}

fn observable_summary(a: &Hermitian) -> Result<Value, CliError> {
    Ok(json!({ "dim": a.dim(), "eigenvalues": eigh(a)?.values }))
}

fn projective(m: Measurement, tol: &Tolerances) -> Result<ProjectiveMeasurement, CliError> {
    match m {
        Measurement::Projective(p) => Ok(p),
        Measurement::General(p) => Ok(ProjectiveMeasurement::from_povm(p, tol)?),
    }
}

fn load_pair(state: &Path, povm: &Path, tol: &Tolerances) -> Result<(DensityMatrix, Measurement), CliError> {
    Ok((parse_state(state, tol)?, parse_povm(povm, tol)?))
}

fn execute(cmd: Command, tol: &Tolerances) -> Result<Reply, CliError> {
    let value = match cmd {
        Command::Validate { state, povm, observable } => {
            if state.is_none() && povm.is_none() && observable.is_none() {
                return Err(CliError::Usage("validate needs at least one of --state, --povm, --observable".into()));
            }
            let mut out = serde_json::Map::new();
            if let Some(p) = state {
                out.insert("state".into(), state_summary(&parse_state(&p, tol)?, tol));
            }
            if let Some(p) = povm {
                out.insert("povm".into(), measurement_summary(&parse_povm(&p, tol)?));
            }
            if let Some(p) = observable {
                out.insert("observable".into(), observable_summary(&parse_observable(&p, tol)?)?);
            }
            out.insert("valid".into(), json!(true));
            Value::Object(out)
        }
        Command::Qfi { state, observable } => {
            let rho = parse_state(&state, tol)?;
            let a = parse_observable(&observable, tol)?;
            json!({
                "qfi": qfi(&rho, &a, tol)?,
                "qfi_via_z": qfi_via_z(&rho, &a, tol)?,
            })
        }
        Command::Coherence { state, povm, method } => {
            let (rho, m) = load_pair(&state, &povm, tol)?;
            let p = m.povm();
            match method {
                Method::Direct => json!({
                    "method": "direct",
                    "measurement": m.kind(),
                    "direct_value": cf_direct(&rho, p, tol)?,
                    "per_element_values": per_element_values(&rho, p, tol)?,
                }),
                Method::Naimark => {
                    let check = probability_check(&rho, p, tol)?;
                    json!({
                        "method": "naimark",
                        "measurement": m.kind(),
                        "embedded_value": cf_embedded(&rho, p, tol)?,
                        "probability_residual": check.max_residual,
                    })
                }
                Method::Both => {
                    let report = naimark_gap(&rho, p, tol)?;
                    let mut v = serde_json::to_value(&report).expect("serializable report");
                    v["method"] = json!("both");
                    v["measurement"] = json!(m.kind());
                    v
                }
            }
        }
        Command::BlockCoherence { state, povm } => {
            let (rho, m) = load_pair(&state, &povm, tol)?;
            let p = projective(m, tol)?;
            json!({
                "value": cf_block(&rho, &p, tol)?,
                "block_dims": p.block_dims(),
                "incoherence_residual": incoherence_residual(&rho, p.as_povm())?,
            })
        }
        Command::ConvexRoof { state, povm, dprime, starts, seed, tol: stall, max_iter } => {
            let (rho, m) = load_pair(&state, &povm, tol)?;
            let cfg = RoofConfig { dprime, starts, max_iter, tol: stall, seed };
            let r = convex_roof_minimize(&rho, m.povm(), &cfg, tol)?;
            json!({
                "lower_bound": r.lower_bound,
                "roof_value": r.roof_value,
                "gap": r.roof_value - r.lower_bound,
                "criterion_commutes": r.criterion_commutes,
                "max_comm_norm": r.max_comm_norm,
                "dprime": dprime.unwrap_or(rho.dim()),
                "starts_used": r.starts_used,
                "best_start": r.best_start,
                "iterations": r.iterations,
                "total_iterations": r.total_iterations,
                "ensemble": ensemble_json(&r.ensemble),
            })
        }
        Command::Criterion { state, povm } => {
            let (rho, m) = load_pair(&state, &povm, tol)?;
            let c = commutation_criterion(&rho, m.povm(), tol)?;
            let ys: Vec<Value> = m
                .povm()
                .elements()
                .iter()
                .map(|e| y_matrix(&rho, e, tol).map(|y| matrix_json(y.matrix())))
                .collect::<Result<_, _>>()?;
            json!({
                "commutes": c.commutes,
                "max_comm_norm": c.max_comm_norm,
                "threshold": c.threshold,
                "y_matrices": ys,
            })
        }
        Command::Counterexample { starts, seed } => {
            let cfg = RoofConfig { dprime: Some(3), starts, seed, ..RoofConfig::default() };
            let rep = reproduce_counterexample(&cfg, tol)?;
            json!({
                "y_matrices": rep.y_matrices.iter().map(matrix_json).collect::<Vec<_>>(),
                "expected_y": rep.expected_y.iter().map(matrix_json).collect::<Vec<_>>(),
                "max_entry_deviation": rep.max_entry_deviation,
                "commutator_norms": rep.commutator_norms,
                "criterion": rep.criterion,
                "lower_bound": rep.roof.lower_bound,
                "roof_value": rep.roof.roof_value,
                "margin": rep.roof.roof_value - rep.roof.lower_bound,
                "starts_used": rep.roof.starts_used,
                "best_start": rep.roof.best_start,
                "iterations": rep.roof.iterations,
                "ensemble": ensemble_json(&rep.roof.ensemble),
            })
        }
        Command::Metrology { state, povm, observable, repetitions, simulate, theta, trials, seed } => {
            let (rho, m) = load_pair(&state, &povm, tol)?;
            let budget = uncertainty_budget(&rho, m.povm(), repetitions, tol)?;
            let mut out = json!({ "repetitions": repetitions, "budget": budget });
            let a = observable.map(|p| parse_observable(&p, tol)).transpose()?;
            if let Some(a) = &a {
                out["qcrb"] = json!(qcrb_bound(&rho, a, repetitions, tol)?);
            }
            if simulate {
                let a = a.ok_or_else(|| CliError::Usage("--simulate needs --observable".into()))?;
                let rec = simulate_estimation(&rho, &a, m.povm(), theta, repetitions, trials, seed, tol)?;
                out["simulation"] = json!(rec);
            }
            out
        }
        Command::Suite { dims, trials, seed } => {
            let cfg = AxiomConfig { dims, trials, seed };
            let report = axiom_suite(&cfg, tol)?;
            let value = serde_json::to_value(&report).expect("serializable report");
            if !report.passed {
                let failed: Vec<&str> = report.properties.iter().filter(|p| !p.passed).map(|p| p.name).collect();
                return Ok(Reply::Failed(value, format!("properties failed: {}", failed.join(", "))));
            }
            value
        }
    };
    Ok(Reply::Json(value))
}
