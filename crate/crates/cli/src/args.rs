//! Command-line flags. Every flag except `--config` can also be set in the
//! config file under the section named after the subcommand, using the long
//! flag name as the key; flags win over the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "nhwind", version, about = "Spin textures and winding numbers of non-Hermitian lattice models on a simulated quantum circuit")]
pub struct Cli {
    /// TOML file with one section per subcommand, e.g. [winding]
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Measure the spin texture on a uniform k loop and write it as CSV
    Texture(LoopArgs),
    /// Measure the winding number; writes a JSON summary and the texture CSV
    Winding(LoopArgs),
    /// Sweep t1 and tabulate measured, oracle and expected winding numbers
    PhaseDiagram(PhaseArgs),
    /// Prepare a dual pair at one k and write both trajectories
    Prepare(PrepareArgs),
    /// Build the dilation schedule at one k and compare with direct evolution
    DilationCheck(DilationArgs),
    /// Evaluate <psi1|O|psi2>/<psi1|O'|psi2> from state and observable files
    Genexp(GenexpArgs),
}

impl Command {
    pub fn section(&self) -> &'static str {
        match self {
            Command::Texture(_) => "texture",
            Command::Winding(_) => "winding",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Prepare(_) => "prepare",
            Command::DilationCheck(_) => "dilation-check",
            Command::Genexp(_) => "genexp",
        }
    }
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! merge_from {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

#[derive(Args, Deserialize, Serialize, Debug, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LoopArgs {
    /// Intra-cell hopping t1 (units of t2)
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    /// Nonreciprocity delta (units of t2)
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Boundary condition: pbc or obc [default: pbc]
    #[arg(long)]
    pub bc: Option<String>,
    /// Preparation time T (units of 1/t2) [default: 10]
    #[arg(long = "T", visible_alias = "time")]
    #[serde(rename = "T", alias = "time")]
    pub t_total: Option<f64>,
    /// Number of k samples on the loop [default: 1000]
    #[arg(long = "N", visible_alias = "nk")]
    #[serde(rename = "N", alias = "nk")]
    pub n_k: Option<usize>,
    /// auto, sign, or a unit-modulus complex number such as 0.98+0.195i [default: auto]
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Sets alpha = exp(i * phase); overrides --alpha
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_phase: Option<f64>,
    /// Measure with this many shots per observable instead of exactly
    #[arg(long)]
    pub shots: Option<u64>,
    /// Seed for shot sampling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overlap below which the ratio readout is used [default: 1e-6]
    #[arg(long)]
    pub ep_threshold: Option<f64>,
    /// Prepare the pair with the dilation circuit (needs --eta0 and --b)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub via_dilation: Option<bool>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Dilation time steps [default: 10000]
    #[arg(long)]
    pub dilation_steps: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory [default: $NHWIND_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base name for output files [default: texture or winding]
    #[arg(long)]
    pub name: Option<String>,
}

impl LoopArgs {
    pub fn merge(mut self, file: LoopArgs) -> Self {
        merge_from!(self, file; t1, delta, bc, t_total, n_k, alpha, alpha_phase, shots, seed,
            ep_threshold, via_dilation, eta0, b, dilation_steps, jobs, out_dir, name);
        self
    }
}

#[derive(Args, Deserialize, Serialize, Debug, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PhaseArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// pbc or obc [default: pbc]
    #[arg(long)]
    pub bc: Option<String>,
    /// First t1 of the grid [default: 0.01]
    #[arg(long, allow_hyphen_values = true)]
    pub t1_min: Option<f64>,
    /// Last t1 of the grid (inclusive) [default: 1.99]
    #[arg(long, allow_hyphen_values = true)]
    pub t1_max: Option<f64>,
    /// Grid spacing [default: 0.02]
    #[arg(long)]
    pub t1_step: Option<f64>,
    #[arg(long = "T", visible_alias = "time")]
    #[serde(rename = "T", alias = "time")]
    pub t_total: Option<f64>,
    #[arg(long = "N", visible_alias = "nk")]
    #[serde(rename = "N", alias = "nk")]
    pub n_k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_phase: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ep_threshold: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base name for the output file [default: phase_diagram]
    #[arg(long)]
    pub name: Option<String>,
}

impl PhaseArgs {
    pub fn merge(mut self, file: PhaseArgs) -> Self {
        merge_from!(self, file; delta, bc, t1_min, t1_max, t1_step, t_total, n_k, alpha,
            alpha_phase, shots, seed, ep_threshold, jobs, out_dir, name);
        self
    }
}

#[derive(Args, Deserialize, Serialize, Debug, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PrepareArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub bc: Option<String>,
    /// Momentum [default: pi/2]
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long = "T", visible_alias = "time")]
    #[serde(rename = "T", alias = "time")]
    pub t_total: Option<f64>,
    /// Stored time steps [default: 200]
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_phase: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base name; writes <name>_right.csv and <name>_left.csv [default: prepare]
    #[arg(long)]
    pub name: Option<String>,
}

impl PrepareArgs {
    pub fn merge(mut self, file: PrepareArgs) -> Self {
        merge_from!(self, file; t1, delta, bc, k, t_total, steps, alpha, alpha_phase, out_dir, name);
        self
    }
}

#[derive(Args, Deserialize, Serialize, Debug, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DilationArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub bc: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// auto, sign or a complex number [default: sign]
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_phase: Option<f64>,
    #[arg(long = "T", visible_alias = "time")]
    #[serde(rename = "T", alias = "time")]
    pub t_total: Option<f64>,
    /// Time steps [default: 10000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// right or left [default: right]
    #[arg(long)]
    pub branch: Option<String>,
    /// analytic or central [default: analytic]
    #[arg(long)]
    pub eta_derivative: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base name; writes <name>_schedule.csv and <name>_compare.csv [default: dilation]
    #[arg(long)]
    pub name: Option<String>,
}

impl DilationArgs {
    pub fn merge(mut self, file: DilationArgs) -> Self {
        merge_from!(self, file; t1, delta, bc, k, eta0, b, alpha, alpha_phase, t_total, steps,
            branch, eta_derivative, out_dir, name);
        self
    }
}

#[derive(Args, Deserialize, Serialize, Debug, Default, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenexpArgs {
    /// State file for |psi1>
    #[arg(long)]
    pub psi1: Option<PathBuf>,
    /// State file for |psi2>
    #[arg(long)]
    pub psi2: Option<PathBuf>,
    /// Observable file for O
    #[arg(long = "o")]
    #[serde(rename = "o")]
    pub o: Option<PathBuf>,
    /// Observable file for O' [default: identity on every qubit]
    #[arg(long = "o-prime")]
    pub o_prime: Option<PathBuf>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenexpArgs {
    pub fn merge(mut self, file: GenexpArgs) -> Self {
        merge_from!(self, file; psi1, psi2, o, o_prime, shots, seed);
        self
    }
}
