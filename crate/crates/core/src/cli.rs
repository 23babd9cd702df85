//! Command-line front end. Every command prints (or writes) one JSON report
//! wrapped in a [`RunReport`] envelope that echoes the full configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dp_norm::{default_witnesses, dp_lower_dual, dp_upper, DpBudget};
use crate::error::{Error, Result};
use crate::form_norm::{operator_norm_with, Ball, NormOptions};
use crate::hilbert_schmidt::{basis_config_lower, hs_norm, verify_sandwich, BASIS_CAP};
use crate::io::{self, RunReport};
use crate::report::to_json_string;
use crate::rng::{self, domain};
use crate::suite::{random_configuration, random_mixed, random_operator, run_suite};
use crate::summing::{
    estimate_pi_lip_full, estimate_pi_lip_poly_full, lift_configuration, pietsch_upper_lp_in, restrict_operator, Budget,
};
use crate::tensor::{vector_norm, MultilinearOperator, Norm};

#[derive(Debug, Parser)]
#[command(name = "lipnorm", version = io::VERSION, about = "Bounds and certificates for Lipschitz p-summing norms")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// Run seed; all random streams derive from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
    /// Convergence tolerance of the inner ascents, in (0, 1).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    budget_rounds: Option<usize>,
    #[arg(long, global = true)]
    budget_restarts: Option<usize>,
    /// Starts of the adversarial pair search per round.
    #[arg(long, global = true)]
    budget_pair_starts: Option<usize>,
    /// Cap on the pair set size.
    #[arg(long, global = true)]
    budget_pairs: Option<usize>,
    /// Cap on the dictionary size.
    #[arg(long, global = true)]
    budget_forms: Option<usize>,
    #[arg(long, global = true)]
    budget_random_forms: Option<usize>,
    #[arg(long, global = true)]
    budget_bisection: Option<usize>,
    #[arg(long, global = true)]
    budget_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BallArg {
    Op,
    Hs,
}

impl From<BallArg> for Ball {
    fn from(b: BallArg) -> Ball {
        match b {
            BallArg::Op => Ball::Operator,
            BallArg::Hs => Ball::HilbertSchmidt,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Operator,
    Config,
    Mixed,
    ScalarProduct,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Operator norm bracket with its maximizer.
    Norm { input: PathBuf },
    /// Lipschitz p-summing norm bracket with a domination certificate.
    Summing {
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value_t = BallArg::Op)]
        ball: BallArg,
        /// JSON array of scalar forms; also solve the LP with exactly these forms.
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
    /// Hilbert-Schmidt norm, basis configuration bound and sandwich check.
    Hs {
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Bracket on the d_p tensor norm of a mixed tensor.
    Dnorm {
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Number of representation terms.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Fix slots to vectors and compare the restricted and parent constants.
    Restrict {
        input: PathBuf,
        /// `SLOT:v1,v2,...`, repeatable. Slots are 0-based.
        #[arg(long = "fix", required = true)]
        fix: Vec<String>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Polynomial `x ↦ T(x, ..., x)` of a symmetric kernel.
    Poly {
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Randomized property suite; exit code 1 if any property fails.
    Verify {
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Random instance generator.
    Gen {
        #[arg(long, value_enum, default_value_t = Kind::Operator)]
        kind: Kind,
        /// Factor dimensions, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,2")]
        dims: Vec<usize>,
        /// Codomain dimension.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Factor norms (1, 2 or inf), comma separated; default all 2.
        #[arg(long, value_delimiter = ',')]
        norms: Option<Vec<String>>,
        #[arg(long, default_value = "2")]
        codomain: String,
        /// Pairs in a generated configuration.
        #[arg(long, default_value_t = 4)]
        pairs: usize,
        /// Arity of the scalar product.
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
}

/// Run the CLI and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

impl Common {
    fn budget(&self) -> Result<Budget> {
        let d = Budget::default();
        let b = Budget {
            rounds: self.budget_rounds.unwrap_or(d.rounds),
            restarts: self.budget_restarts.unwrap_or(d.restarts),
            pair_starts: self.budget_pair_starts.unwrap_or(d.pair_starts),
            max_pairs: self.budget_pairs.unwrap_or(d.max_pairs),
            max_forms: self.budget_forms.unwrap_or(d.max_forms),
            random_forms: self.budget_random_forms.unwrap_or(d.random_forms),
            bisection_steps: self.budget_bisection.unwrap_or(d.bisection_steps),
            max_iter: self.budget_iter.unwrap_or(d.max_iter),
            tol: self.tol.unwrap_or(d.tol),
            seed: self.seed,
            ..d
        };
        b.validate()?;
        Ok(b)
    }

    fn emit<R: Serialize>(&self, command: &str, config: Value, result: R) -> Result<()> {
        let report = RunReport::new(command, config, result);
        match &self.json_out {
            Some(path) => io::save_report(&report, path),
            None => {
                print!("{}", to_json_string(&report));
                Ok(())
            }
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("--p must be finite and at least 1, got {p}")))
    }
}

fn parse_fix(spec: &str) -> Result<(usize, Vec<f64>)> {
    let bad = || Error::arg(format!("--fix expects SLOT:v1,v2,..., got {spec:?}"));
    let (slot, values) = spec.split_once(':').ok_or_else(bad)?;
    let slot = slot.trim().parse().map_err(|_| bad())?;
    let values = values.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad())?;
    Ok((slot, values))
}

fn execute(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    let budget = c.budget()?;
    match &cli.command {
        Command::Norm { input } => {
            let t = io::load_operator(input)?;
            let opts = NormOptions { seed: c.seed, tol: c.tol.unwrap_or(1e-9), ..NormOptions::default() };
            let r = operator_norm_with(&t, &opts);
            let config = json!({ "input": input, "seed": c.seed, "restarts": opts.restarts, "tol": opts.tol });
            c.emit("norm", config, json!({ "report": r.report, "argmax": r.argmax }))?;
        }
        Command::Summing { input, p, ball, dictionary } => {
            check_exponent(*p)?;
            let t = io::load_operator(input)?;
            let budget = Budget { ball: (*ball).into(), ..budget };
            let est = estimate_pi_lip_full(&t, *p, &budget, None)?;
            let dict_cert = match dictionary {
                Some(path) => {
                    let forms: Vec<MultilinearOperator> = io::load_json(path)?;
                    Some(pietsch_upper_lp_in(&t, &est.certificate.pairset, &forms, *p, budget.ball)?)
                }
                None => None,
            };
            let config = json!({ "input": input, "p": p, "ball": ball, "dictionary": dictionary, "budget": budget });
            let result = json!({
                "report": est.report,
                "constant": est.certificate.constant,
                "certificate": est.certificate,
                "witness": est.witness,
                "rounds": est.rounds,
                "dictionary_certificate": dict_cert,
            });
            c.emit("summing", config, result)?;
        }
        Command::Hs { input, p } => {
            check_exponent(*p)?;
            let t = io::load_operator(input)?;
            let hs = hs_norm(&t)?;
            let width: usize = t.factor_dims().iter().product();
            let (basis, sandwich) = if width <= BASIS_CAP {
                (Some(basis_config_lower(&t)?), Some(verify_sandwich(&t, *p, &budget)?))
            } else {
                (None, None)
            };
            let config = json!({ "input": input, "p": p, "budget": budget });
            c.emit("hs", config, json!({ "hs_norm": hs, "basis_lower": basis, "sandwich": sandwich }))?;
        }
        Command::Dnorm { input, p, k } => {
            let z = io::load_mixed(input)?;
            let dp = DpBudget { seed: c.seed, ..DpBudget::default() };
            let upper = dp_upper(&z, *p, *k, &dp)?;
            let witnesses = default_witnesses(&z, *p, c.seed)?;
            let lower = dp_lower_dual(&z, *p, &witnesses)?;
            let config = json!({ "input": input, "p": p, "k": k, "budget": dp });
            c.emit("dnorm", config, json!({ "upper": upper, "lower": lower, "witnesses": witnesses }))?;
        }
        Command::Restrict { input, fix, p } => {
            check_exponent(*p)?;
            let t = io::load_operator(input)?;
            let mut fixed = BTreeMap::new();
            for spec in fix {
                let (slot, v) = parse_fix(spec)?;
                if fixed.insert(slot, v).is_some() {
                    return Err(Error::arg(format!("slot {slot} fixed twice")));
                }
            }
            let r = restrict_operator(&t, &fixed)?;
            let est_r = estimate_pi_lip_full(&r, *p, &budget, None)?;
            let lifted = lift_configuration(&est_r.witness, &fixed)?;
            let parent = estimate_pi_lip_full(&t, *p, &budget, Some(&lifted))?;
            let scale: f64 = fixed.iter().map(|(&k, v)| vector_norm(v, t.factor_norms()[k])).product();
            let bound = scale * parent.certificate.constant;
            let config = json!({ "input": input, "p": p, "fixed": fixed, "budget": budget });
            let result = json!({
                "restricted": r,
                "restricted_report": est_r.report,
                "parent_report": parent.report,
                "parent_constant": parent.certificate.constant,
                "norm_product": scale,
                "bound": bound,
                "bound_holds": est_r.report.certified_lower <= bound + 1e-6,
            });
            c.emit("restrict", config, result)?;
        }
        Command::Poly { input, p } => {
            check_exponent(*p)?;
            let t = io::load_operator(input)?;
            let est = estimate_pi_lip_poly_full(&t, *p, &budget)?;
            let config = json!({ "input": input, "p": p, "budget": budget });
            let result = json!({
                "report": est.report,
                "constant": est.certificate.constant,
                "certificate": est.certificate,
                "witness": est.witness,
            });
            c.emit("poly", config, result)?;
        }
        Command::Verify { trials } => {
            let report = run_suite(c.seed, *trials)?;
            let passed = report.all_passed;
            c.emit("verify", json!({ "seed": c.seed, "trials": trials }), report)?;
            return Ok(if passed { 0 } else { 1 });
        }
        Command::Gen { kind, dims, m, norms, codomain, pairs, n } => {
            let norms = match norms {
                Some(v) => v.iter().map(|s| Norm::parse(s)).collect::<Result<Vec<_>>>()?,
                None => vec![Norm::L2; dims.len()],
            };
            if norms.len() != dims.len() {
                return Err(Error::arg("--norms needs one entry per dimension"));
            }
            let cnorm = Norm::parse(codomain)?;
            let mut rng = rng::stream(c.seed, domain::GENERATOR, 0);
            let text = match kind {
                Kind::Operator => to_json_string(&random_operator(&mut rng, dims, *m, norms, cnorm)?),
                Kind::Config => to_json_string(&random_configuration(&mut rng, dims, *pairs)?),
                Kind::Mixed => to_json_string(&random_mixed(&mut rng, dims, *m, norms, cnorm)?),
                Kind::ScalarProduct => to_json_string(&MultilinearOperator::scalar_product(*n)),
            };
            match &c.json_out {
                Some(path) => std::fs::write(path, text)
                    .map_err(|source| Error::Io { path: path.display().to_string(), source })?,
                None => print!("{text}"),
            }
        }
    }
    Ok(0)
}
