use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fwsparse_expcli::experiments::Artifacts;
use fwsparse_expcli::{
    analyze, exp1_convergence, exp2_sparsity_sweep, exp3_beta_effect, run_recovery_audit, BetaRule,
    ExpError, ExperimentConfig, FileConfig, MRule, Metadata,
};

/// Frank-Wolfe sparse recovery experiments.
#[derive(Parser)]
#[command(name = "fwsparse", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mean and maximum log residual against the linear-rate bound.
    Exp1(Common),
    /// Maximum log residual for several multiples of m*.
    Exp2(Common),
    /// Mean log residual for a small and a large ball radius.
    Exp3(Common),
    /// Off-support selections of FW, MP and OMP; exits 3 on a violation.
    Audit(Common),
    /// Coherence, Babel values and m* of a dictionary file (.bin or .csv).
    Analyze {
        file: PathBuf,
        /// Rescale atoms to unit norm instead of rejecting them.
        #[arg(long)]
        normalize: bool,
    },
}

#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// beta = c ||x*||_1.
    #[arg(long)]
    beta_mult: Option<f64>,
    /// Sparsity multiple of m*; a comma list for exp2.
    #[arg(long, value_delimiter = ',')]
    m_mult: Vec<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// d = 10000, n = 20000, 2000 trials.
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn resolve(&self, sweep: bool) -> Result<ExperimentConfig, ExpError> {
        let mut cfg = if self.paper_scale {
            ExperimentConfig::paper_scale()
        } else {
            ExperimentConfig::default()
        };
        if let Some(path) = &self.config {
            FileConfig::load(path)?.apply(&mut cfg)?;
        }
        macro_rules! set {
            ($src:ident => $dst:ident) => {
                if let Some(v) = &self.$src {
                    cfg.$dst = v.clone();
                }
            };
        }
        set!(d => d);
        set!(n => n);
        set!(trials => trials);
        set!(seed => base_seed);
        set!(max_iters => max_iters);
        set!(out => out_dir);
        set!(jobs => jobs);
        if let Some(c) = self.beta_mult {
            cfg.beta_rule = BetaRule::Multiplier(c);
        }
        match (sweep, self.m_mult.as_slice()) {
            (_, []) => {}
            (true, list) => cfg.m_multipliers = list.to_vec(),
            (false, [c]) => cfg.m_rule = MRule::Multiple(*c),
            (false, _) => {
                return Err(ExpError::Config(
                    "--m-mult takes a list only for exp2".into(),
                ))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(a: &Artifacts, meta: &Metadata) {
    for w in &meta.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", a.csv.display());
    println!("wrote {}", a.svg.display());
    println!("wrote {}", a.metadata.display());
}

fn run(cli: Cli) -> Result<(), ExpError> {
    match cli.cmd {
        Cmd::Exp1(c) => {
            let o = exp1_convergence(&c.resolve(false)?)?;
            report(&o.artifacts, &o.metadata);
        }
        Cmd::Exp2(c) => {
            let o = exp2_sparsity_sweep(&c.resolve(true)?)?;
            report(&o.artifacts, &o.metadata);
            for s in &o.curves {
                if let Some(slope) = s.late_slope {
                    println!("m = {} m*: late slope {slope:.4}", s.multiplier);
                }
            }
        }
        Cmd::Exp3(c) => {
            let o = exp3_beta_effect(&c.resolve(false)?)?;
            report(&o.artifacts, &o.metadata);
            println!("slopes: beta1 {:?}, beta2 {:?}", o.low.slope, o.high.slope);
        }
        Cmd::Audit(c) => {
            let cfg = c.resolve(false)?;
            let s = run_recovery_audit(&cfg)?;
            println!(
                "{} trials, {} with m <= m*: off-support FW {} MP {} OMP {}; OMP exact in m {}/{}",
                s.trials,
                s.trials_in_regime,
                s.fw.off_support_selections,
                s.mp.off_support_selections,
                s.omp.off_support_selections,
                s.omp_exact_in_m,
                s.trials
            );
            println!("wrote {}", cfg.out_dir.join("audit.json").display());
            if !s.passed() {
                return Err(ExpError::Invariant(s.violations.join("; ")));
            }
        }
        Cmd::Analyze { file, normalize } => {
            let r = analyze(&file, normalize)?;
            let text = serde_json::to_string_pretty(&r).map_err(|e| ExpError::Io(e.into()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
