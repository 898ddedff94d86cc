use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sobotest_core::harness::{config_hash, CsvMeta, JPart2Report, TransitionReport};
use sobotest_core::lower_bound::prior_amplitude;
use sobotest_core::regularity::check_guarantee_conditions;
use sobotest_core::{
    build_schedule, compute_constants, project_onto_ball, rate_curve, run_experiment, verify_concentration,
    verify_lemma_jpart2, verify_lower_bound, verify_transition, BallSpec, CoefficientArray, ExperimentSpec,
    HypothesisTag, RateCurveSpec, RegularityTest, Scenario, TestConfig, TestReport, TruthGenerator,
};

use crate::args::{Cli, Command, ConfigArgs, Format, Lemma, ScenarioArgs, ScenarioKind};

/// Reference configuration used for flags that are not given.
const DEFAULT_CONFIG: (u64, f64, f64, f64, f64) = (4096, 2.0, 1.0, 1.0, 0.2);

#[derive(Debug)]
pub enum Failure {
    /// Bad input or configuration; exit code 1.
    Invalid { kind: &'static str, message: String },
    /// A verification suite reported a failure; exit code 2.
    Suite,
}

impl From<sobotest_core::Error> for Failure {
    fn from(e: sobotest_core::Error) -> Self {
        Failure::Invalid { kind: "validation", message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid { kind: "io", message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Invalid { kind: "json", message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

struct Sink<'a> {
    cli: &'a Cli,
}

impl Sink<'_> {
    fn write(&self, text: &str) -> Outcome {
        match &self.cli.output {
            Some(path) => fs::write(path, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, value: &T) -> Outcome {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(&text)
    }

    fn csv<C: Serialize>(&self, seed: u64, config: &C, header: &str, rows: &[String]) -> Outcome {
        let meta = CsvMeta::new(seed, config, !self.cli.no_meta);
        let mut buf = Vec::new();
        meta.write_table(&mut buf, header, rows)?;
        self.write(&String::from_utf8(buf).expect("csv is utf-8"))
    }
}

fn read_coefficients(path: &Path) -> Result<CoefficientArray, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid {
        kind: "io",
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn resolve_config(args: &ConfigArgs) -> Result<TestConfig, Failure> {
    let (n, s, t, radius, eta) = DEFAULT_CONFIG;
    let base = match &args.config {
        Some(path) => serde_json::from_str::<TestConfig>(&fs::read_to_string(path)?)?,
        None => TestConfig { n, s, t, radius, eta },
    };
    Ok(TestConfig::new(
        args.n.unwrap_or(base.n),
        args.s.unwrap_or(base.s),
        args.t.unwrap_or(base.t),
        args.radius.unwrap_or(base.radius),
        args.eta.unwrap_or(base.eta),
    )?)
}

fn build_scenario(args: &ScenarioArgs, cfg: &TestConfig) -> Result<Scenario, Failure> {
    if let Some(path) = &args.scenario_file {
        return Ok(serde_json::from_str(&fs::read_to_string(path)?)?);
    }
    let cutoff = cfg.cutoff()?;
    let kind = args.scenario.expect("clap requires --scenario without --scenario-file");
    Ok(match kind {
        ScenarioKind::Zero => Scenario::zero(),
        ScenarioKind::BoundaryNull => Scenario::boundary_null(args.level.unwrap_or(2), cfg.s),
        ScenarioKind::TwoLevel => Scenario::two_level(args.a, cfg.radius, cfg.s, args.level.unwrap_or(cutoff)),
        ScenarioKind::Geometric => Scenario::geometric(cfg.radius, cfg.s),
        ScenarioKind::Prior => {
            let v = match args.v {
                Some(v) => v,
                None => prior_amplitude(cfg, compute_constants(cfg)?.chosen.a_eta)?,
            };
            Scenario::new("prior", TruthGenerator::PriorDraw { v, level: args.level.unwrap_or(cutoff) }, HypothesisTag::Neither)
        }
    })
}

fn require_seed(cli: &Cli) -> Result<u64, Failure> {
    cli.seed.ok_or(Failure::Invalid {
        kind: "usage",
        message: "this subcommand draws random numbers and needs --seed".into(),
    })
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let sink = Sink { cli };
    match &cli.command {
        Command::Norms { file, r } => {
            let c = read_coefficients(file)?;
            let sobolev: Vec<Value> = r
                .iter()
                .map(|&r| json!({"r": r, "sobolev_norm_sq": c.sobolev_norm_sq(r), "sup_sobolev_norm_sq": c.sup_sobolev_norm_sq(r)}))
                .collect();
            sink.json(&json!({
                "j_max": c.j_max(),
                "level_norms_sq": c.level_norms_sq(),
                "l2_norm_sq": c.l2_norm_sq(),
                "sobolev": sobolev,
            }))
        }
        Command::Project { file, s, radius, tol, projected } => {
            let c = read_coefficients(file)?;
            let result = project_onto_ball(&c, &BallSpec::ell2(*s, *radius)?, *tol)?;
            if let Some(path) = projected {
                fs::write(path, serde_json::to_string_pretty(&result.projected)?)?;
            }
            sink.json(&result)
        }
        Command::Schedule { config } => {
            let cfg = resolve_config(config)?;
            let schedule = build_schedule(&cfg)?;
            let diagnostics = check_guarantee_conditions(&cfg)?;
            sink.json(&json!({"schedule": schedule, "diagnostics": diagnostics}))
        }
        Command::RunTest { file, config, format } => {
            let cfg = resolve_config(config)?;
            let obs = read_coefficients(file)?;
            let report = RegularityTest::new(&cfg)?.report(&obs)?;
            match format {
                Format::Json => sink.json(&report),
                Format::Csv => sink.write(&format!("{}\n{}\n", TestReport::CSV_HEADER, report.csv_row())),
            }
        }
        Command::Mc { scenario, reps, config, format } => {
            let seed = require_seed(cli)?;
            let cfg = resolve_config(config)?;
            let scenario = build_scenario(scenario, &cfg)?;
            let spec = ExperimentSpec::new(scenario, cfg, *reps, seed).with_threads(cli.threads);
            let result = run_experiment(&spec)?;
            match format {
                Format::Json => sink.json(&json!({
                    "result": result,
                    "within_type_one_budget": result.within_type_one_budget(),
                    "config_hash": config_hash(&spec),
                }))?,
                Format::Csv => sink.csv(seed, &spec, sobotest_core::ExperimentResult::CSV_HEADER, &result.csv_rows())?,
            }
            if result.within_type_one_budget() == Some(false) {
                return Err(Failure::Suite);
            }
            Ok(())
        }
        Command::Verify { lemma, trials, reps, deltas, fixed_config, config, format } => {
            let seed = require_seed(cli)?;
            let cfg = resolve_config(config)?;
            let fixed = fixed_config.then_some(&cfg);
            let passed = match lemma {
                Lemma::Jpart2 => {
                    let report = verify_lemma_jpart2(*trials, seed, fixed, cli.threads)?;
                    emit_histogram(&sink, *format, seed, &report, &report.level_histogram)?;
                    report.passed
                }
                Lemma::Transition => {
                    let report = verify_transition(*trials, seed, fixed, cli.threads)?;
                    emit_histogram(&sink, *format, seed, &report, &report.index_histogram)?;
                    report.passed
                }
                Lemma::Concentration => {
                    let mut scenarios = vec![Scenario::zero(), Scenario::boundary_null(2, cfg.s)];
                    let cutoff = cfg.cutoff()?;
                    if cutoff >= 3 {
                        scenarios.push(Scenario::two_level(2.0, cfg.radius, cfg.s, cutoff));
                    }
                    let mut tables = Vec::new();
                    for scenario in &scenarios {
                        tables.push(verify_concentration(scenario, deltas, *reps, seed, &cfg, cli.threads)?);
                    }
                    let passed = tables.iter().all(|t| t.passed);
                    match format {
                        Format::Json => sink.json(&json!({"config": cfg, "seed": seed, "tables": tables, "passed": passed}))?,
                        Format::Csv => {
                            let rows: Vec<String> = tables.iter().flat_map(|t| t.csv_rows()).collect();
                            let key = json!({"config": cfg, "deltas": deltas, "reps": reps});
                            sink.csv(seed, &key, sobotest_core::harness::ConcentrationTable::CSV_HEADER, &rows)?;
                        }
                    }
                    passed
                }
            };
            if passed {
                Ok(())
            } else {
                Err(Failure::Suite)
            }
        }
        Command::LowerBound { n, s, t, radius, eta } => {
            let probe = TestConfig::new(n.unwrap_or(10_000), *s, *t, *radius, *eta)?;
            let n = match n {
                Some(n) => *n,
                None => compute_constants(&probe)?.chosen.n_eta.max(1e4) as u64,
            };
            let report = verify_lower_bound(&TestConfig { n, ..probe })?;
            sink.json(&report)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Suite)
            }
        }
        Command::RateCurve { n_grid, config, budget, reps, format } => {
            let seed = require_seed(cli)?;
            let cfg = resolve_config(config)?;
            let mut spec = RateCurveSpec::new(n_grid.clone(), cfg, *budget, *reps, seed);
            spec.threads = cli.threads;
            let curve = rate_curve(&spec)?;
            match format {
                Format::Json => sink.json(&curve),
                Format::Csv => sink.csv(seed, &spec, sobotest_core::RateCurve::CSV_HEADER, &curve.csv_rows()),
            }
        }
    }
}

trait Histogram {
    fn histogram_header(&self) -> &'static str;
}

impl Histogram for JPart2Report {
    fn histogram_header(&self) -> &'static str {
        "level,checked_indices"
    }
}

impl Histogram for TransitionReport {
    fn histogram_header(&self) -> &'static str {
        "level,transition_indices"
    }
}

fn emit_histogram<R: Serialize + Histogram>(sink: &Sink, format: Format, seed: u64, report: &R, histogram: &[u64]) -> Outcome {
    match format {
        Format::Json => sink.json(report),
        Format::Csv => {
            let rows: Vec<String> = histogram.iter().enumerate().map(|(i, c)| format!("{},{c}", i + 2)).collect();
            sink.csv(seed, report, report.histogram_header(), &rows)
        }
    }
}
