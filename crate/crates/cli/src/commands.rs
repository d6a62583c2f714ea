use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use condensate_core::chaos::{
    classify_dynamics, delay_embed, hausdorff_distance, lyapunov_spectrum, site_phase_series, ZERO_TOL,
};
use condensate_core::dynamics::{find_attractor, integrate, random_initial, AttractorKind, AttractorRecord, Scheme, Trajectory};
use condensate_core::model::ph_map;
use condensate_core::obc::{cep_scan, default_bulk_window, edge_extent, kink_scaling, order_parameters, static_stability_boundary, BoundaryOptions};
use condensate_core::pbc::{stability_diagram, PbcOptions, STABILITY_TOL};
use condensate_core::spectral::{obc_spectrum_analytic, pbc_dispersion, pbc_spectrum, spectrum_numeric};
use condensate_core::{Boundary, ModelParams, C64};
use condensate_sweep::{
    extract_boundary, linear_grid, load_diagram, polylines_to_csv, resume_sweep, run_sweep, AnalysisToggles,
    DedupTolerances, Label, RunOptions, SweepSpec, SweepStatus,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::*;
use crate::error::CliError;
use crate::nrc1;
use crate::output::{sha256_hex, write_atomic, Csv, RunDir};

type Res<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "condensate", version = condensate_core::CODE_VERSION)]
#[command(about = "Mean-field simulator and stability analyses for a nonreciprocal driven-dissipative boson chain")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the linear chain (analytic; optionally dense numeric).
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Spectrum")]
        opts: SpectrumArgs,
    },
    /// Existence and linear stability of traveling waves on a ring.
    PbcStability {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Waves")]
        opts: PbcArgs,
    },
    /// Integrate from a random initial state and store the trajectory.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Integration")]
        integration: IntegrationArgs,
        #[command(flatten, next_help_heading = "Initial state")]
        initial: InitialArgs,
        #[command(flatten, next_help_heading = "Output")]
        opts: SimulateArgs,
    },
    /// Order parameters of the attractors reached from random initial states.
    OrderParams {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Integration")]
        integration: IntegrationArgs,
        #[command(flatten, next_help_heading = "Initial state")]
        initial: InitialArgs,
        #[command(flatten, next_help_heading = "Scan")]
        opts: OrderArgs,
    },
    /// Leading non-Goldstone mode of the static condensate along a pump scan.
    CepScan {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Static solver")]
        statics: StaticArgs,
        #[command(flatten, next_help_heading = "Scan")]
        opts: CepArgs,
    },
    /// Stability boundary of the static condensate, and kink scaling.
    StaticLine {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Static solver")]
        statics: StaticArgs,
        #[command(flatten, next_help_heading = "Scan")]
        opts: StaticLineArgs,
    },
    /// Lyapunov spectrum and dynamics class of one attractor.
    Lyapunov {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Integration")]
        integration: IntegrationArgs,
        #[command(flatten, next_help_heading = "Initial state")]
        initial: InitialArgs,
        #[command(flatten, next_help_heading = "Lyapunov")]
        opts: LyapunovArgs,
    },
    /// Delay embedding of one site's phase, optionally with its particle-hole image.
    Embed {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Integration")]
        integration: IntegrationArgs,
        #[command(flatten, next_help_heading = "Initial state")]
        initial: InitialArgs,
        #[command(flatten, next_help_heading = "Embedding")]
        opts: EmbedArgs,
    },
    /// Phase-diagram sweep over (kappa, gamma) with checkpointing.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten, next_help_heading = "Model")]
        model: ModelArgs,
        #[command(flatten, next_help_heading = "Integration")]
        integration: IntegrationArgs,
        #[command(flatten, next_help_heading = "Sweep")]
        opts: SweepArgs,
        #[command(flatten, next_help_heading = "Lyapunov")]
        lyapunov: LyapunovArgs,
        #[command(flatten)]
        control: SweepControl,
    },
    /// Continue an interrupted sweep.
    Resume {
        /// Sweep directory.
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        control: SweepControl,
    },
    /// Boundary polylines between two label groups of a finished sweep.
    Boundary {
        /// Sweep directory.
        #[arg(long)]
        dir: PathBuf,
        /// Labels on one side, comma separated (vacuum, static, cw, ccw, mixed, dynamic).
        #[arg(long)]
        a: String,
        /// Labels on the other side.
        #[arg(long)]
        b: String,
        /// CSV path (default <dir>/boundary.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepControl {
    /// Stop after committing this many new cells; resume continues from there.
    #[arg(long = "stop_after")]
    pub stop_after: Option<usize>,
}

pub fn dispatch(cli: Cli) -> Res<()> {
    if cli.threads == Some(0) {
        return Err(CliError::Validation("--threads must be >= 1".into()));
    }
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let t = cli.threads;
    match cli.command {
        Command::Spectrum { run, model, opts } => spectrum(run, model, opts),
        Command::PbcStability { run, model, opts } => pbc_stability(run, model, opts),
        Command::Simulate { run, model, integration, initial, opts } => simulate(run, model, integration, initial, opts),
        Command::OrderParams { run, model, integration, initial, opts } => {
            order_params(run, model, integration, initial, opts)
        }
        Command::CepScan { run, model, statics, opts } => cep(run, model, statics, opts),
        Command::StaticLine { run, model, statics, opts } => static_line(run, model, statics, opts),
        Command::Lyapunov { run, model, integration, initial, opts } => lyapunov(run, model, integration, initial, opts),
        Command::Embed { run, model, integration, initial, opts } => embed(run, model, integration, initial, opts),
        Command::Sweep { run, model, integration, opts, lyapunov, control } => {
            sweep(run, model, integration, opts, lyapunov, control, t)
        }
        Command::Resume { dir, control } => resume(&dir, control, t),
        Command::Boundary { dir, a, b, out } => boundary(&dir, &a, &b, out),
    }
}

fn out_dir(run: &RunArgs, command: &str) -> PathBuf {
    run.out.clone().unwrap_or_else(|| Path::new("runs").join(command))
}

fn announce(dir: &Path) {
    println!("{}", dir.display());
}

fn spectrum(run: RunArgs, mut model: ModelArgs, mut opts: SpectrumArgs) -> Res<()> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut d = Defaults::default();
    model.merge(file.model);
    model.resolve(&mut d, Boundary::Open);
    opts.merge(file.spectrum);
    d.fill(&mut opts.numeric, "spectrum", "numeric", false);
    let p = model.params()?;
    let n = p.sites();

    let mut csv = Csv::new(&["re", "im", "m"]);
    let (sorted, mut summary) = match p.boundary() {
        Boundary::Open => {
            let s = obc_spectrum_analytic(&p, false)?;
            for (z, m) in s.eigenvalues.iter().zip(&s.modes) {
                csv.row(&[&z.re, &z.im, m]);
            }
            let summary = json!({
                "regime": format!("{:?}", s.regime),
                "localization_ratio": s.localization_ratio,
                "degenerate": s.degenerate,
            });
            (s.eigenvalues, summary)
        }
        Boundary::Periodic => {
            for m in 0..n {
                let dp = pbc_dispersion(&p, m)?;
                let z = C64::new(dp.omega_q, p.pump() - dp.gamma_q);
                csv.row(&[&z.re, &z.im, &m]);
            }
            (pbc_spectrum(&p), json!({}))
        }
    };
    let mut numeric = None;
    if opts.numeric.unwrap() {
        let v = spectrum_numeric(&p)?;
        let err = sorted.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        summary["max_abs_error_numeric"] = json!(err);
        let mut c = Csv::new(&["re", "im", "index"]);
        for (i, z) in v.iter().enumerate() {
            c.row(&[&z.re, &z.im, &i]);
        }
        numeric = Some(c);
    }

    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("spectrum", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "spectrum"))?;
    dir.write("spectrum.csv", &csv.into_bytes())?;
    if let Some(c) = numeric {
        dir.write("spectrum_numeric.csv", &c.into_bytes())?;
    }
    announce(dir.path());
    dir.finish("spectrum", &echo, d, summary)
}

fn pbc_stability(run: RunArgs, mut model: ModelArgs, mut opts: PbcArgs) -> Res<()> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut d = Defaults::default();
    model.merge(file.model);
    model.resolve(&mut d, Boundary::Periodic);
    if model.boundary != Some(Boundary::Periodic) {
        return Err(CliError::Validation("pbc-stability needs boundary = periodic".into()));
    }
    opts.merge(file.pbc);
    d.fill(&mut opts.kappas, "pbc", "kappas", Grid(vec![model.kappa.unwrap()]));
    d.fill(&mut opts.ms, "pbc", "ms", (0..model.n.unwrap()).collect());
    d.fill(&mut opts.k_refine, "pbc", "k_refine", 1);
    d.fill(&mut opts.stability_tol, "pbc", "stability_tol", STABILITY_TOL);
    let p = model.params()?;
    let popts = PbcOptions { stability_tol: opts.stability_tol.unwrap(), k_refine: opts.k_refine.unwrap() };
    if popts.k_refine == 0 || !(popts.stability_tol >= 0.0) {
        return Err(CliError::Validation("pbc: need k_refine >= 1 and stability_tol >= 0".into()));
    }
    let diagram = stability_diagram(&p, &opts.kappas.as_ref().unwrap().0, opts.ms.as_ref().unwrap(), &popts)?;

    let mut csv = Csv::new(&[
        "kappa", "m", "q", "exists", "stable", "max_growth", "worst_k", "goldstone", "omega_q", "gamma_q", "r_q",
    ]);
    let mut stable_sets: Vec<serde_json::Value> = vec![];
    for kappa in &opts.kappas.as_ref().unwrap().0 {
        let ms: Vec<usize> =
            diagram.cells.iter().filter(|c| c.kappa == *kappa && c.stability.stable).map(|c| c.m).collect();
        stable_sets.push(json!({ "kappa": kappa, "stable_m": ms }));
    }
    for c in &diagram.cells {
        let s = &c.stability;
        csv.row(&[
            &c.kappa,
            &c.m,
            &s.q,
            &s.exists,
            &s.stable,
            &s.max_growth,
            &s.worst_k,
            &s.goldstone,
            &c.omega_q,
            &c.gamma_q,
            &c.r_q,
        ]);
    }
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("pbc", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "pbc-stability"))?;
    dir.write("pbc_stability.csv", &csv.into_bytes())?;
    announce(dir.path());
    dir.finish("pbc-stability", &echo, d, json!({ "stable": stable_sets }))
}

fn resolve_dynamics(
    run: &RunArgs,
    model: &mut ModelArgs,
    integration: &mut IntegrationArgs,
    initial: &mut InitialArgs,
    d: &mut Defaults,
) -> Res<FileConfig> {
    let mut file = FileConfig::load(run.config.as_deref())?;
    model.merge(std::mem::take(&mut file.model));
    model.resolve(d, Boundary::Open);
    integration.merge(std::mem::take(&mut file.integration));
    integration.resolve(d);
    initial.merge(std::mem::take(&mut file.initial));
    initial.resolve(d);
    if !(initial.ic_scale.unwrap() >= 0.0 && initial.ic_scale.unwrap().is_finite()) {
        return Err(CliError::Validation("initial.ic_scale must be finite and >= 0".into()));
    }
    Ok(file)
}

fn attractor(p: &ModelParams, integration: &IntegrationArgs, seed: u64, scale: f64) -> Res<AttractorRecord> {
    let cfg = integration.config(seed)?;
    let init = random_initial(p, seed, scale)?;
    Ok(find_attractor(p, &init, &cfg)?)
}

fn kind_name(rec: &AttractorRecord) -> String {
    if rec.is_vacuum() {
        "Vacuum".into()
    } else {
        format!("{:?}", rec.kind)
    }
}

fn simulate(
    run: RunArgs,
    mut model: ModelArgs,
    mut integration: IntegrationArgs,
    mut initial: InitialArgs,
    mut opts: SimulateArgs,
) -> Res<()> {
    let mut d = Defaults::default();
    let file = resolve_dynamics(&run, &mut model, &mut integration, &mut initial, &mut d)?;
    opts.merge(file.simulate);
    d.fill(&mut opts.csv, "simulate", "csv", false);
    let p = model.params()?;
    let seed = initial.seed.unwrap();
    let cfg = integration.config(seed)?;
    let init = random_initial(&p, seed, initial.ic_scale.unwrap())?;
    let traj = integrate(&p, &init, &cfg)?;

    let csv = opts.csv.unwrap().then(|| {
        let mut c = Csv::new(&["t", "site", "re", "im"]);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            for (j, z) in s.iter().enumerate() {
                c.row(&[t, &(j + 1), &z.re, &z.im]);
            }
        }
        c
    });
    let summary = json!({
        "snapshots": traj.len(),
        "t_end": traj.times.last(),
        "final_max_abs": traj.terminal_state.max_abs(),
    });
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("integration", &integration)?;
    echo.section("initial", &initial)?;
    echo.section("simulate", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "simulate"))?;
    dir.write("trajectory.nrc1", &nrc1::encode(&traj))?;
    if let Some(c) = csv {
        dir.write("trajectory.csv", &c.into_bytes())?;
    }
    announce(dir.path());
    dir.finish("simulate", &echo, d, summary)
}

fn order_params(
    run: RunArgs,
    mut model: ModelArgs,
    mut integration: IntegrationArgs,
    mut initial: InitialArgs,
    mut opts: OrderArgs,
) -> Res<()> {
    let mut d = Defaults::default();
    let file = resolve_dynamics(&run, &mut model, &mut integration, &mut initial, &mut d)?;
    opts.merge(file.order_params);
    let n = model.n.unwrap();
    let bulk = default_bulk_window(n);
    d.fill(&mut opts.kappas, "order_params", "kappas", Grid(vec![model.kappa.unwrap()]));
    d.fill(&mut opts.n_seeds, "order_params", "n_seeds", 1);
    d.fill(&mut opts.bulk_first, "order_params", "bulk_first", bulk.start + 1);
    d.fill(&mut opts.bulk_last, "order_params", "bulk_last", bulk.end);
    let (first, last) = (opts.bulk_first.unwrap(), opts.bulk_last.unwrap());
    if !(1 <= first && first <= last && last <= n) {
        return Err(CliError::Validation(format!("bulk sites must satisfy 1 <= bulk_first <= bulk_last <= N = {n}")));
    }
    if opts.n_seeds == Some(0) {
        return Err(CliError::Validation("order_params.n_seeds must be >= 1".into()));
    }
    let p = model.params()?;
    integration.config(0)?;
    let seed0 = initial.seed.unwrap();
    let jobs: Vec<(f64, u64)> = opts
        .kappas
        .as_ref()
        .unwrap()
        .0
        .iter()
        .flat_map(|&k| (0..opts.n_seeds.unwrap()).map(move |s| (k, seed0 + s)))
        .collect();
    let results: Vec<(f64, u64, AttractorRecord)> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let pk = p.with_pump(k)?;
            Ok((k, seed, attractor(&pk, &integration, seed, initial.ic_scale.unwrap())?))
        })
        .collect::<Res<_>>()?;

    let mut rows = Csv::new(&[
        "kappa",
        "seed",
        "kind",
        "mean_amplitude",
        "mean_frequency",
        "mean_frequency_all",
        "mean_wavevector",
        "mean_density_rate",
        "edge_extent",
        "residual",
        "elapsed",
        "extended",
    ]);
    let mut profile = Csv::new(&["kappa", "seed", "site", "density_rate"]);
    let mut warnings = vec![];
    for (k, seed, rec) in &results {
        warnings.extend(rec.warnings.iter().map(|w| format!("kappa {k}, seed {seed}: {w}")));
        let kind = kind_name(rec);
        if rec.kind == AttractorKind::Diverged {
            rows.row(&[k, seed, &kind, &None::<f64>, &None::<f64>, &None::<f64>, &None::<f64>, &None::<f64>, &None::<usize>, &rec.residual, &rec.elapsed, &rec.extended]);
            continue;
        }
        let op = order_parameters(&rec.window, Some(first - 1..last))?;
        let extent = edge_extent(&op.edge_density_rate_profile);
        rows.row(&[
            k,
            seed,
            &kind,
            &op.mean_amplitude,
            &op.mean_frequency,
            &op.mean_frequency_all,
            &op.mean_wavevector,
            &op.mean_density_rate,
            &extent,
            &rec.residual,
            &rec.elapsed,
            &rec.extended,
        ]);
        for (j, r) in op.edge_density_rate_profile.iter().enumerate() {
            profile.row(&[k, seed, &(j + 1), r]);
        }
    }
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("integration", &integration)?;
    echo.section("initial", &initial)?;
    echo.section("order_params", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "order-params"))?;
    dir.write("order_params.csv", &rows.into_bytes())?;
    dir.write("density_profile.csv", &profile.into_bytes())?;
    announce(dir.path());
    dir.finish("order-params", &echo, d, json!({ "runs": results.len(), "warnings": warnings }))
}

fn cep(run: RunArgs, mut model: ModelArgs, mut statics: StaticArgs, mut opts: CepArgs) -> Res<()> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut d = Defaults::default();
    model.merge(file.model);
    model.resolve(&mut d, Boundary::Open);
    statics.merge(file.statics);
    statics.resolve(&mut d);
    opts.merge(file.cep);
    let Some(kappas) = opts.kappas.clone() else {
        return Err(CliError::Validation("cep-scan needs kappas (e.g. --kappas 3:2.3:0.01)".into()));
    };
    let p = model.params()?;
    let so = statics.options()?;
    let rows = cep_scan(&p, &kappas.0, &so);
    let valid = rows.iter().filter(|r| r.valid).count();
    if valid == 0 {
        let why = rows.first().and_then(|r| r.message.clone()).unwrap_or_default();
        return Err(CliError::Numerical(format!("no static condensate along the scan: {why}")));
    }
    let mut csv = Csv::new(&["kappa", "lambda2", "lambda2_im", "theta12", "valid", "message"]);
    for r in &rows {
        csv.row(&[&r.kappa, &r.lambda2, &r.lambda2_im, &r.theta12, &r.valid, &r.message]);
    }
    let last = rows.iter().rev().find(|r| r.valid).map(|r| r.kappa);
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("static", &statics)?;
    echo.section("cep", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "cep-scan"))?;
    dir.write("cep_scan.csv", &csv.into_bytes())?;
    announce(dir.path());
    dir.finish("cep-scan", &echo, d, json!({ "valid_rows": valid, "last_valid_kappa": last }))
}

fn static_line(run: RunArgs, mut model: ModelArgs, mut statics: StaticArgs, mut opts: StaticLineArgs) -> Res<()> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut d = Defaults::default();
    model.merge(file.model);
    model.resolve(&mut d, Boundary::Open);
    statics.merge(file.statics);
    statics.resolve(&mut d);
    opts.merge(file.static_line);
    let b = BoundaryOptions::default();
    d.fill(&mut opts.gammas, "static_line", "gammas", Grid(vec![model.gamma.unwrap()]));
    d.fill(&mut opts.kappa_top, "static_line", "kappa_top", b.kappa_top);
    d.fill(&mut opts.kappa_step, "static_line", "kappa_step", b.kappa_step);
    d.fill(&mut opts.kappa_tol, "static_line", "kappa_tol", b.tol);
    let p = model.params()?;
    let so = statics.options()?;
    let bo = BoundaryOptions {
        kappa_top: opts.kappa_top.unwrap(),
        kappa_step: opts.kappa_step.unwrap(),
        tol: opts.kappa_tol.unwrap(),
        statics: so,
    };
    if !(bo.kappa_step > 0.0 && bo.tol > 0.0 && bo.kappa_top > 0.0) {
        return Err(CliError::Validation("static_line: need kappa_top, kappa_step, kappa_tol > 0".into()));
    }
    let kink = match &opts.kink_kappas {
        Some(k) => Some(kink_scaling(&p, &k.0, &so)?),
        None => None,
    };
    let rows = static_stability_boundary(&p, &opts.gammas.as_ref().unwrap().0, &bo);
    let mut csv = Csv::new(&["gamma", "kappa_c", "flag"]);
    for r in &rows {
        csv.row(&[&r.gamma, &r.kappa_c, &r.flag]);
    }
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("static", &statics)?;
    echo.section("static_line", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "static-line"))?;
    dir.write("static_line.csv", &csv.into_bytes())?;
    let mut summary = json!({ "rows": rows.len(), "flagged": rows.iter().filter(|r| r.flag.is_some()).count() });
    if let Some(k) = &kink {
        dir.write_json(
            "kink.json",
            &json!({
                "kappa_crit": k.kappa_crit,
                "exponent": k.fit.exponent,
                "prefactor": k.fit.prefactor,
                "fit_range": k.fit.fit_range,
                "residual": k.fit.residual,
                "kappas": k.kappas,
                "positions": k.positions,
                "heights": k.heights,
            }),
        )?;
        summary["kink_exponent"] = json!(k.fit.exponent);
    }
    announce(dir.path());
    dir.finish("static-line", &echo, d, summary)
}

fn lyapunov(
    run: RunArgs,
    mut model: ModelArgs,
    mut integration: IntegrationArgs,
    mut initial: InitialArgs,
    mut opts: LyapunovArgs,
) -> Res<()> {
    let mut d = Defaults::default();
    let file = resolve_dynamics(&run, &mut model, &mut integration, &mut initial, &mut d)?;
    opts.merge(file.lyapunov);
    opts.resolve(&mut d);
    let p = model.params()?;
    let cfg = opts.config(integration.dt.unwrap())?;
    if cfg.k > 2 * p.sites() {
        return Err(CliError::Validation(format!("lyapunov.k must be <= 2N = {}", 2 * p.sites())));
    }
    let rec = attractor(&p, &integration, initial.seed.unwrap(), initial.ic_scale.unwrap())?;
    if rec.kind == AttractorKind::Diverged {
        return Err(CliError::Numerical("trajectory diverged before reaching an attractor".into()));
    }
    let lces = lyapunov_spectrum(&p, rec.terminal(), &cfg)?;
    let class = classify_dynamics(Some(&lces), &rec, ZERO_TOL)?;

    let result = json!({
        "exponents": lces.exponents,
        "trailing_half": lces.trailing_half,
        "drift": lces.drift(),
        "exponent_sum": lces.exponents.iter().sum::<f64>(),
        "trace_average": lces.trace_average,
        "zero_count": class.zero_count,
        "positive_count": class.positive_count,
        "class": format!("{:?}", class.kind),
        "conclusive": class.conclusive,
        "diagnostics": class.diagnostics,
        "zero_tol": ZERO_TOL,
        "t_total": lces.t_total,
        "renorm_interval": lces.renorm_interval,
        "attractor": {
            "kind": kind_name(&rec),
            "elapsed": rec.elapsed,
            "residual": rec.residual,
            "extended": rec.extended,
            "warnings": rec.warnings,
        },
    });
    let mut header = vec!["epoch".to_string(), "t".to_string()];
    header.extend((1..=cfg.k).map(|i| format!("lambda{i}")));
    let mut hist = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (e, row) in lces.history.iter().enumerate() {
        let t = (e + 1) as f64 * lces.renorm_interval;
        let mut fields: Vec<&dyn crate::output::Field> = vec![&e, &t];
        fields.extend(row.iter().map(|x| x as &dyn crate::output::Field));
        hist.row(&fields);
    }
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("integration", &integration)?;
    echo.section("initial", &initial)?;
    echo.section("lyapunov", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "lyapunov"))?;
    dir.write_json("lyapunov.json", &result)?;
    dir.write("lyapunov_history.csv", &hist.into_bytes())?;
    announce(dir.path());
    let summary = json!({ "class": result["class"], "exponents": result["exponents"] });
    dir.finish("lyapunov", &echo, d, summary)
}

fn phase_series(traj: &Trajectory, site0: usize, unwrap: bool) -> Res<Vec<f64>> {
    if unwrap {
        Ok(site_phase_series(traj, site0)?)
    } else {
        Ok(traj.states.iter().map(|s| s[site0].arg()).collect())
    }
}

fn embed(
    run: RunArgs,
    mut model: ModelArgs,
    mut integration: IntegrationArgs,
    mut initial: InitialArgs,
    mut opts: EmbedArgs,
) -> Res<()> {
    let mut d = Defaults::default();
    let file = resolve_dynamics(&run, &mut model, &mut integration, &mut initial, &mut d)?;
    opts.merge(file.embed);
    if integration.scheme != Some(Scheme::Rk4) {
        return Err(CliError::Validation("embed needs the fixed-step rk4 scheme (uniform sampling)".into()));
    }
    let n = model.n.unwrap();
    let sample = integration.dt.unwrap() * integration.sample_stride.unwrap() as f64;
    d.fill(&mut opts.site, "embed", "site", (n / 2).max(1));
    d.fill(&mut opts.delay, "embed", "delay", 10.0 * sample);
    d.fill(&mut opts.ph, "embed", "ph", false);
    d.fill(&mut opts.unwrap, "embed", "unwrap", false);
    let site = opts.site.unwrap();
    if !(1..=n).contains(&site) {
        return Err(CliError::Validation(format!("embed.site must lie in 1..={n}")));
    }
    let p = model.params()?;
    integration.config(0)?;
    let rec = attractor(&p, &integration, initial.seed.unwrap(), initial.ic_scale.unwrap())?;
    if rec.kind == AttractorKind::Diverged {
        return Err(CliError::Numerical("trajectory diverged before reaching an attractor".into()));
    }
    let unwrap = opts.unwrap.unwrap();
    let delay = opts.delay.unwrap();
    let orig = delay_embed(&phase_series(&rec.window, site - 1, unwrap)?, delay, sample)?;
    let mut csv = Csv::new(&["series", "x", "y"]);
    for (x, y) in &orig {
        csv.row(&[&"orig", x, y]);
    }
    let mut summary = json!({ "points": orig.len(), "attractor": kind_name(&rec) });
    if opts.ph.unwrap() {
        let twin = Trajectory { states: rec.window.states.iter().map(|s| ph_map(s)).collect(), ..rec.window.clone() };
        let image = delay_embed(&phase_series(&twin, site - 1, unwrap)?, delay, sample)?;
        for (x, y) in &image {
            csv.row(&[&"ph", x, y]);
        }
        summary["hausdorff"] = json!(hausdorff_distance(&orig, &image));
    }
    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("integration", &integration)?;
    echo.section("initial", &initial)?;
    echo.section("embed", &opts)?;
    let mut dir = RunDir::create(&out_dir(&run, "embed"))?;
    dir.write("embed.csv", &csv.into_bytes())?;
    announce(dir.path());
    dir.finish("embed", &echo, d, summary)
}

fn report(status: SweepStatus, dir: &Path) {
    match status {
        SweepStatus::Complete(diag) => {
            println!("{}: {} cells complete", dir.display(), diag.cells.len());
        }
        SweepStatus::Interrupted { completed, total } => {
            println!("{}: stopped at {completed}/{total} cells; continue with `condensate resume --dir {}`", dir.display(), dir.display());
        }
    }
}

fn sweep(
    run: RunArgs,
    mut model: ModelArgs,
    mut integration: IntegrationArgs,
    mut opts: SweepArgs,
    mut lyap: LyapunovArgs,
    control: SweepControl,
    threads: Option<usize>,
) -> Res<()> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut d = Defaults::default();
    model.merge(file.model);
    model.resolve(&mut d, Boundary::Open);
    integration.merge(file.integration);
    integration.resolve(&mut d);
    opts.merge(file.sweep);
    let dedup = DedupTolerances::default();
    d.fill(&mut opts.kappas, "sweep", "kappas", Grid(linear_grid(0.0, 3.0, 0.05)));
    d.fill(&mut opts.gammas, "sweep", "gammas", Grid(linear_grid(0.0, 1.0, 0.05)));
    d.fill(&mut opts.n_initial_conditions, "sweep", "n_initial_conditions", 8);
    d.fill(&mut opts.ic_scales, "sweep", "ic_scales", Grid(vec![0.1]));
    d.fill(&mut opts.base_seed, "sweep", "base_seed", 0);
    d.fill(&mut opts.period, "sweep", "period", true);
    d.fill(&mut opts.lyapunov, "sweep", "lyapunov", false);
    d.fill(&mut opts.omega_tol, "sweep", "omega_tol", 1e-3);
    d.fill(&mut opts.dedup_omega, "sweep", "dedup_omega", dedup.omega);
    d.fill(&mut opts.dedup_q, "sweep", "dedup_q", dedup.q);
    d.fill(&mut opts.dedup_amplitude, "sweep", "dedup_amplitude", dedup.amplitude);
    d.fill(&mut opts.dedup_period, "sweep", "dedup_period", dedup.period);
    d.fill(&mut opts.dedup_edge_extent, "sweep", "dedup_edge_extent", dedup.edge_extent);
    let with_lyap = opts.lyapunov.unwrap();
    let lyap_cfg = if with_lyap {
        lyap.merge(file.lyapunov);
        lyap.resolve(&mut d);
        Some(lyap.config(integration.dt.unwrap())?)
    } else {
        None
    };
    let out = out_dir(&run, "sweep");
    let spec = SweepSpec {
        params_base: model.params()?,
        kappa_grid: opts.kappas.clone().unwrap().0,
        gamma_grid: opts.gammas.clone().unwrap().0,
        n_initial_conditions: opts.n_initial_conditions.unwrap(),
        ic_scales: opts.ic_scales.clone().unwrap().0,
        base_seed: opts.base_seed.unwrap(),
        integration: integration.config(0)?,
        analysis: AnalysisToggles { period: opts.period.unwrap(), lyapunov: lyap_cfg },
        omega_tol: opts.omega_tol.unwrap(),
        dedup: DedupTolerances {
            omega: opts.dedup_omega.unwrap(),
            q: opts.dedup_q.unwrap(),
            amplitude: opts.dedup_amplitude.unwrap(),
            period: opts.dedup_period.unwrap(),
            edge_extent: opts.dedup_edge_extent.unwrap(),
        },
        output_path: out.clone(),
    };
    spec.validate()?;
    if let Some(k) = lyap_cfg.map(|c| c.k) {
        if k > 2 * spec.params_base.sites() {
            return Err(CliError::Validation("lyapunov.k must be <= 2N".into()));
        }
    }
    if out.join("manifest.json").exists() {
        return Err(CliError::Io(format!("{} already holds a sweep; use resume", out.display())));
    }

    let mut echo = Echo::default();
    echo.section("model", &model)?;
    echo.section("integration", &integration)?;
    echo.section("sweep", &opts)?;
    if with_lyap {
        echo.section("lyapunov", &lyap)?;
    }
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let toml_text = echo.to_toml();
    write_atomic(&out.join("config.toml"), toml_text.as_bytes())?;
    let run_json = json!({
        "command": "sweep",
        "code_version": condensate_core::CODE_VERSION,
        "config": echo.to_json(),
        "config_sha256": sha256_hex(toml_text.as_bytes()),
        "defaulted": d.fields,
        "spec_hash": spec.hash(),
    });
    let mut s = serde_json::to_string_pretty(&run_json).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(&out.join("run.json"), s.as_bytes())?;

    let status = run_sweep(&spec, &RunOptions { threads, stop_after: control.stop_after })?;
    report(status, &out);
    Ok(())
}

fn resume(dir: &Path, control: SweepControl, threads: Option<usize>) -> Res<()> {
    let status = resume_sweep(dir, None, &RunOptions { threads, stop_after: control.stop_after })?;
    report(status, dir);
    Ok(())
}

fn labels(arg: &str) -> Res<Vec<Label>> {
    let mut out = vec![];
    for part in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let g = Label::parse_group(part).ok_or_else(|| CliError::Validation(format!("unknown label '{part}'")))?;
        for l in g {
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Validation("empty label group".into()));
    }
    Ok(out)
}

fn boundary(dir: &Path, a: &str, b: &str, out: Option<PathBuf>) -> Res<()> {
    let (la, lb) = (labels(a)?, labels(b)?);
    if la.iter().any(|l| lb.contains(l)) {
        return Err(CliError::Validation("label groups overlap".into()));
    }
    let diagram = load_diagram(dir)?;
    let lines = extract_boundary(&diagram, &la, &lb);
    let csv = polylines_to_csv(&lines);
    let out = out.unwrap_or_else(|| dir.join("boundary.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_atomic(&out, csv.as_bytes())?;
    let diagram_path = dir.join("diagram.ndjson");
    let diagram_bytes = std::fs::read(&diagram_path).map_err(|e| CliError::io(&diagram_path, e))?;
    let meta = json!({
        "command": "boundary",
        "code_version": condensate_core::CODE_VERSION,
        "sweep_dir": dir,
        "diagram_sha256": sha256_hex(&diagram_bytes),
        "spec_hash": diagram.spec.hash(),
        "side_a": la,
        "side_b": lb,
        "polylines": lines.len(),
        "csv_sha256": sha256_hex(csv.as_bytes()),
    });
    let mut s = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(&out.with_extension("json"), s.as_bytes())?;
    println!("{}", out.display());
    Ok(())
}
