//! `dice`: reproduction recipes for detection-induced coherent errors in
//! planar surface codes.
//!
//! Exit status: 0 when every check is within tolerance, 1 when a reproduction
//! check fails, 2 on usage or runtime errors.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use dice_core::aqec::{self, KlTable};
use dice_core::pauli_algebra::{
    config_weight, group_by_ancilla_config, round_deviation, BitMask, KappaPoly, PauliString, PauliSum,
};
use dice_core::qec_cycle::{run_trials, CycleConfig, MeasurementMode, Trajectory};
use dice_core::surface_code::{build_layout, Basis};
use dice_core::worst_case::{self, odd_range, power_law_fit, sweep_grid, SweepRow};
use dice_core::Execution;

#[derive(Parser, Debug)]
#[command(name = "dice", version, about = "Detection-induced coherent error analysis for planar surface codes")]
struct Cli {
    /// Run single-threaded regardless of RAYON_NUM_THREADS.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum imperfect-CNOT fidelity per κ.
    GateFidelity {
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        kappa: Vec<f64>,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order deviation operator of one stabilizer round.
    Deviation {
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum)]
        basis: BasisArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Also list numeric coefficients at this κ.
        #[arg(long)]
        kappa: Option<f64>,
        /// Write canonical JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exact d=3 QEC cycles.
    Simulate {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1)]
        cycles: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Sample)]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Data-qubit Pauli applied to the initial codeword, e.g. `X7` or `Z3X5`.
        #[arg(long, default_value = "I")]
        inject: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Worst-case infidelity sweep and power-law fit.
    WorstCase {
        #[arg(long, default_value_t = 3)]
        d_min: usize,
        #[arg(long, default_value_t = 101)]
        d_max: usize,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        kappa: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "3", num_args = 1..)]
        m: Vec<usize>,
        #[arg(long, default_value_t = 13)]
        fit_from: usize,
        #[arg(long)]
        fit_to: Option<usize>,
        #[arg(long, value_enum)]
        emit_plot: Option<PlotArg>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Knill–Laflamme overlaps of the dressed d=3 codewords.
    KlScan {
        #[arg(long)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = AnchorArg::X2)]
        anchor: AnchorArg,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BasisArg {
    Z,
    X,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Basis {
        match b {
            BasisArg::Z => Basis::Z,
            BasisArg::X => Basis::X,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Sample,
    PostselectTrivial,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PlotArg {
    Gnuplot,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AnchorArg {
    X2,
}

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    subcommand: &'a str,
    parameters: P,
    /// Per-trial seeds are `base + trial`.
    seeds: Option<SeedRule>,
    tool_version: &'static str,
    execution: &'static str,
    outputs: Vec<String>,
    /// The only field that differs between reruns.
    wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct SeedRule {
    base: u64,
    trials: usize,
    rule: &'static str,
}

struct Run {
    name: &'static str,
    exec: Execution,
    started: Instant,
}

impl Run {
    fn manifest<P: Serialize>(
        &self,
        path: &Path,
        parameters: P,
        seeds: Option<SeedRule>,
        outputs: &[PathBuf],
    ) -> Result<()> {
        let m = Manifest {
            subcommand: self.name,
            parameters,
            seeds,
            tool_version: env!("CARGO_PKG_VERSION"),
            execution: if self.exec.is_parallel() { "parallel" } else { "sequential" },
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(path, &serde_json::to_value(m)?)
    }
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn gate_fidelity(run: &Run, kappa: &[f64], out: &Option<PathBuf>) -> Result<bool> {
    let rows: Vec<(f64, f64)> =
        kappa.iter().map(|&k| aqec::min_gate_fidelity(k).map(|f| (k, f))).collect::<Result<_, _>>()?;
    {
        let mut w = csv::Writer::from_writer(sink(out)?);
        w.write_record(["kappa", "f_g"])?;
        for (k, f) in &rows {
            w.write_record([k.to_string(), f.to_string()])?;
        }
        w.flush()?;
    }
    if let Some(p) = out {
        run.manifest(&sidecar(p), serde_json::json!({ "kappa": kappa }), None, std::slice::from_ref(p))?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct DeviationReport {
    terms: usize,
    configurations: usize,
    identity_coefficient: String,
    expected_identity: String,
    identity_matches: bool,
    trivial_weight: String,
    total_weight: String,
    /// Leading `π²κ²` coefficients of the k=1 closed forms; absent for k > 1.
    closed_form: Option<[String; 2]>,
    closed_form_matches: Option<bool>,
}

fn deviation_report(op: &PauliSum, d: usize, basis: Basis, k: usize) -> Result<DeviationReport> {
    let layout = build_layout(d)?;
    let groups = group_by_ancilla_config(op);
    let trivial = groups.get(&BitMask::new()).map(|g| config_weight(g, 2)).unwrap_or_else(KappaPoly::zero);
    let total = groups.values().fold(KappaPoly::zero(), |acc, g| &acc + &config_weight(g, 2));
    let weight: i64 = layout.stabilizers(basis).iter().map(|s| s.weight() as i64).sum();
    let expected = KappaPoly::from_coeffs(vec![
        dice_core::pauli_algebra::real(1, 1),
        dice_core::pauli_algebra::imag(-(k as i64) * weight, 4),
    ]);
    let identity = op.coefficient(&PauliString::identity());
    let (closed_form, closed_form_matches) = if k == 1 && op.cap() == 1 {
        let p = worst_case::round_polynomials(d, 1)?;
        let ok = trivial.coeff(2).re == p.numerator && total.coeff(2).re == p.denominator;
        (Some([p.numerator.to_string(), p.denominator.to_string()]), Some(ok))
    } else {
        (None, None)
    };
    Ok(DeviationReport {
        terms: op.len(),
        configurations: groups.len(),
        identity_matches: identity.truncate(1) == expected,
        identity_coefficient: identity.to_string(),
        expected_identity: expected.to_string(),
        trivial_weight: trivial.to_string(),
        total_weight: total.to_string(),
        closed_form,
        closed_form_matches,
    })
}

#[allow(clippy::too_many_arguments)]
fn deviation(
    run: &Run,
    d: usize,
    basis: BasisArg,
    k: usize,
    order: usize,
    kappa: Option<f64>,
    json: &Option<PathBuf>,
) -> Result<bool> {
    let layout = build_layout(d)?;
    let op = round_deviation(&layout, basis.into(), k, order)?;
    let report = deviation_report(&op, d, basis.into(), k)?;
    let evaluated = kappa.map(|kap| {
        op.evaluate(kap)
            .into_iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(p, c)| serde_json::json!({ "term": p.to_string(), "re": c.re, "im": c.im }))
            .collect::<Vec<_>>()
    });
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "terms: {}", report.terms)?;
    writeln!(stdout, "ancilla configurations: {}", report.configurations)?;
    writeln!(stdout, "identity: {} (expected {})", report.identity_coefficient, report.expected_identity)?;
    writeln!(stdout, "trivial weight: {}", report.trivial_weight)?;
    writeln!(stdout, "total weight: {}", report.total_weight)?;
    if let Some(ev) = &evaluated {
        writeln!(stdout, "nonzero terms at κ={}: {}", kappa.unwrap_or_default(), ev.len())?;
        for t in ev {
            let (re, im) = (t["re"].as_f64().unwrap_or(0.0), t["im"].as_f64().unwrap_or(0.0));
            writeln!(stdout, "  {} {re:+.6e} {im:+.6e}i", t["term"].as_str().unwrap_or(""))?;
        }
    } else {
        for (p, c) in op.terms() {
            writeln!(stdout, "  {p}: {c}")?;
        }
    }
    let ok = report.identity_matches && report.closed_form_matches.unwrap_or(true);
    if let Some(path) = json {
        let mut v = serde_json::json!({ "operator": op.to_json(), "report": report });
        if let Some(ev) = evaluated {
            v["evaluated"] = serde_json::json!({ "kappa": kappa, "terms": ev });
        }
        write_json(path, &v)?;
        let params = serde_json::json!({ "d": d, "basis": basis, "k": k, "order": order, "kappa": kappa });
        run.manifest(&sidecar(path), params, None, std::slice::from_ref(path))?;
    }
    Ok(ok)
}

#[derive(Serialize)]
struct SimulateParams<'a> {
    d: usize,
    kappa: f64,
    cycles: usize,
    mode: ModeArg,
    seed: Option<u64>,
    trials: usize,
    inject: &'a str,
}

#[derive(Serialize)]
struct Summary {
    d: usize,
    kappa: f64,
    cycles: usize,
    mode: String,
    seed: String,
    trials: usize,
    mean_fidelity: f64,
    min_fidelity: f64,
    max_fidelity: f64,
    logical_errors: usize,
    logical_error_rate: f64,
    mean_branch_probability: f64,
    f_min_bound: f64,
    bound_satisfied: String,
}

fn summarize(p: &SimulateParams, trajectories: &[Trajectory]) -> Result<Summary> {
    let n = trajectories.len().max(1) as f64;
    let fid: Vec<f64> = trajectories.iter().map(|t| t.final_fidelity).collect();
    let errors = trajectories.iter().filter(|t| t.logical_error).count();
    let bound = worst_case::f_min(3, p.kappa, p.cycles)?;
    let min = fid.iter().copied().fold(f64::INFINITY, f64::min);
    let bound_satisfied = match p.mode {
        ModeArg::PostselectTrivial if p.inject == "I" => (min >= bound).to_string(),
        _ => "n/a".into(),
    };
    Ok(Summary {
        d: p.d,
        kappa: p.kappa,
        cycles: p.cycles,
        mode: match p.mode {
            ModeArg::Sample => "sample".into(),
            ModeArg::PostselectTrivial => "postselect-trivial".into(),
        },
        seed: p.seed.map(|s| s.to_string()).unwrap_or_default(),
        trials: trajectories.len(),
        mean_fidelity: fid.iter().sum::<f64>() / n,
        min_fidelity: min,
        max_fidelity: fid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        logical_errors: errors,
        logical_error_rate: errors as f64 / n,
        mean_branch_probability: trajectories.iter().map(|t| t.probability).sum::<f64>() / n,
        f_min_bound: bound,
        bound_satisfied,
    })
}

fn simulate(run: &Run, p: SimulateParams, out_dir: &Option<PathBuf>) -> Result<bool> {
    let measurement = match p.mode {
        ModeArg::Sample => MeasurementMode::Sample { seed: p.seed },
        ModeArg::PostselectTrivial => MeasurementMode::PostselectTrivial,
    };
    let mut config = CycleConfig::new(p.kappa, p.cycles, measurement);
    config.d = p.d;
    config.injected_error = PauliString::parse(p.inject)?;
    config.record_fidelity = true;
    if p.trials == 0 {
        bail!("usage error: --trials must be at least 1");
    }
    let trajectories = run_trials(&config, p.trials, run.exec)?;
    let summary = summarize(&p, &trajectories)?;
    let ok = summary.bound_satisfied != "false";
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let traj = dir.join("trajectories.jsonl");
            let mut w = BufWriter::new(File::create(&traj)?);
            for (i, t) in trajectories.iter().enumerate() {
                let mut v = serde_json::to_value(t)?;
                v["trial"] = serde_json::json!(i);
                serde_json::to_writer(&mut w, &v)?;
                writeln!(w)?;
            }
            w.flush()?;
            let sum = dir.join("summary.csv");
            let mut c = csv::Writer::from_path(&sum)?;
            c.serialize(&summary)?;
            c.flush()?;
            let seeds = p.seed.filter(|_| p.mode == ModeArg::Sample).map(|base| SeedRule {
                base,
                trials: p.trials,
                rule: "base + trial",
            });
            run.manifest(&dir.join("manifest.json"), &p, seeds, &[traj, sum])?;
        }
        None => {
            let mut c = csv::Writer::from_writer(io::stdout().lock());
            c.serialize(&summary)?;
            c.flush()?;
        }
    }
    Ok(ok)
}

#[derive(Serialize)]
struct FitRecord {
    kappa: f64,
    m: usize,
    fit: Option<worst_case::PowerLawFit>,
    refused: Option<String>,
}

#[derive(Serialize)]
struct WorstCaseParamsOut<'a> {
    d_min: usize,
    d_max: usize,
    kappa: &'a [f64],
    m: &'a [usize],
    fit_from: usize,
    fit_to: usize,
    emit_plot: Option<PlotArg>,
}

fn gnuplot_script(kappas: &[f64], ms: &[usize]) -> String {
    let mut s = String::from(
        "# Log-log worst-case infidelity r = 1 - F_min versus d.\n\
         set datafile separator ','\n\
         set logscale xy\n\
         set xlabel 'd'\n\
         set ylabel 'r'\n\
         set key outside right\n\
         plot \\\n",
    );
    let mut curves = Vec::new();
    for k in kappas {
        for m in ms {
            curves.push(format!(
                "  'worst_case.csv' skip 1 using 1:(($2=={k} && $3=={m}) ? $7 : 1/0) with linespoints title 'κ={k}, m={m}'"
            ));
        }
    }
    s.push_str(&curves.join(", \\\n"));
    s.push('\n');
    s
}

#[allow(clippy::too_many_arguments)]
fn worst_case_cmd(
    run: &Run,
    d_min: usize,
    d_max: usize,
    kappa: &[f64],
    m: &[usize],
    fit_from: usize,
    fit_to: Option<usize>,
    emit_plot: Option<PlotArg>,
    out_dir: &Option<PathBuf>,
) -> Result<bool> {
    let ds = odd_range(d_min, d_max);
    let rows = sweep_grid(&ds, kappa, m, run.exec)?;
    let fit_to = fit_to.unwrap_or(d_max);
    let mut fits = Vec::new();
    for &k in kappa {
        for &mm in m {
            let curve: Vec<SweepRow> = rows.iter().filter(|r| r.kappa == k && r.m == mm).copied().collect();
            let (fit, refused) = match power_law_fit(&curve, fit_from, fit_to) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            fits.push(FitRecord { kappa: k, m: mm, fit, refused });
        }
    }
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let csv_path = dir.join("worst_case.csv");
            let mut w = csv::Writer::from_path(&csv_path)?;
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            let fit_path = dir.join("fit.json");
            write_json(&fit_path, &serde_json::to_value(&fits)?)?;
            let mut outputs = vec![csv_path, fit_path];
            if emit_plot.is_some() {
                let gp = dir.join("plot.gp");
                fs::write(&gp, gnuplot_script(kappa, m))?;
                outputs.push(gp);
            }
            let params = WorstCaseParamsOut { d_min, d_max, kappa, m, fit_from, fit_to, emit_plot };
            run.manifest(&dir.join("manifest.json"), params, None, &outputs)?;
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            drop(w);
            let mut e = io::stderr().lock();
            for f in &fits {
                match (&f.fit, &f.refused) {
                    (Some(fit), _) => writeln!(
                        e,
                        "fit κ={} m={}: slope {:.4}, intercept_log10 {:.4} over d∈[{}, {}]",
                        f.kappa, f.m, fit.slope, fit.intercept_log10, fit.window[0], fit.window[1]
                    )?,
                    (None, Some(why)) => writeln!(e, "fit κ={} m={} refused: {why}", f.kappa, f.m)?,
                    _ => {}
                }
            }
        }
    }
    Ok(true)
}

fn complex_fields(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [z.re.to_string(), z.im.to_string()],
        None => [String::new(), String::new()],
    }
}

fn write_kl_csv(table: &KlTable, w: Box<dyn Write>) -> Result<(usize, usize)> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record([
        "operator",
        "class",
        "i",
        "j",
        "value_re",
        "value_im",
        "epsilon_re",
        "epsilon_im",
        "leading_re",
        "leading_im",
        "scaled_re",
        "scaled_im",
        "expected",
        "matches_reference",
    ])?;
    let checks = table.check();
    let mut failed = 0;
    for e in &checks {
        if !e.matches {
            failed += 1;
        }
        let [vr, vi] = complex_fields(Some(e.entry.value));
        let [er, ei] = complex_fields(Some(e.entry.epsilon));
        let [lr, li] = complex_fields(e.entry.leading);
        let [sr, si] = complex_fields(e.scaled);
        c.write_record([
            e.entry.operator.clone(),
            e.entry.class.label().to_string(),
            e.entry.i.to_string(),
            e.entry.j.to_string(),
            vr,
            vi,
            er,
            ei,
            lr,
            li,
            sr,
            si,
            e.expected.map(|r| r.to_string()).unwrap_or_default(),
            e.matches.to_string(),
        ])?;
    }
    c.flush()?;
    Ok((checks.len(), failed))
}

fn kl_scan(run: &Run, kappa: f64, anchor: AnchorArg, out: &Option<PathBuf>) -> Result<bool> {
    let table = aqec::kl_scan(kappa, run.exec)?;
    let (total, failed) = write_kl_csv(&table, sink(out)?)?;
    let constant = table.anchor_constant();
    eprintln!(
        "{total} entries, {failed} outside tolerance; anchor constant {}",
        constant.map(|c| format!("{:.6}{:+.6}i", c.re, c.im)).unwrap_or_else(|| "n/a".into())
    );
    if let Some(p) = out {
        run.manifest(
            &sidecar(p),
            serde_json::json!({ "kappa": kappa, "anchor": anchor }),
            None,
            std::slice::from_ref(p),
        )?;
    }
    Ok(failed == 0)
}

fn dispatch(cli: Cli) -> Result<bool> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let name = match &cli.command {
        Command::GateFidelity { .. } => "gate-fidelity",
        Command::Deviation { .. } => "deviation",
        Command::Simulate { .. } => "simulate",
        Command::WorstCase { .. } => "worst-case",
        Command::KlScan { .. } => "kl-scan",
    };
    let run = Run { name, exec, started: Instant::now() };
    match cli.command {
        Command::GateFidelity { kappa, out } => gate_fidelity(&run, &kappa, &out),
        Command::Deviation { d, basis, k, order, kappa, json } => deviation(&run, d, basis, k, order, kappa, &json),
        Command::Simulate { d, kappa, cycles, mode, seed, trials, inject, out_dir } => {
            let p = SimulateParams { d, kappa, cycles, mode, seed, trials, inject: &inject };
            simulate(&run, p, &out_dir)
        }
        Command::WorstCase { d_min, d_max, kappa, m, fit_from, fit_to, emit_plot, out_dir } => {
            worst_case_cmd(&run, d_min, d_max, &kappa, &m, fit_from, fit_to, emit_plot, &out_dir)
        }
        Command::KlScan { kappa, anchor, out } => kl_scan(&run, kappa, anchor, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e)
            if e.chain()
                .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
