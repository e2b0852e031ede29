use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nof::gip::quantum_gip_success;
use nof::scalar::format_rational;
use nof::{
    build_quantum_gip, compile, correctness_exhaustive, correctness_sampled, extract_parity_referee, gip_eval, grolmusz,
    verify_theorem1, BitString, InputMatrix, NofProtocol, QuantumNofProtocol, QuantumSpec, Rational,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::separation::{self, separation_table};
use crate::sweep::{self, load_classical, parse_range, run_sweep, ProtocolSelector, SweepConfig, SweepMode};

#[derive(Parser, Debug)]
#[command(name = "nofsim", version, about = "Number-on-the-forehead protocol simulator")]
struct Cli {
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generalized inner product: direct evaluation and the two protocols.
    Gip {
        #[command(subcommand)]
        action: GipAction,
    },
    /// Run a classical simultaneous protocol on one input, or measure its success against GIP.
    RunClassical(RunClassicalArgs),
    /// Output distribution of a quantum protocol on one input.
    RunQuantum(RunQuantumArgs),
    /// Compile a classical protocol (even k) into a quantum one.
    Compile(CompileArgs),
    /// Compile and check the average success against 1/2 + delta / 2^{3C/2}.
    #[command(name = "verify-theorem1")]
    VerifyTheorem1(SpecArg),
    /// Success statistics over a grid of (k, n).
    Sweep(SweepArgs),
    /// Quantum GIP cost next to the cited classical lower bound.
    Separation(SeparationArgs),
}

#[derive(Subcommand, Debug)]
enum GipAction {
    Eval(InputArgs),
    Grolmusz(InputArgs),
    /// Odd k runs directly; even k pads the input with an all-ones row.
    Quantum(InputArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Matrix file: one row of 0/1 characters per player.
    #[arg(long, conflicts_with = "random")]
    matrix: Option<PathBuf>,
    /// Draw a uniform matrix instead.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SpecArg {
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args, Debug)]
struct RunClassicalArgs {
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Success against GIP over every input.
    #[arg(long, conflicts_with_all = ["matrix", "random", "samples"])]
    exhaustive: bool,
    /// Success against GIP over this many uniform inputs (seeded by --seed).
    #[arg(long, conflicts_with_all = ["matrix", "random"])]
    samples: Option<u64>,
}

#[derive(Args, Debug)]
struct RunQuantumArgs {
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Also verify exhaustively and write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// grolmusz, quantum-gip or compiled:<file>
    #[arg(long)]
    protocol: String,
    /// Inclusive range `a..b` or a single value.
    #[arg(long)]
    k: String,
    #[arg(long)]
    n: String,
    #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
    mode: Mode,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record wall time per row; the output is then no longer reproducible byte for byte.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SeparationArgs {
    /// Comma-separated sizes; each is moved to the nearest 2^{k-1} - 1 with k odd.
    #[arg(long, value_delimiter = ',', default_values_t = [3u64, 15, 255, 65535])]
    n: Vec<u64>,
    /// Sampled inputs per row when exhaustive checking is out of reach.
    #[arg(long, default_value_t = 64)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// Parse `argv` (program name first), run the command, and return the process exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = execute(&cli.command).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| HarnessError::io(path.display(), e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| HarnessError::io("stdout", e)),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.display(), e))
}

fn load_input(args: &InputArgs, shape: Option<(usize, usize)>) -> Result<InputMatrix> {
    let m = match (&args.matrix, args.random) {
        (Some(path), _) => read(path)?.parse::<InputMatrix>()?,
        (None, true) => {
            let (k, n) = match (args.k, args.n, shape) {
                (Some(k), Some(n), _) => (k, n),
                (None, None, Some(s)) => s,
                _ => return Err(HarnessError::Usage("--random needs --k and --n".into())),
            };
            InputMatrix::random(k, n, &mut ChaCha8Rng::seed_from_u64(args.seed))?
        }
        (None, false) => return Err(HarnessError::Usage("give --matrix FILE or --random".into())),
    };
    if let Some((k, n)) = shape {
        if (m.players(), m.width()) != (k, n) {
            return Err(HarnessError::Usage(format!(
                "input is {}x{}, protocol expects {k}x{n}",
                m.players(),
                m.width()
            )));
        }
    }
    Ok(m)
}

fn pretty(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("json value serializes");
    s.push('\n');
    s
}

fn exact(p: &Rational) -> Value {
    json!({ "exact": format_rational(p), "float": nof::Probability::as_f64(p) })
}

fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Gip { action } => gip(action),
        Command::RunClassical(a) => run_classical(a),
        Command::RunQuantum(a) => run_quantum(a),
        Command::Compile(a) => compile_cmd(a),
        Command::VerifyTheorem1(a) => verify(&a.spec),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Separation(a) => {
            let rows = separation_table(&a.n, a.samples, a.seed)?;
            match a.format {
                Format::Json => Ok(serde_json::to_string_pretty(&rows)? + "\n"),
                Format::Csv => {
                    let mut buf = Vec::new();
                    separation::write_csv(&rows, &mut buf)?;
                    Ok(String::from_utf8(buf).expect("csv is utf-8"))
                }
            }
        }
    }
}

fn gip(action: &GipAction) -> Result<String> {
    match action {
        GipAction::Eval(a) => Ok(format!("{}\n", u8::from(gip_eval(&load_input(a, None)?)))),
        GipAction::Grolmusz(a) => {
            let run = grolmusz(&load_input(a, None)?)?;
            let blocks: Vec<Value> = run
                .transcript
                .blocks
                .iter()
                .map(|b| {
                    let bits: BitString = b.bits.iter().copied().collect();
                    json!({ "missing": b.missing.to_string(), "flag": b.flag, "bits": bits.to_string() })
                })
                .collect();
            Ok(pretty(json!({ "output": u8::from(run.output), "cost": run.cost, "transcript": blocks })))
        }
        GipAction::Quantum(a) => {
            let m = load_input(a, None)?;
            let players = m.players() | 1;
            let m = m.pad_to_k(players)?;
            let q = build_quantum_gip::<f64>(players, m.width())?;
            let d = q.run_quantum_exact(&m, 1)?;
            let output = d.one > d.zero;
            Ok(pretty(json!({
                "output": u8::from(output),
                "probability_correct": exact(&quantum_gip_success(&q, &m)?),
                "cost": q.qcost(),
                "transcript": {
                    "players": players,
                    "preamble": q.preamble_message(&m)?.to_string(),
                    "distribution": { "0": exact(&d.zero), "1": exact(&d.one) },
                },
            })))
        }
    }
}

fn run_classical(a: &RunClassicalArgs) -> Result<String> {
    let proto = load_classical(&a.spec)?;
    let report = if a.exhaustive {
        Some(correctness_exhaustive::<Rational, _>(&proto, gip_eval)?)
    } else if let Some(samples) = a.samples {
        Some(correctness_sampled::<Rational, _>(&proto, gip_eval, samples, a.input.seed)?)
    } else {
        None
    };
    if let Some(r) = report {
        return Ok(pretty(json!({
            "target": "gip",
            "mode": r.mode,
            "inputs": r.inputs,
            "average_case": exact(&r.average_case),
            "worst_case": exact(&r.worst_case),
            "delta": exact(&r.delta()),
        })));
    }
    let m = load_input(&a.input, Some((proto.players(), proto.input_width())))?;
    let run = proto.run(&m)?;
    let answers: Vec<String> = run.transcript.iter().map(|b| b.to_string()).collect();
    Ok(pretty(json!({ "output": u8::from(run.output), "cost": proto.cost(), "transcript": answers })))
}

fn run_quantum(a: &RunQuantumArgs) -> Result<String> {
    let spec = QuantumSpec::from_json(&read(&a.spec)?)?;
    let q = QuantumNofProtocol::<f64>::from_spec(&spec)?;
    let m = load_input(&a.input, Some((spec.k, spec.n)))?;
    let float = q.run_quantum(&m)?;
    let mut out = json!({
        "distribution": { "0": float.zero, "1": float.one },
        "cost": q.qcost(),
        "gip": u8::from(gip_eval(&m)),
    });
    if let Some(bits) = q.exact_resolution() {
        let d = q.run_quantum_exact(&m, bits)?;
        out["exact"] = json!({ "0": format_rational(&d.zero), "1": format_rational(&d.one) });
    }
    Ok(pretty(out))
}

fn compile_cmd(a: &CompileArgs) -> Result<String> {
    let src = load_classical(&a.spec)?;
    let extraction = extract_parity_referee(&src, gip_eval)?;
    let compiled = compile::<f64>(&src, &extraction.parity)?;
    if let Some(path) = &a.report {
        std::fs::write(path, verify(&a.spec)?).map_err(|e| HarnessError::io(path.display(), e))?;
    }
    Ok(compiled.quantum().to_spec()?.to_json() + "\n")
}

fn verify(spec: &Path) -> Result<String> {
    let src = load_classical(spec)?;
    let r = verify_theorem1(&src, gip_eval)?;
    Ok(pretty(json!({
        "k": r.k,
        "n": r.n,
        "C": r.cost,
        "answer_qubits": r.answer_qubits,
        "classical_success": format_rational(&r.classical_success),
        "delta": format_rational(&r.delta),
        "correlation": format_rational(&r.correlation),
        "bound": r.bound.to_string(),
        "bound_float": r.bound.to_f64(),
        "measured": format_rational(&r.measured),
        "measured_float": nof::Probability::as_f64(&r.measured),
        "worst": format_rational(&r.worst),
        "holds": r.holds,
    })))
}

fn sweep_cmd(a: &SweepArgs) -> Result<String> {
    let mode = match (a.mode, a.samples) {
        (Mode::Exhaustive, None) => SweepMode::Exhaustive,
        (Mode::Exhaustive, Some(_)) => return Err(HarnessError::Usage("--samples needs --mode sampled".into())),
        (Mode::Sampled, Some(samples)) => SweepMode::Sampled { samples, seed: a.seed },
        (Mode::Sampled, None) => return Err(HarnessError::Usage("--mode sampled needs --samples".into())),
    };
    let cfg = SweepConfig {
        k: parse_range(&a.k)?,
        n: parse_range(&a.n)?,
        protocol: a.protocol.parse::<ProtocolSelector>()?,
        mode,
        timing: a.timing,
    };
    let rows = run_sweep(&cfg)?;
    match a.format {
        Format::Json => Ok(sweep::to_json(&rows) + "\n"),
        Format::Csv => {
            let mut buf = Vec::new();
            sweep::write_csv(&rows, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv is utf-8"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nof::{AnswerMap, ForeheadView, Referee, SimultaneousProtocol};

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("nofsim").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn file(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_owned()
    }

    /// k = 2: each player forwards the first `w` bits of the row it sees.
    fn forwarding_spec(n: usize, w: usize) -> String {
        let maps = (0..2)
            .map(|owner| AnswerMap::new(w, move |v: &ForeheadView| (0..w).map(|c| v.bit(1 - owner, c).unwrap()).collect()))
            .collect();
        let referee = Referee::function(move |a: &BitString| (0..w).filter(|&c| a.get(c) && a.get(w + c)).count() % 2 == 1);
        SimultaneousProtocol::new(n, maps, referee).unwrap().to_spec().unwrap().to_json()
    }

    #[test]
    fn gip_eval_prints_bit() {
        let dir = tempfile::tempdir().unwrap();
        let ones = file(&dir, "ones3x3.txt", "111\n111\n111\n");
        assert_eq!(run(&["gip", "eval", "--matrix", &ones]), (0, "1\n".into(), String::new()));
        let m = file(&dir, "m.txt", "110\n111\n111\n");
        assert_eq!(run(&["gip", "eval", "--matrix", &m]).1, "0\n");
    }

    #[test]
    fn gip_protocols_agree_with_eval() {
        for seed in 0..10 {
            let s = seed.to_string();
            let base = ["--random", "--k", "4", "--n", "9", "--seed", s.as_str()];
            let eval = run(&[&["gip", "eval"][..], &base].concat()).1;
            let g: Value = serde_json::from_str(&run(&[&["gip", "grolmusz"][..], &base].concat()).1).unwrap();
            let q: Value = serde_json::from_str(&run(&[&["gip", "quantum"][..], &base].concat()).1).unwrap();
            assert_eq!(g["output"].to_string() + "\n", eval);
            assert_eq!(q["output"].to_string() + "\n", eval);
            assert_eq!(g["cost"], 7 * 2);
            assert_eq!(q["probability_correct"]["exact"], "1");
            assert_eq!(q["cost"]["message_units"], 9);
        }
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&["bogus"]).0, 1);
        assert_eq!(run(&["gip", "eval"]).0, 1);
        assert_eq!(run(&["gip", "eval", "--matrix", "/nonexistent/m.txt"]).0, 1);
        let (code, _, err) = run(&["sweep", "--protocol", "grolmusz", "--k", "5", "--n", "5"]);
        assert_eq!(code, 2);
        assert!(err.contains("\"exit_code\":2"), "{err}");
        let bad = file(&dir, "bad.txt", "10\n1x\n");
        assert_eq!(run(&["gip", "eval", "--matrix", &bad]).0, 3);
        let spec = file(&dir, "p.json", "{\"k\": 2,");
        assert_eq!(run(&["verify-theorem1", "--spec", &spec]).0, 3);
        assert_eq!(run(&["run-quantum", "--spec", &spec, "--random"]).0, 3);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn grolmusz_sweep_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let out = out.to_str().unwrap();
        let args = ["sweep", "--protocol", "grolmusz", "--k", "3..5", "--n", "3..15", "--mode", "sampled", "--samples", "1000", "--seed", "7", "--out", out];
        assert_eq!(run(&args).0, 0);
        let first = std::fs::read(out).unwrap();
        let rows = crate::sweep::read_csv(&first[..]).unwrap();
        assert_eq!(rows.len(), 3 * 13);
        assert!(rows.iter().all(|r| r.avg_success == 1.0 && r.avg_success_exact == "1"));
        assert_eq!(run(&args).0, 0);
        assert_eq!(std::fs::read(out).unwrap(), first);
    }

    #[test]
    fn timing_is_opt_in() {
        let base = ["sweep", "--protocol", "grolmusz", "--k", "3", "--n", "3", "--format", "json"];
        let rows = crate::sweep::from_json(&run(&base).1).unwrap();
        assert_eq!(rows[0].wall_ms, None);
        let rows = crate::sweep::from_json(&run(&[&base[..], &["--timing"]].concat()).1).unwrap();
        assert!(rows[0].wall_ms.is_some());
    }

    #[test]
    fn verify_and_compile() {
        let dir = tempfile::tempdir().unwrap();
        let spec = file(&dir, "p.json", &forwarding_spec(3, 2));
        let (code, out, err) = run(&["verify-theorem1", "--spec", &spec]);
        assert_eq!(code, 0, "{err}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["C"], 4);
        assert_eq!(v["answer_qubits"], 4);
        assert_eq!(v["holds"], true);
        // Two of three columns forwarded: right unless column 3 is all ones, i.e. 3/4 of the time.
        assert_eq!(v["delta"], "1/4");
        assert_eq!(v["bound"], "129/256");
        assert!(v["measured_float"].as_f64().unwrap() >= v["bound_float"].as_f64().unwrap());

        let report = dir.path().join("report.json");
        let quantum = dir.path().join("q.json");
        let (code, _, err) = run(&["compile", "--spec", &spec, "--report", report.to_str().unwrap(), "--out", quantum.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r, v);
        let q = quantum.to_str().unwrap();
        let (code, out, err) = run(&["run-quantum", "--spec", q, "--random", "--seed", "4"]);
        assert_eq!(code, 0, "{err}");
        let d: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(d["cost"]["answer_qubits"], 4);
        assert!(d["exact"]["0"].is_string());

        let (code, out, _) = run(&["sweep", "--protocol", &format!("compiled:{spec}"), "--k", "2", "--n", "3"]);
        assert_eq!(code, 0);
        let rows = crate::sweep::read_csv(out.as_bytes()).unwrap();
        assert_eq!(rows[0].bound_exact, "129/256");
        assert_eq!(rows[0].avg_success_exact, v["measured"].as_str().unwrap());
    }

    #[test]
    fn run_classical_modes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = file(&dir, "p.json", &forwarding_spec(2, 2));
        let v: Value = serde_json::from_str(&run(&["run-classical", "--spec", &spec, "--exhaustive"]).1).unwrap();
        assert_eq!(v["average_case"]["exact"], "1");
        let m = file(&dir, "m.txt", "11\n11\n");
        let v: Value = serde_json::from_str(&run(&["run-classical", "--spec", &spec, "--matrix", &m]).1).unwrap();
        assert_eq!(v["output"], 0);
        assert_eq!(v["cost"], 4);
        assert_eq!(v["transcript"], json!(["11", "11"]));
        let wrong = file(&dir, "w.txt", "111\n111\n");
        assert_eq!(run(&["run-classical", "--spec", &spec, "--matrix", &wrong]).0, 1);
    }

    #[test]
    fn odd_k_compile_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let maps = (0..3).map(|_| AnswerMap::constant(BitString::from_u64(1, 1))).collect();
        let p = SimultaneousProtocol::new(1, maps, Referee::Table(vec![false; 8])).unwrap();
        let spec = file(&dir, "p.json", &p.to_spec().unwrap().to_json());
        assert_eq!(run(&["compile", "--spec", &spec]).0, 1);
    }

    #[test]
    fn separation_defaults() {
        let (code, out, _) = run(&["separation", "--format", "json"]);
        assert_eq!(code, 0);
        let rows: Vec<crate::SeparationRow> = serde_json::from_str(&out).unwrap();
        let costs: Vec<usize> = rows.iter().map(|r| r.quantum_cost).collect();
        assert_eq!(costs, [5, 9, 17, 33]);
        let (_, csv, _) = run(&["separation", "--n", "3,15"]);
        assert!(csv.lines().next().unwrap().contains("cited lower bound"));
        assert_eq!(csv.lines().count(), 3);
    }
}
