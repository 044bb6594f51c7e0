//! The `kafw` command-line front-end.
//!
//! Subcommands write one JSON object per line (the `schedule` subcommand
//! without `--key` prints a schedule file instead). [`run`] returns the
//! process exit code: 0 on success, 2 when a precondition of the requested
//! experiment fails (for example no weak offset exists), 1 on any other
//! error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kafw::attacks::{AttackDistinguisher, AttackKind, AttackOptions, BirthdayParams, DeltaChoice, PlaintextChoice};
use kafw::auditor::{audit, check_definition1, AuditCheck, AuditReport, DEFAULT_THRESHOLD};
use kafw::block::Block;
use kafw::equivalence::{check_equivalence, EquivalencePair};
use kafw::feistel::{CipherInstance, Construction, RoundFunctionSet};
use kafw::gf2::parse_hex;
use kafw::oracles::OracleKind;
use kafw::rkagame::{
    bound_formula, estimate_advantage, run_trial, run_trial_with_transcript, trial_seed, AdvantageEstimate, Theorem,
    TrialRecord, WorldEstimate, WorldKind, WorldSpec,
};
use kafw::schedule_file::{derived_keys, parse_schedule_file, render_schedule_file};
use kafw::schedules::{builtin, BuiltinParams, BUILTIN_NAMES};
use kafw::{DomainParams, Word};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;

/// Environment variable holding the default seed; `--seed` overrides it.
pub const SEED_ENV: &str = "KAFW_SEED";

#[derive(Debug)]
enum CliError {
    Lib(kafw::Error),
    Io(io::Error),
    Usage(String),
}

impl From<kafw::Error> for CliError {
    fn from(e: kafw::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(s) => write!(f, "{s}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_precondition() => EXIT_PRECONDITION,
            _ => EXIT_ERROR,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "kafw", version, about = "Key-alternating Feistel cipher experiments")]
struct Cli {
    /// Write records to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encrypt or decrypt blocks under a schedule.
    Encrypt(EncryptArgs),
    /// Render a schedule as a schedule file or show its sub-keys.
    #[command(subcommand)]
    Schedule(ScheduleCmd),
    /// Exhaustively audit a key schedule.
    Audit(AuditArgs),
    /// Run an attack for a number of trials in one world.
    Attack(AttackArgs),
    /// Estimate an attack's advantage over both worlds.
    Advantage(AdvantageArgs),
    /// Check that two cipher descriptions agree on every key and block.
    Equivalence(EquivalenceArgs),
    /// Evaluate a published advantage bound.
    Bound(BoundArgs),
}

#[derive(Args, Debug, Clone)]
struct ScheduleArgs {
    /// Builtin schedule name or path to a schedule file.
    #[arg(long, short = 's')]
    schedule: String,
    /// Half-block width for builtin schedules.
    #[arg(long, default_value_t = 8)]
    n: u32,
    /// Expected round count; also sets the length of `identity_bad`.
    #[arg(long)]
    rounds: Option<usize>,
    /// Construction to run a builtin as; `kaf` needs a schedule without whitening.
    #[arg(long, value_enum)]
    construction: Option<ConstructionName>,
    /// First field multiplier of the nonlinear builtins (hex).
    #[arg(long, default_value = "2", value_parser = parse_word_arg)]
    m1: Word,
    /// Last field multiplier of the nonlinear builtins (hex).
    #[arg(long, default_value = "3", value_parser = parse_word_arg)]
    m4: Word,
}

#[derive(Args, Debug, Clone)]
struct FunctionArgs {
    /// Base seed.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Ideal object behind the round functions [default: permutation, or
    /// function for `encrypt`, whose values do not depend on query order].
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    /// Independent function per round instead of one shared function.
    #[arg(long)]
    per_round: bool,
}

#[derive(Args, Debug)]
struct EncryptArgs {
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    functions: FunctionArgs,
    /// Master key (hex).
    #[arg(long, value_parser = parse_hex_arg)]
    key: u64,
    /// Blocks to process (hex, left half first).
    #[arg(value_parser = parse_hex_arg, required_unless_present = "block")]
    blocks: Vec<u64>,
    /// A block to process; may be repeated and combines with positional blocks.
    #[arg(long, value_parser = parse_hex_arg)]
    block: Vec<u64>,
    /// Decrypt instead of encrypt.
    #[arg(long)]
    decrypt: bool,
    /// Include per-round intermediate values.
    #[arg(long, conflicts_with = "decrypt")]
    trace: bool,
}

#[derive(Subcommand, Debug)]
enum ScheduleCmd {
    /// Print the sub-keys derived from master keys.
    Show {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Master key (hex); may be repeated.
        #[arg(long, required = true, value_parser = parse_hex_arg)]
        key: Vec<u64>,
    },
    /// Print the schedule in schedule-file form.
    Render {
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, value_enum)]
    check: CheckArg,
    /// Count threshold for the four-round checks.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u64,
    /// Human-readable report instead of a JSON record.
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug, Clone)]
struct AttackParams {
    /// Weak offset: `lowest`, `random` or a hex value.
    #[arg(long, default_value = "lowest")]
    delta: String,
    /// Base plaintext: `zero`, `random` or a hex block.
    #[arg(long, default_value = "zero")]
    plaintext: String,
    /// Related-key offsets queried by the birthday attack.
    #[arg(long)]
    offsets: Option<u64>,
    /// Offline key guesses of the birthday attack.
    #[arg(long)]
    guesses: Option<u64>,
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Attack to run.
    #[arg(long, value_enum)]
    name: AttackArg,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    functions: FunctionArgs,
    #[command(flatten)]
    params: AttackParams,
    #[arg(long, value_enum, default_value_t = WorldArg::Real)]
    world: WorldArg,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Also emit every oracle query of every trial.
    #[arg(long)]
    transcript: bool,
}

#[derive(Args, Debug)]
struct AdvantageArgs {
    /// Attack to measure.
    #[arg(long, value_enum)]
    attack: AttackArg,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    functions: FunctionArgs,
    #[command(flatten)]
    params: AttackParams,
    /// Trials per world.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Also emit one record per trial.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct EquivalenceArgs {
    #[arg(long, value_enum)]
    pair: PairArg,
    #[arg(long, default_value_t = 4)]
    n: u32,
    #[arg(long, default_value_t = 4)]
    rounds: usize,
    /// First seed.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to check.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Theorem number: 1, 2, 5 or 6.
    #[arg(long)]
    theorem: u32,
    #[arg(long)]
    qf: u64,
    #[arg(long)]
    qe: u64,
    #[arg(long, default_value_t = 8)]
    n: u32,
    /// δ1·N, δ2·N, δ3·N as counts, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "schedule")]
    deltas: Option<Vec<u64>>,
    /// Measure the counts from a four-round schedule instead.
    #[arg(long)]
    schedule: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConstructionName {
    Kafw,
    Kaf,
    Kafv,
    Lucifer,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleArg {
    Function,
    Permutation,
}

impl From<OracleArg> for OracleKind {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::Function => OracleKind::Function,
            OracleArg::Permutation => OracleKind::Permutation,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckArg {
    Def1,
    Def3,
    Cor1,
    Cor2,
}

impl From<CheckArg> for AuditCheck {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Def1 => AuditCheck::Def1,
            CheckArg::Def3 => AuditCheck::Def3,
            CheckArg::Cor1 => AuditCheck::Cor1,
            CheckArg::Cor2 => AuditCheck::Cor2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttackArg {
    Thm3,
    Thm4,
    Appb5,
    Appbany,
    Birthday,
    Probe,
}

impl From<AttackArg> for AttackKind {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::Thm3 => AttackKind::Thm3,
            AttackArg::Thm4 => AttackKind::Thm4,
            AttackArg::Appb5 => AttackKind::Appb5,
            AttackArg::Appbany => AttackKind::AppbAny,
            AttackArg::Birthday => AttackKind::Birthday,
            AttackArg::Probe => AttackKind::Probe,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WorldArg {
    Real,
    Ideal,
}

impl From<WorldArg> for WorldKind {
    fn from(w: WorldArg) -> Self {
        match w {
            WorldArg::Real => WorldKind::Real,
            WorldArg::Ideal => WorldKind::Ideal,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairArg {
    KafvKafw,
    LuciferSandwich,
    KacCollapse,
}

impl From<PairArg> for EquivalencePair {
    fn from(p: PairArg) -> Self {
        match p {
            PairArg::KafvKafw => EquivalencePair::KafvKafw,
            PairArg::LuciferSandwich => EquivalencePair::LuciferSandwich,
            PairArg::KacCollapse => EquivalencePair::KacCollapse,
        }
    }
}

fn parse_hex_arg(s: &str) -> Result<u64, String> {
    parse_hex(s).ok_or_else(|| format!("`{s}` is not a hex value"))
}

fn parse_word_arg(s: &str) -> Result<Word, String> {
    let v = parse_hex_arg(s)?;
    Word::try_from(v).map_err(|_| format!("`{s}` does not fit in 32 bits"))
}

/// Text appended to `--help`: the builtin schedule names.
pub fn builtin_help() -> String {
    format!(
        "Builtin schedules (for --schedule): {}.\nAny other --schedule value is read as a schedule file.",
        BUILTIN_NAMES.join(", ")
    )
}

fn command() -> clap::Command {
    let help = builtin_help();
    let mut cmd = Cli::command().after_help(help.clone());
    for name in ["encrypt", "schedule", "audit", "attack", "advantage", "bound"] {
        let help = help.clone();
        cmd = cmd.mut_subcommand(name, |c| {
            let c = c.after_help(help.clone());
            if name == "schedule" {
                c.mut_subcommand("show", |s| s.after_help(help.clone()))
                    .mut_subcommand("render", |s| s.after_help(help))
            } else {
                c
            }
        });
    }
    cmd
}

struct Loaded {
    source: String,
    params: DomainParams,
    construction: Construction,
}

fn load_schedule(args: &ScheduleArgs) -> CliResult<Loaded> {
    let (params, construction) = if Path::new(&args.schedule).is_file() {
        let text = fs::read_to_string(&args.schedule)?;
        let f = parse_schedule_file(&text)?;
        (f.params, f.construction)
    } else {
        let p = DomainParams::new(args.n)?;
        let bp = BuiltinParams {
            m1: args.m1,
            m4: args.m4,
            rounds: args.rounds.unwrap_or(BuiltinParams::default().rounds),
        };
        let s = builtin(&args.schedule, &p, &bp).map_err(|e| match e {
            kafw::Error::UnknownName(name) => usage(format!(
                "`{name}` is neither a builtin schedule nor a readable file; builtins are {}",
                BUILTIN_NAMES.join(", ")
            )),
            other => other.into(),
        })?;
        (p, Construction::Kafw(s))
    };
    let construction = match (args.construction, construction) {
        (None, c) => c,
        (Some(ConstructionName::Kaf), Construction::Kafw(s)) => {
            if s.has_whitening() {
                return Err(usage("the schedule has whitening keys and cannot run as kaf"));
            }
            Construction::Kaf(s.rounds)
        }
        (Some(ConstructionName::Kafw), c @ (Construction::Kaf(_) | Construction::Kafv(_))) => {
            Construction::Kafw(c.to_kafw()?)
        }
        (Some(want), c) => {
            let name = format!("{want:?}").to_lowercase();
            if name != c.name() {
                return Err(usage(format!("a {} schedule cannot run as {name}", c.name())));
            }
            c
        }
    };
    if let Some(t) = args.rounds {
        if t != construction.rounds() {
            return Err(usage(format!("--rounds {t} given but the schedule has {} rounds", construction.rounds())));
        }
    }
    Ok(Loaded {
        source: args.schedule.clone(),
        params,
        construction,
    })
}

fn attack_options(params: &AttackParams, p: &DomainParams) -> CliResult<AttackOptions> {
    let delta = match params.delta.as_str() {
        "lowest" => DeltaChoice::Lowest,
        "random" => DeltaChoice::Random,
        s => DeltaChoice::Fixed(p.check_word(parse_hex_arg(s).map_err(usage)?)?),
    };
    let plaintext = match params.plaintext.as_str() {
        "zero" => PlaintextChoice::Zero,
        "random" => PlaintextChoice::Random,
        s => PlaintextChoice::Fixed(block_arg(p, parse_hex_arg(s).map_err(usage)?)?),
    };
    let birthday = match (params.offsets, params.guesses) {
        (None, None) => None,
        (offsets, guesses) => {
            let d = BirthdayParams::default_for(p);
            Some(BirthdayParams::new(offsets.unwrap_or(d.offsets), guesses.unwrap_or(d.guesses)))
        }
    };
    Ok(AttackOptions {
        delta,
        plaintext,
        birthday,
    })
}

fn block_arg(p: &DomainParams, v: u64) -> CliResult<Block> {
    if 2 * p.n() < 64 && v >> (2 * p.n()) != 0 {
        return Err(kafw::Error::ValueOutOfRange {
            value: v,
            bits: 2 * p.n(),
        }
        .into());
    }
    Ok(Block::unpack(v, p.n()))
}

fn emit(out: &mut dyn Write, v: &Value) -> CliResult<()> {
    writeln!(out, "{v}")?;
    Ok(())
}

impl FunctionArgs {
    fn oracle_or(&self, default: OracleArg) -> OracleKind {
        self.oracle.unwrap_or(default).into()
    }
}

fn function_fields(f: &FunctionArgs, oracle: OracleKind) -> Value {
    json!({
        "seed": f.seed,
        "oracle": oracle,
        "per_round": f.per_round,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn schedule_fields(l: &Loaded) -> Value {
    json!({
        "schedule": l.source,
        "construction": l.construction.name(),
        "n": l.params.n(),
        "rounds": l.construction.rounds(),
    })
}

fn cmd_encrypt(a: &EncryptArgs, out: &mut dyn Write) -> CliResult<()> {
    let l = load_schedule(&a.schedule)?;
    let p = l.params;
    let key = p.check_word(a.key)?;
    let oracle = a.functions.oracle_or(OracleArg::Function);
    let fs = RoundFunctionSet::sample(
        oracle,
        a.functions.per_round,
        l.construction.rounds(),
        a.functions.seed,
        p.n(),
    );
    let mut cipher = CipherInstance::new(p, l.construction.clone(), fs)?;
    let header = merge(schedule_fields(&l), function_fields(&a.functions, oracle));
    for (index, &v) in a.block.iter().chain(&a.blocks).enumerate() {
        let input = block_arg(&p, v)?;
        let mut record = json!({
            "kind": if a.decrypt { "decrypt" } else { "encrypt" },
            "index": index,
            "key": p.hex_word(key),
            "input": input.to_hex(&p),
        });
        if a.trace {
            let t = cipher.encrypt_traced(key, input)?;
            let rounds: Vec<Value> = t
                .rounds
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    json!({
                        "round": i + 1,
                        "input": p.hex_word(r.input),
                        "output": p.hex_word(r.output),
                        "state": r.state.to_hex(&p),
                    })
                })
                .collect();
            record = merge(record, json!({ "output": t.ciphertext.to_hex(&p), "trace": rounds }));
        } else {
            let o = if a.decrypt {
                cipher.decrypt(key, input)
            } else {
                cipher.encrypt(key, input)
            };
            record = merge(record, json!({ "output": o.to_hex(&p) }));
        }
        emit(out, &merge(header.clone(), record))?;
    }
    Ok(())
}

fn cmd_schedule(a: &ScheduleCmd, out: &mut dyn Write) -> CliResult<()> {
    match a {
        ScheduleCmd::Render { schedule } => {
            let l = load_schedule(schedule)?;
            write!(out, "{}", render_schedule_file(&l.params, &l.construction))?;
        }
        ScheduleCmd::Show { schedule, key } => {
            let l = load_schedule(schedule)?;
            let p = l.params;
            for &k in key {
                let key = p.check_word(k)?;
                let subkeys: serde_json::Map<String, Value> = derived_keys(&p, &l.construction, key)
                    .into_iter()
                    .map(|(name, v)| (name, Value::String(p.hex_word(v))))
                    .collect();
                let record = json!({ "kind": "subkeys", "key": p.hex_word(key), "subkeys": subkeys });
                emit(out, &merge(schedule_fields(&l), record))?;
            }
        }
    }
    Ok(())
}

fn audit_record(p: &DomainParams, r: &AuditReport) -> Value {
    let conditions: Vec<Value> = r
        .matrix_conditions
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "invertible": c.invertible,
                "witness": c.witness.map(|w| p.hex_word(w)),
            })
        })
        .collect();
    let counts = r.counts.map(|c| {
        json!({
            "delta1": c.delta1(),
            "delta2": c.delta2(),
            "delta3": c.delta3(),
            "delta1_first": c.delta1_first,
            "delta1_last": c.delta1_last,
            "delta2_first": c.delta2_first,
            "delta2_last": c.delta2_last,
            "domain": p.size(),
        })
    });
    json!({
        "kind": "audit",
        "check": r.check.as_str(),
        "audited_rounds": r.rounds,
        "counts": counts,
        "threshold": r.threshold,
        "matrix_conditions": conditions,
        "verdict": if r.passed { "pass" } else { "fail" },
    })
}

fn cmd_audit(a: &AuditArgs, out: &mut dyn Write) -> CliResult<()> {
    let l = load_schedule(&a.schedule)?;
    let r = audit(&l.params, &l.construction, a.check.into(), a.threshold)?;
    if a.text {
        writeln!(out, "{r}")?;
        return Ok(());
    }
    emit(out, &merge(schedule_fields(&l), audit_record(&l.params, &r)))
}

fn spec(l: &Loaded, f: &FunctionArgs) -> WorldSpec {
    WorldSpec::new(l.params, l.construction.clone(), f.oracle_or(OracleArg::Permutation), f.per_round)
}

fn trial_record(name: &str, index: u64, base_seed: u64, r: &TrialRecord) -> Value {
    json!({
        "kind": "trial",
        "attack": name,
        "world": r.world.as_str(),
        "index": index,
        "base_seed": base_seed,
        "trial_seed": r.seed,
        "output": u8::from(r.output),
        "rk_queries": r.rk_queries,
        "f_queries": r.f_queries,
    })
}

fn cmd_attack(a: &AttackArgs, out: &mut dyn Write) -> CliResult<()> {
    let l = load_schedule(&a.schedule)?;
    let kind: AttackKind = a.name.into();
    let d = AttackDistinguisher::new(kind, l.params, l.construction.clone(), attack_options(&a.params, &l.params)?)?;
    let spec = spec(&l, &a.functions);
    let world: WorldKind = a.world.into();
    let header = merge(schedule_fields(&l), function_fields(&a.functions, a.functions.oracle_or(OracleArg::Permutation)));
    let mut ones = 0;
    for i in 0..a.trials {
        let seed = trial_seed(a.functions.seed, world, i);
        let r = if a.transcript {
            let (r, transcript) = run_trial_with_transcript(&d, &spec, world, seed)?;
            for (q, rec) in transcript.iter().enumerate() {
                let line = serde_json::to_value(rec).expect("transcript records serialize");
                emit(out, &merge(line, json!({ "trial": i, "query": q })))?;
            }
            r
        } else {
            run_trial(&d, &spec, world, seed)?
        };
        ones += u64::from(r.output);
        emit(out, &merge(header.clone(), trial_record(kind.as_str(), i, a.functions.seed, &r)))?;
    }
    let summary = json!({
        "kind": "summary",
        "attack": kind.as_str(),
        "world": world.as_str(),
        "trials": a.trials,
        "ones": ones,
        "frequency": if a.trials == 0 { 0.0 } else { ones as f64 / a.trials as f64 },
    });
    emit(out, &merge(header, summary))
}

fn aggregate(world: WorldKind, records: &[TrialRecord]) -> WorldEstimate {
    let trials = records.len() as u64;
    WorldEstimate {
        world,
        trials,
        ones: records.iter().filter(|r| r.output).count() as u64,
        mean_rk_queries: records.iter().map(|r| r.rk_queries).sum::<u64>() as f64 / trials as f64,
        mean_f_queries: records.iter().map(|r| r.f_queries).sum::<u64>() as f64 / trials as f64,
        max_rk_queries: records.iter().map(|r| r.rk_queries).max().unwrap_or(0),
    }
}

fn cmd_advantage(a: &AdvantageArgs, out: &mut dyn Write) -> CliResult<()> {
    let l = load_schedule(&a.schedule)?;
    let kind: AttackKind = a.attack.into();
    let d = AttackDistinguisher::new(kind, l.params, l.construction.clone(), attack_options(&a.params, &l.params)?)?;
    let spec = spec(&l, &a.functions);
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let header = merge(schedule_fields(&l), function_fields(&a.functions, a.functions.oracle_or(OracleArg::Permutation)));
    let est: AdvantageEstimate = if a.verbose {
        let mut worlds = Vec::new();
        for world in [WorldKind::Real, WorldKind::Ideal] {
            let mut records = Vec::new();
            for i in 0..a.trials {
                let r = run_trial(&d, &spec, world, trial_seed(a.functions.seed, world, i))?;
                emit(out, &merge(header.clone(), trial_record(kind.as_str(), i, a.functions.seed, &r)))?;
                records.push(r);
            }
            worlds.push(aggregate(world, &records));
        }
        AdvantageEstimate::from_worlds(&worlds[0], &worlds[1])
    } else {
        estimate_advantage(&d, &spec, a.trials, a.functions.seed)?
    };
    let summary = json!({
        "kind": "advantage",
        "attack": kind.as_str(),
        "trials": a.trials,
        "p_real": est.p_real,
        "p_ideal": est.p_ideal,
        "advantage": est.advantage,
        "ci_halfwidth": est.ci_halfwidth,
        "mean_rk_queries": est.mean_rk_queries,
        "mean_f_queries": est.mean_f_queries,
        "note": "measured for one fixed distinguisher: a lower bound on insecurity, not an upper bound",
    });
    emit(out, &merge(header, summary))
}

fn cmd_equivalence(a: &EquivalenceArgs, out: &mut dyn Write) -> CliResult<()> {
    let p = DomainParams::new(a.n)?;
    let pair: EquivalencePair = a.pair.into();
    let mut mismatches = 0;
    for seed in a.seed..a.seed.saturating_add(a.seeds.max(1)) {
        let r = check_equivalence(pair, &p, a.rounds, seed)?;
        mismatches += r.mismatches;
        let first = r.first_mismatch.map(|(k, w)| json!({ "key": p.hex_word(k), "block": w.to_hex(&p) }));
        emit(
            out,
            &json!({
                "kind": "equivalence",
                "pair": pair.as_str(),
                "n": r.n,
                "rounds": r.rounds,
                "seed": r.seed,
                "cases": r.cases,
                "mismatches": r.mismatches,
                "first_mismatch": first,
                "verdict": if r.mismatches == 0 { "pass" } else { "fail" },
            }),
        )?;
    }
    if mismatches > 0 {
        return Err(usage(format!("{mismatches} mismatching cases")));
    }
    Ok(())
}

fn cmd_bound(a: &BoundArgs, out: &mut dyn Write) -> CliResult<()> {
    let theorem = Theorem::from_number(a.theorem)?;
    let (n, counts, source) = match (&a.schedule, &a.deltas) {
        (Some(src), _) => {
            let l = load_schedule(&ScheduleArgs {
                schedule: src.clone(),
                n: a.n,
                rounds: None,
                construction: None,
                m1: BuiltinParams::default().m1,
                m4: BuiltinParams::default().m4,
            })?;
            let c = check_definition1(&l.params, &l.construction.to_kafw()?, DEFAULT_THRESHOLD)?
                .counts
                .expect("four-round audits report counts");
            (l.params.n(), (c.delta1(), c.delta2(), c.delta3()), Some(src.clone()))
        }
        (None, Some(d)) => match d[..] {
            [d1, d2, d3] => (a.n, (d1, d2, d3), None),
            _ => return Err(usage("--deltas takes exactly three counts")),
        },
        (None, None) => (a.n, (0, 0, 0), None),
    };
    DomainParams::new(n)?;
    let b = bound_formula(theorem, a.qf, a.qe, n, counts);
    emit(
        out,
        &json!({
            "kind": "bound",
            "theorem": b.theorem,
            "n": n,
            "q_f": a.qf,
            "q_e": a.qe,
            "delta_counts": [counts.0, counts.1, counts.2],
            "uses_deltas": theorem.uses_deltas(),
            "schedule": source,
            "numerator": b.numerator.to_string(),
            "denominator": b.denominator.to_string(),
            "value": b.value,
            "precondition_holds": b.precondition_holds,
            "vacuous": b.vacuous,
        }),
    )
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Encrypt(a) => cmd_encrypt(a, out),
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::Audit(a) => cmd_audit(a, out),
        Command::Attack(a) => cmd_attack(a, out),
        Command::Advantage(a) => cmd_advantage(a, out),
        Command::Equivalence(a) => cmd_equivalence(a, out),
        Command::Bound(a) => cmd_bound(a, out),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Records go to `stdout` unless `--out` is given;
/// diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return EXIT_ERROR;
        }
    };
    let result = match &cli.out {
        Some(path) => fs::File::create(path)
            .map_err(CliError::from)
            .and_then(|f| {
                let mut w = io::BufWriter::new(f);
                dispatch(&cli, &mut w)?;
                w.flush()?;
                Ok(())
            }),
        None => dispatch(&cli, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
