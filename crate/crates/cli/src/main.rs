//! Command-line surface: key and credential management, end-to-end demo
//! runs over a simulated network, offline transcript audit, and benchmark
//! sweeps.
//!
//! Exit codes: 0 accept, 2 verification reject, 3 decode error, 4 I/O,
//! 5 configuration/usage.

mod bench;
mod files;

use aqkd_core::group::PublicParams;
use aqkd_core::groth::IssuerKeyPair;
use aqkd_core::netsim::{
    self, build_graph, Fault, GraphSpec, RouteSpec, SessionVerdict, TamperField, DEFAULT_NOW,
};
use aqkd_core::policy::{attr_value, AttributeVector, Policy};
use aqkd_core::protocol::{self, deserialize_hop_message};
use aqkd_core::pseudonym::key_gen;
use aqkd_core::sok::VerifierKey;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Decode(String),
    #[error("{0}")]
    Reject(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Reject(_) => 2,
            CliError::Decode(_) => 3,
            CliError::Io(_) => 4,
            CliError::Config(_) => 5,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "aqkd",
    about = "Topology-hiding path validation for multi-path QKD networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an issuer or node key pair (plus a .pub companion file).
    Keygen(KeygenArgs),
    /// Register a node with the issuer and append the credential to a store.
    Register(RegisterArgs),
    /// Create a policy file from disclosure requirements.
    Policy(PolicyArgs),
    /// Run a transmission over a simulated network described by a graph file.
    Run(RunArgs),
    /// Re-verify a stored transcript offline.
    Audit(AuditArgs),
    /// Benchmark sweep over node counts and attribute sizes (CSV output).
    Bench(bench::BenchArgs),
}

#[derive(Args)]
struct KeygenArgs {
    /// Key role to generate.
    #[arg(long, value_enum)]
    role: Role,
    /// Output path for the secret key file.
    #[arg(long)]
    out: PathBuf,
    /// Randomness seed (fresh OS entropy when omitted).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Issuer,
    Node,
}

#[derive(Args)]
struct RegisterArgs {
    /// Issuer secret-key file.
    #[arg(long)]
    issuer_key: PathBuf,
    /// Node secret-key file.
    #[arg(long)]
    node_key: PathBuf,
    /// Node identifier recorded in the store.
    #[arg(long)]
    node_id: String,
    /// Comma-separated attribute labels.
    #[arg(long)]
    attrs: String,
    /// Credential store to append to (created when absent).
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PolicyArgs {
    /// Policy identifier.
    #[arg(long)]
    id: String,
    /// Total number of attributes ℓ.
    #[arg(long)]
    attr_count: u16,
    /// Disclosure requirement <index>=<label>, repeatable.
    #[arg(long = "require", value_name = "IDX=LABEL")]
    requirements: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Graph description file.
    #[arg(long)]
    graph: PathBuf,
    /// Policy file (canonical encoding, see `aqkd policy`).
    #[arg(long)]
    policy: PathBuf,
    /// Routes file: one path per line, whitespace-separated node ids.
    #[arg(long, conflicts_with = "paths")]
    routes: Option<PathBuf>,
    /// Find this many disjoint paths automatically.
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Inject one adversarial behavior.
    #[arg(long, value_enum)]
    fault: Option<FaultName>,
    /// Randomness seed for the whole run.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Issuer secret-key file; derived from the seed when omitted.
    #[arg(long)]
    issuer_key: Option<PathBuf>,
    /// Write the session transcript here (plus `<out>.issuer.pub`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultName {
    ShareNode,
    SkipAppend,
    UncertifiedNode,
    PolicyViolation,
    ReplaySid,
    TamperHop,
}

#[derive(Args)]
struct AuditArgs {
    /// Transcript file written by `aqkd run`.
    #[arg(long)]
    transcript: PathBuf,
    /// Issuer public key (.pub or full key file).
    #[arg(long)]
    issuer_pk: PathBuf,
    /// The agreed policy file.
    #[arg(long)]
    policy: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(5);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Keygen(args) => cmd_keygen(args),
        Command::Register(args) => cmd_register(args),
        Command::Policy(args) => cmd_policy(args),
        Command::Run(args) => cmd_run(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Bench(args) => bench::cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn cmd_keygen(args: KeygenArgs) -> Result<(), CliError> {
    let mut rng = rng_from(args.seed);
    let params = PublicParams::setup(1);
    match args.role {
        Role::Issuer => {
            let issuer = IssuerKeyPair::generate(&params, &mut rng);
            files::write_issuer_key(&args.out, &issuer)?;
        }
        Role::Node => {
            let node = key_gen(&params, &mut rng);
            files::write_node_key(&args.out, &node)?;
        }
    }
    println!("wrote {} (+ .pub)", args.out.display());
    Ok(())
}

fn cmd_register(args: RegisterArgs) -> Result<(), CliError> {
    let labels: Vec<&str> = args.attrs.split(',').collect();
    if labels.is_empty() {
        return Err(CliError::Config("at least one attribute required".into()));
    }
    let params = PublicParams::setup(labels.len());
    let issuer = files::read_issuer_key(&args.issuer_key, &params)?;
    let (sk, claimed_pk) = files::read_node_key(&args.node_key)?;
    let attrs = AttributeVector::from_labels(&labels);
    let mut rng = rng_from(args.seed);

    // run the registration protocol against the claimed public key
    let did = protocol::fresh_did(&mut rng);
    let proof = aqkd_core::sok::prove_registration(&params, &sk, &claimed_pk, &did, &mut rng);
    let cred = protocol::issue_credential(
        &params, &issuer, &claimed_pk, &attrs, &did, &proof, &mut rng,
    )
    .map_err(|e| CliError::Reject(e.to_string()))?;

    files::append_store_record(
        &args.store,
        labels.len(),
        &files::StoreRecord {
            node_id: args.node_id.clone(),
            pk: claimed_pk,
            attrs,
            cred,
        },
    )?;

    // read back and re-verify every stored credential
    let (_, records) = files::read_store(&args.store)?;
    for record in &records {
        let msg = aqkd_core::policy::pedersen_message(&params, &record.pk, &record.attrs);
        if !aqkd_core::groth::verify(&params, issuer.public(), &record.cred, &msg) {
            return Err(CliError::Reject(format!(
                "store record for {} does not verify under this issuer",
                record.node_id
            )));
        }
    }
    println!(
        "registered {} into {} ({} records, all verified)",
        args.node_id,
        args.store.display(),
        records.len()
    );
    Ok(())
}

fn cmd_policy(args: PolicyArgs) -> Result<(), CliError> {
    let mut disclosed = BTreeMap::new();
    for req in &args.requirements {
        let (idx, label) = req
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("bad requirement {req:?}, want IDX=LABEL")))?;
        let idx: u16 = idx
            .parse()
            .map_err(|_| CliError::Config(format!("bad index in {req:?}")))?;
        if idx >= args.attr_count {
            return Err(CliError::Config(format!(
                "index {idx} out of range (ℓ = {})",
                args.attr_count
            )));
        }
        disclosed.insert(idx, attr_value(label));
    }
    if args.attr_count == 0 {
        return Err(CliError::Config("attr-count must be at least 1".into()));
    }
    let policy = Policy::new(args.id.as_bytes().to_vec(), args.attr_count, disclosed);
    files::write_policy(&args.out, &policy)?;
    println!(
        "wrote policy {} (ℓ = {}, d = {})",
        args.out.display(),
        policy.attr_count,
        policy.disclosed_count()
    );
    Ok(())
}

fn parse_fault(name: FaultName, routes: &RouteSpec) -> Result<Fault, CliError> {
    let mid = |path: usize| routes.paths[path].len() / 2;
    let need_paths = |n: usize| {
        if routes.paths.len() < n {
            Err(CliError::Config(format!("fault needs at least {n} paths")))
        } else {
            Ok(())
        }
    };
    Ok(match name {
        FaultName::ShareNode => {
            need_paths(2)?;
            Fault::ShareNodeAcrossPaths
        }
        FaultName::SkipAppend => Fault::SkipAppendAndRelay { path: 0, hop: mid(0) },
        FaultName::UncertifiedNode => Fault::UncertifiedNodeInject { path: 0, hop: mid(0) },
        FaultName::PolicyViolation => Fault::PolicyViolatingAttrs { path: 0, hop: mid(0) },
        FaultName::ReplaySid => Fault::ReplaySid,
        FaultName::TamperHop => Fault::TamperHop {
            path: 0,
            hop: routes.paths[0].len() - 1,
            field: TamperField::Challenge,
        },
    })
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.graph)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.graph.display())))?;
    let spec = GraphSpec::parse(&text).map_err(|e| CliError::Decode(e.to_string()))?;
    let policy = files::read_policy(&args.policy)?;

    let attr_count = spec
        .nodes
        .first()
        .map(|(_, labels)| labels.len())
        .ok_or_else(|| CliError::Config("graph has no nodes".into()))?;
    if attr_count != policy.attr_count as usize {
        return Err(CliError::Config(format!(
            "graph nodes carry {attr_count} attributes but the policy expects {}",
            policy.attr_count
        )));
    }
    let params = PublicParams::setup(attr_count);
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let issuer = match &args.issuer_key {
        Some(path) => files::read_issuer_key(path, &params)?,
        None => IssuerKeyPair::generate(&params, &mut rng),
    };
    let g = build_graph(&params, &spec, &issuer, &mut rng)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let routes = match &args.routes {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let paths: Vec<Vec<String>> = text
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(|l| l.split_whitespace().map(str::to_owned).collect())
                .collect();
            if paths.is_empty() {
                return Err(CliError::Config(format!("{}: no routes", path.display())));
            }
            RouteSpec { paths }
        }
        None => g
            .disjoint_routes(args.paths)
            .map_err(|e| CliError::Config(e.to_string()))?,
    };

    let fault = args
        .fault
        .map(|name| parse_fault(name, &routes))
        .transpose()?;
    let outcome = netsim::run_session(
        &g, &routes, &policy, fault.as_ref(), &params, DEFAULT_NOW, &mut rng,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    if let Some(out) = &args.out {
        files::write_transcript(
            out,
            &files::TranscriptFile {
                sid: outcome.transcript.sid,
                paths: outcome
                    .transcript
                    .paths
                    .iter()
                    .map(|p| (p.exit_pk, p.wire.clone()))
                    .collect(),
            },
        )?;
        files::write_issuer_public_for(out, issuer.public())?;
        println!("transcript written to {} (+ .issuer.pub)", out.display());
    }
    println!("payload bytes: {}", outcome.payload_bytes);
    let r = outcome.counters.receiver;
    println!(
        "receiver ops: G1-exp={} G2-exp={} GT-exp={} pairings={}",
        r.g1_exp, r.g2_exp, r.gt_exp, r.pairings
    );
    match outcome.verdict {
        SessionVerdict::Accepted(n) => {
            println!("verdict: accept, n'={n}");
            Ok(())
        }
        SessionVerdict::ReceiverRejected(reason) => {
            println!("verdict: reject ({reason})");
            Err(CliError::Reject(reason.to_string()))
        }
        SessionVerdict::NodeAborted { path, hop, error } => {
            println!("verdict: aborted at path {path}, hop {hop} ({error})");
            Err(CliError::Reject(error.to_string()))
        }
        SessionVerdict::DecodeFailed(e) => {
            println!("verdict: undecodable transmission ({e})");
            Err(CliError::Decode(e.to_string()))
        }
    }
}

fn cmd_audit(args: AuditArgs) -> Result<(), CliError> {
    let transcript = files::read_transcript(&args.transcript)?;
    let policy = files::read_policy(&args.policy)?;
    let pk_issuer = files::read_issuer_public(&args.issuer_pk)?;
    let params = PublicParams::setup(policy.attr_count as usize);

    let mut finals = Vec::with_capacity(transcript.paths.len());
    let mut exits = Vec::with_capacity(transcript.paths.len());
    for (exit_pk, wire) in &transcript.paths {
        finals.push(deserialize_hop_message(wire).map_err(|e| CliError::Decode(e.to_string()))?);
        exits.push(*exit_pk);
    }
    let vk = VerifierKey::new(&params, &pk_issuer);
    match protocol::receiver_verify(&params, &vk, &policy, &finals, &exits) {
        protocol::Verdict::Accept { paths } => {
            println!("verdict: accept, n'={paths}");
            Ok(())
        }
        protocol::Verdict::Reject(reason) => {
            println!("verdict: reject ({reason})");
            Err(CliError::Reject(reason.to_string()))
        }
    }
}
