//! Benchmark sweep: per-hop node cost, receiver cost, payload bytes and
//! operation counters across node counts and attribute sizes; CSV output
//! plus a linear fit of receiver time against the hop count.

use crate::CliError;
use aqkd_core::group::{counters, G1Element, PublicParams};
use aqkd_core::groth::IssuerKeyPair;
use aqkd_core::netsim::{build_graph, chain_spec, multi_chain_spec, NetworkGraph, DEFAULT_NOW};
use aqkd_core::policy::{attr_value, Policy};
use aqkd_core::protocol::{
    self, deserialize_hop_message, payload_bytes, serialize_hop_message, HopMessage, NodeId,
    Predecessor,
};
use aqkd_core::sok::VerifierKey;
use aqkd_core::stats::linear_fit;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated total node counts.
    #[arg(long, value_delimiter = ',', default_values_t = (10..=100).step_by(10).collect::<Vec<usize>>())]
    nodes: Vec<usize>,
    /// Comma-separated attribute counts ℓ (half are disclosed).
    #[arg(long = "attrs", value_delimiter = ',', default_values_t = vec![10usize, 20])]
    attr_counts: Vec<usize>,
    /// Topology mode.
    #[arg(long, value_enum, default_value_t = Mode::Single)]
    mode: Mode,
    /// Timing repetitions per cell (after one warm-up).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Randomness seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Single,
    Multi,
    Both,
}

impl Mode {
    fn list(self) -> Vec<&'static str> {
        match self {
            Mode::Single => vec!["single"],
            Mode::Multi => vec!["multi"],
            Mode::Both => vec!["single", "multi"],
        }
    }
}

struct Row {
    n: usize,
    l: usize,
    d: usize,
    mode: &'static str,
    node_median: Duration,
    receiver_median: Duration,
    payload: usize,
    recv: counters::OpCounters,
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    if args.reps < 3 {
        return Err(CliError::Config("reps must be at least 3".into()));
    }
    if args.nodes.iter().any(|&n| n < 3) {
        return Err(CliError::Config("node counts must be at least 3".into()));
    }
    let mut rows = Vec::new();
    for mode in args.mode.list() {
        for &l in &args.attr_counts {
            for &n in &args.nodes {
                let row = bench_cell(n, l, mode, args.reps, args.seed)?;
                eprintln!(
                    "bench n={n} l={l} mode={mode}: node {:?}, receiver {:?}, payload {} B",
                    row.node_median, row.receiver_median, row.payload
                );
                rows.push(row);
            }
        }
    }

    let mut csv = String::from(
        "n,l,d,mode,node_median_ms,receiver_median_ms,payload_bytes,recv_g1_exp,recv_g2_exp,recv_gt_exp,recv_pairings\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{},{},{},{},{}\n",
            r.n,
            r.l,
            r.d,
            r.mode,
            r.node_median.as_secs_f64() * 1e3,
            r.receiver_median.as_secs_f64() * 1e3,
            r.payload,
            r.recv.g1_exp,
            r.recv.g2_exp,
            r.recv.gt_exp,
            r.recv.pairings
        ));
    }
    // receiver-time fit per (mode, l) group
    for mode in args.mode.list() {
        for &l in &args.attr_counts {
            let group: Vec<&Row> =
                rows.iter().filter(|r| r.mode == mode && r.l == l).collect();
            if group.len() >= 2 {
                let xs: Vec<f64> = group.iter().map(|r| r.n as f64).collect();
                let ys: Vec<f64> =
                    group.iter().map(|r| r.receiver_median.as_secs_f64() * 1e3).collect();
                let fit = linear_fit(&xs, &ys);
                let line = format!(
                    "receiver fit mode={mode} l={l}: slope = {:.3} ms/hop, intercept = {:.3} ms, R² = {:.4}",
                    fit.slope, fit.intercept, fit.r2
                );
                println!("{line}");
                csv.push_str(&format!("# {line}\n"));
            }
        }
    }
    std::fs::write(&args.out, csv).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn bench_cell(
    n: usize,
    l: usize,
    mode: &'static str,
    reps: usize,
    seed: u64,
) -> Result<Row, CliError> {
    let d = l / 2;
    let params = PublicParams::setup(l);
    let labels: Vec<String> = (0..l).map(|i| format!("attr-{i}")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let policy = Policy::new(
        "bench",
        l as u16,
        (0..d as u16).map(|i| (i, attr_value(&labels[i as usize]))).collect(),
    );
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((n as u64) << 20) ^ ((l as u64) << 8));
    let issuer = IssuerKeyPair::generate(&params, &mut rng);
    let spec = match mode {
        "single" => chain_spec(n, &label_refs),
        _ => {
            // three disjoint chains splitting n as evenly as possible
            let base = n / 3;
            let lengths = [n - 2 * base, base, base];
            multi_chain_spec(&lengths, &label_refs)
        }
    };
    let g = build_graph(&params, &spec, &issuer, &mut rng)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let k = if mode == "single" { 1 } else { 3 };
    let routes = g
        .disjoint_routes(k)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let vk = VerifierKey::new(&params, &g.issuer_pk);

    let mut hop_times: Vec<Duration> = Vec::new();
    let mut receiver_times: Vec<Duration> = Vec::new();
    let mut payload = 0usize;
    let mut recv = counters::OpCounters::default();
    for rep in 0..=reps {
        let warmup = rep == 0;
        let (wire, exits, hops) = drive_session(&params, &g, &routes, &policy, &mut rng)?;
        if !warmup {
            hop_times.extend(hops);
        }

        let started = Instant::now();
        let mut decoded = Vec::with_capacity(wire.len());
        for bytes in &wire {
            decoded.push(
                deserialize_hop_message(bytes).map_err(|e| CliError::Decode(e.to_string()))?,
            );
        }
        let (verdict, ops) = counters::measure(|| {
            protocol::receiver_verify(&params, &vk, &policy, &decoded, &exits)
        });
        let elapsed = started.elapsed();
        if verdict.accepted() != Some(k as u32) {
            return Err(CliError::Reject(format!(
                "honest bench session rejected: {verdict:?}"
            )));
        }
        if !warmup {
            receiver_times.push(elapsed);
            payload = decoded.iter().map(payload_bytes).sum();
            recv = ops;
        }
    }
    hop_times.sort();
    receiver_times.sort();
    Ok(Row {
        n,
        l,
        d,
        mode,
        node_median: hop_times[hop_times.len() / 2],
        receiver_median: receiver_times[receiver_times.len() / 2],
        payload,
        recv,
    })
}

/// Drives one session hop by hop, timing each forward; returns the
/// serialized finals, exit keys and per-hop wall times.
fn drive_session(
    params: &PublicParams,
    g: &NetworkGraph,
    routes: &aqkd_core::netsim::RouteSpec,
    policy: &Policy,
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<Vec<u8>>, Vec<G1Element>, Vec<Duration>), CliError> {
    let entries: Vec<NodeId> = routes.paths.iter().map(|p| p[0].clone()).collect();
    let (_, messages) =
        protocol::sender_init(policy, routes.paths.len(), &entries, DEFAULT_NOW, rng)
            .map_err(|e| CliError::Config(e.to_string()))?;
    let mut wire = Vec::with_capacity(routes.paths.len());
    let mut exits = Vec::with_capacity(routes.paths.len());
    let mut hop_times = Vec::new();
    for (path, route) in routes.paths.iter().enumerate() {
        let mut msg: HopMessage = messages[path].clone();
        let mut predecessor: Option<NodeId> = None;
        for id in route {
            let node = &g.nodes[id];
            let from = match &predecessor {
                None => Predecessor::Sender,
                Some(p) => Predecessor::Node(p),
            };
            let started = Instant::now();
            msg = protocol::node_forward(params, node, &msg, from, &g.issuer_pk, DEFAULT_NOW, rng)
                .map_err(|e| CliError::Reject(e.to_string()))?;
            hop_times.push(started.elapsed());
            predecessor = Some(id.clone());
        }
        exits.push(*g.nodes[route.last().unwrap()].public_key());
        wire.push(serialize_hop_message(&msg));
    }
    Ok((wire, exits, hop_times))
}
