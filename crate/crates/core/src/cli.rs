//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, or an
//! unknown scheme, device, suite, role or format).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    bandwidth_report, emit_report, estimate_overhead, op_frequency_report, report_file_name, run_circuit_benchmark,
    run_fetch_benchmark, run_onion_benchmark, Report, ReportFormat, Workload, ROLE_PRIORITY,
};
use crate::cells::{create2_cells, created2_cells, dump_cells, RelayFormat};
use crate::handshake::{client_init, server_respond, suite_by_id, ServerKeys, SuiteSpec, NODE_ID_LEN};
use crate::netsim::{parse_config, NetConfig, NodeRole, PathConstraints, World};
use crate::registry::{kem_exchange_time, load_profiles, sig_op_times, ProfileSet, SchemeKind};
use crate::toy_crypto::{derive_seed, sha256};

/// Seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 24301;

#[derive(Parser, Debug)]
#[command(
    name = "onionsim",
    version,
    about = "Deterministic onion-routing simulator with post-quantum handshakes"
)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Profile document (`profile-set v1`); the built-in set when absent.
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
    /// Topology document (`netsim-cfg v1`); the built-in network when absent.
    #[arg(long, global = true)]
    pub topology: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Report format: markdown, csv or v3bw.
    #[arg(long, global = true, default_value = "markdown")]
    pub format: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scheme sizes and operation times.
    #[command(subcommand)]
    Schemes(SchemesCmd),
    /// Cell encodings.
    #[command(subcommand)]
    Cells(CellsCmd),
    /// Simulated experiments.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Cost projections.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Counter and measurement reports.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand, Debug)]
pub enum SchemesCmd {
    /// Lists every scheme with its sizes in bytes.
    List,
    /// Key-exchange time (keygen + encaps + decaps) in ms.
    KeTime(DeviceScheme),
    /// Signature keypair, sign and verify times in ms.
    SigTime(DeviceScheme),
}

#[derive(Args, Debug)]
pub struct DeviceScheme {
    #[arg(long)]
    pub device: String,
    #[arg(long)]
    pub scheme: String,
}

#[derive(Subcommand, Debug)]
pub enum CellsCmd {
    /// Decodes a stream of cells. Without `--input`, dumps the CREATE2 and
    /// CREATED2 cells of one seeded handshake of `--suite`.
    Dump {
        /// Raw cell bytes, or hex text with `--hex`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        hex: bool,
        #[arg(long, default_value = "hybrid-ml-kem-768")]
        suite: String,
        /// Relay cell layout: fragmented or standard.
        #[arg(long, default_value = "fragmented")]
        relay_format: String,
    },
}

#[derive(Args, Debug)]
pub struct Traffic {
    /// Request size in bytes.
    #[arg(long, default_value_t = 500)]
    pub request: usize,
    /// Response size in bytes.
    #[arg(long, default_value_t = 50_000)]
    pub response: usize,
}

#[derive(Subcommand, Debug)]
pub enum SimCmd {
    /// Builds and closes `--n` circuits over random paths.
    BuildCircuits {
        #[arg(long, default_value = "ntor-v3")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Fetches through `--n` fresh circuits and directly.
    Fetch {
        #[arg(long, default_value = "ntor-v3")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        traffic: Traffic,
    },
    /// Connects to an onion service `--n` times and fetches.
    OnionFetch {
        #[arg(long, default_value = "svc")]
        service: String,
        #[arg(long, default_value = "ntor-v3")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        traffic: Traffic,
    },
}

#[derive(Subcommand, Debug)]
pub enum EstimateCmd {
    /// Compares a candidate suite with a baseline suite.
    Overhead {
        #[arg(long, default_value = "ntor")]
        baseline: String,
        /// Candidate suite.
        #[arg(long, default_value = "hybrid-ml-kem-512")]
        suite: String,
        /// Device for every node.
        #[arg(long)]
        device: Option<String>,
        /// Device for one role, as `role=device`; repeatable, overrides `--device`.
        #[arg(long = "map", value_name = "ROLE=DEVICE")]
        map: Vec<String>,
        /// Circuits built per suite.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Fetches per suite.
        #[arg(long, default_value_t = 10)]
        fetches: usize,
        #[command(flatten)]
        traffic: Traffic,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReportCmd {
    /// Runs exit and onion-service fetches, then reports operation counts.
    Freq {
        #[arg(long, default_value = "ntor-v3")]
        suite: String,
        /// Exit fetches, each over a fresh circuit.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Onion-service fetches.
        #[arg(long, default_value_t = 10)]
        onion: usize,
        #[arg(long, default_value = "svc")]
        service: String,
        #[command(flatten)]
        traffic: Traffic,
    },
    /// Probes every relay from the client with packet trains.
    Bandwidth {
        /// Packets per train.
        #[arg(long, default_value_t = 50)]
        packets: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    profiles: ProfileSet,
    format: ReportFormat,
}

impl Ctx<'_> {
    fn network(&self) -> Result<NetConfig, CliError> {
        match &self.cli.topology {
            Some(p) => parse_config(&read_text(p)?).map_err(runtime),
            None => Ok(NetConfig::default()),
        }
    }

    fn world(&self) -> Result<World, CliError> {
        World::new(self.network()?, self.profiles.clone(), self.cli.seed).map_err(runtime)
    }

    fn suite(&self, id: &str) -> Result<SuiteSpec, CliError> {
        suite_by_id(&self.profiles, id).map_err(usage)
    }

    fn device(&self, id: &str) -> Result<(), CliError> {
        self.profiles.device(id).map(|_| ()).map_err(usage)
    }

    /// Writes `<experiment>-<seed>.<ext>` and prints its path.
    fn write_report(&self, experiment: &str, report: &Report, stdout: &mut dyn Write) -> Result<(), CliError> {
        let bytes = emit_report(report, self.format).map_err(usage)?;
        std::fs::create_dir_all(&self.cli.out).map_err(runtime)?;
        let path = self
            .cli
            .out
            .join(report_file_name(experiment, self.cli.seed, self.format));
        std::fs::write(&path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let _ = writeln!(stdout, "{}", path.display());
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn parse_role(name: &str) -> Result<NodeRole, CliError> {
    ROLE_PRIORITY
        .iter()
        .copied()
        .find(|r| r.name() == name)
        .ok_or_else(|| usage(format!("unknown role `{name}`")))
}

fn parse_relay_format(s: &str) -> Result<RelayFormat, CliError> {
    match s {
        "fragmented" => Ok(RelayFormat::Fragmented),
        "standard" => Ok(RelayFormat::Standard),
        other => Err(usage(format!("unknown relay format `{other}`"))),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format: ReportFormat = cli.format.parse().map_err(usage)?;
    let profiles = match &cli.profile {
        Some(p) => load_profiles(&read_text(p)?).map_err(runtime)?,
        None => ProfileSet::default_set(),
    };
    let ctx = Ctx { cli, profiles, format };
    match &cli.command {
        Command::Schemes(c) => schemes(&ctx, c, stdout),
        Command::Cells(CellsCmd::Dump {
            input,
            hex,
            suite,
            relay_format,
        }) => {
            let relay_format = parse_relay_format(relay_format)?;
            let bytes = match input {
                Some(p) if *hex => {
                    let text: String = read_text(p)?.split_whitespace().collect();
                    hex::decode(text).map_err(|e| runtime(format!("{}: {e}", p.display())))?
                }
                Some(p) => std::fs::read(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
                None => sample_handshake_cells(&ctx, suite)?,
            };
            let text = dump_cells(&bytes, relay_format).map_err(runtime)?;
            stdout.write_all(text.as_bytes()).map_err(runtime)
        }
        Command::Sim(c) => sim(&ctx, c, stdout),
        Command::Estimate(EstimateCmd::Overhead {
            baseline,
            suite,
            device,
            map,
            n,
            fetches,
            traffic,
        }) => {
            let base = ctx.suite(baseline)?;
            let cand = ctx.suite(suite)?;
            let mut device_map = BTreeMap::new();
            if let Some(d) = device {
                ctx.device(d)?;
                device_map.extend(ROLE_PRIORITY.iter().map(|r| (*r, d.clone())));
            }
            for entry in map {
                let (role, dev) = entry
                    .split_once('=')
                    .ok_or_else(|| usage(format!("expected ROLE=DEVICE, got `{entry}`")))?;
                ctx.device(dev)?;
                device_map.insert(parse_role(role)?, dev.to_string());
            }
            let workload = Workload {
                network: ctx.network()?,
                seed: cli.seed,
                circuits: *n,
                fetches: *fetches,
                request_bytes: traffic.request,
                response_bytes: traffic.response,
            };
            let r = estimate_overhead(&ctx.profiles, &base, &cand, &device_map, &workload).map_err(runtime)?;
            ctx.write_report("overhead", &Report::Overhead(r), stdout)
        }
        Command::Report(ReportCmd::Freq {
            suite,
            n,
            onion,
            service,
            traffic,
        }) => {
            ctx.suite(suite)?;
            let mut w = ctx.world()?;
            for _ in 0..*n {
                let path = w.select_path(&PathConstraints::default()).map_err(runtime)?;
                let (h, _) = w.build_circuit(&path, suite).map_err(runtime)?;
                w.fetch(h, traffic.request, traffic.response).map_err(runtime)?;
                w.close_circuit(h).map_err(runtime)?;
            }
            if *onion > 0 {
                run_onion_benchmark(&mut w, *onion, service, suite, traffic.request, traffic.response)
                    .map_err(runtime)?;
            }
            ctx.write_report("freq", &Report::Frequency(op_frequency_report(&w)), stdout)
        }
        Command::Report(ReportCmd::Bandwidth { packets }) => {
            let mut w = ctx.world()?;
            let entries = bandwidth_report(&mut w, *packets).map_err(runtime)?;
            ctx.write_report("bandwidth", &Report::Bandwidth(entries), stdout)
        }
    }
}

fn schemes(ctx: &Ctx, cmd: &SchemesCmd, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut out = String::new();
    match cmd {
        SchemesCmd::List => {
            let _ = writeln!(
                out,
                "{:<26} {:<13} {:>6} {:>6} {:>6} {:>4} {:>6} {:>3}",
                "scheme", "kind", "pk", "sk", "ct", "ss", "sig", "cat"
            );
            for s in ctx.profiles.schemes() {
                let _ = writeln!(
                    out,
                    "{:<26} {:<13} {:>6} {:>6} {:>6} {:>4} {:>6} {:>3}",
                    s.id,
                    s.kind.as_str(),
                    s.pk_len,
                    s.sk_len,
                    s.ct_len,
                    s.ss_len,
                    s.sig_len,
                    s.security_category
                );
            }
        }
        SchemesCmd::KeTime(a) => {
            let device = ctx.profiles.device(&a.device).map_err(usage)?;
            let scheme = ctx.profiles.scheme(&a.scheme).map_err(usage)?;
            if scheme.kind == SchemeKind::Signature {
                return Err(usage(format!("`{}` is a signature scheme", scheme.id)));
            }
            let ms = kem_exchange_time(device, scheme).map_err(runtime)?;
            let _ = writeln!(out, "{ms:.3} ms");
        }
        SchemesCmd::SigTime(a) => {
            let device = ctx.profiles.device(&a.device).map_err(usage)?;
            let scheme = ctx.profiles.scheme(&a.scheme).map_err(usage)?;
            if scheme.kind != SchemeKind::Signature {
                return Err(usage(format!("`{}` is not a signature scheme", scheme.id)));
            }
            let t = sig_op_times(device, scheme).map_err(runtime)?;
            match t.keypair_ms {
                Some(k) => writeln!(out, "keypair {k:.3} ms"),
                None => writeln!(out, "keypair n/a"),
            }
            .map_err(runtime)?;
            let _ = writeln!(out, "sign    {:.3} ms", t.sign_ms);
            let _ = writeln!(out, "verify  {:.3} ms", t.verify_ms);
        }
    }
    stdout.write_all(out.as_bytes()).map_err(runtime)
}

fn sim(ctx: &Ctx, cmd: &SimCmd, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        SimCmd::BuildCircuits { suite, n } => {
            ctx.suite(suite)?;
            let mut w = ctx.world()?;
            let b = run_circuit_benchmark(&mut w, *n, suite).map_err(runtime)?;
            ctx.write_report("build-circuits", &Report::Circuits(b), stdout)
        }
        SimCmd::Fetch { suite, n, traffic } => {
            ctx.suite(suite)?;
            let mut w = ctx.world()?;
            let f = run_fetch_benchmark(&mut w, *n, suite, traffic.request, traffic.response).map_err(runtime)?;
            ctx.write_report("fetch", &Report::Fetch(f), stdout)
        }
        SimCmd::OnionFetch {
            service,
            suite,
            n,
            traffic,
        } => {
            ctx.suite(suite)?;
            let mut w = ctx.world()?;
            let r =
                run_onion_benchmark(&mut w, *n, service, suite, traffic.request, traffic.response).map_err(runtime)?;
            ctx.write_report("onion-fetch", &Report::Onion(r), stdout)
        }
    }
}

/// CREATE2 then CREATED2 cells of one handshake with seeded keys.
fn sample_handshake_cells(ctx: &Ctx, suite_id: &str) -> Result<Vec<u8>, CliError> {
    let suite = ctx.suite(suite_id)?;
    let seed = derive_seed(&ctx.cli.seed.to_be_bytes(), "cells-dump", 0);
    let mut node_id = [0u8; NODE_ID_LEN];
    node_id.copy_from_slice(&sha256(b"cells-dump relay")[..NODE_ID_LEN]);
    let keys = ServerKeys::generate([&suite], node_id, &seed).map_err(runtime)?;
    let public = keys.public(&suite).map_err(runtime)?;
    let (_, skin) =
        client_init(&suite, &node_id, &public.static_pk, &derive_seed(&seed, "client", 0)).map_err(runtime)?;
    let (reply, _) = server_respond(&suite, &keys, &skin, &derive_seed(&seed, "server", 0)).map_err(runtime)?;
    let mut bytes = Vec::new();
    for cell in create2_cells(1, suite.htype(), &skin).map_err(runtime)? {
        bytes.extend(cell.encode());
    }
    for cell in created2_cells(1, &reply).map_err(runtime)? {
        bytes.extend(cell.encode());
    }
    Ok(bytes)
}
