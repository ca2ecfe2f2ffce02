mod files;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use btrs_core::attack::{
    experiment_basic, experiment_ours_with, write_basic_csv, write_ours_csv, BasicConfig, OursConfig, ReferenceMode,
};
use btrs_core::params::{audit, AuditStatus, ParamSet, RuleKind};
use btrs_core::ring::codec::peek_header;
use btrs_core::ring::Codec;
use btrs_core::sampling::RandomStream;
use btrs_core::scheme::{
    keygen, setup, sign, verify, PublicParams, Ring, Signature, SigningKey, Transcript, Verdict,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use files::{load_params, load_ring, message_bits, with_ext, SIG_EXT, SK_EXT, VK_EXT};

#[derive(Debug)]
pub enum CliError {
    /// Verification rejected; exit 1.
    Reject(String),
    /// Bad arguments or inputs; exit 2.
    Usage(String),
    /// Exit 3.
    Io(String),
}

impl From<btrs_core::Error> for CliError {
    fn from(e: btrs_core::Error) -> Self {
        match e {
            btrs_core::Error::Io(s) => CliError::Io(s),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "btrs", version, about = "Lattice ring signatures over Z_q[X]/(X^n+1), q = 3^k")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Named parameter set: paper-table1, toy or table1-dims.
    #[arg(long, default_value = "toy")]
    params: String,
    /// Parameter JSON written by `setup` (overrides --params).
    #[arg(long, value_name = "FILE")]
    pp: Option<PathBuf>,
}

impl ParamArgs {
    fn load(&self) -> Result<ParamSet, CliError> {
        load_params(&self.params, self.pp.as_deref())
    }
}

#[derive(Args, Clone)]
struct SeedArg {
    /// 64 hex characters; falls back to $BTRS_SEED, then to OS entropy.
    #[arg(long)]
    seed: Option<String>,
}

impl SeedArg {
    fn stream(&self) -> Result<RandomStream, CliError> {
        if let Some(s) = &self.seed {
            return Ok(RandomStream::from_hex(s)?);
        }
        match RandomStream::from_env() {
            Some(r) => Ok(r?),
            None => Ok(RandomStream::from_entropy()),
        }
    }
}

#[derive(Args)]
struct MessageArgs {
    /// Message given inline.
    #[arg(long, conflicts_with = "msg_file", required_unless_present = "msg_file")]
    message: Option<String>,
    /// Message read from a file.
    #[arg(long, value_name = "FILE")]
    msg_file: Option<PathBuf>,
}

impl MessageArgs {
    fn bits(&self, t: usize) -> Result<Vec<bool>, CliError> {
        let bytes = match (&self.message, &self.msg_file) {
            (Some(m), _) => m.as_bytes().to_vec(),
            (None, Some(p)) => files::read(p)?,
            (None, None) => return Err(CliError::Usage("no message given".into())),
        };
        Ok(message_bits(&bytes, t))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print and optionally save the public parameters.
    Setup {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Write the parameters and setup transcript as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a key pair as OUT.btrs-vk and OUT.btrs-sk.
    Keygen {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sign a message on behalf of a ring.
    Sign {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        sk: PathBuf,
        /// Ring file: one verification-key path per line, in order.
        #[arg(long)]
        ring: PathBuf,
        #[command(flatten)]
        msg: MessageArgs,
        /// Signature path; .btrs-sig is appended if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a signature; exit 0 on accept, 1 on reject.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        ring: PathBuf,
        #[command(flatten)]
        msg: MessageArgs,
        #[arg(long)]
        sig: PathBuf,
    },
    /// Time keygen, sign and verify against ring size.
    Bench {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        ring_sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an anonymity attack experiment.
    Attack {
        #[command(subcommand)]
        kind: AttackKind,
    },
    /// Re-derive parameter relations and report PASS or FLAG per rule.
    Audit {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Show the header of a public object file.
    Inspect { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum RefArg {
    Analytic,
    Pooled,
}

#[derive(Subcommand)]
enum AttackKind {
    /// All-but-one uniform model with a biased signer slot.
    Basic {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 2)]
        ring_size: usize,
        #[arg(long, default_value_t = 0.2)]
        eps_bias: f64,
        /// Coefficients are uniform on [-bound, bound].
        #[arg(long, default_value_t = 8)]
        bound: i64,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000")]
        q_sweep: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The same attack on real signatures from a fixed member.
    Ours {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 2)]
        ring_size: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        q_sweep: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        signer: usize,
        #[arg(long, value_enum, default_value = "analytic")]
        reference: RefArg,
        /// Delegate a fresh trapdoor for every signature.
        #[arg(long)]
        fresh_delegation: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => Ok(Box::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Ok(Box::new(io::stdout())),
    }
}

fn cmd_setup(params: &ParamArgs, seed: &SeedArg, out: Option<&Path>) -> CliResult {
    let stream = seed.stream()?;
    let pp = match &params.pp {
        Some(_) => PublicParams {
            params: params.load()?,
            transcript: Transcript {
                seed: stream.seed_hex(),
                words_used: stream.position(),
            },
        },
        None => setup(&params.params, &stream)?,
    };
    let p = &pp.params;
    println!("params={}", p.name);
    println!("n={}", p.n);
    println!("k={}", p.k);
    println!("w={}", p.w);
    println!("m={}", p.m);
    println!("q=3^{} ({})", p.k, p.q);
    println!("sigma_tg={}", p.sigma_tg);
    println!("sigma_td={}", p.sigma_td);
    println!("sigma_saml={}", p.sigma_saml);
    println!("beta={}", p.beta);
    println!("kappa={}", p.kappa);
    println!("t={}", p.t);
    println!("max_ring={}", p.max_ring);
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&pp).expect("parameters serialize");
        files::write(path, json.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_keygen(params: &ParamArgs, seed: &SeedArg, out: &Path) -> CliResult {
    let pp = params.load()?;
    let mut stream = seed.stream()?.fork("keygen");
    let (vk, sk, _) = keygen(&pp, &mut stream)?;
    let (vk_path, sk_path) = (with_ext(out, VK_EXT), with_ext(out, SK_EXT));
    files::write(&vk_path, &vk.to_bytes())?;
    files::write(&sk_path, &sk.to_bytes())?;
    println!("wrote {} and {}", vk_path.display(), sk_path.display());
    Ok(())
}

fn cmd_sign(params: &ParamArgs, seed: &SeedArg, sk: &Path, ring: &Path, msg: &MessageArgs, out: &Path) -> CliResult {
    let pp = params.load()?;
    let sk_bytes = files::read(sk)?;
    let sk = SigningKey::from_bytes(&sk_bytes).map_err(|e| CliError::Usage(format!("{}: {e}", sk.display())))?;
    let ring = Ring::new(load_ring(ring)?)?;
    let signer = ring
        .keys()
        .iter()
        .position(|vk| sk.pairs_with(vk))
        .ok_or_else(|| CliError::Usage("the signing key's verification key is not in the ring".into()))?;
    let bits = msg.bits(pp.t)?;
    let mut stream = seed.stream()?.fork("sign");
    let sig = sign(&pp, &sk, signer, &bits, &ring, &mut stream)?;
    let out = if out.extension().is_some_and(|e| e == SIG_EXT) { out.to_path_buf() } else { with_ext(out, SIG_EXT) };
    files::write(&out, &sig.to_bytes())?;
    println!("wrote {} ({} members)", out.display(), ring.len());
    Ok(())
}

fn cmd_verify(params: &ParamArgs, ring: &Path, msg: &MessageArgs, sig: &Path) -> CliResult {
    let pp = params.load()?;
    let keys = load_ring(ring)?;
    let bits = msg.bits(pp.t)?;
    let bytes = files::read(sig)?;
    let sig = match Signature::from_bytes(&bytes) {
        Ok(s) => s,
        Err(e) => return Err(CliError::Reject(format!("bad shape: {e}"))),
    };
    match verify(&pp, &bits, &keys, &sig) {
        Verdict::Accept { .. } => {
            println!("accept");
            Ok(())
        }
        Verdict::Reject(reason) => Err(CliError::Reject(reason.to_string())),
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn cmd_bench(params: &ParamArgs, seed: &SeedArg, sizes: &[usize], reps: usize, out: Option<&Path>) -> CliResult {
    let pp = params.load()?;
    if reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let root = seed.stream()?;
    let mut w = csv::Writer::from_writer(output(out)?);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["N", "keygen_ms", "sign_ms", "verify_ms", "sig_bytes"]).map_err(csv_err)?;
    for &n in sizes {
        let mut s = root.fork_indexed("bench", n as u64);
        let (mut kg, mut sg, mut vf) = (Vec::new(), Vec::new(), Vec::new());
        let mut sig_bytes = 0;
        for _ in 0..reps {
            let mut keys = Vec::with_capacity(n);
            for _ in 0..n {
                let t = Instant::now();
                let (vk, sk, _) = keygen(&pp, &mut s)?;
                kg.push(ms(t));
                keys.push((vk, sk));
            }
            let ring = Ring::new(keys.iter().map(|k| k.0.clone()).collect())?;
            let msg: Vec<bool> = (0..pp.t).map(|_| s.bit()).collect();
            let signer = s.below(n as u64) as usize;
            let t = Instant::now();
            let sig = sign(&pp, &keys[signer].1, signer, &msg, &ring, &mut s)?;
            sg.push(ms(t));
            let t = Instant::now();
            let ok = verify(&pp, &msg, ring.keys(), &sig).accepted();
            vf.push(ms(t));
            if !ok {
                return Err(CliError::Reject(format!("honest signature rejected at N = {n}")));
            }
            sig_bytes = sig.to_bytes().len();
        }
        w.write_record([
            n.to_string(),
            format!("{:.3}", median(kg)),
            format!("{:.3}", median(sg)),
            format!("{:.3}", median(vf)),
            sig_bytes.to_string(),
        ])
        .map_err(csv_err)?;
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_attack(kind: &AttackKind) -> CliResult {
    match kind {
        AttackKind::Basic {
            seed,
            ring_size,
            eps_bias,
            bound,
            q_sweep,
            reps,
            out,
        } => {
            let config = BasicConfig {
                q_sweep: q_sweep.clone(),
                reps: *reps,
                n_ring: *ring_size,
                eps_bias: *eps_bias,
                bound: *bound,
            };
            let rows = experiment_basic(&config, &seed.stream()?)?;
            write_basic_csv(&rows, output(out.as_deref())?)?;
        }
        AttackKind::Ours {
            params,
            seed,
            ring_size,
            q_sweep,
            reps,
            signer,
            reference,
            fresh_delegation,
            out,
        } => {
            let pp = params.load()?;
            let config = OursConfig {
                n_ring: *ring_size,
                q_sweep: q_sweep.clone(),
                reps: *reps,
                signer: *signer,
                reference: match reference {
                    RefArg::Analytic => ReferenceMode::Analytic,
                    RefArg::Pooled => ReferenceMode::Pooled,
                },
                fresh_delegation: *fresh_delegation,
            };
            let start = Instant::now();
            let rows = experiment_ours_with(&pp, &config, &seed.stream()?, |rep| {
                eprintln!("repetition {}/{} ({:.0} s)", rep + 1, reps, start.elapsed().as_secs_f64());
            })?;
            write_ours_csv(&rows, output(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn cmd_audit(params: &ParamArgs) -> CliResult {
    let pp = params.load()?;
    let rules = audit(&pp);
    let flags = rules.iter().filter(|r| r.status == AuditStatus::Flag).count();
    println!("audit of {}", pp.name);
    for r in &rules {
        let status = match r.status {
            AuditStatus::Pass => "PASS",
            AuditStatus::Flag => "FLAG",
        };
        println!("{status}  [{:?}] {}: {}", r.kind, r.rule, r.detail);
    }
    for kind in [RuleKind::Structural, RuleKind::Floor, RuleKind::Security, RuleKind::Discrepancy] {
        let of_kind: Vec<_> = rules.iter().filter(|r| r.kind == kind).collect();
        let flagged = of_kind.iter().filter(|r| r.status == AuditStatus::Flag).count();
        let verdict = if flagged == 0 { "PASS" } else { "FLAG" };
        println!("{kind:?}: {verdict} ({flagged} of {} flagged)", of_kind.len());
    }
    println!("{} rules, {flags} flagged", rules.len());
    Ok(())
}

fn cmd_inspect(path: &Path) -> CliResult {
    let bytes = files::read(path)?;
    let header = peek_header(&bytes)?;
    if header.tag.is_secret() {
        return Err(CliError::Usage(format!("{} is secret key material; refusing to print it", path.display())));
    }
    println!("object={:?}", header.tag);
    println!("n={} k={} rows={} cols={}", header.n, header.k, header.rows, header.cols);
    println!("bytes={}", bytes.len());
    println!("sha256={}", hex::encode(Sha256::digest(&bytes)));
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match &cli.cmd {
        Command::Setup { params, seed, out } => cmd_setup(params, seed, out.as_deref()),
        Command::Keygen { params, seed, out } => cmd_keygen(params, seed, out),
        Command::Sign {
            params,
            seed,
            sk,
            ring,
            msg,
            out,
        } => cmd_sign(params, seed, sk, ring, msg, out),
        Command::Verify { params, ring, msg, sig } => cmd_verify(params, ring, msg, sig),
        Command::Bench {
            params,
            seed,
            ring_sizes,
            reps,
            out,
        } => cmd_bench(params, seed, ring_sizes, *reps, out.as_deref()),
        Command::Attack { kind } => cmd_attack(kind),
        Command::Audit { params } => cmd_audit(params),
        Command::Inspect { file } => cmd_inspect(file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Reject(reason)) => {
            eprintln!("reject: {reason}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}
