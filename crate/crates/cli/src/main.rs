use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};
use ministack_cli::{
    default_config_path, job_path, parse_policy, read_file_config, render_devices, render_job, render_result, resolve,
    terminal_state, CliConfig, CliError, Client, OutputFormat, WATCH_INTERVAL,
};
use reqwest::Method;
use serde_json::{json, Value};

/// Command-line client for the quantum job service.
#[derive(Parser)]
#[command(name = "ministack", version)]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "MINISTACK_ENDPOINT")]
    endpoint: Option<String>,
    /// Access token from the service's allow-list.
    #[arg(long, global = true, env = "MINISTACK_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
    /// Config file (default: the per-user ministack/config.json).
    #[arg(long, global = true, env = "MINISTACK_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List devices with their figures of merit and queue state.
    Devices,
    /// Submit a circuit file (`-` reads standard input).
    Submit {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        priority: u8,
        /// Run on this device instead of letting the scheduler choose.
        #[arg(long)]
        device: Option<String>,
        /// Scheduling weights as `w_esp,w_wait,w_exec`.
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Value>,
        /// Also return a readout-mitigated histogram.
        #[arg(long)]
        mitigate: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep polling until the job finishes.
        #[arg(long)]
        watch: bool,
    },
    /// Show a job's state and transitions.
    Status { id: String },
    /// Show a finished job's result.
    Result { id: String },
    /// Cancel a job.
    Cancel { id: String },
    /// Poll a job until it reaches a terminal state.
    Watch { id: String },
}

fn print(output: OutputFormat, body: &str, render: fn(&str) -> String) {
    match output {
        OutputFormat::Json => println!("{body}"),
        OutputFormat::Table => print!("{}", render(body)),
    }
}

fn watch(client: &Client, cfg: &CliConfig, id: &str) -> Result<ExitCode, CliError> {
    let mut last = String::new();
    loop {
        let body = client.get(&job_path(id))?;
        let state = serde_json::from_str::<Value>(&body).ok().and_then(|v| v["state"].as_str().map(String::from)).unwrap_or_default();
        if cfg.output == OutputFormat::Table && state != last {
            println!("{id} {state}");
        }
        last = state;
        if let Some(done) = terminal_state(&body) {
            if cfg.output == OutputFormat::Json {
                println!("{body}");
            }
            return Ok(if done == "DONE" { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        thread::sleep(WATCH_INTERVAL);
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let file = match &cli.config {
        Some(path) => read_file_config(path, true)?,
        None => default_config_path().map(|p| read_file_config(&p, false)).transpose()?.unwrap_or_default(),
    };
    let cfg = resolve(cli.endpoint, cli.token, cli.output, file)?;
    let client = Client::connect(&cfg)?;
    match cli.command {
        Command::Devices => print(cfg.output, &client.get("/v1/devices")?, render_devices),
        Command::Submit { file, shots, priority, device, policy, mitigate, seed, watch: follow } => {
            let circuit = if file.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Usage(format!("stdin: {e}")))?;
                s
            } else {
                std::fs::read_to_string(&file).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?
            };
            let mut body = json!({"circuit": circuit, "shots": shots, "priority": priority, "mitigate": mitigate});
            for (key, value) in [("device", device.map(Value::from)), ("policy", policy), ("seed", seed.map(Value::from))] {
                if let Some(v) = value {
                    body[key] = v;
                }
            }
            let resp = client.call(Method::POST, "/v1/jobs", Some(body))?;
            let id = serde_json::from_str::<Value>(&resp).ok().and_then(|v| v["job_id"].as_str().map(String::from));
            match cfg.output {
                OutputFormat::Json => println!("{resp}"),
                OutputFormat::Table => println!("{}", id.as_deref().unwrap_or("-")),
            }
            if follow {
                let id = id.ok_or_else(|| CliError::Network("submit response lacks job_id".into()))?;
                return watch(&client, &cfg, &id);
            }
        }
        Command::Status { id } => print(cfg.output, &client.get(&job_path(&id))?, render_job),
        Command::Result { id } => print(cfg.output, &client.get(&format!("{}/result", job_path(&id)))?, render_result),
        Command::Cancel { id } => {
            let body = client.call(Method::DELETE, &job_path(&id), None)?;
            print(cfg.output, &body, render_job);
        }
        Command::Watch { id } => return watch(&client, &cfg, &id),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
