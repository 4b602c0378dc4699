use std::fs;
use std::io::Write;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{Cli, Format, VERSION};

/// Bad command-line input that clap cannot catch.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

/// What a subcommand produced, in both output formats.
pub struct Outcome {
    pub json: String,
    /// `jsonl` for line-delimited output.
    pub json_ext: &'static str,
    pub csv: String,
    /// The seed actually used, for commands that draw random numbers.
    pub seed: Option<Seed>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seed {
    pub value: u64,
    pub from_entropy: bool,
}

impl Seed {
    pub fn resolve(arg: Option<u64>) -> Seed {
        match arg {
            Some(value) => Seed {
                value,
                from_entropy: false,
            },
            None => Seed {
                value: graphcollide::stats::entropy_seed(),
                from_entropy: true,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    /// Arguments that reproduce the run, with a drawn seed made explicit.
    pub argv: Vec<String>,
    pub seed: Option<Seed>,
    pub version: String,
    pub format: Format,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputDigest>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    /// File name inside the output directory; absent for stdout.
    pub file: Option<String>,
    pub bytes: usize,
    pub sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn reproducing_argv(seed: Option<Seed>) -> Vec<String> {
    let mut argv: Vec<String> = std::env::args().collect();
    if let Some(s) = seed.filter(|s| s.from_entropy) {
        argv.push("--seed".into());
        argv.push(s.value.to_string());
    }
    argv
}

pub fn emit(cli: &Cli, outcome: Outcome, elapsed: Duration) -> anyhow::Result<()> {
    let name = cli.command.name();
    let (body, ext) = match cli.global.format {
        Format::Json => (outcome.json, outcome.json_ext),
        Format::Csv => (outcome.csv, "csv"),
    };
    let mut parameters = cli.command.parameters();
    if let (Some(s), Some(obj)) = (outcome.seed, parameters.as_object_mut()) {
        obj.insert("seed".into(), s.value.into());
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let file = format!("{name}.{ext}");
    let mut manifest = RunManifest {
        command: name.into(),
        parameters,
        argv: reproducing_argv(outcome.seed),
        seed: outcome.seed,
        version: VERSION.into(),
        format: cli.global.format,
        threads: rayon::current_num_threads(),
        wall_time_seconds: elapsed.as_secs_f64(),
        outputs: vec![OutputDigest {
            file: None,
            bytes: body.len(),
            sha256: sha256_hex(body.as_bytes()),
        }],
        warnings: outcome.warnings,
    };
    match &cli.global.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(&file), &body)?;
            manifest.outputs[0].file = Some(file);
            let text = serde_json::to_string_pretty(&manifest)?;
            fs::write(dir.join("manifest.json"), text + "\n")?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            eprintln!("{}", serde_json::to_string(&manifest)?);
        }
    }
    Ok(())
}
