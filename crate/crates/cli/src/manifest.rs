//! Run manifests: enough to repeat a run exactly.

use std::path::Path;

use anyhow::{bail, Context, Result};
use franson_core::kv::KvFile;

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Option<KvFile>,
}

impl RunManifest {
    pub fn new(subcommand: &str, args: &[String]) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            args: args.to_vec(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: None,
        }
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("tool_version", env!("CARGO_PKG_VERSION"));
        kv.set("subcommand", &self.subcommand);
        if let Some(seed) = self.seed {
            kv.set("seed", seed);
        }
        kv.set("inputs", self.inputs.join(","));
        kv.set("outputs", self.outputs.join(","));
        kv.set("args", self.args.len());
        for (i, a) in self.args.iter().enumerate() {
            kv.set(&format!("arg.{i}"), a);
        }
        if let Some(c) = &self.config {
            for (k, v) in c.iter() {
                kv.set(&format!("config.{k}"), v);
            }
        }
        kv
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.to_kv().write(&dir.join(FILE_NAME))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = KvFile::read(path)?;
        let get = |k: &str| kv.get(k).with_context(|| format!("{}: missing {k}", path.display()));
        let n: usize = get("args")?.parse().context("bad argument count")?;
        let args = (0..n)
            .map(|i| get(&format!("arg.{i}")).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        let list = |k: &str| -> Vec<String> {
            kv.get(k)
                .filter(|s| !s.is_empty())
                .map(|s| s.split(',').map(str::to_string).collect())
                .unwrap_or_default()
        };
        let mut config = KvFile::new();
        for (k, v) in kv.iter() {
            if let Some(key) = k.strip_prefix("config.") {
                config.set(key, v);
            }
        }
        let has_config = config.iter().next().is_some();
        Ok(RunManifest {
            subcommand: get("subcommand")?.to_string(),
            seed: kv.get("seed").map(str::parse).transpose().context("bad seed")?,
            inputs: list("inputs"),
            outputs: list("outputs"),
            config: has_config.then_some(config),
            args,
        })
    }

    /// Recorded arguments, with the output location replaced by `out`.
    pub fn replay_args(&self, out: Option<&Path>) -> Result<Vec<String>> {
        let mut args = self.args.clone();
        let Some(out) = out else {
            return Ok(args);
        };
        let out = out.display().to_string();
        if let Some(i) = args.iter().position(|a| a == "--out") {
            if i + 1 >= args.len() {
                bail!("recorded --out has no value");
            }
            args[i + 1] = out;
        } else if let Some(a) = args.iter_mut().find(|a| a.starts_with("--out=")) {
            *a = format!("--out={out}");
        } else {
            args.push("--out".into());
            args.push(out);
        }
        Ok(args)
    }
}
