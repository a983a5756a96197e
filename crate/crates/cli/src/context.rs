//! Config loading, common settings and output files.

use std::fmt::Display;
use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tpdo_core::grid::{FrequencyWindow, TorusGrid};

/// Exit 2 for `Usage`, 1 for `Run`.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(String),
}

impl From<tpdo_core::Error> for Failure {
    fn from(e: tpdo_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

pub fn usage<E: Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

/// Library results whose errors stem from the config (presets, sizes).
pub trait ConfigResult<T> {
    fn config(self, what: &str) -> Result<T, Failure>;
}

impl<T> ConfigResult<T> for tpdo_core::Result<T> {
    fn config(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(format!("{what}: {e}")))
    }
}

pub struct Overrides {
    pub command: &'static str,
    pub config: PathBuf,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub struct Verdict {
    pub pass: bool,
    pub summary: String,
    /// Printed to stderr on failure.
    pub diagnostics: Vec<String>,
}

const COMMON_KEYS: [&str; 6] = ["n", "N", "K", "seed", "output_dir", "threads"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Common {
    n: Option<usize>,
    #[serde(rename = "N")]
    points: Option<usize>,
    #[serde(rename = "K")]
    cutoff: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    threads: Option<usize>,
}

/// Per-command defaults for the common fields.
pub struct Defaults {
    pub dim: usize,
    pub points: usize,
    pub cutoff: usize,
}

pub struct Context {
    pub dim: usize,
    pub points: usize,
    pub cutoff: usize,
    pub seed: u64,
    pub out: Output,
}

impl Context {
    pub fn grid(&self) -> Result<TorusGrid, Failure> {
        TorusGrid::new(self.dim, self.points).config("grid")
    }

    /// Window -K..K-1, which must fit the grid.
    pub fn window(&self) -> Result<FrequencyWindow, Failure> {
        let w = FrequencyWindow::new(self.dim, self.cutoff).config("window")?;
        w.check_grid(&self.grid()?).config("window")?;
        Ok(w)
    }
}

/// Reads the config, splits common fields from command fields, applies
/// command-line overrides, sizes the thread pool and creates the output
/// directory.
pub fn setup<T: DeserializeOwned>(o: &Overrides, defaults: Defaults) -> Result<(Context, T), Failure> {
    let text = fs::read_to_string(&o.config).map_err(|e| Failure::Usage(format!("{}: {e}", o.config.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", o.config.display())))?;
    let Value::Object(mut fields) = value else {
        return Err(Failure::Usage("config must be a JSON object".into()));
    };
    let mut common = Map::new();
    for key in COMMON_KEYS {
        if let Some(v) = fields.remove(key) {
            common.insert(key.into(), v);
        }
    }
    let common: Common = serde_json::from_value(Value::Object(common)).map_err(|e| usage(format!("config: {e}")))?;
    let specific: T = serde_json::from_value(Value::Object(fields)).map_err(|e| usage(format!("config: {e}")))?;

    if let Some(k) = o.threads.or(common.threads) {
        if k == 0 {
            return Err(Failure::Usage("threads must be positive".into()));
        }
        // a second build only fails when a pool already exists; keep that one
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let dir = o
        .output
        .clone()
        .or(common.output_dir)
        .unwrap_or_else(|| PathBuf::from("tpdo-out").join(o.command));
    let ctx = Context {
        dim: common.n.unwrap_or(defaults.dim),
        points: common.points.unwrap_or(defaults.points),
        cutoff: common.cutoff.unwrap_or(defaults.cutoff),
        seed: o.seed.or(common.seed).unwrap_or(0),
        out: Output::create(dir)?,
    };
    Ok((ctx, specific))
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text)
    }

    pub fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes through a library exporter.
    pub fn export(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> tpdo_core::Result<()>) -> Result<(), Failure> {
        let mut buf = vec![];
        f(&mut buf)?;
        self.write(name, buf)
    }
}

/// Multi-index or lattice point as `a;b;c`.
pub fn joined<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}
