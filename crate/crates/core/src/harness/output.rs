//! CSV and manifest emission. Numbers use the C `%.12e` layout, text is
//! UTF-8 with LF line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dpp::ValueGrid;
use crate::error::Result;
use crate::game::{GameTrace, StepSample};

/// `printf("%.12e", v)`: at least two exponent digits, explicit sign.
pub fn fmt_e12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Row-oriented CSV text builder.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

pub enum Cell<'a> {
    Num(f64),
    Int(i64),
    Text(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Self::default();
        csv.text.push_str(&header.join(","));
        csv.text.push('\n');
        csv
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Num(v) => self.text.push_str(&fmt_e12(*v)),
                Cell::Int(v) => write!(self.text, "{v}").expect("write to string"),
                Cell::Text(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|d| format!("{prefix}{d}")).collect()
}

/// `level,t,x1..xn,value` for every node and level.
pub fn grid_csv(grid: &ValueGrid) -> String {
    let n = grid.params().n;
    let names = axis_names("x", n);
    let mut header = vec!["level", "t"];
    header.extend(names.iter().map(String::as_str));
    header.push("value");
    let mut csv = Csv::new(&header);
    let mut cells = Vec::with_capacity(n + 3);
    grid.for_each_value(|j, t, x, v| {
        cells.clear();
        cells.push(Cell::Int(j));
        cells.push(Cell::Num(t));
        cells.extend(x.iter().map(|&c| Cell::Num(c)));
        cells.push(Cell::Num(v));
        csv.row(&cells);
    });
    csv.finish()
}

/// `sample,tau,exit_x1..,exit_t,payoff`.
pub fn traces_csv(traces: &[GameTrace]) -> String {
    let n = traces.first().map_or(0, |t| t.exit.x.len());
    let names = axis_names("exit_x", n);
    let mut header = vec!["sample", "tau"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["exit_t", "payoff"]);
    let mut csv = Csv::new(&header);
    for (i, tr) in traces.iter().enumerate() {
        let mut cells = vec![Cell::Int(i as i64), Cell::Int(tr.tau as i64)];
        cells.extend(tr.exit.x.iter().map(|&c| Cell::Num(c)));
        cells.push(Cell::Num(tr.exit.t));
        cells.push(Cell::Num(tr.payoff));
        csv.row(&cells);
    }
    csv.finish()
}

/// `sample,outcome,dx1..,square`.
pub fn steps_csv(samples: &[StepSample]) -> String {
    let n = samples.first().map_or(0, |s| s.displacement.len());
    let names = axis_names("dx", n);
    let mut header = vec!["sample", "outcome"];
    header.extend(names.iter().map(String::as_str));
    header.push("square");
    let mut csv = Csv::new(&header);
    for (i, s) in samples.iter().enumerate() {
        let mut cells = vec![Cell::Int(i as i64), Cell::Text(s.outcome.as_str())];
        cells.extend(s.displacement.iter().map(|&c| Cell::Num(c)));
        cells.push(Cell::Num(s.displacement.iter().map(|v| v * v).sum()));
        csv.row(&cells);
    }
    csv.finish()
}

/// Everything needed to reproduce and audit a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub stage_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self { command: command.into(), config_hash, seed, versions, ..Self::default() }
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.stage_seconds.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }

    /// Writes `files` into `dir` and the manifest next to them as `manifest.json`.
    pub fn write(&mut self, dir: &Path, files: &[(&str, String)]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in files {
            std::fs::write(dir.join(name), content)?;
            self.outputs.push((*name).to_string());
        }
        self.outputs.push("manifest.json".into());
        std::fs::write(dir.join("manifest.json"), json_text(self)?)?;
        Ok(())
    }
}

/// Pretty printer that writes every float as `%.12e`.
struct E12Formatter<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            self.0.$name(w)
        }
    )*};
}

impl serde_json::ser::Formatter for E12Formatter<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(fmt_e12(value).as_bytes())
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    delegate!(begin_array, end_array, end_array_value, begin_object, end_object, begin_object_value, end_object_value);
}

/// Pretty JSON with `%.12e` floats and a trailing newline.
pub fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, E12Formatter(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}
