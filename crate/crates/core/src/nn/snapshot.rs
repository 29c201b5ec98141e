//! Plain-text parameter snapshots.
//!
//! ```text
//! an2n-mlp 1
//! hidden relu
//! output tanh-scaled 2e0
//! widths 3 64 64 1
//! w <fan_out * fan_in values, row-major>
//! b <fan_out values>
//! ... one w/b pair per layer ...
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a load after a
//! save reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Dense, Mlp, OutputActivation};
use crate::error::{Error, Result};

const MAGIC: &str = "an2n-mlp 1";

pub fn encode(net: &Mlp) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    let hidden = match net.hidden_activation() {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    };
    writeln!(out, "hidden {hidden}").unwrap();
    match net.output_activation() {
        OutputActivation::Identity => writeln!(out, "output identity").unwrap(),
        OutputActivation::Tanh => writeln!(out, "output tanh").unwrap(),
        OutputActivation::ScaledTanh(b) => writeln!(out, "output tanh-scaled {b:e}").unwrap(),
    }
    let widths: Vec<String> = net.widths().iter().map(usize::to_string).collect();
    writeln!(out, "widths {}", widths.join(" ")).unwrap();
    for layer in net.layers() {
        out.push('w');
        for v in layer.weights.iter() {
            write!(out, " {v:e}").unwrap();
        }
        out.push_str("\nb");
        for v in layer.bias.iter() {
            write!(out, " {v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_err(reason: impl Into<String>) -> Error {
    Error::Parse { context: "mlp snapshot".into(), reason: reason.into() }
}

fn parse_values(line: &str, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(tag) {
        return Err(parse_err(format!("expected a `{tag}` line, found `{line}`")));
    }
    let values = parts
        .map(|p| p.parse::<f64>().map_err(|e| parse_err(format!("bad number `{p}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::shape("snapshot row", expected, values.len()));
    }
    Ok(values)
}

pub fn decode(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(format!("missing {what}")));

    if next("header")?.trim() != MAGIC {
        return Err(parse_err("unrecognized header"));
    }
    let hidden = match next("hidden activation")?.split_ascii_whitespace().collect::<Vec<_>>()[..] {
        ["hidden", "relu"] => Activation::Relu,
        ["hidden", "tanh"] => Activation::Tanh,
        ref other => return Err(parse_err(format!("bad hidden line {other:?}"))),
    };
    let output = match next("output activation")?.split_ascii_whitespace().collect::<Vec<_>>()[..] {
        ["output", "identity"] => OutputActivation::Identity,
        ["output", "tanh"] => OutputActivation::Tanh,
        ["output", "tanh-scaled", b] => {
            OutputActivation::ScaledTanh(b.parse().map_err(|e| parse_err(format!("bad bound `{b}`: {e}")))?)
        }
        ref other => return Err(parse_err(format!("bad output line {other:?}"))),
    };
    let widths_line = next("widths")?;
    let mut parts = widths_line.split_ascii_whitespace();
    if parts.next() != Some("widths") {
        return Err(parse_err("expected widths line"));
    }
    let widths = parts
        .map(|p| p.parse::<usize>().map_err(|e| parse_err(format!("bad width `{p}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 2 {
        return Err(parse_err("need at least two widths"));
    }

    let mut layers = Vec::with_capacity(widths.len() - 1);
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let w = parse_values(next("weights")?, "w", fan_in * fan_out)?;
        let b = parse_values(next("bias")?, "b", fan_out)?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((fan_out, fan_in), w).expect("length checked"),
            bias: Array1::from(b),
        });
    }
    if let Some(extra) = lines.next() {
        return Err(parse_err(format!("trailing content `{extra}`")));
    }
    Mlp::from_layers(layers, hidden, output)
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(encode(net).as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Mlp> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    decode(&text)
}
