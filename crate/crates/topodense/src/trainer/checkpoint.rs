//! Plain-text model checkpoints.
//!
//! Format (whitespace separated, one record per line):
//!
//! ```text
//! topodense-checkpoint v1
//! input_dim 2
//! hidden_layers 16 16
//! latent_dim 8
//! num_classes 3
//! leaky_relu_slope 0.1
//! tensor phi.0.weight 16 2
//! <16 rows of 2 values>
//! tensor phi.0.bias 1 16
//! ...
//! tensor gamma.weight 3 8
//! tensor gamma.bias 1 3
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! load immediately after a save restores bit-identical parameters. Momentum
//! buffers are optimizer state and are not stored.

use std::io::{BufRead, Write};

use super::mlp::{Linear, ModelConfig, ModelState};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "v1";

pub fn save_model<W: Write>(model: &ModelState, mut w: W) -> Result<()> {
    let cfg = model.config();
    writeln!(w, "topodense-checkpoint {CHECKPOINT_VERSION}")?;
    writeln!(w, "input_dim {}", cfg.input_dim)?;
    let hidden: Vec<String> = cfg.hidden_layers.iter().map(|h| h.to_string()).collect();
    writeln!(w, "hidden_layers {}", hidden.join(" "))?;
    writeln!(w, "latent_dim {}", cfg.latent_dim)?;
    writeln!(w, "num_classes {}", cfg.num_classes)?;
    writeln!(w, "leaky_relu_slope {}", cfg.leaky_relu_slope)?;
    for (k, layer) in model.phi.iter().enumerate() {
        write_tensor(&mut w, &format!("phi.{k}.weight"), layer.out_dim, layer.in_dim, &layer.weight)?;
        write_tensor(&mut w, &format!("phi.{k}.bias"), 1, layer.out_dim, &layer.bias)?;
    }
    write_tensor(
        &mut w,
        "gamma.weight",
        model.gamma.out_dim,
        model.gamma.in_dim,
        &model.gamma.weight,
    )?;
    write_tensor(&mut w, "gamma.bias", 1, model.gamma.out_dim, &model.gamma.bias)?;
    writeln!(w, "end")?;
    Ok(())
}

fn write_tensor<W: Write>(w: &mut W, name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    writeln!(w, "tensor {name} {rows} {cols}")?;
    for r in 0..rows {
        let row: Vec<String> = data[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

struct Lines<B> {
    inner: B,
    number: usize,
}

impl<B: BufRead> Lines<B> {
    fn next_line(&mut self) -> Result<String> {
        let mut line = String::new();
        loop {
            line.clear();
            let n = self.inner.read_line(&mut line)?;
            self.number += 1;
            if n == 0 {
                return Err(Error::invalid_input(format!(
                    "checkpoint truncated at line {}",
                    self.number
                )));
            }
            if !line.trim().is_empty() {
                return Ok(line.trim().to_string());
            }
        }
    }
}

fn parse_scalar_line<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let mut it = line.split_whitespace();
    let got = it.next().unwrap_or_default();
    if got != key {
        return Err(Error::invalid_input(format!("expected `{key}`, found `{got}`")));
    }
    it.next()
        .ok_or_else(|| Error::invalid_input(format!("`{key}` is missing its value")))?
        .parse()
        .map_err(|_| Error::invalid_input(format!("`{key}` has an unparseable value")))
}

pub fn load_model<B: BufRead>(reader: B) -> Result<ModelState> {
    let mut lines = Lines {
        inner: reader,
        number: 0,
    };
    let header = lines.next_line()?;
    if header != format!("topodense-checkpoint {CHECKPOINT_VERSION}") {
        return Err(Error::invalid_input(format!(
            "unsupported checkpoint header `{header}`"
        )));
    }
    let input_dim: usize = parse_scalar_line(&lines.next_line()?, "input_dim")?;
    let hidden_line = lines.next_line()?;
    let mut hidden_it = hidden_line.split_whitespace();
    if hidden_it.next() != Some("hidden_layers") {
        return Err(Error::invalid_input("expected `hidden_layers`"));
    }
    let hidden_layers: Vec<usize> = hidden_it
        .map(|t| {
            t.parse()
                .map_err(|_| Error::invalid_input("hidden_layers has an unparseable width"))
        })
        .collect::<Result<_>>()?;
    let latent_dim: usize = parse_scalar_line(&lines.next_line()?, "latent_dim")?;
    let num_classes: usize = parse_scalar_line(&lines.next_line()?, "num_classes")?;
    let leaky_relu_slope: f64 = parse_scalar_line(&lines.next_line()?, "leaky_relu_slope")?;
    let config = ModelConfig {
        input_dim,
        hidden_layers,
        latent_dim,
        num_classes,
        leaky_relu_slope,
    };

    let mut phi = Vec::new();
    let mut gamma: Option<Linear> = None;
    loop {
        let line = lines.next_line()?;
        if line == "end" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "tensor" {
            return Err(Error::invalid_input(format!("malformed tensor header `{line}`")));
        }
        let name = parts[1];
        let rows: usize = parts[2]
            .parse()
            .map_err(|_| Error::invalid_input("bad tensor row count"))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| Error::invalid_input("bad tensor column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines.next_line()?;
            for tok in row.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::invalid_input(format!("bad value in tensor {name}")))?;
                data.push(v);
            }
        }
        if data.len() != rows * cols {
            return Err(Error::invalid_input(format!(
                "tensor {name} has {} values, expected {}",
                data.len(),
                rows * cols
            )));
        }
        if let Some(rest) = name.strip_prefix("phi.") {
            let (idx_s, kind) = rest
                .split_once('.')
                .ok_or_else(|| Error::invalid_input(format!("malformed tensor name {name}")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| Error::invalid_input(format!("malformed tensor name {name}")))?;
            match kind {
                "weight" => {
                    if idx != phi.len() {
                        return Err(Error::invalid_input("extractor layers out of order"));
                    }
                    phi.push(Linear {
                        in_dim: cols,
                        out_dim: rows,
                        weight: data,
                        bias: Vec::new(),
                    });
                }
                "bias" => {
                    let layer: &mut Linear = phi
                        .get_mut(idx)
                        .ok_or_else(|| Error::invalid_input("bias precedes its weight"))?;
                    layer.bias = data;
                }
                other => {
                    return Err(Error::invalid_input(format!("unknown tensor kind {other}")));
                }
            }
        } else if name == "gamma.weight" {
            gamma = Some(Linear {
                in_dim: cols,
                out_dim: rows,
                weight: data,
                bias: Vec::new(),
            });
        } else if name == "gamma.bias" {
            let g = gamma
                .as_mut()
                .ok_or_else(|| Error::invalid_input("gamma.bias precedes gamma.weight"))?;
            g.bias = data;
        } else {
            return Err(Error::invalid_input(format!("unknown tensor {name}")));
        }
    }
    let gamma = gamma.ok_or_else(|| Error::invalid_input("checkpoint lacks a classifier"))?;
    ModelState::from_parameters(config, phi, gamma)
}
