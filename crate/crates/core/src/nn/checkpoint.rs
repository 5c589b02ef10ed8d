//! Binary network container.
//!
//! ```text
//! bytes 0..8    magic "MIANET01"
//! u32 LE        length L of the spec header
//! L bytes       NetworkSpec as UTF-8 JSON
//! u64 LE        parameter count P
//! P x f64 LE    parameters in layer order: weights (row-major out x in), then bias
//! ```

use std::io::{Read, Write};

use super::{Dense, Network, NetworkSpec};
use crate::error::{Error, Result};

pub const NETWORK_MAGIC: &[u8; 8] = b"MIANET01";

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Checkpoint(reason.into())
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<network stream>", e)
}

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(net.spec()).map_err(|e| fmt_err(e.to_string()))?;
    w.write_all(NETWORK_MAGIC).map_err(io_err)?;
    w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&header).map_err(io_err)?;
    w.write_all(&(net.parameter_count() as u64).to_le_bytes())
        .map_err(io_err)?;
    for p in net.parameters() {
        w.write_all(&p.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| fmt_err(format!("truncated network container ({what}): {e}")))
}

pub fn read_network<R: Read>(mut r: R) -> Result<Network> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != NETWORK_MAGIC {
        return Err(fmt_err("not a network container (bad magic)"));
    }
    let mut len = [0u8; 4];
    read_exact(&mut r, &mut len, "header length")?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    read_exact(&mut r, &mut header, "header")?;
    let spec: NetworkSpec =
        serde_json::from_slice(&header).map_err(|e| fmt_err(format!("bad spec header: {e}")))?;
    spec.validate()?;

    let mut count = [0u8; 8];
    read_exact(&mut r, &mut count, "parameter count")?;
    let count = u64::from_le_bytes(count) as usize;
    let expected: usize = spec.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if count != expected {
        return Err(fmt_err(format!(
            "parameter count {count} does not match spec ({expected})"
        )));
    }

    let mut next = || -> Result<f64> {
        let mut b = [0u8; 8];
        read_exact(&mut r, &mut b, "parameters")?;
        Ok(f64::from_le_bytes(b))
    };
    let mut layers = Vec::with_capacity(spec.depth());
    for w in spec.layer_sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = (0..n_in * n_out).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let bias = (0..n_out).map(|_| next()).collect::<Result<Vec<_>>>()?;
        layers.push(Dense {
            n_in,
            n_out,
            weights,
            bias,
        });
    }
    Network::from_layers(spec, layers)
}
