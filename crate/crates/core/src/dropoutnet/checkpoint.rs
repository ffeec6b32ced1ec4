//! Checkpoint files: JSON holding the network spec and every tensor.
//! Floats are written in shortest round-trip form, so a write/read cycle
//! reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkParams;
use crate::{Error, Result};

const FORMAT: &str = "ugrasp-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    params: NetworkParams,
}

pub fn checkpoint_to_string(params: &NetworkParams) -> String {
    let ck = Checkpoint { format: FORMAT.into(), version: VERSION, params: params.clone() };
    serde_json::to_string(&ck).expect("checkpoint serializes")
}

pub fn checkpoint_from_str(text: &str) -> std::result::Result<NetworkParams, String> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(format!("unsupported checkpoint {} v{}", ck.format, ck.version));
    }
    ck.params.validate().map_err(|e| e.to_string())?;
    Ok(ck.params)
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &NetworkParams) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text).map_err(|m| Error::format(path, m))
}

/// Per-epoch losses as `epoch,loss` lines with a header.
pub fn write_loss_log(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        s.push_str(&format!("{i},{l:?}\n"));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dropoutnet::NetworkSpec;

    #[test]
    fn round_trip_is_bitwise() {
        let p = NetworkParams::init(&NetworkSpec::hourglass(8, 0.2), 17).unwrap();
        let back = checkpoint_from_str(&checkpoint_to_string(&p)).unwrap();
        assert_eq!(p, back);
        let bits = |p: &NetworkParams| -> Vec<u64> {
            p.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&p), bits(&back));
    }

    #[test]
    fn rejects_garbage() {
        assert!(checkpoint_from_str("{}").is_err());
        assert!(checkpoint_from_str("not json").is_err());
    }
}
