//! Deterministic checkpoint format: a text manifest (layer name, shape,
//! dtype, byte offset) followed by raw little-endian f32 data, in one file.
//! Identical parameters always serialize to identical bytes, so checkpoints
//! are diffable.

use std::io::Write;
use std::path::Path;

use super::graph::TensorData;
use super::net::{ConvLayer, FlowNetwork};
use super::{NetError, Result};

const MAGIC: &str = "viewsynth-checkpoint v1";

fn io_err(path: &Path, source: std::io::Error) -> NetError {
    NetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn bad(path: &Path, detail: impl Into<String>) -> NetError {
    NetError::MalformedCheckpoint {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Serialize a network to `path`.
pub fn save_checkpoint(net: &FlowNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let names = net.param_names();
    let tensors = net.param_tensors();

    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    manifest.push_str(&format!("in_channels = {}\n", net.in_channels()));
    manifest.push_str(&format!("tensors = {}\n", tensors.len()));
    let mut offset = 0usize;
    for (name, t) in names.iter().zip(&tensors) {
        let shape = t
            .shape()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        manifest.push_str(&format!("tensor {name} f32 {shape} {offset}\n"));
        offset += t.len() * 4;
    }
    manifest.push_str(&format!("data {offset}\n"));

    let mut bytes = Vec::with_capacity(manifest.len() + offset);
    bytes.extend_from_slice(manifest.as_bytes());
    for t in &tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&bytes).map_err(|e| io_err(path, e))
}

/// Load a network previously written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FlowNetwork> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;

    // The manifest is the leading text region, terminated by the `data` line.
    let mut line_start = 0usize;
    let mut lines: Vec<&str> = Vec::new();
    let mut data_start = None;
    while line_start < bytes.len() {
        let rel_end = bytes[line_start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad(path, "unterminated manifest"))?;
        let line = std::str::from_utf8(&bytes[line_start..line_start + rel_end])
            .map_err(|_| bad(path, "manifest is not utf-8"))?;
        lines.push(line);
        line_start += rel_end + 1;
        if line.starts_with("data ") {
            data_start = Some(line_start);
            break;
        }
    }
    let data_start = data_start.ok_or_else(|| bad(path, "missing data marker"))?;

    if lines.first() != Some(&MAGIC) {
        return Err(bad(path, "bad magic"));
    }
    let mut in_channels = None;
    let mut entries: Vec<(String, Vec<usize>, usize)> = Vec::new();
    for line in &lines[1..] {
        if let Some(rest) = line.strip_prefix("in_channels = ") {
            in_channels = Some(rest.parse::<usize>().map_err(|_| bad(path, "bad in_channels"))?);
        } else if let Some(rest) = line.strip_prefix("tensor ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "f32" {
                return Err(bad(path, format!("bad tensor line {line:?}")));
            }
            let shape = parts[2]
                .split(',')
                .map(|s| s.parse::<usize>().map_err(|_| bad(path, "bad shape")))
                .collect::<Result<Vec<_>>>()?;
            let offset = parts[3].parse::<usize>().map_err(|_| bad(path, "bad offset"))?;
            entries.push((parts[0].to_string(), shape, offset));
        }
    }
    let in_channels = in_channels.ok_or_else(|| bad(path, "missing in_channels"))?;
    if entries.len() % 2 != 0 {
        return Err(bad(path, "expected weight/bias tensor pairs"));
    }

    let payload = &bytes[data_start..];
    let mut read_tensor = |shape: &[usize], offset: usize| -> Result<TensorData> {
        let n: usize = shape.iter().product();
        let end = offset + n * 4;
        if end > payload.len() {
            return Err(bad(path, "tensor data out of bounds"));
        }
        let data = payload[offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(TensorData::from_vec(shape, data))
    };

    let mut layers = Vec::with_capacity(entries.len() / 2);
    for pair in entries.chunks_exact(2) {
        let (wname, wshape, woff) = &pair[0];
        let (bname, bshape, boff) = &pair[1];
        let base = wname
            .strip_suffix(".weight")
            .ok_or_else(|| bad(path, format!("expected .weight tensor, got {wname}")))?;
        if bname != &format!("{base}.bias") {
            return Err(bad(path, format!("expected {base}.bias after {wname}")));
        }
        layers.push(ConvLayer {
            name: base.to_string(),
            weight: read_tensor(wshape, *woff)?,
            bias: read_tensor(bshape, *boff)?,
        });
    }
    FlowNetwork::from_layers(in_channels, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let net = FlowNetwork::new(3, 123);
        let dir = tempdir().unwrap();
        let p = dir.path().join("net.ckpt");
        save_checkpoint(&net, &p).unwrap();
        let back = load_checkpoint(&p).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_serialization_is_deterministic() {
        let net = FlowNetwork::new(1, 9);
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        save_checkpoint(&net, &p1).unwrap();
        save_checkpoint(&net, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let net = FlowNetwork::new(1, 9);
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.ckpt");
        save_checkpoint(&net, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 64]).unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(NetError::MalformedCheckpoint { .. })
        ));
    }
}
