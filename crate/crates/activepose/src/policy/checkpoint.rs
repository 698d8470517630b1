//! Parameter checkpoints: a versioned flat binary of shape-tagged arrays
//! plus a human-readable text manifest alongside.

use std::io::{self, Read, Write};
use std::path::Path;

use super::net::{Layout, NetConfig, PolicyParams};

const MAGIC: &[u8; 8] = b"APCKPT1\n";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub schedule_step: u64,
    pub seed: u64,
}

fn write_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> io::Result<()> {
    let cfg = &ckpt.params.cfg;
    let layout = Layout::new(cfg);
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    for v in [
        cfg.map_h,
        cfg.map_w,
        cfg.map_c,
        cfg.conv1_out,
        cfg.conv2_out,
        cfg.hidden1,
        cfg.hidden2,
        cfg.extra_dim,
    ] {
        write_u64(&mut f, v as u64)?;
    }
    write_u64(&mut f, ckpt.schedule_step)?;
    write_u64(&mut f, ckpt.seed)?;
    write_u64(&mut f, layout.tensors.len() as u64)?;
    for (name, shape, range) in &layout.tensors {
        write_u64(&mut f, name.len() as u64)?;
        f.write_all(name.as_bytes())?;
        write_u64(&mut f, shape.len() as u64)?;
        for &d in shape {
            write_u64(&mut f, d as u64)?;
        }
        for &v in &ckpt.params.data[range.clone()] {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    drop(f);

    let mut manifest = String::new();
    manifest.push_str("activepose-checkpoint-v1\n");
    manifest.push_str(&format!("schedule_step {}\n", ckpt.schedule_step));
    manifest.push_str(&format!("seed {}\n", ckpt.seed));
    for (name, shape, _) in &layout.tensors {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("tensor {name} {}\n", dims.join("x")));
    }
    std::fs::write(path.with_extension("manifest"), manifest)
}

pub fn load_checkpoint(path: &Path) -> io::Result<Checkpoint> {
    let mut f = io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad checkpoint magic"));
    }
    let mut dims = [0u64; 8];
    for d in &mut dims {
        *d = read_u64(&mut f)?;
    }
    let cfg = NetConfig {
        map_h: dims[0] as usize,
        map_w: dims[1] as usize,
        map_c: dims[2] as usize,
        conv1_out: dims[3] as usize,
        conv2_out: dims[4] as usize,
        hidden1: dims[5] as usize,
        hidden2: dims[6] as usize,
        extra_dim: dims[7] as usize,
    };
    let schedule_step = read_u64(&mut f)?;
    let seed = read_u64(&mut f)?;
    let n_tensors = read_u64(&mut f)? as usize;
    let layout = Layout::new(&cfg);
    if n_tensors != layout.tensors.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "tensor count mismatch"));
    }
    let mut data = vec![0.0f64; layout.total];
    for (name, shape, range) in &layout.tensors {
        let name_len = read_u64(&mut f)? as usize;
        let mut nb = vec![0u8; name_len];
        f.read_exact(&mut nb)?;
        if nb != name.as_bytes() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "tensor order mismatch"));
        }
        let ndim = read_u64(&mut f)? as usize;
        let mut got = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            got.push(read_u64(&mut f)? as usize);
        }
        if &got != shape {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "tensor shape mismatch"));
        }
        for v in &mut data[range.clone()] {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    Ok(Checkpoint {
        params: PolicyParams { cfg, data },
        schedule_step,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let params = PolicyParams::init(NetConfig::tiny(), 77);
        let ckpt = Checkpoint {
            params: params.clone(),
            schedule_step: 1234,
            seed: 9,
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.schedule_step, 1234);
        assert_eq!(back.seed, 9);
        let manifest = std::fs::read_to_string(path.with_extension("manifest")).unwrap();
        assert!(manifest.starts_with("activepose-checkpoint-v1"));
        assert!(manifest.contains("tensor conv1_w"));
    }

    #[test]
    fn rejects_corrupt_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTACKPT").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
