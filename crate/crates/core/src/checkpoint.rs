//! Model checkpoints: little-endian binary with the canonical architecture
//! text embedded, then every parameter tensor (running statistics included)
//! in graph order as raw 32-bit floats. Round-trips bit-exactly for f32
//! graphs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Scalar;
use crate::zoo::{compile, parse_arch};

const MAGIC: &[u8; 4] = b"STNT";
const VERSION: u32 = 1;

pub fn save_checkpoint<T: Scalar>(graph: &Graph<T>, path: &Path) -> Result<()> {
    let arch = graph.arch_text().ok_or_else(|| {
        Error::CheckpointMismatch("graph carries no architecture description".into())
    })?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(arch.len() as u32)?;
    w.write_all(arch.as_bytes())?;
    w.write_u32::<LittleEndian>(graph.nodes().len() as u32)?;
    for node in graph.nodes() {
        for p in node.params() {
            w.write_u32::<LittleEndian>(p.value.rank() as u32)?;
            for &d in p.value.shape() {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in p.value.data() {
                w.write_f32::<LittleEndian>(v.to_f32())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn map_eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::CheckpointMismatch("truncated file".into())
    } else {
        Error::Io(e)
    }
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Graph<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(map_eof)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>().map_err(map_eof)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let arch_len = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let mut arch_bytes = vec![0u8; arch_len];
    r.read_exact(&mut arch_bytes).map_err(map_eof)?;
    let arch = String::from_utf8(arch_bytes)
        .map_err(|_| Error::CheckpointMismatch("architecture text is not UTF-8".into()))?;
    let desc = parse_arch(&arch)?;
    let mut graph: Graph<T> = compile(&desc, 0)?;

    let node_count = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    if node_count != graph.nodes().len() {
        return Err(Error::CheckpointMismatch(format!(
            "node count {} does not match the architecture's {}",
            node_count,
            graph.nodes().len()
        )));
    }
    for idx in 0..graph.nodes().len() {
        let node_name = graph.node(idx).name().to_string();
        for pi in 0..graph.node(idx).params().len() {
            let expected_shape = graph.node(idx).params()[pi].value.shape().to_vec();
            let rank = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
            if rank != expected_shape.len() {
                return Err(Error::CheckpointMismatch(format!(
                    "parameter rank {} at node `{node_name}` does not match expected {:?}",
                    rank, expected_shape
                )));
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.read_u32::<LittleEndian>().map_err(map_eof)? as usize);
            }
            if dims != expected_shape {
                return Err(Error::CheckpointMismatch(format!(
                    "parameter shape {dims:?} at node `{node_name}` does not match expected {expected_shape:?}"
                )));
            }
            let len: usize = dims.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(T::from_f32(r.read_f32::<LittleEndian>().map_err(map_eof)?));
            }
            let param = &mut graph.node_mut(idx).params_mut()[pi];
            param.value.data_mut().copy_from_slice(&data);
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CheckpointMismatch(
            "trailing bytes after the last parameter".into(),
        ));
    }
    Ok(graph)
}
