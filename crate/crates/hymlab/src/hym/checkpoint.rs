//! Field checkpoints: a one-line JSON header describing the grid, level, and
//! payload layout, followed by the raw matrix data as little-endian f64
//! (re, im) pairs, row-major within each node, nodes in grid order.

use super::HermitianMetricField;
use crate::geometry::{DomainGrid, DomainShape};
use crate::linalg::{C64, CMat};
use crate::quantization::BasisTag;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const FORMAT: &str = "hymlab-field-v1";
const PAYLOAD: &str = "c64-le-rowmajor";

#[derive(Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub(crate) enum GridDesc {
    Annulus { r0: f64, n_rho: usize, n_theta: usize },
    Disc { n_side: usize },
    Biannulus { r0: f64, n_rho: usize, n_theta: usize },
}

impl GridDesc {
    pub(crate) fn of(grid: &DomainGrid) -> GridDesc {
        let f = grid.factor(0);
        match grid.shape {
            DomainShape::Annulus { r0 } => GridDesc::Annulus {
                r0,
                n_rho: f.n0,
                n_theta: f.n1,
            },
            DomainShape::Disc => GridDesc::Disc { n_side: f.n0 },
            DomainShape::Biannulus { r0 } => GridDesc::Biannulus {
                r0,
                n_rho: f.n0,
                n_theta: f.n1,
            },
        }
    }

    pub(crate) fn build(&self) -> Result<DomainGrid> {
        match *self {
            GridDesc::Annulus { r0, n_rho, n_theta } => {
                DomainGrid::annulus(r0, n_rho, n_theta)
            }
            GridDesc::Disc { n_side } => DomainGrid::disc(n_side),
            GridDesc::Biannulus { r0, n_rho, n_theta } => {
                DomainGrid::bi_annulus(r0, n_rho, n_theta)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    k: usize,
    tag: String,
    grid: GridDesc,
    n_nodes: usize,
    dim: usize,
    payload: String,
}

pub fn save_checkpoint(field: &HermitianMetricField, path: &Path) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        k: field.k,
        tag: match field.tag {
            BasisTag::Primal => "primal".into(),
            BasisTag::Dual => "dual".into(),
        },
        grid: GridDesc::of(&field.grid),
        n_nodes: field.grid.n_nodes(),
        dim: field.dim(),
        payload: PAYLOAD.into(),
    };
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for m in &field.values {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn read_header_line(input: &mut impl Read) -> Result<Vec<u8>> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        input.read_exact(&mut byte).map_err(|_| {
            Error::Mismatch("checkpoint header is not newline-terminated".into())
        })?;
        if byte[0] == b'\n' {
            return Ok(line);
        }
        line.push(byte[0]);
        if line.len() > 1 << 16 {
            return Err(Error::Mismatch("checkpoint header too long".into()));
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<HermitianMetricField> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let header_line = read_header_line(&mut input)?;
    let mut byte = [0u8; 1];
    let header: Header = serde_json::from_slice(&header_line)?;
    if header.format != FORMAT {
        return Err(Error::Mismatch(format!(
            "unknown checkpoint format {:?}",
            header.format
        )));
    }
    if header.payload != PAYLOAD {
        return Err(Error::Mismatch(format!(
            "unknown payload layout {:?}",
            header.payload
        )));
    }
    let tag = match header.tag.as_str() {
        "primal" => BasisTag::Primal,
        "dual" => BasisTag::Dual,
        other => {
            return Err(Error::Mismatch(format!("unknown basis tag {other:?}")));
        }
    };
    let grid = header.grid.build()?;
    if grid.n_nodes() != header.n_nodes {
        return Err(Error::Mismatch(format!(
            "grid rebuilds to {} nodes, header claims {}",
            grid.n_nodes(),
            header.n_nodes
        )));
    }
    if header.dim != header.k + 1 {
        return Err(Error::Mismatch(format!(
            "matrix dimension {} does not match level {}",
            header.dim, header.k
        )));
    }
    let dim = header.dim;
    let per_node = dim * dim * 16;
    let mut payload = vec![0u8; header.n_nodes * per_node];
    input.read_exact(&mut payload).map_err(|_| {
        Error::Mismatch("checkpoint payload shorter than the header claims".into())
    })?;
    if input.read(&mut byte)? != 0 {
        return Err(Error::Mismatch(
            "checkpoint has trailing bytes after the payload".into(),
        ));
    }
    let values = (0..header.n_nodes)
        .map(|p| {
            let base = p * per_node;
            CMat::from_fn(dim, dim, |r, c| {
                let off = base + (r * dim + c) * 16;
                let re = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
                let im =
                    f64::from_le_bytes(payload[off + 8..off + 16].try_into().unwrap());
                C64::new(re, im)
            })
        })
        .collect();
    Ok(HermitianMetricField {
        k: header.k,
        grid,
        values,
        tag,
    })
}
