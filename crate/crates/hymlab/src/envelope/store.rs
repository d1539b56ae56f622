//! Potential persistence: a one-line JSON header describing both grids and
//! the row layout, followed by the interior values and then the boundary
//! rows as raw little-endian f64.

use crate::envelope::PotentialField;
use crate::geometry::SphereGrid;
use crate::hym::{read_header_line, GridDesc};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const FORMAT: &str = "hymlab-potential-v1";
const PAYLOAD: &str = "f64-le";

#[derive(Serialize, Deserialize)]
struct SphereDesc {
    n_t: usize,
    n_theta: usize,
    t_max: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    grid: GridDesc,
    sphere: SphereDesc,
    n_nodes: usize,
    n_x: usize,
    n_boundary: usize,
    payload: String,
}

pub fn save_potential_field(field: &PotentialField, path: &Path) -> Result<()> {
    field.check_shapes()?;
    let header = Header {
        format: FORMAT.into(),
        grid: GridDesc::of(&field.dgrid),
        sphere: SphereDesc {
            n_t: field.sgrid.n_t,
            n_theta: field.sgrid.n_theta,
            t_max: field.sgrid.t_max,
        },
        n_nodes: field.dgrid.n_nodes(),
        n_x: field.sgrid.n_nodes(),
        n_boundary: field.dgrid.boundary_nodes().len(),
        payload: PAYLOAD.into(),
    };
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in field.values.iter().chain(&field.boundary_values) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_potential_field(path: &Path) -> Result<PotentialField> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let header_line = read_header_line(&mut input)?;
    let header: Header = serde_json::from_slice(&header_line)?;
    if header.format != FORMAT {
        return Err(Error::Mismatch(format!(
            "unknown potential format {:?}",
            header.format
        )));
    }
    if header.payload != PAYLOAD {
        return Err(Error::Mismatch(format!(
            "unknown payload layout {:?}",
            header.payload
        )));
    }
    let dgrid = header.grid.build()?;
    let sgrid = SphereGrid::windowed(header.sphere.n_t, header.sphere.n_theta, header.sphere.t_max)?;
    if dgrid.n_nodes() != header.n_nodes
        || sgrid.n_nodes() != header.n_x
        || dgrid.boundary_nodes().len() != header.n_boundary
    {
        return Err(Error::Mismatch(
            "grids rebuild to different sizes than the header claims".into(),
        ));
    }
    let total = (header.n_nodes + header.n_boundary) * header.n_x;
    let mut payload = vec![0u8; total * 8];
    input.read_exact(&mut payload).map_err(|_| {
        Error::Mismatch("potential payload shorter than the header claims".into())
    })?;
    let mut byte = [0u8; 1];
    if input.read(&mut byte)? != 0 {
        return Err(Error::Mismatch(
            "potential file has trailing bytes after the payload".into(),
        ));
    }
    let decode = |range: std::ops::Range<usize>| -> Vec<f64> {
        range
            .map(|i| f64::from_le_bytes(payload[i * 8..i * 8 + 8].try_into().unwrap()))
            .collect()
    };
    let split = header.n_nodes * header.n_x;
    let field = PotentialField {
        dgrid,
        sgrid,
        values: decode(0..split),
        boundary_values: decode(split..total),
    };
    field.check_shapes()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainGrid;

    fn sample_field() -> PotentialField {
        let dg = DomainGrid::bi_annulus(0.5, 7, 4).unwrap();
        let sg = SphereGrid::windowed(9, 2, 4.0).unwrap();
        PotentialField::from_fn(dg, sg, |p, xi| {
            ((p * 31 + xi * 7) as f64 * 0.7311).sin() * 0.3 - 0.1
        })
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let field = sample_field();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.pot");
        save_potential_field(&field, &path).unwrap();
        let back = load_potential_field(&path).unwrap();
        assert_eq!(back.dgrid.n_nodes(), field.dgrid.n_nodes());
        assert_eq!(back.sgrid.n_nodes(), field.sgrid.n_nodes());
        assert_eq!(back.values.len(), field.values.len());
        for (a, b) in field
            .values
            .iter()
            .chain(&field.boundary_values)
            .zip(back.values.iter().chain(&back.boundary_values))
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let field = sample_field();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.pot");
        save_potential_field(&field, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(
            load_potential_field(&path),
            Err(Error::Mismatch(_))
        ));

        std::fs::write(&path, [bytes.clone(), vec![9u8; 3]].concat()).unwrap();
        assert!(matches!(
            load_potential_field(&path),
            Err(Error::Mismatch(_))
        ));

        std::fs::write(&path, b"{}\n").unwrap();
        assert!(load_potential_field(&path).is_err());
    }
}
