//! `WFN1` wavefunction files.
//!
//! Layout: the magic bytes `WFN1`, a little-endian `u32` byte length, a
//! UTF-8 JSON header `{"dims":[n1,n2,n3],"cell":[a,b,c],"nv":..,"nc":..,"nr":..}`,
//! then little-endian `f64` values: `psi` column-major
//! (`N_r·(N_v+N_c)` values), the energies, the `V_xc` values.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::{ElectronicStructure, Grid};
use crate::error::{Error, Result};

pub const WFN_MAGIC: [u8; 4] = *b"WFN1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dims: [usize; 3],
    cell: [f64; 3],
    nv: usize,
    nc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nr: Option<usize>,
}

pub fn write_system<W: Write>(mut w: W, es: &ElectronicStructure) -> Result<()> {
    let header = Header {
        dims: es.grid.dims(),
        cell: es.grid.cell(),
        nv: es.nv,
        nc: es.nc,
        nr: Some(es.n_r()),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(&WFN_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut payload = Vec::with_capacity(8 * (es.psi.len() + 2 * es.n_bands()));
    for col in es.psi.columns() {
        for v in col {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in es.energies.iter().chain(es.vxc.iter()) {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_system<R: Read>(mut r: R) -> Result<ElectronicStructure> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || bytes[..4] != WFN_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes.len() < 8 {
        return Err(Error::Format("truncated header".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])?;
    let grid = Grid::new(header.dims, header.cell)?;
    let n_r = grid.n_r();
    if let Some(nr) = header.nr {
        if nr != n_r {
            return Err(Error::DimensionMismatch {
                context: "WFN1 header nr vs product of dims",
                expected: n_r,
                found: nr,
            });
        }
    }
    let n = header.nv + header.nc;
    let expected = 8 * (n_r * n + 2 * n);
    let payload = &body[hlen..];
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "truncated payload: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut psi = Array2::zeros((n_r, n));
    for k in 0..n {
        for r in 0..n_r {
            psi[[r, k]] = values.next().expect("length checked");
        }
    }
    let energies: Array1<f64> = values.by_ref().take(n).collect();
    let vxc: Array1<f64> = values.take(n).collect();
    ElectronicStructure::new(grid, psi, energies, vxc, header.nv, header.nc)
}

pub fn save_system(path: impl AsRef<Path>, es: &ElectronicStructure) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_system(&mut w, es)?;
    w.flush()?;
    Ok(())
}

pub fn load_system(path: impl AsRef<Path>) -> Result<ElectronicStructure> {
    let f = std::fs::File::open(path)?;
    read_system(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_synthetic_system;

    fn system() -> ElectronicStructure {
        let g = Grid::new([4, 4, 2], [5.0, 5.0, 3.0]).unwrap();
        let mut es = build_synthetic_system(4, &g, 3, 2, 0.4, 1.0).unwrap();
        es.vxc = Array1::from(vec![0.1, -0.2, 0.3, 1e-300, -0.0]);
        es
    }

    fn encoded(es: &ElectronicStructure) -> Vec<u8> {
        let mut buf = Vec::new();
        write_system(&mut buf, es).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let es = system();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.wfn");
        save_system(&path, &es).unwrap();
        let back = load_system(&path).unwrap();
        let bits = |x: &ElectronicStructure| -> Vec<u64> {
            x.psi
                .iter()
                .chain(x.energies.iter())
                .chain(x.vxc.iter())
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&es), bits(&back));
        assert_eq!(es.grid, back.grid);
    }

    #[test]
    fn bad_magic() {
        let mut buf = encoded(&system());
        buf[0] = b'X';
        let err = read_system(&buf[..]).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_payload() {
        let buf = encoded(&system());
        let err = read_system(&buf[..buf.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn header_nr_inconsistent() {
        let es = system();
        let header = br#"{"dims":[4,4,2],"cell":[5.0,5.0,3.0],"nv":3,"nc":2,"nr":31}"#;
        let good = encoded(&es);
        let old_len = u32::from_le_bytes(good[4..8].try_into().unwrap()) as usize;
        let mut buf = Vec::new();
        buf.extend_from_slice(&WFN_MAGIC);
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(header);
        buf.extend_from_slice(&good[8 + old_len..]);
        assert!(matches!(
            read_system(&buf[..]),
            Err(Error::DimensionMismatch { expected: 32, found: 31, .. })
        ));
    }
}
