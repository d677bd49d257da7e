use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_grid, decode_tuple, Cube, GridFunction};
use crate::error::{KsError, Result};

/// One row per node tuple: `x1,y1,z1,..,value`, 17 significant digits.
pub fn write_csv<W: Write>(f: &GridFunction, mut w: W) -> Result<()> {
    let mut header = Vec::with_capacity(3 * f.order + 1);
    for k in 1..=f.order {
        header.push(format!("x{k},y{k},z{k}"));
    }
    header.push("value".into());
    writeln!(w, "{}", header.join(","))?;
    let mut t = vec![0usize; f.order];
    let mut line = String::new();
    for (idx, v) in f.values.iter().enumerate() {
        decode_tuple(idx, f.grid.len(), &mut t);
        line.clear();
        for &i in &t {
            let p = f.grid.node(i);
            line.push_str(&format!("{:.16e},{:.16e},{:.16e},", p[0], p[1], p[2]));
        }
        line.push_str(&format!("{v:.16e}"));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryHeader {
    format: String,
    order: usize,
    side: f64,
    nodes_per_axis: usize,
    count: usize,
}

const FORMAT_TAG: &str = "ksfluid-gridfunction-f64le";

/// A one-line JSON header followed by the values as little-endian `f64`.
pub fn write_binary<W: Write>(f: &GridFunction, mut w: W) -> Result<()> {
    let header = BinaryHeader {
        format: FORMAT_TAG.into(),
        order: f.order,
        side: f.grid.cube.side,
        nodes_per_axis: f.grid.n,
        count: f.values.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: BufRead>(mut r: R) -> Result<GridFunction> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: BinaryHeader = serde_json::from_str(line.trim_end())?;
    if header.format != FORMAT_TAG {
        return Err(KsError::Structural(format!(
            "unknown payload format {:?}",
            header.format
        )));
    }
    let grid = Arc::new(build_grid(Cube::new(header.side)?, header.nodes_per_axis)?);
    let mut bytes = vec![0u8; 8 * header.count];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridFunction::new(header.order, grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip_is_exact() {
        let g = Arc::new(build_grid(Cube::new(2.0).unwrap(), 3).unwrap());
        let f = GridFunction::from_fn(2, g, |t| (t[0] as f64 + 0.1).ln() / (1.0 + t[1] as f64)).unwrap();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        let back = read_binary(&buf[..]).unwrap();
        assert_eq!(back.order, 2);
        assert_eq!(back.values.len(), f.values.len());
        for (a, b) in back.values.iter().zip(&f.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_has_full_precision() {
        let g = Arc::new(build_grid(Cube::new(2.0).unwrap(), 2).unwrap());
        let f = GridFunction::from_fn(1, g, |t| 1.0 / (3.0 + t[0] as f64)).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,y1,z1,value");
        for (line, v) in lines.zip(&f.values) {
            let parsed: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let g = Arc::new(build_grid(Cube::new(2.0).unwrap(), 2).unwrap());
        let f = GridFunction::constant(1, g, 0.5).unwrap();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_binary(&buf[..]).is_err());
    }
}
