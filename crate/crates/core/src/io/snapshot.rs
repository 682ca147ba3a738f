//! Field snapshots: the magic line `PFLOW1`, a text header, then raw
//! little-endian `f64` payloads in header order.
//!
//! ```text
//! PFLOW1
//! time <t> <step>
//! grid <nx> <ny> <lx> <ly> <bx> <by>
//! field <name> <len>
//! ...
//! end
//! <payload>
//! ```
//! The chain-grid edges are stored as the field `r_edges`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Boundary, SpatialGrid};

pub const MAGIC: &str = "PFLOW1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub grid: SpatialGrid,
    pub r_edges: Vec<f64>,
    pub fields: Vec<(String, Vec<f64>)>,
}

fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::SlipWall => "slip-wall",
    }
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::new();
        let mut header = format!(
            "{MAGIC}\ntime {:?} {}\ngrid {} {} {:?} {:?} {} {}\n",
            self.t,
            self.step,
            g.nx,
            g.ny,
            g.lx,
            g.ly,
            boundary_name(g.bx),
            boundary_name(g.by)
        );
        header.push_str(&format!("field r_edges {}\n", self.r_edges.len()));
        for (name, v) in &self.fields {
            header.push_str(&format!("field {name} {}\n", v.len()));
        }
        header.push_str("end\n");
        out.extend_from_slice(header.as_bytes());
        for v in std::iter::once(&self.r_edges).chain(self.fields.iter().map(|(_, v)| v)) {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |d: String| Error::Snapshot {
            path: path.to_path_buf(),
            detail: d,
        };
        let mut pos = 0;
        let mut next_line = || -> Result<String> {
            let rest = &bytes[pos..];
            let n = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header".into()))?;
            let line = std::str::from_utf8(&rest[..n]).map_err(|_| bad("header is not UTF-8".into()))?;
            pos += n + 1;
            Ok(line.to_string())
        };
        if next_line()? != MAGIC {
            return Err(bad(format!("missing magic {MAGIC}")));
        }
        let num = |s: Option<&str>, what: &str| -> Result<f64> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("bad {what}")))
        };
        let int = |s: Option<&str>, what: &str| -> Result<usize> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("bad {what}")))
        };
        let bnd = |s: Option<&str>| -> Result<Boundary> {
            match s {
                Some("periodic") => Ok(Boundary::Periodic),
                Some("slip-wall") => Ok(Boundary::SlipWall),
                other => Err(bad(format!("bad boundary {other:?}"))),
            }
        };
        let time = next_line()?;
        let mut it = time.split(' ');
        if it.next() != Some("time") {
            return Err(bad("expected time line".into()));
        }
        let t = num(it.next(), "time")?;
        let step = int(it.next(), "step")? as u64;
        let gl = next_line()?;
        let mut it = gl.split(' ');
        if it.next() != Some("grid") {
            return Err(bad("expected grid line".into()));
        }
        let (nx, ny) = (int(it.next(), "nx")?, int(it.next(), "ny")?);
        let (lx, ly) = (num(it.next(), "lx")?, num(it.next(), "ly")?);
        let (bx, by) = (bnd(it.next())?, bnd(it.next())?);
        let grid = SpatialGrid::new(lx, ly, nx, ny, bx, by).map_err(|e| bad(e.to_string()))?;
        let mut decl = Vec::new();
        loop {
            let l = next_line()?;
            if l == "end" {
                break;
            }
            let mut it = l.split(' ');
            if it.next() != Some("field") {
                return Err(bad(format!("unexpected header line {l:?}")));
            }
            let name = it.next().ok_or_else(|| bad("field without name".into()))?.to_string();
            decl.push((name, int(it.next(), "field length")?));
        }
        let payload = &bytes[pos..];
        let expected: usize = decl.iter().map(|(_, n)| n * 8).sum();
        if payload.len() != expected {
            return Err(bad(format!(
                "payload has {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        let mut off = 0;
        let mut fields = Vec::new();
        for (name, n) in decl {
            let v: Vec<f64> = payload[off..off + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            off += 8 * n;
            fields.push((name, v));
        }
        if fields.first().map(|(n, _)| n.as_str()) != Some("r_edges") {
            return Err(bad("first field must be r_edges".into()));
        }
        let r_edges = fields.remove(0).1;
        Ok(Snapshot {
            t,
            step,
            grid,
            r_edges,
            fields,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            t: 0.1 + 0.2,
            step: 3,
            grid: SpatialGrid::new(1.5, 2.0, 3, 4, Boundary::Periodic, Boundary::SlipWall).unwrap(),
            r_edges: vec![1.0, 2.0, 3.5],
            fields: vec![
                ("phi".into(), vec![1.0, -2.5, f64::MIN_POSITIVE]),
                ("psi".into(), vec![]),
            ],
        }
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let p = Path::new("mem");
        assert_eq!(Snapshot::from_bytes(&s.to_bytes(), p).unwrap(), s);
        assert_eq!(s.field("phi").unwrap()[1], -2.5);
    }

    #[test]
    fn rejects_truncated_payload() {
        let b = sample().to_bytes();
        for cut in [1, 8, 17] {
            let err = Snapshot::from_bytes(&b[..b.len() - cut], Path::new("mem")).unwrap_err();
            assert!(matches!(err, Error::Snapshot { .. }));
        }
        assert!(Snapshot::from_bytes(b"PFLOW1\ntime 0", Path::new("mem")).is_err());
        assert!(Snapshot::from_bytes(b"PFLOW2\n", Path::new("mem")).is_err());
    }
}
