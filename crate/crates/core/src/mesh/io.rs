//! Plain-text mesh format:
//!
//! ```text
//! mesh v1 <nv> <nt> <nb>
//! v <x> <y>
//! t <i> <j> <k>
//! b <i> <j> <tag>
//! ```
//!
//! Floats use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryEdge, EdgeTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::Point;

impl Mesh {
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * (self.vertices.len() + self.triangles.len()));
        let _ = writeln!(
            s,
            "mesh v1 {} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.vertices {
            let _ = writeln!(s, "v {} {}", p.x, p.y);
        }
        for [i, j, k] in &self.triangles {
            let _ = writeln!(s, "t {i} {j} {k}");
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "b {} {} {}", e.v[0], e.v[1], e.tag);
        }
        s
    }

    /// Parses the text format. Grading and provenance are not stored, so the
    /// result cannot be refined.
    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let (hl, header) = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 5 || head[0] != "mesh" || head[1] != "v1" {
            return Err(err(hl, "expected header 'mesh v1 <nv> <nt> <nb>'"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| err(hl, "bad count in header"));
        let (nv, nt, nb) = (count(head[2])?, count(head[3])?, count(head[4])?);

        let mut m = Mesh {
            vertices: Vec::with_capacity(nv),
            triangles: Vec::with_capacity(nt),
            boundary_edges: Vec::with_capacity(nb),
            grading: None,
            provenance: None,
        };
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let float = |s: &str| s.parse::<f64>().map_err(|_| err(ln, "bad number"));
            let index = |s: &str| s.parse::<usize>().map_err(|_| err(ln, "bad index"));
            match (f[0], f.len()) {
                ("v", 3) => m.vertices.push(Point::new(float(f[1])?, float(f[2])?)),
                ("t", 4) => m.triangles.push([index(f[1])?, index(f[2])?, index(f[3])?]),
                ("b", 4) => m.boundary_edges.push(BoundaryEdge {
                    v: [index(f[1])?, index(f[2])?],
                    tag: f[3].parse::<EdgeTag>().map_err(|_| err(ln, "bad boundary tag"))?,
                }),
                _ => return Err(err(ln, "unrecognized record")),
            }
        }
        if m.vertices.len() != nv || m.triangles.len() != nt || m.boundary_edges.len() != nb {
            return Err(Error::Parse(format!(
                "record counts ({}, {}, {}) do not match header ({nv}, {nt}, {nb})",
                m.vertices.len(),
                m.triangles.len(),
                m.boundary_edges.len()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Mesh> {
        Mesh::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_domain, DomainSpec};
    use crate::mesh::{grade_mesh, refine, Grading};

    #[test]
    fn text_round_trip_is_bit_exact() {
        let d = make_domain(&DomainSpec::sector(1.5 * std::f64::consts::PI)).unwrap();
        let m = grade_mesh(&d, &Grading::new(0.3, 0.5)).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(back.to_text(), m.to_text());
        assert!(matches!(refine(&back), Err(Error::ProvenanceMissing)));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(Mesh::from_text("").is_err());
        assert!(Mesh::from_text("mesh v2 0 0 0").is_err());
        assert!(Mesh::from_text("mesh v1 1 0 0\nv 1.0").is_err());
        assert!(Mesh::from_text("mesh v1 2 0 0\nv 1 2").is_err());
        assert!(Mesh::from_text("mesh v1 0 0 1\nb 0 1 Q3").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.mesh");
        let m = Mesh::unit_square(3).unwrap();
        m.save(&path).unwrap();
        let back = Mesh::load(&path).unwrap();
        assert_eq!(back.vertices, m.vertices);
    }
}
