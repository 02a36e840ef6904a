//! Text formats for scatterer geometry.
//!
//! OFFI (obstacles):
//! ```text
//! OFFI
//! V F
//! x y z          (V lines)
//! k i1 ... ik re(alpha0) im(alpha0)    (F lines)
//! ```
//!
//! GRID (gratings):
//! ```text
//! GRATI
//! F
//! k re(alpha0) im(alpha0)    then k lines  x y z     (per facet)
//! ```
//!
//! Floats are written in shortest round-trip form, so decimal inputs with at
//! most 17 significant digits survive a read/write cycle bit-exactly.

use super::{Face, GeometryError, GratingFacet, GratingProfile, ImpedanceSpec, Polyhedron, Vec3};
use num_complex::Complex64;
use std::fmt::Write as _;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Lines { inner: s.lines().enumerate() }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next(&mut self) -> Result<(usize, &'a str), GeometryError> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(GeometryError::Parse { line: 0, msg: "unexpected end of file".into() })
    }
}

fn parse_fields<T: std::str::FromStr>(
    line_no: usize,
    line: &str,
    expect: usize,
    what: &str,
) -> Result<Vec<T>, GeometryError> {
    let vals: Result<Vec<T>, _> = line.split_whitespace().map(str::parse).collect();
    match vals {
        Ok(v) if v.len() == expect => Ok(v),
        Ok(v) => Err(GeometryError::Parse {
            line: line_no,
            msg: format!("expected {expect} {what} fields, found {}", v.len()),
        }),
        Err(_) => Err(GeometryError::Parse {
            line: line_no,
            msg: format!("malformed {what} line: {line:?}"),
        }),
    }
}

pub fn read_offi(text: &str) -> Result<Polyhedron, GeometryError> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.next()?;
    if header != "OFFI" {
        return Err(GeometryError::Parse { line: n, msg: format!("expected OFFI header, found {header:?}") });
    }
    let (n, counts) = lines.next()?;
    let counts: Vec<usize> = parse_fields(n, counts, 2, "count")?;
    let (nv, nf) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, line) = lines.next()?;
        let c: Vec<f64> = parse_fields(n, line, 3, "vertex")?;
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, line) = lines.next()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let k: usize = fields
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GeometryError::Parse { line: n, msg: "missing face vertex count".into() })?;
        if fields.len() != k + 3 {
            return Err(GeometryError::Parse {
                line: n,
                msg: format!("face with {k} vertices needs {} fields, found {}", k + 3, fields.len()),
            });
        }
        let mut idx = Vec::with_capacity(k);
        for s in &fields[1..=k] {
            let i: usize = s.parse().map_err(|_| GeometryError::Parse {
                line: n,
                msg: format!("bad vertex index {s:?}"),
            })?;
            if i >= nv {
                return Err(GeometryError::Parse {
                    line: n,
                    msg: format!("vertex index {i} out of range (V = {nv})"),
                });
            }
            idx.push(i);
        }
        let re: f64 = fields[k + 1].parse().map_err(|_| GeometryError::Parse {
            line: n,
            msg: format!("bad impedance field {:?}", fields[k + 1]),
        })?;
        let im: f64 = fields[k + 2].parse().map_err(|_| GeometryError::Parse {
            line: n,
            msg: format!("bad impedance field {:?}", fields[k + 2]),
        })?;
        faces.push(Face {
            vertex_indices: idx,
            impedance: ImpedanceSpec::constant(Complex64::new(re, im)),
        });
    }
    let p = Polyhedron { vertices, faces };
    p.validate()?;
    Ok(p)
}

pub fn write_offi(p: &Polyhedron) -> String {
    let mut out = String::from("OFFI\n");
    let _ = writeln!(out, "{} {}", p.vertices.len(), p.faces.len());
    for v in &p.vertices {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in &p.faces {
        let _ = write!(out, "{}", f.vertex_indices.len());
        for i in &f.vertex_indices {
            let _ = write!(out, " {i}");
        }
        let _ = writeln!(out, " {} {}", f.impedance.alpha0.re, f.impedance.alpha0.im);
    }
    out
}

pub fn read_grid(text: &str) -> Result<GratingProfile, GeometryError> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.next()?;
    if header != "GRATI" {
        return Err(GeometryError::Parse { line: n, msg: format!("expected GRATI header, found {header:?}") });
    }
    let (n, count) = lines.next()?;
    let nf: usize = parse_fields::<usize>(n, count, 1, "facet count")?[0];
    let mut facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, line) = lines.next()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(GeometryError::Parse {
                line: n,
                msg: format!("expected `k re im`, found {line:?}"),
            });
        }
        let k: usize = fields[0].parse().map_err(|_| GeometryError::Parse {
            line: n,
            msg: format!("bad facet vertex count {:?}", fields[0]),
        })?;
        let re: f64 = fields[1].parse().map_err(|_| GeometryError::Parse {
            line: n,
            msg: format!("bad impedance field {:?}", fields[1]),
        })?;
        let im: f64 = fields[2].parse().map_err(|_| GeometryError::Parse {
            line: n,
            msg: format!("bad impedance field {:?}", fields[2]),
        })?;
        let mut vertices = Vec::with_capacity(k);
        for _ in 0..k {
            let (n, line) = lines.next()?;
            let c: Vec<f64> = parse_fields(n, line, 3, "vertex")?;
            vertices.push(Vec3::new(c[0], c[1], c[2]));
        }
        facets.push(GratingFacet {
            vertices,
            impedance: ImpedanceSpec::constant(Complex64::new(re, im)),
        });
    }
    let g = GratingProfile { facets };
    g.validate()?;
    Ok(g)
}

pub fn write_grid(g: &GratingProfile) -> String {
    let mut out = String::from("GRATI\n");
    let _ = writeln!(out, "{}", g.facets.len());
    for f in &g.facets {
        let _ = writeln!(
            out,
            "{} {} {}",
            f.vertices.len(),
            f.impedance.alpha0.re,
            f.impedance.alpha0.im
        );
        for v in &f.vertices {
            let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
        }
    }
    out
}
